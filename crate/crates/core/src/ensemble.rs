//! Ensembles of independent molecules with Gaussian-distributed `(Δ, ε)`,
//! their averaged correlation function, and the Lorentzian-mixture
//! susceptibility `χ_0(ω) = Σ_j C̃0_j · 2ν_j / (ν_j² + ω²)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigencorr::{self, Beta, CorrelationKernel, CorrelationSeries, OffsetReport};
use crate::env_model::{build_molecule, MoleculeParams};
use crate::error::{invalid, require_finite, Error, Result};
use crate::grid::TimeGrid;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub m: usize,
    pub mean_delta: f64,
    pub mean_epsilon: f64,
    pub sigma: f64,
    pub r: f64,
    pub omega_c: f64,
    pub beta: f64,
    pub n_modes: usize,
    pub n_max: Option<usize>,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("m", "need at least one molecule"));
        }
        require_finite("sigma", self.sigma)?;
        if self.sigma < 0.0 {
            return Err(invalid("sigma", "must be >= 0"));
        }
        require_finite("mean_delta", self.mean_delta)?;
        require_finite("mean_epsilon", self.mean_epsilon)?;
        if self.sigma > 0.0 && (self.mean_delta <= -8.0 * self.sigma || self.mean_epsilon <= -8.0 * self.sigma) {
            return Err(invalid("sigma", "means too far below zero for positive resampling"));
        }
        if self.sigma == 0.0 && (self.mean_delta <= 0.0 || self.mean_epsilon <= 0.0) {
            return Err(invalid("mean_delta", "means must be positive when sigma = 0"));
        }
        self.template(1.0, 1.0).validate()
    }

    fn template(&self, delta: f64, epsilon: f64) -> MoleculeParams {
        MoleculeParams {
            epsilon,
            delta,
            r: self.r,
            omega_c: self.omega_c,
            n_modes: self.n_modes,
            n_max: self.n_max,
            beta: self.beta,
        }
    }
}

fn positive_draw(rng: &mut ChaCha8Rng, mean: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return mean;
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let x = mean + sigma * z;
        if x > 0.0 {
            return x;
        }
    }
}

/// Molecule `j` draws from stream `j` of the ChaCha generator seeded with `seed`.
pub fn sample_molecules(spec: &EnsembleSpec) -> Result<Vec<MoleculeParams>> {
    spec.validate()?;
    Ok((0..spec.m)
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(j as u64);
            let delta = positive_draw(&mut rng, spec.mean_delta, spec.sigma);
            let epsilon = positive_draw(&mut rng, spec.mean_epsilon, spec.sigma);
            spec.template(delta, epsilon)
        })
        .collect())
}

/// Diagonalized molecule ready for repeated correlation evaluation.
#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub params: MoleculeParams,
    pub offset: OffsetReport,
    /// Smallest and largest Bohr frequency with weight in `C(t)`.
    pub frequency_span: Option<(f64, f64)>,
    kernel: CorrelationKernel,
}

impl EnsembleMember {
    pub fn series(&self, grid: &TimeGrid) -> CorrelationSeries {
        self.kernel.series(grid)
    }
}

/// Builds and diagonalizes every molecule in parallel; failures carry the molecule index.
pub fn prepare_ensemble(molecules: &[MoleculeParams], tail_tol: f64, dim_cap: usize) -> Result<Vec<EnsembleMember>> {
    if molecules.is_empty() {
        return Err(invalid("molecules", "empty ensemble"));
    }
    molecules
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            prepare_one(p, tail_tol, dim_cap).map_err(|e| Error::Molecule {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

fn prepare_one(p: &MoleculeParams, tail_tol: f64, dim_cap: usize) -> Result<EnsembleMember> {
    let (h, b) = build_molecule(p, tail_tol, dim_cap)?;
    let eig = eigencorr::diagonalize(&h, &b)?;
    let th = eigencorr::thermal_weights(&eig, Beta::from_f64(p.beta)?)?;
    let offset = eigencorr::offset(&eig, &th, None)?;
    let kernel = CorrelationKernel::new(&eig, &th)?;
    Ok(EnsembleMember {
        params: *p,
        offset,
        frequency_span: kernel.frequency_span(eig.default_tol_deg()),
        kernel,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCorrelation {
    /// `(1/M) Σ_j C^{(j)}(t)`; `offset_estimate` holds the mean offset.
    pub series: CorrelationSeries,
    pub offsets: Vec<f64>,
    pub mean_offset: f64,
}

/// Averaged correlation; the reduction runs in molecule order.
pub fn ensemble_correlation(members: &[EnsembleMember], grid: &TimeGrid) -> Result<EnsembleCorrelation> {
    if members.is_empty() {
        return Err(invalid("members", "empty ensemble"));
    }
    let per: Vec<CorrelationSeries> = members.par_iter().map(|m| m.series(grid)).collect();
    let m = members.len() as f64;
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len];
    let mut mean_b = 0.0;
    for s in &per {
        for (acc, v) in values.iter_mut().zip(&s.values) {
            *acc += v;
        }
        mean_b += s.mean_b;
    }
    for v in &mut values {
        *v /= m;
    }
    let offsets: Vec<f64> = members.iter().map(|m| m.offset.c0).collect();
    let mean_offset = offsets.iter().sum::<f64>() / m;
    Ok(EnsembleCorrelation {
        series: CorrelationSeries {
            grid: *grid,
            values,
            mean_b: mean_b / m,
            offset_estimate: Some(mean_offset),
        },
        offsets,
        mean_offset,
    })
}

/// Grid resolving every member: spans `2 · span_factor / min ω` and samples a
/// quarter period of the fastest frequency.
pub fn ensemble_averaging_grid(members: &[EnsembleMember], span_factor: f64, max_points: usize) -> Result<TimeGrid> {
    let (lo, hi) = members
        .iter()
        .filter_map(|m| m.frequency_span)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)));
    if hi == 0.0 {
        return TimeGrid::new(1.0, 16);
    }
    let t_max = 2.0 * span_factor / lo;
    let dt = std::f64::consts::FRAC_PI_2 / hi;
    let mut n = (t_max / dt).ceil() as usize + 1;
    if n > max_points {
        log::warn!("ensemble averaging grid truncated from {n} to {max_points} points");
        n = max_points;
    }
    TimeGrid::new(t_max, n.max(16))
}

/// One relaxing fluctuator with weight `C̃0` and rate `ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorentzian {
    pub weight: f64,
    pub nu: f64,
}

/// Least-squares line through `(ln ω, ln χ)` inside a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the log-log line.
    pub residual: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    pub band: (f64, f64),
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Susceptibility {
    pub omega: Vec<f64>,
    pub chi: Vec<f64>,
    pub components: Vec<Lorentzian>,
    /// Summed weight of `ν = 0` components (a zero-frequency delta, not in `chi`).
    pub static_weight: f64,
    pub slope: Option<SlopeFit>,
}

/// `Σ C̃0 · 2ν / (ν² + ω²)` over components with `ν > 0`.
pub fn lorentzian_mixture(components: &[Lorentzian], omega: f64) -> f64 {
    components
        .iter()
        .filter(|c| c.nu > 0.0)
        .map(|c| c.weight * 2.0 * c.nu / (c.nu * c.nu + omega * omega))
        .sum()
}

pub fn susceptibility(components: &[Lorentzian], omega: &[f64]) -> Result<Susceptibility> {
    for c in components {
        require_finite("nu", c.nu)?;
        require_finite("weight", c.weight)?;
        if c.nu < 0.0 {
            return Err(invalid("nu", format!("negative relaxation rate {}", c.nu)));
        }
    }
    if omega.iter().any(|w| !w.is_finite()) {
        return Err(invalid("omega", "grid must be finite"));
    }
    let chi = omega.par_iter().map(|&w| lorentzian_mixture(components, w)).collect();
    Ok(Susceptibility {
        omega: omega.to_vec(),
        chi,
        components: components.to_vec(),
        static_weight: components.iter().filter(|c| c.nu == 0.0).fold(0.0, |s, c| s + c.weight),
        slope: None,
    })
}

impl Susceptibility {
    /// Fits and stores the log-log slope on `band`.
    pub fn with_slope(mut self, band: (f64, f64)) -> Result<Self> {
        self.slope = Some(loglog_slope(&self.omega, &self.chi, band)?);
        Ok(self)
    }
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(invalid("omega", "log grid needs 0 < lo < hi and n >= 2"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

pub fn loglog_slope(omega: &[f64], chi: &[f64], band: (f64, f64)) -> Result<SlopeFit> {
    if omega.len() != chi.len() {
        return Err(Error::DimensionMismatch {
            expected: omega.len(),
            found: chi.len(),
        });
    }
    let pts: Vec<(f64, f64)> = omega
        .iter()
        .zip(chi)
        .filter(|(w, c)| **w >= band.0 && **w <= band.1 && **w > 0.0 && **c > 0.0)
        .map(|(w, c)| (w.ln(), c.ln()))
        .collect();
    let n = pts.len();
    if n < 8 {
        return Err(Error::EmptyBand(format!(
            "{n} usable points in [{}, {}], need at least 8",
            band.0, band.1
        )));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (ss / nf).sqrt(),
        slope_stderr: (ss / (nf - 2.0) / sxx).sqrt(),
        band,
        points: n,
    })
}

/// `n` rates drawn from `Q(ν) ∝ 1/ν` on `[nu_min, nu_max]`, all with weight `weight`.
pub fn one_over_f_components(n: usize, nu_min: f64, nu_max: f64, weight: f64, seed: u64) -> Result<Vec<Lorentzian>> {
    if !(nu_min > 0.0 && nu_max > nu_min) {
        return Err(invalid("nu_min", "need 0 < nu_min < nu_max"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (nu_min.ln(), nu_max.ln());
    Ok((0..n)
        .map(|_| Lorentzian {
            weight,
            nu: rng.random_range(a..b).exp(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigencorr::{correlation_function, long_time_average};
    use crate::env_model::{DEFAULT_DIM_CAP, DEFAULT_TAIL_TOL};
    use proptest::prelude::*;

    fn spec(m: usize, sigma: f64) -> EnsembleSpec {
        EnsembleSpec {
            m,
            mean_delta: 1.0,
            mean_epsilon: 1.0,
            sigma,
            r: 0.25,
            omega_c: 1.0,
            beta: 1.0,
            n_modes: 1,
            n_max: None,
            seed: 11,
        }
    }

    fn prepared(s: &EnsembleSpec) -> Vec<EnsembleMember> {
        prepare_ensemble(&sample_molecules(s).unwrap(), DEFAULT_TAIL_TOL, DEFAULT_DIM_CAP).unwrap()
    }

    #[test]
    fn zero_width_reproduces_means() {
        let mols = sample_molecules(&spec(5, 0.0)).unwrap();
        assert!(mols.iter().all(|m| m.delta == 1.0 && m.epsilon == 1.0));
    }

    #[test]
    fn sampling_is_deterministic_and_positive() {
        let s = EnsembleSpec { mean_delta: 0.2, ..spec(300, 0.3) };
        let a = sample_molecules(&s).unwrap();
        assert_eq!(a, sample_molecules(&s).unwrap());
        assert!(a.iter().all(|m| m.delta > 0.0 && m.epsilon > 0.0));
        // Prefix stability: molecule j does not depend on M.
        let b = sample_molecules(&EnsembleSpec { m: 10, ..s }).unwrap();
        assert_eq!(&a[..10], &b[..]);
    }

    #[test]
    fn sample_mean_within_standard_error() {
        let mols = sample_molecules(&spec(400, 0.3)).unwrap();
        let mean = mols.iter().map(|m| m.delta).sum::<f64>() / 400.0;
        assert!((mean - 1.0).abs() < 0.045, "{mean}");
    }

    #[test]
    fn single_member_matches_molecule() {
        let s = spec(1, 0.3);
        let members = prepared(&s);
        let grid = TimeGrid::new(30.0, 301).unwrap();
        let agg = ensemble_correlation(&members, &grid).unwrap();
        let (h, b) = build_molecule(&members[0].params, DEFAULT_TAIL_TOL, DEFAULT_DIM_CAP).unwrap();
        let eig = eigencorr::diagonalize(&h, &b).unwrap();
        let th = eigencorr::thermal_weights(&eig, Beta::Finite(1.0)).unwrap();
        let single = correlation_function(&eig, &th, &grid).unwrap();
        assert_eq!(agg.series.values, single.values);
    }

    #[test]
    fn concatenation_is_weighted_mean() {
        let a = prepared(&spec(3, 0.3));
        let b = prepared(&EnsembleSpec { seed: 5, ..spec(2, 0.3) });
        let grid = TimeGrid::new(20.0, 101).unwrap();
        let ca = ensemble_correlation(&a, &grid).unwrap().series.values;
        let cb = ensemble_correlation(&b, &grid).unwrap().series.values;
        let all: Vec<EnsembleMember> = a.iter().chain(&b).cloned().collect();
        let cab = ensemble_correlation(&all, &grid).unwrap().series.values;
        for i in 0..grid.len {
            let w = (ca[i] * 3.0 + cb[i] * 2.0) / 5.0;
            assert!((w - cab[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn aggregate_offset_matches_long_time_average() {
        let members = prepared(&spec(8, 0.3));
        let grid = ensemble_averaging_grid(&members, 200.0, 400_000).unwrap();
        let agg = ensemble_correlation(&members, &grid).unwrap();
        let lta = long_time_average(&agg.series, 0.5).unwrap();
        assert!((lta - agg.mean_offset).abs() < 1e-4, "{lta} vs {}", agg.mean_offset);
    }

    #[test]
    fn ensemble_washes_out_recurrences() {
        let grid = TimeGrid::new(200.0, 4001).unwrap();
        let dev = |m: usize| {
            let agg = ensemble_correlation(&prepared(&spec(m, 0.3)), &grid).unwrap();
            let plateau = agg.mean_offset;
            agg.series
                .values
                .iter()
                .zip(grid.times())
                .filter(|(_, t)| *t > 20.0)
                .map(|(v, _)| (v.re - plateau).abs())
                .fold(0.0, f64::max)
        };
        let (one, many) = (dev(1), dev(50));
        assert!(many * 2.0 < one, "M=1: {one}, M=50: {many}");
    }

    #[test]
    fn molecule_errors_carry_index() {
        let mut mols = sample_molecules(&spec(3, 0.0)).unwrap();
        mols[2].r = 2.0;
        match prepare_ensemble(&mols, DEFAULT_TAIL_TOL, DEFAULT_DIM_CAP) {
            Err(Error::Molecule { index, .. }) => assert_eq!(index, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lorentzian_peak() {
        let s = susceptibility(&[Lorentzian { weight: 1.0, nu: 1.0 }], &[0.0]).unwrap();
        assert_eq!(s.chi[0], 2.0);
        assert!(susceptibility(&[Lorentzian { weight: 1.0, nu: -1.0 }], &[0.0]).is_err());
    }

    #[test]
    fn exact_power_laws() {
        let w = log_grid(1e-3, 1e-1, 40).unwrap();
        let c1: Vec<f64> = w.iter().map(|x| 0.7 / x).collect();
        let c2: Vec<f64> = w.iter().map(|x| 0.7 / (x * x)).collect();
        assert!((loglog_slope(&w, &c1, (1e-3, 1e-1)).unwrap().slope + 1.0).abs() < 1e-6);
        assert!((loglog_slope(&w, &c2, (1e-3, 1e-1)).unwrap().slope + 2.0).abs() < 1e-6);
        assert!(matches!(loglog_slope(&w, &c1, (2.0, 3.0)), Err(Error::EmptyBand(_))));
    }

    #[test]
    fn one_over_f_mixture_slope() {
        let comps = one_over_f_components(400, 1e-4, 1.0, 1.0, 3).unwrap();
        let w = log_grid(1e-3, 1e-1, 60).unwrap();
        let s = susceptibility(&comps, &w).unwrap().with_slope((1e-3, 1e-1)).unwrap();
        let slope = s.slope.unwrap().slope;
        assert!((-1.1..=-0.9).contains(&slope), "{slope}");
        let doubled = one_over_f_components(800, 1e-4, 1.0, 1.0, 3).unwrap();
        let s2 = susceptibility(&doubled, &w).unwrap().with_slope((1e-3, 1e-1)).unwrap();
        assert!((s2.slope.unwrap().slope - slope).abs() < 0.05);
    }

    #[test]
    fn static_component_is_reported_separately() {
        let mut comps = one_over_f_components(400, 1e-4, 1.0, 1.0, 3).unwrap();
        let w = log_grid(1e-3, 1e-1, 60).unwrap();
        let without = susceptibility(&comps, &w).unwrap();
        comps.push(Lorentzian { weight: 0.5, nu: 0.0 });
        let with = susceptibility(&comps, &w).unwrap().with_slope((1e-3, 1e-2)).unwrap();
        assert_eq!(with.static_weight, 0.5);
        assert_eq!(with.chi, without.chi);
        let low = with.slope.unwrap().slope;
        assert!((-1.1..=-0.9).contains(&low), "{low}");
    }

    proptest! {
        #[test]
        fn chi_positive_and_even(nus in proptest::collection::vec(1e-4f64..1.0, 1..20), w in -10.0f64..10.0) {
            let comps: Vec<Lorentzian> = nus.iter().map(|&nu| Lorentzian { weight: 0.3, nu }).collect();
            let s = susceptibility(&comps, &[w, -w]).unwrap();
            prop_assert!(s.chi[0] > 0.0);
            prop_assert_eq!(s.chi[0], s.chi[1]);
        }

        #[test]
        fn chi_nonincreasing_in_frequency(nus in proptest::collection::vec(1e-4f64..1.0, 1..20)) {
            let comps: Vec<Lorentzian> = nus.iter().map(|&nu| Lorentzian { weight: 1.0, nu }).collect();
            let w = log_grid(1e-3, 1e-1, 30).unwrap();
            let s = susceptibility(&comps, &w).unwrap();
            prop_assert!(s.chi.windows(2).all(|p| p[1] <= p[0]));
        }
    }
}
