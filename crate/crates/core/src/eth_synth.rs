//! Synthetic environments whose coupling operator follows the ETH ansatz
//! `B^kl = 𝓑(Ē) δ_kl + e^{−S(Ē)/2} f_0(Ē, ω_kl) R_kl`.
//!
//! The spectrum is a sorted set of Gaussian draws of width `sigma_e`, so the
//! level density is `dim · N(E; 0, σ_E)` and the entropy model is
//! `S(E) = ln(dim / (√(2π) σ_E)) − E² / (2σ_E²)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigencorr::{self, Beta, CorrelationSeries, EigenSystem};
use crate::error::{invalid, Result};
use crate::grid::TimeGrid;

/// How the diagonal elements are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalMode {
    /// Smooth value plus suppressed fluctuations.
    Ansatz,
    /// Every diagonal element equals the smooth value exactly.
    Typical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EthSpec {
    pub dim: usize,
    pub sigma_e: f64,
    /// Width of the Gaussian envelope `f_0(ω) = exp(−ω² / (4 w_f²))`.
    pub w_f: f64,
    /// Smooth diagonal value `𝓑`.
    pub b_bar: f64,
    /// Scale of the random part.
    pub noise_amplitude: f64,
    pub complex_noise: bool,
    pub diagonal: DiagonalMode,
    pub seed: u64,
}

impl Default for EthSpec {
    fn default() -> Self {
        Self {
            dim: 200,
            sigma_e: 1.0,
            w_f: 1.0,
            b_bar: 0.0,
            noise_amplitude: 1.0,
            complex_noise: false,
            diagonal: DiagonalMode::Ansatz,
            seed: 1,
        }
    }
}

impl EthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 16 {
            return Err(invalid("dim", format!("must be >= 16, got {}", self.dim)));
        }
        if !(self.w_f > 0.0 && self.w_f.is_finite()) {
            return Err(invalid("w_f", "must be positive"));
        }
        if !(self.sigma_e > 0.0 && self.sigma_e.is_finite()) {
            return Err(invalid("sigma_e", "must be positive"));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(invalid("noise_amplitude", "must be >= 0"));
        }
        if !self.b_bar.is_finite() {
            return Err(invalid("b_bar", "must be finite"));
        }
        Ok(())
    }

    pub fn entropy(&self, e: f64) -> f64 {
        let s0 = (self.dim as f64 / ((2.0 * std::f64::consts::PI).sqrt() * self.sigma_e)).ln();
        s0 - e * e / (2.0 * self.sigma_e * self.sigma_e)
    }

    pub fn envelope(&self, omega: f64) -> f64 {
        (-omega * omega / (4.0 * self.w_f * self.w_f)).exp()
    }
}

/// Sampled spectrum with the ansatz coupling operator, ready for `eigencorr`.
pub fn generate_eth_environment(spec: &EthSpec) -> Result<EigenSystem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let mut energies: Vec<f64> = (0..d)
        .map(|_| spec.sigma_e * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect::<Vec<f64>>();
    energies.sort_by(f64::total_cmp);

    let noise = |rng: &mut ChaCha8Rng| -> Complex64 {
        let x: f64 = StandardNormal.sample(rng);
        if spec.complex_noise {
            let y: f64 = StandardNormal.sample(rng);
            Complex64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
        } else {
            Complex64::new(x, 0.0)
        }
    };

    let mut b = DMatrix::<Complex64>::zeros(d, d);
    for k in 0..d {
        for l in (k + 1)..d {
            let mean = 0.5 * (energies[k] + energies[l]);
            let amp = spec.noise_amplitude
                * (-0.5 * spec.entropy(mean)).exp()
                * spec.envelope(energies[k] - energies[l]);
            let z = amp * noise(&mut rng);
            b[(k, l)] = z;
            b[(l, k)] = z.conj();
        }
    }
    for k in 0..d {
        let r: f64 = StandardNormal.sample(&mut rng);
        let fluct = match spec.diagonal {
            DiagonalMode::Ansatz => {
                spec.noise_amplitude * (-0.5 * spec.entropy(energies[k])).exp() * spec.envelope(0.0) * r
            }
            DiagonalMode::Typical => 0.0,
        };
        b[(k, k)] = Complex64::new(spec.b_bar + fluct, 0.0);
    }
    EigenSystem::from_diagonal(energies, b)
}

/// Outcome of the bound `|C(t)| ≤ C_N (1+t)^{−N}` on a finite grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialDecayReport {
    pub n_order: u32,
    /// Smallest constant satisfying the bound on the grid.
    pub c_n: f64,
    /// `|C(t_max)| (1+t_max)^N / C_N`.
    pub tail_ratio: f64,
    pub pass: bool,
}

/// Tail-ratio threshold below which the decay bound counts as unsaturated.
pub const TAIL_RATIO_LIMIT: f64 = 0.5;

/// Checks polynomial decay of `|C(t)|` of order `n_order`.
pub fn verify_polynomial_decay(series: &CorrelationSeries, n_order: u32) -> PolynomialDecayReport {
    let scaled: Vec<f64> = series
        .values
        .iter()
        .enumerate()
        .map(|(i, z)| z.norm() * (1.0 + series.grid.t(i)).powi(n_order as i32))
        .collect();
    let c_n = scaled.iter().copied().fold(0.0, f64::max);
    let tail = *scaled.last().unwrap_or(&0.0);
    let tail_ratio = if c_n > 0.0 { tail / c_n } else { 0.0 };
    PolynomialDecayReport {
        n_order,
        c_n,
        tail_ratio,
        pass: c_n.is_finite() && tail_ratio < TAIL_RATIO_LIMIT,
    }
}

/// Offsets and decaying parts over a range of seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedStudy {
    pub seeds: Vec<u64>,
    pub offsets: Vec<f64>,
    /// Seed average of `C(t) − C_0`.
    pub decaying_part: CorrelationSeries,
}

impl SeedStudy {
    pub fn median_offset(&self) -> f64 {
        median(&self.offsets)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `spec` for each seed in `seeds` (overriding `spec.seed`).
pub fn seed_study(spec: &EthSpec, seeds: &[u64], beta: f64, grid: &TimeGrid) -> Result<SeedStudy> {
    if seeds.is_empty() {
        return Err(invalid("seeds", "need at least one seed"));
    }
    let beta = Beta::from_f64(beta)?;
    let runs: Vec<Result<(f64, CorrelationSeries)>> = seeds
        .par_iter()
        .map(|&seed| {
            let eig = generate_eth_environment(&EthSpec { seed, ..*spec })?;
            let th = eigencorr::thermal_weights(&eig, beta)?;
            let c0 = eigencorr::offset(&eig, &th, None)?.c0;
            let s = eigencorr::correlation_function(&eig, &th, grid)?;
            Ok((c0, s))
        })
        .collect();
    let mut offsets = Vec::with_capacity(seeds.len());
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len];
    for run in runs {
        let (c0, s) = run?;
        offsets.push(c0);
        for (a, v) in acc.iter_mut().zip(&s.values) {
            *a += v - c0;
        }
    }
    let n = seeds.len() as f64;
    Ok(SeedStudy {
        seeds: seeds.to_vec(),
        decaying_part: CorrelationSeries {
            grid: *grid,
            values: acc.into_iter().map(|z| z / n).collect(),
            mean_b: 0.0,
            offset_estimate: Some(0.0),
        },
        offsets,
    })
}
