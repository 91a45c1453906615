//! Exact diagonalization, thermal states and eigenbasis correlation functions.
//!
//! With `B̃ = B − ⟨B⟩` and the thermal weights `η_k`, the correlation
//! `C(t) = tr{B̃(t) B̃(0) ρ}` reads `Σ_kl η_k |B̃_kl|² e^{i(ε_k − ε_l)t}`. The
//! time-independent part of that double sum is the offset `C_0`.

mod davies;
mod stats;

pub use davies::{davies_diagnostic, DaviesClass, DaviesReport};
pub use stats::{bkk_statistics, BkkDistribution, Histogram};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env_model::{hermiticity_residual, OperatorMatrix};
use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;

/// Relative degeneracy tolerance applied to the spectral range.
pub const DEFAULT_TOL_DEG_REL: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-12;
const KAISER_BETA: f64 = 20.0;

/// Spectrum, eigenvectors and the coupling operator in the eigenbasis.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Ascending eigenvalues.
    pub energies: Vec<f64>,
    /// Columns are eigenvectors. Empty for systems built directly in their eigenbasis.
    pub vectors: Option<DMatrix<Complex64>>,
    /// `B^{kl} = ⟨ε_k|B|ε_l⟩`.
    pub b_eig: DMatrix<Complex64>,
}

impl EigenSystem {
    /// System given directly in its eigenbasis (energies must be ascending).
    pub fn from_diagonal(energies: Vec<f64>, b_eig: DMatrix<Complex64>) -> Result<Self> {
        if b_eig.nrows() != energies.len() || b_eig.ncols() != energies.len() {
            return Err(Error::DimensionMismatch {
                expected: energies.len(),
                found: b_eig.nrows(),
            });
        }
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("energies", "must be sorted ascending"));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(invalid("energies", "must be finite"));
        }
        let res = hermiticity_residual(&b_eig);
        if res > HERMITIAN_TOL * scale(&b_eig) {
            return Err(Error::NotHermitian {
                label: "B".into(),
                residual: res,
            });
        }
        Ok(Self {
            energies,
            vectors: None,
            b_eig,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn spectral_range(&self) -> f64 {
        match (self.energies.first(), self.energies.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Default degeneracy tolerance `1e-10 * (ε_max − ε_0)`.
    pub fn default_tol_deg(&self) -> f64 {
        let range = self.spectral_range();
        if range > 0.0 {
            DEFAULT_TOL_DEG_REL * range
        } else {
            DEFAULT_TOL_DEG_REL
        }
    }

    /// `max |V Λ V† − H|`, or `None` when no eigenvectors are stored.
    pub fn reconstruction_residual(&self, h: &OperatorMatrix) -> Option<f64> {
        let v = self.vectors.as_ref()?;
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.energies.iter().map(|&e| Complex64::new(e, 0.0)),
        ));
        let rec = v * lam * v.adjoint();
        Some((rec - &h.data).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

fn scale(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(1.0, f64::max)
}

/// Eigendecomposition of `H` with `B` rotated into the eigenbasis.
pub fn diagonalize(h: &OperatorMatrix, b: &OperatorMatrix) -> Result<EigenSystem> {
    if h.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: b.dim(),
        });
    }
    for op in [h, b] {
        let res = op.hermiticity_residual();
        if res > HERMITIAN_TOL * scale(&op.data) {
            return Err(Error::NotHermitian {
                label: op.label.clone(),
                residual: res,
            });
        }
        if op.data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(invalid("matrix", format!("`{}` has non-finite entries", op.label)));
        }
    }
    let n = h.dim();
    let (values, vectors): (Vec<f64>, DMatrix<Complex64>) = if h.is_real() {
        let hr = h.data.map(|z| z.re);
        let eig = SymmetricEigen::try_new(hr, f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver("real symmetric QR did not converge".into()))?;
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
        )
    } else {
        let eig = SymmetricEigen::try_new(h.data.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver("Hermitian QR did not converge".into()))?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| values[a].total_cmp(&values[c]));
    let energies: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let v = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    let b_eig = if h.is_real() && b.is_real() {
        let vr = v.map(|z| z.re);
        let br = b.data.map(|z| z.re);
        (vr.transpose() * br * &vr).map(|x| Complex64::new(x, 0.0))
    } else {
        v.adjoint() * &b.data * &v
    };
    Ok(EigenSystem {
        energies,
        vectors: Some(v),
        b_eig,
    })
}

/// Inverse temperature, with an explicit zero-temperature limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Beta {
    Finite(f64),
    ZeroTemperature,
}

impl Beta {
    pub fn from_f64(beta: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 {
            return Err(invalid("beta", format!("must be >= 0, got {beta}")));
        }
        Ok(if beta.is_infinite() {
            Beta::ZeroTemperature
        } else {
            Beta::Finite(beta)
        })
    }

    pub fn value(&self) -> f64 {
        match self {
            Beta::Finite(b) => *b,
            Beta::ZeroTemperature => f64::INFINITY,
        }
    }
}

/// Thermal weights on eigenstates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub weights: Vec<f64>,
    pub beta: f64,
    /// `ln Z_E` (unshifted energies); infinite at zero temperature.
    pub log_partition: f64,
}

/// `η_k = e^{−β(ε_k − ε_0)} / Σ_l e^{−β(ε_l − ε_0)}`.
pub fn thermal_weights(eig: &EigenSystem, beta: Beta) -> Result<ThermalState> {
    let e0 = *eig
        .energies
        .first()
        .ok_or_else(|| invalid("eigensystem", "empty spectrum"))?;
    match beta {
        Beta::Finite(b) => {
            if !(b.is_finite() && b >= 0.0) {
                return Err(invalid("beta", format!("must be finite and >= 0, got {b}")));
            }
            let raw: Vec<f64> = eig.energies.iter().map(|&e| (-b * (e - e0)).exp()).collect();
            let z: f64 = raw.iter().sum();
            Ok(ThermalState {
                weights: raw.iter().map(|w| w / z).collect(),
                beta: b,
                log_partition: -b * e0 + z.ln(),
            })
        }
        Beta::ZeroTemperature => {
            let tol = eig.default_tol_deg();
            let g = eig.energies.iter().filter(|&&e| e - e0 < tol).count();
            Ok(ThermalState {
                weights: eig
                    .energies
                    .iter()
                    .map(|&e| if e - e0 < tol { 1.0 / g as f64 } else { 0.0 })
                    .collect(),
                beta: f64::INFINITY,
                log_partition: f64::INFINITY,
            })
        }
    }
}

/// Complex correlation series on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub grid: TimeGrid,
    pub values: Vec<Complex64>,
    /// Renormalization constant `⟨B⟩`.
    pub mean_b: f64,
    pub offset_estimate: Option<f64>,
}

impl CorrelationSeries {
    pub fn real_part(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }
}

fn thermal_mean_b(eig: &EigenSystem, thermal: &ThermalState) -> f64 {
    thermal
        .weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * eig.b_eig[(k, k)].re)
        .sum()
}

/// Precomputed weights `W_kl = η_k |B̃_kl|²` for repeated evaluation of `C(t)`.
#[derive(Debug, Clone)]
pub struct CorrelationKernel {
    energies: Vec<f64>,
    rows: Vec<usize>,
    weights: Vec<f64>,
    dim: usize,
    pub mean_b: f64,
}

impl CorrelationKernel {
    pub fn new(eig: &EigenSystem, thermal: &ThermalState) -> Result<Self> {
        let d = eig.dim();
        if thermal.weights.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: thermal.weights.len(),
            });
        }
        let mean_b = thermal_mean_b(eig, thermal);
        let e0 = eig.energies[0];
        let rows: Vec<usize> = (0..d).filter(|&k| thermal.weights[k] > 0.0).collect();
        let mut weights = Vec::with_capacity(rows.len() * d);
        for &k in &rows {
            let eta = thermal.weights[k];
            for l in 0..d {
                let mut b = eig.b_eig[(k, l)];
                if k == l {
                    b -= mean_b;
                }
                weights.push(eta * b.norm_sqr());
            }
        }
        Ok(Self {
            energies: eig.energies.iter().map(|e| e - e0).collect(),
            rows,
            weights,
            dim: d,
            mean_b,
        })
    }

    /// `C(t)` at a single (possibly negative) time.
    pub fn eval(&self, t: f64) -> Complex64 {
        let u: Vec<Complex64> = self
            .energies
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -e * t))
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (r, &k) in self.rows.iter().enumerate() {
            let w = &self.weights[r * self.dim..(r + 1) * self.dim];
            let mut v = Complex64::new(0.0, 0.0);
            for (wl, ul) in w.iter().zip(&u) {
                v += ul * *wl;
            }
            acc += Complex64::from_polar(1.0, self.energies[k] * t) * v;
        }
        acc
    }

    /// Evaluate on a grid, parallel over time points.
    pub fn series(&self, grid: &TimeGrid) -> CorrelationSeries {
        let values = (0..grid.len)
            .into_par_iter()
            .map(|i| self.eval(grid.t(i)))
            .collect();
        CorrelationSeries {
            grid: *grid,
            values,
            mean_b: self.mean_b,
            offset_estimate: None,
        }
    }

    /// Smallest and largest `|ω_kl|` among pairs with non-negligible weight,
    /// ignoring pairs closer than `tol_deg`.
    pub fn frequency_span(&self, tol_deg: f64) -> Option<(f64, f64)> {
        let total: f64 = self.weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let cut = 1e-14 * total;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (r, &k) in self.rows.iter().enumerate() {
            for l in 0..self.dim {
                if self.weights[r * self.dim + l] > cut {
                    let w = (self.energies[k] - self.energies[l]).abs();
                    if w >= tol_deg {
                        lo = lo.min(w);
                        hi = hi.max(w);
                    }
                }
            }
        }
        (hi > 0.0).then_some((lo, hi))
    }
}

/// Full eigenbasis double sum with the renormalized operator.
pub fn correlation_function(
    eig: &EigenSystem,
    thermal: &ThermalState,
    grid: &TimeGrid,
) -> Result<CorrelationSeries> {
    Ok(CorrelationKernel::new(eig, thermal)?.series(grid))
}

/// Default grid: 2048 points spanning 20 periods of the slowest nonzero
/// frequency, capped at `t_max_cap`.
pub fn default_time_grid(eig: &EigenSystem, thermal: &ThermalState, t_max_cap: f64) -> Result<TimeGrid> {
    let kernel = CorrelationKernel::new(eig, thermal)?;
    let t_max = match kernel.frequency_span(eig.default_tol_deg()) {
        Some((lo, _)) => (20.0 * 2.0 * std::f64::consts::PI / lo).min(t_max_cap),
        None => t_max_cap,
    };
    TimeGrid::new(t_max, 2048)
}

/// Offset decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetReport {
    pub c0: f64,
    pub variance_part: f64,
    pub degeneracy_part: f64,
    pub tol_deg: f64,
    pub degenerate_pairs: usize,
}

/// `C_0 = Σ η_k (B_kk − ⟨B⟩)² + d_0`, with `d_0` summing `η_k |B_kl|²` over
/// distinct pairs closer than `tol_deg`.
pub fn offset(eig: &EigenSystem, thermal: &ThermalState, tol_deg: Option<f64>) -> Result<OffsetReport> {
    let d = eig.dim();
    if thermal.weights.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: thermal.weights.len(),
        });
    }
    let tol = tol_deg.unwrap_or_else(|| eig.default_tol_deg());
    if !(tol > 0.0) {
        return Err(invalid("tol_deg", format!("must be positive, got {tol}")));
    }
    let mean_b = thermal_mean_b(eig, thermal);
    let variance_part: f64 = (0..d)
        .map(|k| {
            let x = eig.b_eig[(k, k)].re - mean_b;
            thermal.weights[k] * x * x
        })
        .sum();
    let mut degeneracy_part = 0.0;
    let mut pairs = 0;
    for k in 0..d {
        let mut l = k + 1;
        while l < d && eig.energies[l] - eig.energies[k] < tol {
            let w = eig.b_eig[(k, l)].norm_sqr();
            degeneracy_part += (thermal.weights[k] + thermal.weights[l]) * w;
            pairs += 1;
            l += 1;
        }
    }
    Ok(OffsetReport {
        c0: variance_part + degeneracy_part,
        variance_part,
        degeneracy_part,
        tol_deg: tol,
        degenerate_pairs: pairs,
    })
}

/// Modified Bessel function `I_0`.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Kaiser-weighted mean of `values` (falls back to the plain mean for short input).
pub fn kaiser_mean(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n < 3 {
        return values.iter().sum::<f64>() / n as f64;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, v) in values.iter().enumerate() {
        let x = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
        let w = bessel_i0(KAISER_BETA * (1.0 - x * x).max(0.0).sqrt());
        num += w * v;
        den += w;
    }
    num / den
}

/// Long-time average of `Re C` over the trailing `window_fraction` of the grid.
///
/// The window is tapered (Kaiser, β = 20) so that oscillating components are
/// suppressed to ~1e-8 once the window spans a few tens of their periods.
pub fn long_time_average(series: &CorrelationSeries, window_fraction: f64) -> Result<f64> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(invalid(
            "window_fraction",
            format!("must lie in (0, 1], got {window_fraction}"),
        ));
    }
    let n = series.values.len();
    let len = ((n as f64 * window_fraction).round() as usize).clamp(1, n);
    let tail: Vec<f64> = series.values[n - len..].iter().map(|z| z.re).collect();
    Ok(kaiser_mean(&tail))
}

/// Whether a trailing window resolves the slowest frequency (span ≥ 100/min|ω|);
/// logs a warning when it does not.
pub fn window_is_adequate(series: &CorrelationSeries, window_fraction: f64, min_freq: f64) -> bool {
    let span = series.grid.t_max() * window_fraction;
    let ok = span * min_freq >= 100.0;
    if !ok {
        log::warn!(
            "averaging window {span:.3} is short relative to 1/min|ω| = {:.3}",
            1.0 / min_freq
        );
    }
    ok
}

/// Grid suitable for [`long_time_average`] with `window_fraction = 0.5`:
/// spans `2 * span_factor / min|ω|` and samples at a quarter of the fastest period.
pub fn averaging_grid(
    eig: &EigenSystem,
    thermal: &ThermalState,
    span_factor: f64,
    max_points: usize,
) -> Result<TimeGrid> {
    let kernel = CorrelationKernel::new(eig, thermal)?;
    match kernel.frequency_span(eig.default_tol_deg()) {
        None => TimeGrid::new(1.0, 16),
        Some((lo, hi)) => {
            let t_max = 2.0 * span_factor / lo;
            let dt = std::f64::consts::FRAC_PI_2 / hi;
            let mut n = (t_max / dt).ceil() as usize + 1;
            if n > max_points {
                log::warn!("averaging grid truncated from {n} to {max_points} points");
                n = max_points;
            }
            TimeGrid::new(t_max, n.max(16))
        }
    }
}
