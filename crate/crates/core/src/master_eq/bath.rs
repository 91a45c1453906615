use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigencorr::CorrelationSeries;
use crate::error::{invalid, Result};
use crate::grid::TimeGrid;

/// Half-Fourier coefficients `Γ(ω) = ∫₀^∞ α(τ) e^{iωτ} dτ = γ + iΣ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfFourier {
    pub gamma: f64,
    pub sigma: f64,
    /// False when `α` has not decayed below 1e-8 of its initial magnitude.
    pub converged: bool,
}

impl HalfFourier {
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.gamma, self.sigma)
    }
}

const DECAY_TOL: f64 = 1e-8;

/// Trapezoid integral over the grid plus an exponential tail when the modulus
/// of `α` decreases monotonically over the last tenth of the grid.
pub fn half_fourier(alpha: &[Complex64], dt: f64, omega: f64) -> HalfFourier {
    let n = alpha.len();
    if n < 2 {
        return HalfFourier {
            gamma: 0.0,
            sigma: 0.0,
            converged: false,
        };
    }
    let f = |i: usize| alpha[i] * Complex64::from_polar(1.0, omega * i as f64 * dt);
    let mut sum = 0.5 * (f(0) + f(n - 1));
    for i in 1..n - 1 {
        sum += f(i);
    }
    let mut total = sum * dt;

    let a0 = alpha[0].norm();
    let end = alpha[n - 1].norm();
    let converged = end <= DECAY_TOL * a0;
    if !converged {
        let w = (n / 10).max(2);
        let window = &alpha[n - 1 - w..];
        let monotone = window.windows(2).all(|p| p[1].norm() < p[0].norm());
        if monotone {
            let ratio = end / window[0].norm();
            let kappa = -ratio.ln() / (w as f64 * dt);
            if kappa.is_finite() && kappa > 0.0 {
                total += f(n - 1) / Complex64::new(kappa, -omega);
            }
        } else {
            log::warn!("half-Fourier integral of a non-decaying correlation (|α_end|/|α_0| = {:e})", end / a0);
        }
    }
    HalfFourier {
        gamma: total.re,
        sigma: total.im,
        converged,
    }
}

/// Whether the Markovian coefficients use the asymptotic `Γ_∞(ω)` or the
/// finite-time `Γ_t(ω) = ∫₀^t α(τ) e^{iωτ} dτ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    #[default]
    Asymptotic,
    FiniteTime,
}

type RateFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// Decaying correlation `α` plus the offset `C_0`.
#[derive(Clone)]
pub struct BathInput {
    pub c0: f64,
    alpha: Option<(TimeGrid, Vec<Complex64>)>,
    rates: Option<RateFn>,
}

impl fmt::Debug for BathInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BathInput")
            .field("c0", &self.c0)
            .field("alpha_len", &self.alpha.as_ref().map(|a| a.1.len()))
            .field("analytic_rates", &self.rates.is_some())
            .finish()
    }
}

impl BathInput {
    /// Splits a correlation series into `α = C − c0` and the offset `c0`.
    pub fn from_series(series: &CorrelationSeries, c0: f64) -> Result<Self> {
        check_c0(c0)?;
        Ok(Self {
            c0,
            alpha: Some((series.grid, series.values.iter().map(|z| z - c0).collect())),
            rates: None,
        })
    }

    /// Uses a closed-form `Γ(ω) = γ(ω) + iΣ(ω)`.
    pub fn from_rates(c0: f64, rates: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Result<Self> {
        check_c0(c0)?;
        Ok(Self {
            c0,
            alpha: None,
            rates: Some(Arc::new(rates)),
        })
    }

    /// Same decaying part with a different offset.
    pub fn with_offset(&self, c0: f64) -> Result<Self> {
        check_c0(c0)?;
        Ok(Self { c0, ..self.clone() })
    }

    /// Adds a tabulated `α` to a rate-based bath (enables finite-time coefficients).
    pub fn with_alpha(mut self, grid: TimeGrid, alpha: Vec<Complex64>) -> Result<Self> {
        if alpha.len() != grid.len {
            return Err(invalid("alpha", "length does not match its grid"));
        }
        self.alpha = Some((grid, alpha));
        Ok(self)
    }

    pub fn alpha(&self) -> Option<(&TimeGrid, &[Complex64])> {
        self.alpha.as_ref().map(|(g, a)| (g, a.as_slice()))
    }

    /// `C(t) = α(t) + C_0` on the stored grid.
    pub fn reconstructed(&self) -> Option<Vec<Complex64>> {
        self.alpha
            .as_ref()
            .map(|(_, a)| a.iter().map(|z| z + self.c0).collect())
    }

    /// Asymptotic `Γ(ω)`.
    pub fn coefficient(&self, omega: f64) -> Complex64 {
        if let Some(f) = &self.rates {
            return f(omega);
        }
        let (grid, alpha) = self.alpha.as_ref().expect("bath has alpha or rates");
        half_fourier(alpha, grid.dt, omega).complex()
    }

    pub(crate) fn table(&self, freqs: &[f64], mode: RateMode) -> Result<CoefficientTable> {
        let asymptotic: Vec<Complex64> = freqs.iter().map(|&w| self.coefficient(w)).collect();
        match mode {
            RateMode::Asymptotic => Ok(CoefficientTable {
                asymptotic,
                running: None,
            }),
            RateMode::FiniteTime => {
                let (grid, alpha) = self
                    .alpha
                    .as_ref()
                    .ok_or_else(|| invalid("rate_mode", "finite-time coefficients need a tabulated alpha"))?;
                let running = freqs
                    .iter()
                    .map(|&w| {
                        let mut acc = vec![Complex64::new(0.0, 0.0); grid.len];
                        for i in 1..grid.len {
                            let f0 = alpha[i - 1] * Complex64::from_polar(1.0, w * grid.t(i - 1));
                            let f1 = alpha[i] * Complex64::from_polar(1.0, w * grid.t(i));
                            acc[i] = acc[i - 1] + 0.5 * grid.dt * (f0 + f1);
                        }
                        acc
                    })
                    .collect();
                Ok(CoefficientTable {
                    asymptotic,
                    running: Some((*grid, running)),
                })
            }
        }
    }
}

fn check_c0(c0: f64) -> Result<()> {
    if !(c0 >= 0.0 && c0.is_finite()) {
        return Err(invalid("c0", format!("must be finite and >= 0, got {c0}")));
    }
    Ok(())
}

/// `Γ` per distinct Bohr frequency, optionally time dependent.
pub(crate) struct CoefficientTable {
    pub asymptotic: Vec<Complex64>,
    running: Option<(TimeGrid, Vec<Vec<Complex64>>)>,
}

impl CoefficientTable {
    pub fn at(&self, j: usize, t: f64) -> Complex64 {
        match &self.running {
            None => self.asymptotic[j],
            Some((grid, acc)) => {
                let x = t / grid.dt;
                let i = x.floor() as usize;
                if i + 1 >= grid.len {
                    acc[j][grid.len - 1]
                } else {
                    let f = x - i as f64;
                    acc[j][i] * (1.0 - f) + acc[j][i + 1] * f
                }
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.asymptotic.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::discretize_spectral_density;
    use crate::oracles::harmonic_correlation;

    fn exp_series(kappa: f64, t_max: f64, n: usize) -> (TimeGrid, Vec<Complex64>) {
        let grid = TimeGrid::new(t_max, n).unwrap();
        let v = grid.times().iter().map(|&t| Complex64::new((-kappa * t).exp(), 0.0)).collect();
        (grid, v)
    }

    #[test]
    fn exponential_laplace_transform() {
        let (grid, a) = exp_series(1.0, 40.0, 40001);
        let h0 = half_fourier(&a, grid.dt, 0.0);
        assert!((h0.gamma - 1.0).abs() < 1e-6 && h0.sigma.abs() < 1e-12);
        let h2 = half_fourier(&a, grid.dt, 2.0);
        assert!((h2.gamma - 0.2).abs() < 1e-6, "{}", h2.gamma);
        assert!((h2.sigma - 0.4).abs() < 1e-6, "{}", h2.sigma);
        assert!(h2.converged);
    }

    #[test]
    fn tail_extrapolation_recovers_truncated_exponential() {
        let (grid, a) = exp_series(0.5, 10.0, 10001);
        let h = half_fourier(&a, grid.dt, 1.0);
        assert!(!h.converged);
        // 0.5 / (0.25 + 1), 1 / (0.25 + 1)
        assert!((h.gamma - 0.4).abs() < 1e-5 && (h.sigma - 0.8).abs() < 1e-5);
    }

    #[test]
    fn harmonic_rates_obey_kms() {
        let modes = discretize_spectral_density(0.3, 1.0, 1000).unwrap();
        let grid = TimeGrid::new(100.0, 4001).unwrap();
        let c = harmonic_correlation(&modes, 1.0, &grid).unwrap();
        let bath = BathInput::from_series(&c, 0.0).unwrap();
        for w in [0.5f64, 1.0] {
            let ratio = bath.coefficient(w).re / bath.coefficient(-w).re;
            assert!((ratio / w.exp() - 1.0).abs() < 0.02, "ω={w}: {ratio}");
        }
    }

    #[test]
    fn series_split_reconstructs() {
        let (grid, a) = exp_series(1.0, 5.0, 51);
        let series = CorrelationSeries { grid, values: a.iter().map(|z| z + 0.3).collect(), mean_b: 0.0, offset_estimate: None };
        let bath = BathInput::from_series(&series, 0.3).unwrap();
        let back = bath.reconstructed().unwrap();
        assert!(back.iter().zip(&series.values).all(|(x, y)| (x - y).norm() < 1e-15));
        assert!(BathInput::from_series(&series, -0.1).is_err());
    }

    #[test]
    fn finite_time_table_approaches_asymptotic() {
        let (grid, a) = exp_series(1.0, 30.0, 3001);
        let bath = BathInput::from_rates(0.0, |w| Complex64::new(1.0, w) / (1.0 + w * w))
            .unwrap()
            .with_alpha(grid, a)
            .unwrap();
        let table = bath.table(&[0.0, 2.0], RateMode::FiniteTime).unwrap();
        assert_eq!(table.at(0, 0.0), Complex64::new(0.0, 0.0));
        assert!((table.at(1, 30.0) - Complex64::new(0.2, 0.4)).norm() < 1e-4);
        assert!((table.at(0, 1.0).re - (1.0 - (-1.0f64).exp())).abs() < 1e-4);
    }
}
