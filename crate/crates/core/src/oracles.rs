//! Closed-form correlation functions for the analytically solvable limits,
//! and the two decay models used for fitting.
//!
//! Sign conventions follow [`crate::eigencorr`]: `C(t) = tr{B̃(t) B̃ ρ}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigencorr::CorrelationSeries;
use crate::env_model::{ohmic_density, ModeSet, MoleculeParams};
use crate::error::{invalid, require_finite, Result};
use crate::grid::TimeGrid;

/// `coth(x)` for `x > 0`, accurate near zero.
pub fn coth(x: f64) -> f64 {
    1.0 + 2.0 / (2.0 * x).exp_m1()
}

/// `sech²(x)` without overflow.
pub fn sech2(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Bose occupation `1/(e^{βω} − 1)`.
pub fn bose(beta: f64, omega: f64) -> f64 {
    1.0 / (beta * omega).exp_m1()
}

/// `1 / (1 + e^x)` without overflow.
fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

fn series(grid: &TimeGrid, mean_b: f64, offset: f64, f: impl Fn(f64) -> Complex64) -> CorrelationSeries {
    CorrelationSeries {
        grid: *grid,
        values: grid.times().into_iter().map(f).collect(),
        mean_b,
        offset_estimate: Some(offset),
    }
}

/// Dephasing exponent `Γ_β(t) = 8 Σ (g/ω)² sin²(ωt/2) coth(βω/2)`.
pub fn dephasing_exponent(modes: &ModeSet, beta: f64, t: f64) -> f64 {
    modes
        .omega
        .iter()
        .zip(&modes.g)
        .map(|(&w, &g)| {
            let k = g / w;
            let s = (0.5 * w * t).sin();
            8.0 * k * k * s * s * coth(0.5 * beta * w)
        })
        .sum()
}

/// Exact correlation of the `Δ = 0` molecule.
pub fn pure_dephasing_correlation(
    params: &MoleculeParams,
    modes: &ModeSet,
    grid: &TimeGrid,
) -> Result<CorrelationSeries> {
    if params.delta != 0.0 {
        return Err(invalid("delta", "pure dephasing requires delta = 0"));
    }
    let beta = params.beta;
    if !(beta > 0.0) {
        return Err(invalid("beta", "must be positive"));
    }
    let eps = params.epsilon;
    require_finite("epsilon", eps)?;
    let p_up = fermi(beta * eps);
    let p_down = 1.0 - p_up;
    Ok(series(grid, 0.0, 0.0, |t| {
        let pre = Complex64::from_polar(p_up, eps * t) + Complex64::from_polar(p_down, -eps * t);
        let phase: f64 = modes
            .omega
            .iter()
            .zip(&modes.g)
            .map(|(&w, &g)| -4.0 * (g / w).powi(2) * (w * t).sin())
            .sum();
        pre * Complex64::from_polar((-dephasing_exponent(modes, beta, t)).exp(), phase)
    }))
}

/// Closed-form result for the bare spin (`r = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinCoherence {
    pub series: CorrelationSeries,
    /// `⟨σ^x⟩ = (Δ/Ω) tanh(βΩ/2)` for `H = ½(−Δσ^x + εσ^z)`.
    pub mean_sigma_x: f64,
    /// `(Δ/Ω)² sech²(βΩ/2)`.
    pub offset: f64,
}

pub fn spin_coherence_correlation(epsilon: f64, delta: f64, beta: f64, grid: &TimeGrid) -> Result<SpinCoherence> {
    require_finite("epsilon", epsilon)?;
    require_finite("delta", delta)?;
    let omega = epsilon.hypot(delta);
    if omega == 0.0 {
        return Err(invalid("epsilon", "epsilon = delta = 0 has no Rabi frequency"));
    }
    if beta.is_nan() || beta < 0.0 {
        return Err(invalid("beta", format!("must be >= 0, got {beta}")));
    }
    let x = 0.5 * beta * omega;
    let (tanh, sech2) = if x.is_infinite() { (1.0, 0.0) } else { (x.tanh(), sech2(x)) };
    let a = (epsilon / omega).powi(2);
    let offset = (delta / omega).powi(2) * sech2;
    let s = series(grid, (delta / omega) * tanh, offset, |t| {
        let (sin, cos) = (omega * t).sin_cos();
        Complex64::new(a * cos + offset, -a * tanh * sin)
    });
    Ok(SpinCoherence {
        mean_sigma_x: s.mean_b,
        series: s,
        offset,
    })
}

/// `C(t) = Σ g²[(N+1)e^{−iωt} + N e^{iωt}]` for a linear-coupled boson bath.
pub fn harmonic_correlation(modes: &ModeSet, beta: f64, grid: &TimeGrid) -> Result<CorrelationSeries> {
    if !(beta > 0.0) {
        return Err(invalid("beta", format!("harmonic bath needs beta > 0, got {beta}")));
    }
    let occ: Vec<f64> = modes.omega.iter().map(|&w| bose(beta, w)).collect();
    Ok(series(grid, 0.0, 0.0, |t| harmonic_value(modes, &occ, t)))
}

fn harmonic_value(modes: &ModeSet, occ: &[f64], t: f64) -> Complex64 {
    modes
        .omega
        .iter()
        .zip(&modes.g)
        .zip(occ)
        .map(|((&w, &g), &n)| {
            let (s, c) = (w * t).sin_cos();
            g * g * Complex64::new((2.0 * n + 1.0) * c, -s)
        })
        .sum()
}

/// Largest `|(N+1)e^{−βω} − N|` over the modes.
pub fn detailed_balance_residual(modes: &ModeSet, beta: f64) -> f64 {
    modes
        .omega
        .iter()
        .map(|&w| {
            let n = bose(beta, w);
            ((n + 1.0) * (-beta * w).exp() - n).abs() / (n + 1.0)
        })
        .fold(0.0, f64::max)
}

/// Golden-rule half-Fourier rate `γ(ω)` of a continuum Ohmic bath:
/// `πJ(ω)(N(ω)+1)` for `ω > 0`, `πJ(|ω|)N(|ω|)` for `ω < 0`.
pub fn ohmic_golden_rule_gamma(r: f64, omega_c: f64, beta: f64, omega: f64) -> f64 {
    use std::f64::consts::PI;
    if omega == 0.0 {
        // lim J(ω) N(ω) = r² / (ω_c β).
        return if beta > 0.0 { PI * r * r / (omega_c * beta) } else { f64::INFINITY };
    }
    let w = omega.abs();
    let j = ohmic_density(r, omega_c, w);
    let n = bose(beta, w);
    if omega > 0.0 {
        PI * j * (n + 1.0)
    } else {
        PI * j * n
    }
}

/// `A_0 cos(ω_0 t) e^{−B_0 t^a} + C̃_0 e^{−t/T_0}`; `t0 = None` means `T_0 = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchedModel {
    pub a0: f64,
    pub omega0: f64,
    pub b0: f64,
    pub a: f64,
    pub c0: f64,
    pub t0: Option<f64>,
}

impl StretchedModel {
    pub fn eval(&self, t: f64) -> f64 {
        let osc = if self.a0 == 0.0 {
            0.0
        } else {
            self.a0 * (self.omega0 * t).cos() * (-self.b0 * t.powf(self.a)).exp()
        };
        let tail = match self.t0 {
            Some(t0) => self.c0 * (-t / t0).exp(),
            None => self.c0,
        };
        osc + tail
    }
}

/// `Ã_0 e^{−Re λ_0 t} cos(Im λ_0 t) + C_0 e^{−λ t} + const`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakCouplingModel {
    pub amplitude: f64,
    pub lambda0_re: f64,
    pub lambda0_im: f64,
    pub c0: f64,
    pub lambda: f64,
    pub constant: f64,
}

impl WeakCouplingModel {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-self.lambda0_re * t).exp() * (self.lambda0_im * t).cos()
            + self.c0 * (-self.lambda * t).exp()
            + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayModel {
    Stretched(StretchedModel),
    WeakCoupling(WeakCouplingModel),
}

impl DecayModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DecayModel::Stretched(m) => {
                for (name, v) in [("a0", m.a0), ("omega0", m.omega0), ("b0", m.b0), ("a", m.a), ("c0", m.c0)] {
                    require_finite(name, v)?;
                }
                if !(m.a > 0.0) {
                    return Err(invalid("a", "must be positive"));
                }
                if let Some(t0) = m.t0 {
                    if !(t0 > 0.0) {
                        return Err(invalid("t0", "must be positive"));
                    }
                }
            }
            DecayModel::WeakCoupling(m) => {
                for (name, v) in [
                    ("amplitude", m.amplitude),
                    ("lambda0_re", m.lambda0_re),
                    ("lambda0_im", m.lambda0_im),
                    ("c0", m.c0),
                    ("lambda", m.lambda),
                    ("constant", m.constant),
                ] {
                    require_finite(name, v)?;
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            DecayModel::Stretched(m) => m.eval(t),
            DecayModel::WeakCoupling(m) => m.eval(t),
        }
    }
}

pub fn evaluate_decay_models(model: &DecayModel, grid: &TimeGrid) -> Result<Vec<f64>> {
    model.validate()?;
    Ok(grid.times().into_iter().map(|t| model.eval(t)).collect())
}
