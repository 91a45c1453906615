use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bath::{BathInput, CoefficientTable, RateMode};
use super::report::min_eigenvalue;
use super::{check_density_matrix, SystemSpec};
use crate::env_model::hermiticity_residual;
use crate::error::{invalid, Error, Result};

/// Largest admissible `dt · max|E_ab|`.
pub const STEP_LIMIT: f64 = 0.1;
/// Offset-coefficient growth (relative to the Markovian scale) flagged as unstable.
pub const UNSTABLE_RATIO: f64 = 10.0;
const BLOWUP: f64 = 10.0;

type Mat = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Integrator {
    TimeLocal,
    Convoluted,
    SecularRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub t_max: f64,
    pub dt: f64,
    pub rate_mode: RateMode,
    /// Store every `record_stride`-th step.
    pub record_stride: usize,
}

impl EvolveOptions {
    pub fn new(t_max: f64, dt: f64) -> Self {
        Self {
            t_max,
            dt,
            rate_mode: RateMode::Asymptotic,
            record_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub max_trace_drift: f64,
    pub max_hermiticity_drift: f64,
    pub min_eigenvalue: f64,
    /// `C_0 · max|∫₀^t e^{iEτ}dτ|` over the Markovian scale `max|Γ|`.
    pub offset_coefficient_ratio: f64,
    pub unstable: bool,
    pub steps: usize,
}

/// Trajectory of the reduced state (interaction picture, `H_S` eigenbasis).
#[derive(Debug, Clone)]
pub struct MasterEqRun {
    pub integrator: Integrator,
    pub times: Vec<f64>,
    pub states: Vec<Mat>,
    /// `Γ` at each distinct Bohr frequency (`system.frequencies` order).
    pub coefficients: Vec<Complex64>,
    pub c0: f64,
    /// Final history integrals `∫₀^t e^{iωτ} ρ(τ) dτ` per distinct Bohr frequency (convoluted only).
    pub history: Vec<Mat>,
    pub diagnostics: RunDiagnostics,
}

impl MasterEqRun {
    /// Schrödinger-picture state in the eigenbasis of `H_S`.
    pub fn schrodinger(&self, system: &SystemSpec, i: usize) -> Mat {
        system.to_schrodinger(&self.states[i], self.times[i])
    }

    /// Schrödinger-picture state in the input basis.
    pub fn schrodinger_input_basis(&self, system: &SystemSpec, i: usize) -> Mat {
        system.from_eigenbasis(&self.schrodinger(system, i))
    }
}

struct Model<'a> {
    sys: &'a SystemSpec,
    table: CoefficientTable,
    c0: f64,
    convoluted: bool,
}

impl Model<'_> {
    fn s_t(&self, t: f64) -> Mat {
        let s = &self.sys.s_eig;
        Mat::from_fn(s.nrows(), s.ncols(), |a, b| {
            s[(a, b)] * Complex64::from_polar(1.0, self.sys.bohr(a, b) * t)
        })
    }

    /// Derivative of `(ρ, R_1..R_m)`.
    fn rhs(&self, t: f64, rho: &Mat, hist: &[Mat]) -> (Mat, Vec<Mat>) {
        let n = rho.nrows();
        let st = self.s_t(t);
        let lam = Mat::from_fn(n, n, |a, b| {
            st[(a, b)] * self.table.at(self.sys.freq_index[(b, a)], t)
        });
        let lr = &lam * rho;
        let mut d = &lr * &st - &st * &lr;
        if self.c0 != 0.0 {
            let x = if self.convoluted {
                let s = &self.sys.s_eig;
                Mat::from_fn(n, n, |a, c| {
                    (0..n)
                        .map(|b| s[(a, b)] * hist[self.sys.freq_index[(a, b)]][(b, c)])
                        .sum()
                })
            } else {
                let s = &self.sys.s_eig;
                let z = Mat::from_fn(n, n, |a, b| s[(a, b)] * phase_integral(self.sys.bohr(a, b), t));
                &z * rho
            };
            d += (&x * &st - &st * &x) * Complex64::new(self.c0, 0.0);
        }
        let d = &d + d.adjoint();
        let dh = if self.convoluted {
            self.sys
                .frequencies
                .iter()
                .map(|&w| rho * Complex64::from_polar(1.0, w * t))
                .collect()
        } else {
            Vec::new()
        };
        (d, dh)
    }
}

/// `∫₀^t e^{iEτ} dτ`.
pub(crate) fn phase_integral(e: f64, t: f64) -> Complex64 {
    if e.abs() < super::BOHR_TOL {
        Complex64::new(t, 0.0)
    } else {
        (Complex64::from_polar(1.0, e * t) - 1.0) / Complex64::new(0.0, e)
    }
}

fn axpy(y: &Mat, a: f64, x: &Mat) -> Mat {
    y + x * Complex64::new(a, 0.0)
}

fn evolve(
    system: &SystemSpec,
    bath: &BathInput,
    rho0: &Mat,
    opts: &EvolveOptions,
    integrator: Integrator,
) -> Result<MasterEqRun> {
    let n = system.dim();
    check_density_matrix(rho0, n)?;
    if !(opts.dt > 0.0 && opts.t_max > 0.0) {
        return Err(invalid("dt", "dt and t_max must be positive"));
    }
    let max_freq = system.max_bohr();
    if opts.dt * max_freq >= STEP_LIMIT {
        return Err(Error::StepSize {
            dt: opts.dt,
            max_freq,
            limit: STEP_LIMIT,
        });
    }
    let stride = opts.record_stride.max(1);
    let convoluted = integrator == Integrator::Convoluted;
    let model = Model {
        sys: system,
        table: bath.table(&system.frequencies, opts.rate_mode)?,
        c0: bath.c0,
        convoluted,
    };

    let mut rho = system.to_eigenbasis(rho0);
    let m = if convoluted { system.frequencies.len() } else { 0 };
    let mut hist: Vec<Mat> = vec![Mat::zeros(n, n); m];
    let steps = (opts.t_max / opts.dt).round().max(1.0) as usize;
    let dt = opts.dt;

    let mut times = vec![0.0];
    let mut states = vec![rho.clone()];
    let mut unstable = false;
    let mut done = 0;
    for k in 0..steps {
        let t = k as f64 * dt;
        let (k1, h1) = model.rhs(t, &rho, &hist);
        let mid = |x: &Mat, kx: &Mat, s: f64| axpy(x, s, kx);
        let hist_at = |hk: &[Mat], s: f64| -> Vec<Mat> { hist.iter().zip(hk).map(|(h, d)| axpy(h, s, d)).collect() };
        let (k2, h2) = model.rhs(t + 0.5 * dt, &mid(&rho, &k1, 0.5 * dt), &hist_at(&h1, 0.5 * dt));
        let (k3, h3) = model.rhs(t + 0.5 * dt, &mid(&rho, &k2, 0.5 * dt), &hist_at(&h2, 0.5 * dt));
        let (k4, h4) = model.rhs(t + dt, &mid(&rho, &k3, dt), &hist_at(&h3, dt));
        let w = Complex64::new(dt / 6.0, 0.0);
        rho += (&k1 + (&k2 + &k3) * Complex64::new(2.0, 0.0) + &k4) * w;
        for (j, h) in hist.iter_mut().enumerate() {
            *h += (&h1[j] + (&h2[j] + &h3[j]) * Complex64::new(2.0, 0.0) + &h4[j]) * w;
        }
        done = k + 1;
        let finite = rho.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        let big = rho.iter().any(|z| z.norm() > BLOWUP);
        if done % stride == 0 || done == steps || !finite || big {
            times.push(done as f64 * dt);
            states.push(rho.clone());
        }
        if !finite || big {
            unstable = true;
            log::warn!("{integrator:?} integration diverged at t = {}", done as f64 * dt);
            break;
        }
    }

    let mut max_trace = 0.0f64;
    let mut max_herm = 0.0f64;
    let mut min_eig = f64::INFINITY;
    for r in &states {
        let tr: Complex64 = r.diagonal().iter().sum();
        max_trace = max_trace.max((tr - 1.0).norm());
        max_herm = max_herm.max(hermiticity_residual(r));
        if r.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            min_eig = min_eig.min(min_eigenvalue(r));
        }
    }

    let t_end = done as f64 * dt;
    let mut growth = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            if system.s_eig[(a, b)].norm() > 0.0 {
                let e = system.bohr(a, b);
                let bound = if e.abs() < super::BOHR_TOL { t_end } else { (2.0 / e.abs()).min(t_end) };
                growth = growth.max(bound);
            }
        }
    }
    let scale = model.table.max_abs();
    let ratio = if bath.c0 == 0.0 {
        0.0
    } else if scale > 0.0 {
        bath.c0 * growth / scale
    } else {
        f64::INFINITY
    };
    if integrator == Integrator::TimeLocal && ratio > UNSTABLE_RATIO {
        unstable = true;
    }

    Ok(MasterEqRun {
        integrator,
        times,
        states,
        coefficients: model.table.asymptotic.clone(),
        c0: bath.c0,
        history: hist,
        diagnostics: RunDiagnostics {
            max_trace_drift: max_trace,
            max_hermiticity_drift: max_herm,
            min_eigenvalue: min_eig,
            offset_coefficient_ratio: ratio,
            unstable,
            steps: done,
        },
    })
}

/// Offset term evaluated with `ρ(t)`: `C_0 ∫₀^t S(s) ds ρ(t)`.
pub fn evolve_time_local(system: &SystemSpec, bath: &BathInput, rho0: &Mat, opts: &EvolveOptions) -> Result<MasterEqRun> {
    evolve(system, bath, rho0, opts, Integrator::TimeLocal)
}

/// Offset term with full memory `C_0 ∫₀^t S(s) ρ(s) ds`, carried as running
/// integrals `∫₀^t e^{iωτ} ρ(τ) dτ` per distinct Bohr frequency.
pub fn evolve_convoluted(system: &SystemSpec, bath: &BathInput, rho0: &Mat, opts: &EvolveOptions) -> Result<MasterEqRun> {
    evolve(system, bath, rho0, opts, Integrator::Convoluted)
}
