use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bath::BathInput;
use super::dynamics::STEP_LIMIT;
use super::SystemSpec;
use crate::eigencorr::kaiser_mean;
use crate::error::{invalid, Error, Result};

/// Memory kernel of the offset term in the population equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OffsetKernel {
    /// Secular limit of the Born equation: `∫₀^t cos(E_ab (t−s)) (P_b − P_a)(s) ds`.
    #[default]
    Lagged,
    /// Phase attached to the integration variable only: `Re ∫₀^t e^{iE_ab s} (P_b − P_a)(s) ds`.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecularOptions {
    pub t_max: f64,
    pub dt: f64,
    pub kernel: OffsetKernel,
    pub record_stride: usize,
}

impl SecularOptions {
    pub fn new(t_max: f64, dt: f64) -> Self {
        Self {
            t_max,
            dt,
            kernel: OffsetKernel::Lagged,
            record_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecularRun {
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    /// `rates[(a, b)]`: transition rate `b → a`, `2γ(E_b − E_a)|S_ab|²`.
    pub rates: DMatrix<f64>,
    /// Time average of the populations over the trailing 20% of the run.
    pub steady_state: Vec<f64>,
    /// `max |P(t_max) − P(0.9 t_max)|`.
    pub plateau_change: f64,
    pub converged: bool,
    /// Smallest separation between distinct Bohr frequencies divided by the largest rate.
    pub secular_ratio: f64,
    pub c0: f64,
    pub kernel: OffsetKernel,
}

/// Rate matrix from the asymptotic coefficients.
pub fn transition_rates(system: &SystemSpec, bath: &BathInput) -> DMatrix<f64> {
    let n = system.dim();
    DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            0.0
        } else {
            2.0 * bath.coefficient(system.bohr(b, a)).re * system.s_eig[(a, b)].norm_sqr()
        }
    })
}

/// Stationary populations of the offset-free rate equations (null vector of the generator).
pub fn stationary_populations(rates: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = rates.nrows();
    let mut gen = DMatrix::<f64>::zeros(n + 1, n);
    for a in 0..n {
        for b in 0..n {
            if a != b {
                gen[(a, b)] += rates[(a, b)];
                gen[(b, b)] -= rates[(a, b)];
            }
        }
        gen[(n, a)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n + 1);
    rhs[n] = 1.0;
    let svd = gen.svd(true, true);
    let p = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::InvalidState(format!("stationary solve failed: {e}")))?;
    Ok(p.iter().copied().collect())
}

/// Population dynamics with rates `2γ(E_ba)|S_ab|²` and the offset history term
/// `2 C_0 Σ_b |S_ab|² K_ab(t)`.
pub fn secular_rate_equations(
    system: &SystemSpec,
    bath: &BathInput,
    p0: &[f64],
    opts: &SecularOptions,
) -> Result<SecularRun> {
    let n = system.dim();
    if p0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p0.len(),
        });
    }
    if p0.iter().any(|&p| !(p >= -1e-12)) || (p0.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState("populations must be nonnegative and sum to 1".into()));
    }
    if !(opts.dt > 0.0 && opts.t_max > 0.0) {
        return Err(invalid("dt", "dt and t_max must be positive"));
    }
    let c0 = bath.c0;
    let max_freq = system.max_bohr();
    if c0 > 0.0 && opts.dt * max_freq >= STEP_LIMIT {
        return Err(Error::StepSize {
            dt: opts.dt,
            max_freq,
            limit: STEP_LIMIT,
        });
    }
    let rates = transition_rates(system, bath);

    // Distinct Bohr-frequency separations versus relaxation scale.
    let max_rate = rates.iter().copied().fold(0.0, f64::max);
    let freqs = &system.frequencies;
    let min_sep = freqs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let secular_ratio = if max_rate > 0.0 { min_sep / max_rate } else { f64::INFINITY };
    if secular_ratio < 10.0 {
        log::warn!("secular approximation questionable: min Bohr gap / max rate = {secular_ratio:.3}");
    }

    // Offset couplings: ordered pairs with S_ab != 0.
    let pairs: Vec<(usize, usize, f64, f64)> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .filter(|&(a, b)| a != b)
        .map(|(a, b)| (a, b, system.s_eig[(a, b)].norm_sqr(), system.bohr(a, b)))
        .filter(|p| p.2 > 0.0 && c0 > 0.0)
        .collect();

    let kernel = opts.kernel;
    let rhs = |t: f64, p: &[f64], h: &[Complex64]| -> (Vec<f64>, Vec<Complex64>) {
        let mut dp = vec![0.0; n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    let flow = rates[(a, b)] * p[b] - rates[(b, a)] * p[a];
                    dp[a] += flow;
                }
            }
        }
        let mut dh = Vec::with_capacity(pairs.len());
        for (j, &(a, b, w, e)) in pairs.iter().enumerate() {
            dp[a] += 2.0 * c0 * w * h[j].re;
            let diff = p[b] - p[a];
            dh.push(match kernel {
                OffsetKernel::Lagged => Complex64::new(diff, 0.0) - Complex64::new(0.0, e) * h[j],
                OffsetKernel::Absolute => Complex64::from_polar(diff, e * t),
            });
        }
        (dp, dh)
    };

    let steps = (opts.t_max / opts.dt).round().max(1.0) as usize;
    let dt = opts.dt;
    let stride = opts.record_stride.max(1);
    let mut p = p0.to_vec();
    let mut h = vec![Complex64::new(0.0, 0.0); pairs.len()];
    let mut times = vec![0.0];
    let mut pops = vec![p.clone()];
    let add = |x: &[f64], s: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let addc = |x: &[Complex64], s: f64, k: &[Complex64]| -> Vec<Complex64> {
        x.iter().zip(k).map(|(a, b)| a + b * s).collect()
    };
    // Trailing-window accumulation for the steady state.
    let tail_start = (0.8 * steps as f64).floor() as usize;
    let mut tail: Vec<Vec<f64>> = Vec::new();
    let mark = ((0.9 * steps as f64).round() as usize).max(1);
    let mut at_mark = p.clone();
    for k in 0..steps {
        let t = k as f64 * dt;
        let (k1, g1) = rhs(t, &p, &h);
        let (k2, g2) = rhs(t + 0.5 * dt, &add(&p, 0.5 * dt, &k1), &addc(&h, 0.5 * dt, &g1));
        let (k3, g3) = rhs(t + 0.5 * dt, &add(&p, 0.5 * dt, &k2), &addc(&h, 0.5 * dt, &g2));
        let (k4, g4) = rhs(t + dt, &add(&p, dt, &k3), &addc(&h, dt, &g3));
        for i in 0..n {
            p[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        for j in 0..h.len() {
            h[j] += (g1[j] + (g2[j] + g3[j]) * 2.0 + g4[j]) * (dt / 6.0);
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidState(format!("populations diverged at t = {}", t + dt)));
        }
        let done = k + 1;
        if done == mark {
            at_mark = p.clone();
        }
        if done >= tail_start {
            tail.push(p.clone());
        }
        if done % stride == 0 || done == steps {
            times.push(done as f64 * dt);
            pops.push(p.clone());
        }
    }
    let steady_state: Vec<f64> = (0..n)
        .map(|i| kaiser_mean(&tail.iter().map(|v| v[i]).collect::<Vec<_>>()))
        .collect();
    let plateau_change = p.iter().zip(&at_mark).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(SecularRun {
        times,
        populations: pops,
        rates,
        steady_state,
        plateau_change,
        converged: plateau_change < 1e-5,
        secular_ratio,
        c0,
        kernel,
    })
}
