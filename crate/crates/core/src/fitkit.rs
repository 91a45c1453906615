//! Least-squares extraction of the decay parameters of `Re C(t)`.
//!
//! The optimizer is a Levenberg-Marquardt loop in unconstrained coordinates
//! `(A_0, ω_0, ln B_0, logit a, C̃_0, ln T_0)`, with `a` mapped into
//! `[A_MIN, A_MAX]`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::TimeGrid;
use crate::oracles::{StretchedModel, WeakCouplingModel};

pub const A_MIN: f64 = 0.5;
pub const A_MAX: f64 = 3.0;
pub const MIN_SAMPLES: usize = 64;
/// `T_0` is reported infinite when `t_max / T_0` falls below this.
pub const INFINITE_T0_RATIO: f64 = 1e-3;

const NP: usize = 6;
const MULTI_START_SEED: u64 = 0x05ee_df17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    Auto,
    Manual(StretchedModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub init: InitStrategy,
    pub max_iter: usize,
    /// Number of starts, the first being the unperturbed initial guess.
    pub starts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            init: InitStrategy::Auto,
            max_iter: 2000,
            starts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: StretchedModel,
    pub t0_infinite: bool,
    pub rms: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Order: `A_0, ω_0, B_0, a, C̃_0, T_0`.
    pub covariance: Vec<Vec<f64>>,
    pub initial: StretchedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakCouplingFit {
    pub model: WeakCouplingModel,
    pub rms: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Order: `Ã_0, Re λ_0, Im λ_0, C_0, λ, const`.
    pub covariance: Vec<Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn a_of(x: f64) -> f64 {
    A_MIN + (A_MAX - A_MIN) * sigmoid(x)
}

fn logit_a(a: f64) -> f64 {
    let u = ((a - A_MIN) / (A_MAX - A_MIN)).clamp(1e-6, 1.0 - 1e-6);
    (u / (1.0 - u)).ln()
}

/// Value and gradient of the stretched model in internal coordinates.
fn stretched_point(p: &[f64], t: f64) -> (f64, [f64; NP]) {
    let (amp, w, b, a, c, tt) = (p[0], p[1], p[2].exp(), a_of(p[3]), p[4], p[5].exp());
    let ta = if t > 0.0 { t.powf(a) } else { 0.0 };
    let env = (-b * ta).exp();
    let (s, co) = (w * t).sin_cos();
    let osc = amp * co * env;
    let decay = (-t / tt).exp();
    let tail = c * decay;
    let da = (A_MAX - A_MIN) * sigmoid(p[3]) * (1.0 - sigmoid(p[3]));
    let dla = if t > 0.0 { -osc * b * ta * t.ln() * da } else { 0.0 };
    (
        osc + tail,
        [co * env, -amp * t * s * env, -osc * b * ta, dla, decay, tail * t / tt],
    )
}

fn weak_point(p: &[f64], t: f64) -> (f64, [f64; NP]) {
    let (amp, g, w, c, l, k) = (p[0], p[1].exp(), p[2], p[3], p[4].exp(), p[5]);
    let env = (-g * t).exp();
    let (s, co) = (w * t).sin_cos();
    let osc = amp * env * co;
    let decay = (-l * t).exp();
    (
        osc + c * decay + k,
        [env * co, -osc * g * t, -amp * env * t * s, decay, -c * decay * l * t, 1.0],
    )
}

struct LmOutcome {
    params: Vec<f64>,
    cost: f64,
    converged: bool,
    iterations: usize,
    jtj: DMatrix<f64>,
}

fn residuals(model: fn(&[f64], f64) -> (f64, [f64; NP]), p: &[f64], t: &[f64], y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = t.len();
    let mut r = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, NP);
    for i in 0..n {
        let (f, g) = model(p, t[i]);
        r[i] = f - y[i];
        for k in 0..NP {
            j[(i, k)] = g[k];
        }
    }
    (r, j)
}

fn levenberg_marquardt(
    model: fn(&[f64], f64) -> (f64, [f64; NP]),
    p0: &[f64],
    t: &[f64],
    y: &[f64],
    max_iter: usize,
) -> LmOutcome {
    let mut p = p0.to_vec();
    let (mut r, mut j) = residuals(model, &p, t, y);
    let mut cost = 0.5 * r.norm_squared();
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() <= 1e-15 * (1.0 + cost) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while mu < 1e16 {
            let mut a = jtj.clone();
            for k in 0..NP {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let (rt, jt) = residuals(model, &trial, t, y);
            let ct = 0.5 * rt.norm_squared();
            if ct.is_finite() && ct < cost {
                let gain = cost - ct;
                let small = step.amax() <= 1e-12 * (1.0 + p.iter().fold(0.0f64, |m, x| m.max(x.abs())));
                p = trial;
                r = rt;
                j = jt;
                cost = ct;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if gain <= 1e-15 * cost || small {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            // No descent direction left at working precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    let jtj = j.transpose() * &j;
    LmOutcome {
        params: p,
        cost,
        converged,
        iterations,
        jtj,
    }
}

/// Parameter covariance `s² (JᵀJ)⁻¹` mapped through the coordinate transform `d`.
fn covariance(out: &LmOutcome, n: usize, d: [f64; NP]) -> Vec<Vec<f64>> {
    let dof = n.saturating_sub(NP).max(1) as f64;
    let s2 = 2.0 * out.cost / dof;
    let inv = out
        .jtj
        .clone()
        .pseudo_inverse(1e-14 * out.jtj.amax().max(1e-300))
        .unwrap_or_else(|_| DMatrix::from_element(NP, NP, f64::NAN));
    (0..NP)
        .map(|a| (0..NP).map(|b| s2 * inv[(a, b)] * d[a] * d[b]).collect())
        .collect()
}

fn check_input(grid: &TimeGrid, y: &[f64]) -> Result<()> {
    if y.len() != grid.len {
        return Err(invalid("series", "length does not match the grid"));
    }
    if y.len() < MIN_SAMPLES {
        return Err(invalid("series", format!("need at least {MIN_SAMPLES} samples, got {}", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("series", "non-finite sample"));
    }
    Ok(())
}

fn is_constant(y: &[f64]) -> bool {
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0)
}

/// Slope and intercept of a least-squares line.
fn line_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Frequency of the largest peak of `|Σ r_i e^{iωt_i}|` (excluding ω = 0),
/// refined by a parabola through the neighbouring samples.
fn dominant_frequency(t: &[f64], r: &[f64], dt: f64) -> f64 {
    let t_max = t[t.len() - 1];
    let nyquist = std::f64::consts::PI / dt;
    let dw = std::f64::consts::PI / (4.0 * t_max);
    let k_max = (nyquist / dw).floor() as usize;
    let power = |w: f64| {
        let (step_s, step_c) = (w * dt).sin_cos();
        let (mut s, mut c) = (0.0f64, 1.0f64);
        let (mut re, mut im) = (0.0, 0.0);
        for &v in r {
            re += v * c;
            im += v * s;
            let c2 = c * step_c - s * step_s;
            s = s * step_c + c * step_s;
            c = c2;
        }
        re * re + im * im
    };
    let spectrum: Vec<f64> = (0..=k_max).map(|k| power(k as f64 * dw)).collect();
    let mut best = 1;
    for k in 2..spectrum.len().saturating_sub(1) {
        if spectrum[k] > spectrum[best] && spectrum[k] >= spectrum[k - 1] && spectrum[k] >= spectrum[k + 1] {
            best = k;
        }
    }
    if best + 1 < spectrum.len() {
        let (a, b, c) = (spectrum[best - 1], spectrum[best], spectrum[best + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            let shift = 0.5 * (a - c) / den;
            return (best as f64 + shift.clamp(-0.5, 0.5)) * dw;
        }
    }
    best as f64 * dw
}

/// Automatic initial guess.
pub fn initial_guess(grid: &TimeGrid, y: &[f64]) -> Result<StretchedModel> {
    check_input(grid, y)?;
    let t = grid.times();
    let n = y.len();
    let t_max = grid.t_max();

    // Tail: log-linear fit over the trailing half when it stays positive.
    let half = n / 2;
    let t0 = if y[half..].iter().all(|&v| v > 0.0) {
        let ln: Vec<f64> = y[half..].iter().map(|v| v.ln()).collect();
        match line_fit(&t[half..], &ln) {
            Some((slope, _)) if slope < 0.0 => -1.0 / slope,
            _ => 100.0 * t_max,
        }
    } else {
        100.0 * t_max
    };
    let w20 = (n / 5).max(1);
    let tail_mean = y[n - w20..].iter().sum::<f64>() / w20 as f64;
    let decay_mean = t[n - w20..].iter().map(|s| (-s / t0).exp()).sum::<f64>() / w20 as f64;
    let c0 = tail_mean / decay_mean;

    let osc: Vec<f64> = t.iter().zip(y).map(|(s, v)| v - c0 * (-s / t0).exp()).collect();
    let a0 = osc[0];
    let omega0 = dominant_frequency(&t, &osc, grid.dt);

    // Envelope from local maxima of |osc|.
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut floor_hit = false;
    if a0.abs() > 0.0 {
        for i in 1..n - 1 {
            let v = osc[i].abs();
            if v >= osc[i - 1].abs() && v >= osc[i + 1].abs() {
                let env = v / a0.abs();
                if env < 1e-3 {
                    floor_hit = true;
                    break;
                }
                if env < 0.95 {
                    lx.push(t[i].ln());
                    ly.push((-env.ln()).ln());
                }
            }
        }
    }
    let (b0, a) = match line_fit(&lx, &ly) {
        Some((slope, icept)) if lx.len() >= 2 => (icept.exp(), slope.clamp(A_MIN + 0.05, A_MAX - 0.05)),
        _ if floor_hit => (10.0 / t_max, 1.0),
        _ => (1e-3 / t_max, 1.0),
    };
    Ok(StretchedModel {
        a0,
        omega0,
        b0,
        a,
        c0,
        t0: Some(t0),
    })
}

fn internal(m: &StretchedModel, t_max: f64) -> [f64; NP] {
    [
        m.a0,
        m.omega0,
        m.b0.max(1e-300).ln(),
        logit_a(m.a),
        m.c0,
        m.t0.unwrap_or(1e6 * t_max).ln(),
    ]
}

fn perturbed(base: &[f64; NP], rng: &mut ChaCha8Rng) -> [f64; NP] {
    let mut z = || -> f64 { StandardNormal.sample(rng) };
    [
        base[0],
        base[1] * (1.0 + 0.03 * z()),
        base[2] + 0.5 * z(),
        base[3] + 0.5 * z(),
        base[4] * (1.0 + 0.1 * z()),
        base[5] + 0.5 * z(),
    ]
}

/// Fits `A_0 cos(ω_0 t) e^{−B_0 t^a} + C̃_0 e^{−t/T_0}` to a real series.
pub fn fit_correlation(grid: &TimeGrid, y: &[f64], opts: &FitOptions) -> Result<FitResult> {
    check_input(grid, y)?;
    let t = grid.times();
    let t_max = grid.t_max();
    if is_constant(y) {
        let model = StretchedModel {
            a0: 0.0,
            omega0: 0.0,
            b0: 0.0,
            a: 1.0,
            c0: y.iter().sum::<f64>() / y.len() as f64,
            t0: None,
        };
        return Ok(FitResult {
            model,
            t0_infinite: true,
            rms: 0.0,
            converged: true,
            iterations: 0,
            covariance: vec![vec![0.0; NP]; NP],
            initial: model,
        });
    }
    let initial = match opts.init {
        InitStrategy::Auto => initial_guess(grid, y)?,
        InitStrategy::Manual(m) => m,
    };
    let base = internal(&initial, t_max);
    let mut rng = ChaCha8Rng::seed_from_u64(MULTI_START_SEED);
    let mut best: Option<LmOutcome> = None;
    for s in 0..opts.starts.max(1) {
        let start = if s == 0 { base } else { perturbed(&base, &mut rng) };
        let out = levenberg_marquardt(stretched_point, &start, &t, y, opts.max_iter);
        if best.as_ref().is_none_or(|b| out.cost < b.cost) {
            best = Some(out);
        }
    }
    let out = best.expect("at least one start");
    let p = &out.params;
    let t0 = p[5].exp();
    let infinite = t_max / t0 < INFINITE_T0_RATIO;
    let mut model = StretchedModel {
        a0: p[0],
        omega0: p[1],
        b0: p[2].exp(),
        a: a_of(p[3]),
        c0: p[4],
        t0: (!infinite).then_some(t0),
    };
    if model.omega0 < 0.0 {
        model.omega0 = -model.omega0;
    }
    let da = (A_MAX - A_MIN) * sigmoid(p[3]) * (1.0 - sigmoid(p[3]));
    let covariance = covariance(&out, y.len(), [1.0, 1.0, model.b0, da, 1.0, t0]);
    Ok(FitResult {
        model,
        t0_infinite: infinite,
        rms: (2.0 * out.cost / y.len() as f64).sqrt(),
        converged: out.converged,
        iterations: out.iterations,
        covariance,
        initial,
    })
}

/// Fits `Ã_0 e^{−Re λ_0 t} cos(Im λ_0 t) + C_0 e^{−λt} + const`, seeded from
/// the stretched-model initial guess.
pub fn fit_weak_coupling(grid: &TimeGrid, y: &[f64], opts: &FitOptions) -> Result<WeakCouplingFit> {
    check_input(grid, y)?;
    let t = grid.times();
    let g = initial_guess(grid, y)?;
    let t0 = g.t0.unwrap_or(100.0 * grid.t_max());
    let start = [
        g.a0,
        g.b0.powf(1.0 / g.a).max(1e-12).ln(),
        g.omega0,
        0.5 * g.c0,
        (1.0 / t0).ln(),
        0.5 * g.c0,
    ];
    let out = levenberg_marquardt(weak_point, &start, &t, y, opts.max_iter);
    let p = &out.params;
    let model = WeakCouplingModel {
        amplitude: p[0],
        lambda0_re: p[1].exp(),
        lambda0_im: p[2].abs(),
        c0: p[3],
        lambda: p[4].exp(),
        constant: p[5],
    };
    let covariance = covariance(&out, y.len(), [1.0, model.lambda0_re, 1.0, 1.0, model.lambda, 1.0]);
    Ok(WeakCouplingFit {
        model,
        rms: (2.0 * out.cost / y.len() as f64).sqrt(),
        converged: out.converged,
        iterations: out.iterations,
        covariance,
    })
}
