use serde::{Deserialize, Serialize};

use super::CorrelationSeries;
use crate::error::{invalid, Result};

/// Relative change per doubling below which the integral counts as converged.
pub const DOUBLING_TOL: f64 = 0.01;
/// Fitted growth exponent above which the integral counts as divergent.
pub const GROWTH_THRESHOLD: f64 = 0.5;

const MAX_DOUBLINGS: usize = 6;
const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DaviesClass {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaviesReport {
    pub class: DaviesClass,
    pub epsilon_exp: f64,
    pub horizons: Vec<f64>,
    /// Partial integrals `I(T) = ∫₀^T |C(t)| (1+t)^ε dt`.
    pub integrals: Vec<f64>,
    /// Relative change over the last doubling.
    pub last_change: f64,
    /// Slope of `ln I` against `ln T`.
    pub growth_exponent: f64,
    pub doubling_tol: f64,
    pub growth_threshold: f64,
}

/// Integrability test of `|C(t)| (1+t)^ε` over doubling horizons up to
/// `horizon` (default: the end of the series).
pub fn davies_diagnostic(series: &CorrelationSeries, epsilon_exp: f64, horizon: Option<f64>) -> Result<DaviesReport> {
    if !(epsilon_exp > 0.0 && epsilon_exp.is_finite()) {
        return Err(invalid("epsilon_exp", format!("must be positive, got {epsilon_exp}")));
    }
    let dt = series.grid.dt;
    let t_end = horizon.unwrap_or(series.grid.t_max()).min(series.grid.t_max());
    let last = (t_end / dt + 1e-9).floor() as usize;
    if last + 1 < MIN_POINTS {
        return Err(invalid("horizon", "series too short for the diagnostic"));
    }
    // Cumulative trapezoid of the integrand.
    let f: Vec<f64> = (0..=last)
        .map(|i| series.values[i].norm() * (1.0 + i as f64 * dt).powf(epsilon_exp))
        .collect();
    let mut cum = vec![0.0; last + 1];
    for i in 1..=last {
        cum[i] = cum[i - 1] + 0.5 * dt * (f[i] + f[i - 1]);
    }
    let mut idx = vec![last];
    while idx.len() <= MAX_DOUBLINGS {
        let next = idx[idx.len() - 1] / 2;
        if next + 1 < MIN_POINTS {
            break;
        }
        idx.push(next);
    }
    idx.reverse();
    let horizons: Vec<f64> = idx.iter().map(|&i| i as f64 * dt).collect();
    let integrals: Vec<f64> = idx.iter().map(|&i| cum[i]).collect();
    let n = integrals.len();
    let last_change = if n >= 2 && integrals[n - 1] > 0.0 {
        (integrals[n - 1] - integrals[n - 2]).abs() / integrals[n - 1]
    } else {
        f64::INFINITY
    };
    let growth_exponent = loglog_fit(&horizons, &integrals);
    let class = if integrals[n - 1] == 0.0 || last_change < DOUBLING_TOL {
        DaviesClass::Convergent
    } else if growth_exponent > GROWTH_THRESHOLD {
        DaviesClass::Divergent
    } else {
        DaviesClass::Inconclusive
    };
    let last_change = if integrals[n - 1] == 0.0 { 0.0 } else { last_change };
    Ok(DaviesReport {
        class,
        epsilon_exp,
        horizons,
        integrals,
        last_change,
        growth_exponent,
        doubling_tol: DOUBLING_TOL,
        growth_threshold: GROWTH_THRESHOLD,
    })
}

fn loglog_fit(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
