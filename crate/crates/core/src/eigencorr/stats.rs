use serde::{Deserialize, Serialize};

use super::{EigenSystem, ThermalState};
use crate::error::{invalid, Error, Result};

/// Fraction of the final participation sum that defines `ΔE_β`.
pub const PARTICIPATION_THRESHOLD: f64 = 1.0 - 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Thermal weight falling in each bin.
    pub weights: Vec<f64>,
}

/// Diagonal elements `B^kk` against rescaled energy, with thermal participation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BkkDistribution {
    pub rescaled_energy: Vec<f64>,
    pub bkk: Vec<f64>,
    pub weights: Vec<f64>,
    pub histogram: Histogram,
    /// `F_β(N) = Σ_{k≤N} η_k (B^kk)²`.
    pub participation: Vec<f64>,
    /// Rescaled energy at which `F_β` first reaches 99.9% of its final value.
    pub participation_range: f64,
}

pub fn bkk_statistics(eig: &EigenSystem, thermal: &ThermalState, bins: usize) -> Result<BkkDistribution> {
    let d = eig.dim();
    if thermal.weights.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: thermal.weights.len(),
        });
    }
    if bins == 0 {
        return Err(invalid("bins", "need at least one bin"));
    }
    let e0 = eig.energies[0];
    let span = eig.spectral_range();
    let rescaled: Vec<f64> = eig
        .energies
        .iter()
        .map(|e| if span > 0.0 { (e - e0) / span } else { 0.0 })
        .collect();
    let bkk: Vec<f64> = (0..d).map(|k| eig.b_eig[(k, k)].re).collect();

    let mut acc = 0.0;
    let participation: Vec<f64> = bkk
        .iter()
        .zip(&thermal.weights)
        .map(|(b, w)| {
            acc += w * b * b;
            acc
        })
        .collect();
    let total = acc;
    let idx = participation
        .iter()
        .position(|&f| f >= PARTICIPATION_THRESHOLD * total)
        .unwrap_or(d - 1);

    let lo = bkk.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = bkk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi - lo > 1e-12 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    let mut weights = vec![0.0; bins];
    for (b, w) in bkk.iter().zip(&thermal.weights) {
        let i = (((b - lo) / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
        weights[i] += w;
    }

    Ok(BkkDistribution {
        rescaled_energy: rescaled.clone(),
        bkk,
        weights: thermal.weights.clone(),
        histogram: Histogram { edges, counts, weights },
        participation,
        participation_range: rescaled[idx],
    })
}
