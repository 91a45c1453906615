use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dynamics::MasterEqRun;
use super::SystemSpec;
use crate::eigencorr::kaiser_mean;

type Mat = DMatrix<Complex64>;

/// Plateau criterion `‖ρ(t_max) − ρ(0.9 t_max)‖_max`.
pub const PLATEAU_TOL: f64 = 1e-5;

pub(crate) fn min_eigenvalue(rho: &Mat) -> f64 {
    let h = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `½ Σ |λ_i(A − B)|` for Hermitian `A`, `B`.
pub fn trace_distance(a: &Mat, b: &Mat) -> f64 {
    let d = a - b;
    let h = (&d + d.adjoint()) * Complex64::new(0.5, 0.0);
    0.5 * SymmetricEigen::new(h).eigenvalues.iter().map(|x| x.abs()).sum::<f64>()
}

/// `e^{−βE_a} / Z` in the eigenbasis of `H_S`.
pub fn gibbs_populations(system: &SystemSpec, beta: f64) -> Vec<f64> {
    let e0 = system.energies[0];
    let w: Vec<f64> = system.energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateReport {
    /// Trace distance between the plateau and the Gibbs state.
    pub gibbs_distance: f64,
    pub converged: bool,
    pub plateau_change: f64,
    /// Trace distance between the plateaus of two runs from different initial states.
    pub initial_state_dependence: Option<f64>,
    /// Time-averaged Schrödinger-picture state (eigenbasis), row-major `(re, im)`.
    pub plateau: Vec<(f64, f64)>,
}

/// Kaiser-weighted Schrödinger-picture average over the trailing 10% of a run.
fn plateau(run: &MasterEqRun, system: &SystemSpec) -> (Mat, f64) {
    let n = system.dim();
    let len = run.states.len();
    let start = ((0.9 * len as f64).floor() as usize).min(len - 1);
    let states: Vec<Mat> = (start..len).map(|i| run.schrodinger(system, i)).collect();
    let avg = Mat::from_fn(n, n, |a, b| {
        let re: Vec<f64> = states.iter().map(|m| m[(a, b)].re).collect();
        let im: Vec<f64> = states.iter().map(|m| m[(a, b)].im).collect();
        Complex64::new(kaiser_mean(&re), kaiser_mean(&im))
    });
    let t_end = *run.times.last().unwrap();
    let mark = run
        .times
        .iter()
        .position(|&t| t >= 0.9 * t_end - 1e-12)
        .unwrap_or(len - 1);
    let change = (run.schrodinger(system, len - 1) - run.schrodinger(system, mark))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    (avg, change)
}

/// Distance of the plateau to Gibbs, plateau convergence, and (with a second
/// run) the dependence on the initial state.
pub fn steady_state_report(
    run: &MasterEqRun,
    other: Option<&MasterEqRun>,
    system: &SystemSpec,
    beta: f64,
) -> SteadyStateReport {
    let (avg, change) = plateau(run, system);
    let gibbs = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
        system.dim(),
        gibbs_populations(system, beta).into_iter().map(|x| Complex64::new(x, 0.0)),
    ));
    let dependence = other.map(|o| trace_distance(&avg, &plateau(o, system).0));
    SteadyStateReport {
        gibbs_distance: trace_distance(&avg, &gibbs),
        converged: change < PLATEAU_TOL && !run.diagnostics.unstable,
        plateau_change: change,
        initial_state_dependence: dependence,
        plateau: avg.transpose().iter().map(|z| (z.re, z.im)).collect(),
    }
}

/// Population-only counterpart for rate-equation runs.
pub fn population_report(
    steady: &[f64],
    other: Option<&[f64]>,
    system: &SystemSpec,
    beta: f64,
) -> (f64, Option<f64>) {
    let gibbs = gibbs_populations(system, beta);
    let l1 = |a: &[f64], b: &[f64]| 0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    (l1(steady, &gibbs), other.map(|o| l1(steady, o)))
}
