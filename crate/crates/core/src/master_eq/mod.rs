//! Second-order weak-coupling dynamics driven by a correlation function with
//! an offset, `C(t) = α(t) + C_0`.
//!
//! All dynamics run in the interaction picture and in the eigenbasis of
//! `H_S`. The equations are the Born second-order terms
//! `dρ/dt = ∫₀^t ds C(t−s) [S(s) ρ(·), S(t)] + h.c.`; the decaying part `α`
//! enters Markovian through `Γ(ω) = γ(ω) + iΣ(ω)`, while the offset keeps its
//! memory integral (convoluted) or is evaluated with `ρ(t)` (time-local).

mod bath;
mod dynamics;
mod report;
mod secular;

pub use bath::{half_fourier, BathInput, HalfFourier, RateMode};
pub use dynamics::{evolve_convoluted, evolve_time_local, EvolveOptions, Integrator, MasterEqRun, RunDiagnostics};
pub use report::{gibbs_populations, population_report, steady_state_report, trace_distance, SteadyStateReport, PLATEAU_TOL};
pub use secular::{secular_rate_equations, stationary_populations, transition_rates, OffsetKernel, SecularOptions, SecularRun};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::eigencorr::diagonalize;
use crate::env_model::OperatorMatrix;
use crate::error::{invalid, Error, Result};

/// Tolerance below which two Bohr frequencies share an accumulator.
pub const BOHR_TOL: f64 = 1e-10;

/// System Hamiltonian and coupling operator, resolved in the eigenbasis of `H_S`.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    /// Eigenvalues `E_a`, ascending.
    pub energies: Vec<f64>,
    /// Eigenvectors of `H_S` (columns) in the input basis.
    pub vectors: DMatrix<Complex64>,
    /// `⟨a|S|b⟩`.
    pub s_eig: DMatrix<Complex64>,
    /// Distinct Bohr frequencies.
    pub frequencies: Vec<f64>,
    /// `freq_index[(a, b)]` indexes `frequencies` for `E_a − E_b`.
    pub freq_index: DMatrix<usize>,
}

impl SystemSpec {
    pub fn new(h_s: &DMatrix<Complex64>, s: &DMatrix<Complex64>) -> Result<Self> {
        let h = OperatorMatrix::new(h_s.clone(), "H_S")?;
        let s = OperatorMatrix::new(s.clone(), "S")?;
        let eig = diagonalize(&h, &s)?;
        let vectors = eig.vectors.clone().expect("diagonalize stores eigenvectors");
        Ok(Self::from_parts(eig.energies, vectors, eig.b_eig))
    }

    /// `H̃_S = H_S + ⟨B⟩ S`, absorbing the first-order bath shift.
    pub fn renormalized(h_s: &DMatrix<Complex64>, s: &DMatrix<Complex64>, mean_b: f64) -> Result<Self> {
        Self::new(&(h_s + s * Complex64::new(mean_b, 0.0)), s)
    }

    /// System given directly in its eigenbasis.
    pub fn diagonal(energies: Vec<f64>, s_eig: DMatrix<Complex64>) -> Result<Self> {
        let n = energies.len();
        if s_eig.nrows() != n || s_eig.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s_eig.nrows(),
            });
        }
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("energies", "must be ascending"));
        }
        Ok(Self::from_parts(energies, DMatrix::identity(n, n), s_eig))
    }

    fn from_parts(energies: Vec<f64>, vectors: DMatrix<Complex64>, s_eig: DMatrix<Complex64>) -> Self {
        let n = energies.len();
        let mut all: Vec<f64> = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                all.push(energies[a] - energies[b]);
            }
        }
        let mut frequencies = all.clone();
        frequencies.sort_by(f64::total_cmp);
        frequencies.dedup_by(|x, y| (*x - *y).abs() < BOHR_TOL);
        let freq_index = DMatrix::from_fn(n, n, |a, b| {
            let w = energies[a] - energies[b];
            frequencies
                .iter()
                .position(|&f| (f - w).abs() < BOHR_TOL)
                .expect("frequency present")
        });
        Self {
            energies,
            vectors,
            s_eig,
            frequencies,
            freq_index,
        }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn bohr(&self, a: usize, b: usize) -> f64 {
        self.energies[a] - self.energies[b]
    }

    pub fn max_bohr(&self) -> f64 {
        self.spectral_range()
    }

    pub fn spectral_range(&self) -> f64 {
        self.energies.last().unwrap_or(&0.0) - self.energies.first().unwrap_or(&0.0)
    }

    /// Input-basis operator to the eigenbasis.
    pub fn to_eigenbasis(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.vectors.adjoint() * m * &self.vectors
    }

    /// Eigenbasis operator back to the input basis.
    pub fn from_eigenbasis(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        &self.vectors * m * self.vectors.adjoint()
    }

    /// Interaction-picture state to the Schrödinger picture (eigenbasis).
    pub fn to_schrodinger(&self, rho: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
        DMatrix::from_fn(rho.nrows(), rho.ncols(), |a, b| {
            rho[(a, b)] * Complex64::from_polar(1.0, -self.bohr(a, b) * t)
        })
    }
}

/// Validates a density matrix given in the input basis.
pub fn check_density_matrix(rho: &DMatrix<Complex64>, dim: usize) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho.nrows(),
        });
    }
    let herm = crate::env_model::hermiticity_residual(rho);
    if herm > 1e-10 {
        return Err(Error::InvalidState(format!("not Hermitian (residual {herm:e})")));
    }
    let tr: Complex64 = rho.diagonal().iter().sum();
    if (tr - 1.0).norm() > 1e-10 {
        return Err(Error::InvalidState(format!("trace {tr} != 1")));
    }
    let min = report::min_eigenvalue(rho);
    if min < -1e-10 {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn jump_operators_reconstruct_s() {
        let sys = random_system(4, 3);
        let back = sys.from_eigenbasis(&sys.s_eig);
        let again = sys.to_eigenbasis(&back);
        assert!((again - &sys.s_eig).iter().all(|z| z.norm() < 1e-12));
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(sys.bohr(a, b), -sys.bohr(b, a));
                let f = sys.frequencies[sys.freq_index[(a, b)]];
                assert!((f - sys.bohr(a, b)).abs() < BOHR_TOL);
            }
        }
    }

    #[test]
    fn two_level_frequencies() {
        let sys = two_level(1.0, 0.0);
        assert_eq!(sys.frequencies.len(), 3);
        assert!((sys.energies[1] - sys.energies[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn density_validation() {
        let good = DMatrix::from_row_slice(2, 2, &[c(0.2), c(0.3), c(0.3), c(0.8)]);
        assert!(check_density_matrix(&good, 2).is_ok());
        let bad_trace = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.0), c(0.0), c(0.6)]);
        assert!(check_density_matrix(&bad_trace, 2).is_err());
        let negative = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.9), c(0.9), c(0.5)]);
        assert!(check_density_matrix(&negative, 2).is_err());
    }
}
