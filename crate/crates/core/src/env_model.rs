//! Truncated Hilbert-space models of a single dye molecule and of a pure
//! harmonic bath.
//!
//! Tensor ordering is fixed as `electronic ⊗ mode_1 ⊗ ... ⊗ mode_L`. A basis
//! index reads `s * (n_max+1)^L + m`, where `s = 0` is the spin-up state
//! (`σ^z = +1`) and mode 1 is the most significant digit of `m` in base
//! `n_max + 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_finite, Error, Result};

/// Default cap on the dense Hilbert-space dimension.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Default thermal tail threshold used by the automatic Fock truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Physical knobs of one environment molecule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoleculeParams {
    pub epsilon: f64,
    pub delta: f64,
    pub r: f64,
    pub omega_c: f64,
    pub n_modes: usize,
    /// Fock truncation per mode; `None` selects it from the thermal tail rule.
    pub n_max: Option<usize>,
    pub beta: f64,
}

impl MoleculeParams {
    pub fn rabi(&self) -> f64 {
        self.epsilon.hypot(self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("epsilon", self.epsilon)?;
        require_finite("delta", self.delta)?;
        require_finite("r", self.r)?;
        require_finite("omega_c", self.omega_c)?;
        if !(0.0..=1.0).contains(&self.r) {
            return Err(invalid("r", format!("must lie in [0, 1], got {}", self.r)));
        }
        if self.omega_c <= 0.0 {
            return Err(invalid("omega_c", format!("must be positive, got {}", self.omega_c)));
        }
        if self.beta.is_nan() || self.beta < 0.0 {
            return Err(invalid("beta", format!("must be >= 0, got {}", self.beta)));
        }
        if self.n_max == Some(0) {
            return Err(invalid("n_max", "must be >= 1"));
        }
        Ok(())
    }

    /// Mode set for this molecule (empty when `n_modes == 0`).
    pub fn modes(&self) -> Result<ModeSet> {
        if self.n_modes == 0 {
            return Ok(ModeSet::default());
        }
        discretize_spectral_density(self.r, self.omega_c, self.n_modes)
    }

    /// Fock truncation, either fixed or from the thermal tail rule.
    pub fn resolved_n_max(&self, modes: &ModeSet, tail_tol: f64) -> Result<usize> {
        match self.n_max {
            Some(n) => Ok(n),
            None => match modes.lowest_frequency() {
                None => Ok(1),
                Some(w) => truncation_by_tail(self.beta, w, tail_tol),
            },
        }
    }
}

/// Discrete vibrational modes `(ω_λ, g_λ)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub omega: Vec<f64>,
    pub g: Vec<f64>,
}

impl ModeSet {
    pub fn new(omega: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if omega.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: omega.len(),
                found: g.len(),
            });
        }
        for w in omega.windows(2) {
            if w[1] <= w[0] {
                return Err(invalid("omega", "frequencies must be strictly increasing"));
            }
        }
        if omega.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(invalid("omega", "frequencies must be positive and finite"));
        }
        if g.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(invalid("g", "couplings must be nonnegative and finite"));
        }
        Ok(Self { omega, g })
    }

    pub fn single(omega: f64, g: f64) -> Result<Self> {
        Self::new(vec![omega], vec![g])
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn lowest_frequency(&self) -> Option<f64> {
        self.omega.first().copied()
    }

    pub fn total_weight(&self) -> f64 {
        self.g.iter().map(|g| g * g).sum()
    }
}

/// Ohmic spectral density with hard cutoff at `2 ω_c`.
pub fn ohmic_density(r: f64, omega_c: f64, omega: f64) -> f64 {
    if omega <= 0.0 || omega > 2.0 * omega_c {
        0.0
    } else {
        r * r * (omega / omega_c) * (-omega / omega_c).exp()
    }
}

/// Uniform discretization `ω_λ = λ Δω`, `g_λ = sqrt(J(ω_λ) Δω)`, `Δω = 2ω_c / L`.
pub fn discretize_spectral_density(r: f64, omega_c: f64, n_modes: usize) -> Result<ModeSet> {
    if n_modes == 0 {
        return Err(invalid("n_modes", "need at least one mode"));
    }
    if !(omega_c.is_finite() && omega_c > 0.0) {
        return Err(invalid("omega_c", format!("must be positive, got {omega_c}")));
    }
    require_finite("r", r)?;
    let dw = 2.0 * omega_c / n_modes as f64;
    let omega: Vec<f64> = (1..=n_modes).map(|l| l as f64 * dw).collect();
    let g = omega
        .iter()
        .map(|&w| (ohmic_density(r, omega_c, w) * dw).sqrt())
        .collect();
    ModeSet::new(omega, g)
}

/// Smallest `n_max >= 1` whose single-mode thermal tail `Σ_{n>n_max} p_n`
/// falls below `tol`.
pub fn truncation_by_tail(beta: f64, omega: f64, tol: f64) -> Result<usize> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid("tail_tol", format!("must lie in (0, 1), got {tol}")));
    }
    let x = beta * omega;
    if !(x > 0.0) {
        return Err(invalid(
            "n_max",
            "automatic truncation needs beta * omega > 0; set n_max explicitly",
        ));
    }
    if x.is_infinite() {
        return Ok(1);
    }
    // Tail above n_max is exp(-x (n_max + 1)).
    let n = ((-tol.ln()) / x).floor() as usize;
    Ok(n.max(1))
}

/// Dense complex operator with a label.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub data: DMatrix<Complex64>,
    pub label: String,
}

impl OperatorMatrix {
    pub fn new(data: DMatrix<Complex64>, label: impl Into<String>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                found: data.ncols(),
            });
        }
        Ok(Self {
            data,
            label: label.into(),
        })
    }

    pub fn from_real(data: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        Self::new(data.map(|x| Complex64::new(x, 0.0)), label)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// `max |M_ij - conj(M_ji)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        hermiticity_residual(&self.data)
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }
}

pub fn hermiticity_residual(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn checked_dim(n_max: usize, n_modes: usize, spin: bool, cap: usize) -> Result<usize> {
    let base = n_max + 1;
    let mut dim: usize = if spin { 2 } else { 1 };
    for _ in 0..n_modes {
        dim = dim.checked_mul(base).ok_or(Error::DimensionCap {
            dim: usize::MAX,
            cap,
        })?;
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
    }
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    Ok(dim)
}

/// Diagonal of `Σ ω_λ b†b` and the matrix of `Σ g_λ (b_λ + b_λ†)` on the mode space.
fn mode_operators(modes: &ModeSet, n_max: usize, dim_modes: usize) -> (Vec<f64>, DMatrix<f64>) {
    let base = n_max + 1;
    let n_modes = modes.len();
    let mut energy = vec![0.0; dim_modes];
    let mut coupling = DMatrix::<f64>::zeros(dim_modes, dim_modes);
    for (idx, e) in energy.iter_mut().enumerate() {
        let mut rest = idx;
        let mut stride = dim_modes;
        for l in 0..n_modes {
            stride /= base;
            let n = rest / stride;
            rest %= stride;
            *e += modes.omega[l] * n as f64;
            if n < n_max {
                let amp = modes.g[l] * ((n + 1) as f64).sqrt();
                let up = idx + stride;
                coupling[(up, idx)] += amp;
                coupling[(idx, up)] += amp;
            }
        }
    }
    (energy, coupling)
}

/// `H = ½(−Δσ^x + εσ^z) ⊗ 1 + Σ ω_λ b†b + σ^z ⊗ Σ g_λ (b_λ + b_λ†)`.
pub fn build_single_molecule_hamiltonian(
    params: &MoleculeParams,
    modes: &ModeSet,
    n_max: usize,
    dim_cap: usize,
) -> Result<OperatorMatrix> {
    params.validate()?;
    if n_max == 0 && !modes.is_empty() {
        return Err(invalid("n_max", "must be >= 1"));
    }
    let dim = checked_dim(n_max, modes.len(), true, dim_cap)?;
    let dm = dim / 2;
    let (energy, coupling) = mode_operators(modes, n_max, dm);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for m in 0..dm {
        h[(m, m)] = 0.5 * params.epsilon + energy[m];
        h[(dm + m, dm + m)] = -0.5 * params.epsilon + energy[m];
        h[(m, dm + m)] = -0.5 * params.delta;
        h[(dm + m, m)] = -0.5 * params.delta;
    }
    for i in 0..dm {
        for j in 0..dm {
            let c = coupling[(i, j)];
            if c != 0.0 {
                h[(i, j)] += c;
                h[(dm + i, dm + j)] -= c;
            }
        }
    }
    OperatorMatrix::from_real(h, "H_E")
}

/// `B = σ^x ⊗ 1` on a molecule space with `n_modes` modes truncated at `n_max`.
pub fn build_coupling_operator(n_max: usize, n_modes: usize, dim_cap: usize) -> Result<OperatorMatrix> {
    let dim = checked_dim(n_max, n_modes, true, dim_cap)?;
    let dm = dim / 2;
    let mut b = DMatrix::<f64>::zeros(dim, dim);
    for m in 0..dm {
        b[(m, dm + m)] = 1.0;
        b[(dm + m, m)] = 1.0;
    }
    OperatorMatrix::from_real(b, "B")
}

/// Spin-free bath: `H = Σ ω_λ b†b`, `B = Σ g_λ (b_λ + b_λ†)`.
pub fn build_harmonic_bath(
    modes: &ModeSet,
    n_max: usize,
    dim_cap: usize,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if modes.is_empty() {
        return Err(invalid("modes", "harmonic bath needs at least one mode"));
    }
    if n_max == 0 {
        return Err(invalid("n_max", "must be >= 1"));
    }
    let dim = checked_dim(n_max, modes.len(), false, dim_cap)?;
    let (energy, coupling) = mode_operators(modes, n_max, dim);
    let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(energy));
    Ok((
        OperatorMatrix::from_real(h, "H_bath")?,
        OperatorMatrix::from_real(coupling, "B_bath")?,
    ))
}

/// Hamiltonian and coupling operator for a molecule, resolving modes and truncation.
pub fn build_molecule(
    params: &MoleculeParams,
    tail_tol: f64,
    dim_cap: usize,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    params.validate()?;
    let modes = params.modes()?;
    let n_max = params.resolved_n_max(&modes, tail_tol)?;
    let h = build_single_molecule_hamiltonian(params, &modes, n_max, dim_cap)?;
    let b = build_coupling_operator(n_max, modes.len(), dim_cap)?;
    Ok((h, b))
}
