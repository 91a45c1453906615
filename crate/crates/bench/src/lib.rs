//! Fixtures shared by the benchmarks.

use bathcorr::eigencorr::{diagonalize, thermal_weights};
use bathcorr::env_model::{build_molecule, DEFAULT_DIM_CAP, DEFAULT_TAIL_TOL};
use bathcorr::{Beta, EigenSystem, MoleculeParams, OperatorMatrix, ThermalState};

pub fn molecule(n_modes: usize, n_max: usize) -> MoleculeParams {
    MoleculeParams {
        epsilon: 1.0,
        delta: 2.5,
        r: 0.25,
        omega_c: 1.0,
        n_modes,
        n_max: Some(n_max),
        beta: 1.0,
    }
}

pub fn operators(params: &MoleculeParams) -> (OperatorMatrix, OperatorMatrix) {
    build_molecule(params, DEFAULT_TAIL_TOL, DEFAULT_DIM_CAP).expect("valid molecule")
}

pub fn solved(params: &MoleculeParams) -> (EigenSystem, ThermalState) {
    let (h, b) = operators(params);
    let eig = diagonalize(&h, &b).expect("diagonalize");
    let thermal = thermal_weights(&eig, Beta::Finite(params.beta)).expect("weights");
    (eig, thermal)
}
