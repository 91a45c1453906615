//! Thermal spin-boson environments: eigenbasis correlation functions and
//! their non-ergodic offsets, closed-form references, synthetic ETH
//! environments, offset-bearing second-order master equations, molecular
//! ensembles with 1/f susceptibility, and correlation-function fitting.

// Negated float comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigencorr;
pub mod env_model;
pub mod error;
pub mod fitkit;
pub mod grid;
pub mod ensemble;
pub mod eth_synth;
pub mod master_eq;
pub mod oracles;

pub use eigencorr::{Beta, CorrelationSeries, DaviesClass, DaviesReport, EigenSystem, OffsetReport, ThermalState};
pub use ensemble::{EnsembleSpec, Lorentzian, Susceptibility};
pub use env_model::{ModeSet, MoleculeParams, OperatorMatrix};
pub use error::{Error, Result};
pub use eth_synth::EthSpec;
pub use fitkit::{FitOptions, FitResult};
pub use grid::TimeGrid;
pub use master_eq::{BathInput, MasterEqRun, SystemSpec};
pub use oracles::StretchedModel;
pub use num_complex::Complex64;
