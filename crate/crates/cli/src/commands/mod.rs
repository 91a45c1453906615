mod correlation;
mod ensemble;
mod eth;
mod fit;
mod master_eq;
mod oracle;

use std::fmt;
use std::io;

use bathcorr::eigencorr::{diagonalize, thermal_weights, EigenSystem, ThermalState};
use bathcorr::env_model::{build_molecule, DEFAULT_DIM_CAP, DEFAULT_TAIL_TOL};
use bathcorr::{Beta, CorrelationSeries, MoleculeParams, TimeGrid};
use clap::Subcommand;
use serde::Serialize;

use crate::config::{Config, ConfigError, ConfigResult};
use crate::output::{header, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    /// Correlation function and offset of a single molecule
    Correlation,
    /// Offset over a grid of inverse temperatures and coupling strengths
    OffsetScan,
    /// Diagonal coupling elements against energy
    BkkStats,
    /// Closed-form reference curves
    Oracle,
    /// Offsets of synthetic ETH environments across sizes and seeds
    EthDemo,
    /// Reduced dynamics with an offset-bearing bath
    MasterEq,
    /// Ensemble-averaged correlation and low-frequency susceptibility
    Ensemble,
    /// Fit a correlation series to the stretched-exponential model
    Fit,
    /// Integrability diagnostic of a correlation series
    Davies,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(bathcorr::Error),
    Io(io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Numerical(e @ bathcorr::Error::InvalidParameter { .. }) => write!(f, "config error: {e}"),
            RunError::Numerical(e) => write!(f, "numerical failure: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<bathcorr::Error> for RunError {
    fn from(e: bathcorr::Error) -> Self {
        RunError::Numerical(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.into())
    }
}

pub type RunResult<T> = Result<T, RunError>;

/// Parameters read from the config; `run` performs the computation.
pub trait Experiment {
    fn run(&self, out: &mut Output) -> RunResult<()>;
}

pub fn read(name: CommandName, cfg: &mut Config, seed: u64) -> ConfigResult<Box<dyn Experiment>> {
    Ok(match name {
        CommandName::Correlation => Box::new(correlation::Correlation::read(cfg)?),
        CommandName::OffsetScan => Box::new(correlation::OffsetScan::read(cfg)?),
        CommandName::BkkStats => Box::new(correlation::BkkStats::read(cfg)?),
        CommandName::Davies => Box::new(correlation::Davies::read(cfg)?),
        CommandName::Oracle => Box::new(oracle::Oracle::read(cfg)?),
        CommandName::EthDemo => Box::new(eth::EthDemo::read(cfg, seed)?),
        CommandName::MasterEq => Box::new(master_eq::MasterEq::read(cfg, seed)?),
        CommandName::Ensemble => Box::new(ensemble::Ensemble::read(cfg, seed)?),
        CommandName::Fit => Box::new(fit::Fit::read(cfg)?),
    })
}

/// Molecule parameters plus the basis controls shared by several commands.
#[derive(Debug, Clone, Copy, Serialize)]
struct MoleculeSetup {
    params: MoleculeParams,
    tail_tol: f64,
    dim_cap: usize,
    tol_deg: Option<f64>,
}

struct Solved {
    eig: EigenSystem,
    thermal: ThermalState,
    n_max: usize,
}

impl MoleculeSetup {
    fn read(cfg: &mut Config, n_modes: usize) -> ConfigResult<Self> {
        let params = MoleculeParams {
            epsilon: cfg.f64("epsilon", 1.0)?,
            delta: cfg.f64("delta", 1.0)?,
            r: cfg.f64("r", 0.25)?,
            omega_c: cfg.f64("omega_c", 1.0)?,
            n_modes: cfg.usize("n_modes", n_modes)?,
            n_max: cfg.opt_usize("n_max")?,
            beta: cfg.f64("beta", 1.0)?,
        };
        Ok(Self {
            params,
            tail_tol: cfg.f64("tail_tol", DEFAULT_TAIL_TOL)?,
            dim_cap: cfg.usize("dim_cap", DEFAULT_DIM_CAP)?,
            tol_deg: cfg.opt_f64("tol_deg")?,
        })
    }

    fn with(&self, beta: f64, r: f64) -> Self {
        Self {
            params: MoleculeParams { beta, r, ..self.params },
            ..*self
        }
    }

    fn solve(&self) -> bathcorr::Result<Solved> {
        let (h, b) = build_molecule(&self.params, self.tail_tol, self.dim_cap)?;
        let modes = self.params.modes()?;
        let n_max = self.params.resolved_n_max(&modes, self.tail_tol)?;
        let eig = diagonalize(&h, &b)?;
        let thermal = thermal_weights(&eig, Beta::from_f64(self.params.beta)?)?;
        Ok(Solved { eig, thermal, n_max })
    }
}

fn time_grid(cfg: &mut Config, t_max: f64, n_t: usize) -> ConfigResult<(f64, usize)> {
    Ok((cfg.f64("t_max", t_max)?, cfg.usize("n_t", n_t)?))
}

fn real_series(grid: &TimeGrid, values: &[f64]) -> CorrelationSeries {
    CorrelationSeries {
        grid: *grid,
        values: values.iter().map(|&x| bathcorr::Complex64::new(x, 0.0)).collect(),
        mean_b: 0.0,
        offset_estimate: None,
    }
}

fn write_series(out: &mut Output, name: &str, series: &CorrelationSeries) -> RunResult<()> {
    let rows = series
        .values
        .iter()
        .enumerate()
        .map(|(i, z)| vec![series.grid.t(i), z.re, z.im]);
    out.csv(name, &header(&["t", "re_c", "im_c"]), rows)?;
    Ok(())
}
