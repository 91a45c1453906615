use bathcorr::ensemble::{
    ensemble_correlation, log_grid, one_over_f_components, prepare_ensemble, sample_molecules, susceptibility,
    EnsembleSpec, Lorentzian, SlopeFit,
};
use bathcorr::env_model::{DEFAULT_DIM_CAP, DEFAULT_TAIL_TOL};
use bathcorr::TimeGrid;
use serde::Serialize;

use super::{time_grid, write_series, Experiment, RunResult};
use crate::config::{Config, ConfigResult};
use crate::output::{header, Output};

/// Offset of the fluctuator rate stream from the molecule seed.
const RATE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

pub struct Ensemble {
    spec: EnsembleSpec,
    tail_tol: f64,
    dim_cap: usize,
    t_max: f64,
    n_t: usize,
    n_fluctuators: usize,
    nu_min: f64,
    nu_max: f64,
    static_weight: f64,
    omega_min: f64,
    omega_max: f64,
    n_omega: usize,
    band: (f64, f64),
}

#[derive(Serialize)]
struct EnsembleReport {
    m: usize,
    mean_offset: f64,
    min_offset: f64,
    max_offset: f64,
    n_fluctuators: usize,
    static_weight: f64,
    slope: Option<SlopeFit>,
}

impl Ensemble {
    pub fn read(cfg: &mut Config, seed: u64) -> ConfigResult<Self> {
        let spec = EnsembleSpec {
            m: cfg.usize("m", 32)?,
            mean_delta: cfg.f64("mean_delta", 1.0)?,
            mean_epsilon: cfg.f64("mean_epsilon", 1.0)?,
            sigma: cfg.f64("sigma", 0.2)?,
            r: cfg.f64("r", 0.25)?,
            omega_c: cfg.f64("omega_c", 1.0)?,
            beta: cfg.f64("beta", 1.0)?,
            n_modes: cfg.usize("n_modes", 1)?,
            n_max: cfg.opt_usize("n_max")?,
            seed,
        };
        let tail_tol = cfg.f64("tail_tol", DEFAULT_TAIL_TOL)?;
        let dim_cap = cfg.usize("dim_cap", DEFAULT_DIM_CAP)?;
        let (t_max, n_t) = time_grid(cfg, 50.0, 2001)?;
        let line = cfg.line_of("n_fluctuators");
        let n_fluctuators = cfg.usize("n_fluctuators", 4000)?;
        if n_fluctuators < spec.m {
            return Err(cfg.invalid("n_fluctuators", line, "must be at least the number of molecules `m`"));
        }
        Ok(Self {
            spec,
            tail_tol,
            dim_cap,
            t_max,
            n_t,
            n_fluctuators,
            nu_min: cfg.f64("nu_min", 1e-4)?,
            nu_max: cfg.f64("nu_max", 1.0)?,
            static_weight: cfg.f64("static_weight", 0.0)?,
            omega_min: cfg.f64("omega_min", 1e-5)?,
            omega_max: cfg.f64("omega_max", 10.0)?,
            n_omega: cfg.usize("n_omega", 241)?,
            band: (cfg.f64("band_lo", 1e-3)?, cfg.f64("band_hi", 1e-1)?),
        })
    }
}

impl Experiment for Ensemble {
    fn run(&self, out: &mut Output) -> RunResult<()> {
        let molecules = sample_molecules(&self.spec)?;
        let members = prepare_ensemble(&molecules, self.tail_tol, self.dim_cap)?;
        let grid = TimeGrid::new(self.t_max, self.n_t)?;
        let avg = ensemble_correlation(&members, &grid)?;
        write_series(out, "ensemble_correlation.csv", &avg.series)?;
        out.csv(
            "molecules.csv",
            &header(&["molecule", "delta", "epsilon", "c0"]),
            members
                .iter()
                .enumerate()
                .map(|(j, m)| vec![j as f64, m.params.delta, m.params.epsilon, m.offset.c0]),
        )?;

        // Each molecule's offset is shared evenly among its fluctuators; rates follow Q(ν) ∝ 1/ν.
        let m = members.len();
        let per = (0..m)
            .map(|j| (self.n_fluctuators + m - 1 - j) / m)
            .collect::<Vec<_>>();
        let mut components = one_over_f_components(
            self.n_fluctuators,
            self.nu_min,
            self.nu_max,
            1.0,
            self.spec.seed ^ RATE_STREAM,
        )?;
        for (k, c) in components.iter_mut().enumerate() {
            let j = k % m;
            c.weight = members[j].offset.c0 / (per[j] * m) as f64;
        }
        if self.static_weight > 0.0 {
            components.push(Lorentzian {
                weight: self.static_weight,
                nu: 0.0,
            });
        }
        let omega = log_grid(self.omega_min, self.omega_max, self.n_omega)?;
        let chi = susceptibility(&components, &omega)?.with_slope(self.band)?;
        out.csv(
            "susceptibility.csv",
            &header(&["omega", "chi"]),
            chi.omega.iter().zip(&chi.chi).map(|(w, x)| vec![*w, *x]),
        )?;
        out.json(
            "ensemble.json",
            &EnsembleReport {
                m,
                mean_offset: avg.mean_offset,
                min_offset: avg.offsets.iter().copied().fold(f64::INFINITY, f64::min),
                max_offset: avg.offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                n_fluctuators: self.n_fluctuators,
                static_weight: chi.static_weight,
                slope: chi.slope,
            },
        )?;
        Ok(())
    }
}
