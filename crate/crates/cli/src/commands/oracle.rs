use bathcorr::oracles::{
    evaluate_decay_models, harmonic_correlation, pure_dephasing_correlation, spin_coherence_correlation,
    DecayModel, WeakCouplingModel,
};
use bathcorr::{MoleculeParams, TimeGrid};
use serde::Serialize;

use super::correlation::read_stretched;
use super::{time_grid, write_series, Experiment, RunResult};
use crate::config::{Config, ConfigResult};
use crate::output::{header, Output};

enum Kind {
    SpinCoherence { epsilon: f64, delta: f64, beta: f64 },
    PureDephasing(MoleculeParams),
    Harmonic(MoleculeParams),
    Decay(DecayModel),
}

pub struct Oracle {
    kind: Kind,
    t_max: f64,
    n_t: usize,
}

#[derive(Serialize)]
struct OracleReport {
    kind: &'static str,
    offset: Option<f64>,
    mean_b: Option<f64>,
}

/// Modes of a `Δ = 0` molecule; the harmonic bath alone takes no `epsilon`.
fn bath(cfg: &mut Config, with_spin: bool) -> ConfigResult<MoleculeParams> {
    Ok(MoleculeParams {
        epsilon: if with_spin { cfg.f64("epsilon", 1.0)? } else { 0.0 },
        delta: 0.0,
        r: cfg.f64("r", 0.25)?,
        omega_c: cfg.f64("omega_c", 1.0)?,
        n_modes: cfg.usize("n_modes", 1)?,
        n_max: None,
        beta: cfg.f64("beta", 1.0)?,
    })
}

impl Oracle {
    pub fn read(cfg: &mut Config) -> ConfigResult<Self> {
        let name = cfg.choice(
            "kind",
            &["spin_coherence", "pure_dephasing", "harmonic", "stretched", "weak_coupling"],
        )?;
        let kind = match name.as_str() {
            "spin_coherence" => Kind::SpinCoherence {
                epsilon: cfg.f64("epsilon", 1.0)?,
                delta: cfg.f64("delta", 1.0)?,
                beta: cfg.f64("beta", 1.0)?,
            },
            "pure_dephasing" => Kind::PureDephasing(bath(cfg, true)?),
            "harmonic" => Kind::Harmonic(bath(cfg, false)?),
            "stretched" => Kind::Decay(DecayModel::Stretched(read_stretched(cfg)?)),
            _ => Kind::Decay(DecayModel::WeakCoupling(WeakCouplingModel {
                amplitude: cfg.f64("amplitude", 0.5)?,
                lambda0_re: cfg.f64("lambda0_re", 0.05)?,
                lambda0_im: cfg.f64("lambda0_im", 1.4)?,
                c0: cfg.f64("c0", 0.3)?,
                lambda: cfg.f64("lambda", 0.0)?,
                constant: cfg.f64("constant", 0.0)?,
            })),
        };
        let (t_max, n_t) = time_grid(cfg, 50.0, 2001)?;
        Ok(Self { kind, t_max, n_t })
    }
}

impl Experiment for Oracle {
    fn run(&self, out: &mut Output) -> RunResult<()> {
        let grid = TimeGrid::new(self.t_max, self.n_t)?;
        let report = match &self.kind {
            Kind::SpinCoherence { epsilon, delta, beta } => {
                let s = spin_coherence_correlation(*epsilon, *delta, *beta, &grid)?;
                write_series(out, "oracle.csv", &s.series)?;
                OracleReport {
                    kind: "spin_coherence",
                    offset: Some(s.offset),
                    mean_b: Some(s.mean_sigma_x),
                }
            }
            Kind::PureDephasing(p) => {
                let s = pure_dephasing_correlation(p, &p.modes()?, &grid)?;
                write_series(out, "oracle.csv", &s)?;
                OracleReport {
                    kind: "pure_dephasing",
                    offset: s.offset_estimate,
                    mean_b: Some(s.mean_b),
                }
            }
            Kind::Harmonic(p) => {
                let s = harmonic_correlation(&p.modes()?, p.beta, &grid)?;
                write_series(out, "oracle.csv", &s)?;
                OracleReport {
                    kind: "harmonic",
                    offset: Some(0.0),
                    mean_b: Some(s.mean_b),
                }
            }
            Kind::Decay(model) => {
                let v = evaluate_decay_models(model, &grid)?;
                out.csv(
                    "oracle.csv",
                    &header(&["t", "value"]),
                    v.iter().enumerate().map(|(i, x)| vec![grid.t(i), *x]),
                )?;
                OracleReport {
                    kind: match model {
                        DecayModel::Stretched(_) => "stretched",
                        DecayModel::WeakCoupling(_) => "weak_coupling",
                    },
                    offset: None,
                    mean_b: None,
                }
            }
        };
        out.json("oracle.json", &report)?;
        Ok(())
    }
}
