use bathcorr::master_eq::{
    evolve_convoluted, evolve_time_local, population_report, secular_rate_equations, steady_state_report, BathInput,
    EvolveOptions, MasterEqRun, OffsetKernel, RunDiagnostics, SecularOptions, SteadyStateReport, SystemSpec,
};
use bathcorr::oracles::ohmic_golden_rule_gamma;
use bathcorr::Complex64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Experiment, RunResult};
use crate::config::{Config, ConfigResult};
use crate::output::Output;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Integrator {
    Convoluted,
    TimeLocal,
    Secular,
}

#[derive(Debug, Clone, Copy)]
enum SystemKind {
    TwoLevel { omega_q: f64, s_z: f64 },
    Random { dim: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Initial {
    Ground,
    Excited,
    Mixed,
}

fn initial(name: &str) -> Option<Initial> {
    match name {
        "ground" => Some(Initial::Ground),
        "excited" => Some(Initial::Excited),
        "mixed" => Some(Initial::Mixed),
        _ => None,
    }
}

pub struct MasterEq {
    integrator: Integrator,
    system: SystemKind,
    bath_r: f64,
    bath_omega_c: f64,
    beta: f64,
    c0: f64,
    initial: Initial,
    reference: Option<Initial>,
    t_max: f64,
    dt: f64,
    record_stride: usize,
    kernel: OffsetKernel,
}

impl MasterEq {
    pub fn read(cfg: &mut Config, seed: u64) -> ConfigResult<Self> {
        let integrator = match cfg.choice("integrator", &["convoluted", "time_local", "secular"])?.as_str() {
            "time_local" => Integrator::TimeLocal,
            "secular" => Integrator::Secular,
            _ => Integrator::Convoluted,
        };
        let system = match cfg.choice("system", &["two_level", "random"])?.as_str() {
            "random" => {
                let line = cfg.line_of("dim");
                let dim = cfg.usize("dim", 4)?;
                if dim < 2 {
                    return Err(cfg.invalid("dim", line, "need at least 2 levels"));
                }
                SystemKind::Random { dim, seed }
            }
            _ => SystemKind::TwoLevel {
                omega_q: cfg.f64("omega_q", 1.0)?,
                s_z: cfg.f64("s_z", 0.5)?,
            },
        };
        let kernel = if integrator == Integrator::Secular {
            match cfg.choice("kernel", &["lagged", "absolute"])?.as_str() {
                "absolute" => OffsetKernel::Absolute,
                _ => OffsetKernel::Lagged,
            }
        } else {
            OffsetKernel::Lagged
        };
        let init = initial(&cfg.choice("initial", &["excited", "ground", "mixed"])?).expect("checked choice");
        let reference = initial(&cfg.choice("reference_initial", &["ground", "excited", "mixed", "none"])?);
        Ok(Self {
            integrator,
            system,
            bath_r: cfg.f64("bath_r", 0.1)?,
            bath_omega_c: cfg.f64("bath_omega_c", 1.0)?,
            beta: cfg.f64("beta", 1.0)?,
            c0: cfg.f64("c0", 0.1)?,
            initial: init,
            reference,
            t_max: cfg.f64("t_max", 2000.0)?,
            dt: cfg.f64("dt", 0.05)?,
            record_stride: cfg.usize("record_stride", 100)?.max(1),
            kernel,
        })
    }

    fn build_system(&self) -> bathcorr::Result<SystemSpec> {
        let c = |x: f64| Complex64::new(x, 0.0);
        match self.system {
            SystemKind::TwoLevel { omega_q, s_z } => {
                let h = DMatrix::from_row_slice(2, 2, &[c(0.5 * omega_q), c(0.0), c(0.0), c(-0.5 * omega_q)]);
                let s = DMatrix::from_row_slice(2, 2, &[c(s_z), c(1.0), c(1.0), c(-s_z)]);
                SystemSpec::new(&h, &s)
            }
            SystemKind::Random { dim, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut mats = [DMatrix::<Complex64>::zeros(dim, dim), DMatrix::<Complex64>::zeros(dim, dim)];
                for m in &mut mats {
                    for i in 0..dim {
                        m[(i, i)] = c(rng.random_range(-1.0..1.0));
                        for j in 0..i {
                            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                            m[(i, j)] = z;
                            m[(j, i)] = z.conj();
                        }
                    }
                }
                SystemSpec::new(&mats[0], &mats[1])
            }
        }
    }

    fn bath(&self) -> bathcorr::Result<BathInput> {
        let (r, wc, beta) = (self.bath_r, self.bath_omega_c, self.beta);
        BathInput::from_rates(self.c0, move |w| Complex64::new(ohmic_golden_rule_gamma(r, wc, beta, w), 0.0))
    }
}

/// Eigenbasis populations of the requested initial state.
fn populations(which: Initial, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    match which {
        Initial::Ground => p[0] = 1.0,
        Initial::Excited => p[n - 1] = 1.0,
        Initial::Mixed => p.iter_mut().for_each(|x| *x = 1.0 / n as f64),
    }
    p
}

fn density(system: &SystemSpec, which: Initial) -> DMatrix<Complex64> {
    let p = populations(which, system.dim());
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        p.len(),
        p.into_iter().map(|x| Complex64::new(x, 0.0)),
    ));
    system.from_eigenbasis(&diag)
}

#[derive(Serialize)]
struct DensityReport {
    integrator: &'static str,
    energies: Vec<f64>,
    c0: f64,
    diagnostics: RunDiagnostics,
    reference_diagnostics: Option<RunDiagnostics>,
    steady_state: SteadyStateReport,
}

#[derive(Serialize)]
struct SecularReport {
    kernel: OffsetKernel,
    energies: Vec<f64>,
    c0: f64,
    rates: Vec<Vec<f64>>,
    secular_ratio: f64,
    steady_state: Vec<f64>,
    converged: bool,
    plateau_change: f64,
    gibbs_distance: f64,
    initial_state_dependence: Option<f64>,
}

fn trajectory_rows(run: &MasterEqRun, system: &SystemSpec) -> Vec<Vec<f64>> {
    (0..run.times.len())
        .map(|i| {
            let rho = run.schrodinger(system, i);
            let mut row = vec![run.times[i]];
            // Row-major entries.
            for z in rho.transpose().iter() {
                row.push(z.re);
                row.push(z.im);
            }
            row
        })
        .collect()
}

impl Experiment for MasterEq {
    fn run(&self, out: &mut Output) -> RunResult<()> {
        let system = self.build_system()?;
        let bath = self.bath()?;
        let n = system.dim();
        if self.integrator == Integrator::Secular {
            let opts = SecularOptions {
                kernel: self.kernel,
                record_stride: self.record_stride,
                ..SecularOptions::new(self.t_max, self.dt)
            };
            let run = secular_rate_equations(&system, &bath, &populations(self.initial, n), &opts)?;
            let reference = match self.reference {
                Some(r) => Some(secular_rate_equations(&system, &bath, &populations(r, n), &opts)?),
                None => None,
            };
            let mut cols = vec!["t".to_string()];
            cols.extend((0..n).map(|a| format!("p_{a}")));
            out.csv(
                "populations.csv",
                &cols,
                run.times.iter().zip(&run.populations).map(|(t, p)| {
                    let mut row = vec![*t];
                    row.extend(p);
                    row
                }),
            )?;
            let (gibbs, dependence) = population_report(
                &run.steady_state,
                reference.as_ref().map(|r| r.steady_state.as_slice()),
                &system,
                self.beta,
            );
            out.json(
                "master_eq.json",
                &SecularReport {
                    kernel: run.kernel,
                    energies: system.energies.clone(),
                    c0: run.c0,
                    rates: (0..n).map(|a| (0..n).map(|b| run.rates[(a, b)]).collect()).collect(),
                    secular_ratio: run.secular_ratio,
                    steady_state: run.steady_state.clone(),
                    converged: run.converged,
                    plateau_change: run.plateau_change,
                    gibbs_distance: gibbs,
                    initial_state_dependence: dependence,
                },
            )?;
            return Ok(());
        }

        let opts = EvolveOptions {
            record_stride: self.record_stride,
            ..EvolveOptions::new(self.t_max, self.dt)
        };
        let evolve = |which: Initial| match self.integrator {
            Integrator::TimeLocal => evolve_time_local(&system, &bath, &density(&system, which), &opts),
            _ => evolve_convoluted(&system, &bath, &density(&system, which), &opts),
        };
        let run = evolve(self.initial)?;
        let reference = self.reference.map(evolve).transpose()?;
        let mut cols = vec!["t".to_string()];
        for a in 0..n {
            for b in 0..n {
                cols.push(format!("re_rho_{a}_{b}"));
                cols.push(format!("im_rho_{a}_{b}"));
            }
        }
        out.csv("trajectory.csv", &cols, trajectory_rows(&run, &system))?;
        if let Some(r) = &reference {
            out.csv("trajectory_reference.csv", &cols, trajectory_rows(r, &system))?;
        }
        let steady = steady_state_report(&run, reference.as_ref(), &system, self.beta);
        out.json(
            "master_eq.json",
            &DensityReport {
                integrator: if self.integrator == Integrator::TimeLocal {
                    "time_local"
                } else {
                    "convoluted"
                },
                energies: system.energies.clone(),
                c0: run.c0,
                diagnostics: run.diagnostics,
                reference_diagnostics: reference.as_ref().map(|r| r.diagnostics),
                steady_state: steady,
            },
        )?;
        Ok(())
    }
}
