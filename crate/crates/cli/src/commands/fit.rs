use std::path::PathBuf;

use bathcorr::eigencorr::{correlation_function, offset};
use bathcorr::fitkit::{fit_correlation, fit_weak_coupling, FitOptions, FitResult, WeakCouplingFit};
use bathcorr::TimeGrid;
use serde::Serialize;

use super::{time_grid, Experiment, MoleculeSetup, RunError, RunResult};
use crate::config::{Config, ConfigError, ConfigResult};
use crate::output::Output;

enum Source {
    Csv { path: PathBuf, column: String },
    Molecule { setup: MoleculeSetup, t_max: f64, n_t: usize },
}

pub struct Fit {
    source: Source,
    stretched: bool,
    weak: bool,
    opts: FitOptions,
}

#[derive(Serialize)]
struct FitReport {
    samples: usize,
    t_max: f64,
    /// Offset from the eigenbasis formula (molecule source only).
    eigen_offset: Option<f64>,
    stretched: Option<FitResult>,
    weak_coupling: Option<WeakCouplingFit>,
}

impl Fit {
    pub fn read(cfg: &mut Config) -> ConfigResult<Self> {
        let source = match cfg.choice("source", &["csv", "molecule"])?.as_str() {
            "molecule" => {
                let setup = MoleculeSetup::read(cfg, 1)?;
                let (t_max, n_t) = time_grid(cfg, 200.0, 4001)?;
                Source::Molecule { setup, t_max, n_t }
            }
            _ => {
                if !cfg.has("input") {
                    return Err(cfg.invalid("input", None, "required when source = csv"));
                }
                Source::Csv {
                    path: PathBuf::from(cfg.string("input", "")?),
                    column: cfg.string("column", "re_c")?,
                }
            }
        };
        let model = cfg.choice("model", &["stretched", "weak_coupling", "both"])?;
        let defaults = FitOptions::default();
        let opts = FitOptions {
            max_iter: cfg.usize("max_iter", defaults.max_iter)?,
            starts: cfg.usize("starts", defaults.starts)?.max(1),
            ..defaults
        };
        Ok(Self {
            source,
            stretched: model != "weak_coupling",
            weak: model != "stretched",
            opts,
        })
    }
}

/// Reads `t` and `column` from a CSV with a header; `t` must be a uniform grid from 0.
fn read_csv(path: &PathBuf, column: &str) -> RunResult<(TimeGrid, Vec<f64>)> {
    let bad = |message: String| {
        RunError::Config(ConfigError {
            key: Some("input".into()),
            line: None,
            message,
        })
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let ti = find("t").ok_or_else(|| bad("no `t` column".into()))?;
    let yi = find(column).ok_or_else(|| bad(format!("no `{column}` column")))?;
    let mut t = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| {
            rec.get(j)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(format!("data row {}: unparsable value", i + 1)))
        };
        t.push(parse(ti)?);
        y.push(parse(yi)?);
    }
    if t.len() < 2 {
        return Err(bad("need at least two rows".into()));
    }
    let dt = t[1] - t[0];
    let uniform = t[0].abs() < 1e-12
        && dt > 0.0
        && t.iter()
            .enumerate()
            .all(|(i, &ti)| (ti - i as f64 * dt).abs() <= 1e-9 * (1.0 + ti.abs()));
    if !uniform {
        return Err(bad("`t` must be a uniform grid starting at 0".into()));
    }
    let grid = TimeGrid::new(dt * (t.len() - 1) as f64, t.len())?;
    Ok((grid, y))
}

impl Experiment for Fit {
    fn run(&self, out: &mut Output) -> RunResult<()> {
        let (grid, y, eigen_offset) = match &self.source {
            Source::Csv { path, column } => {
                let (g, y) = read_csv(path, column)?;
                (g, y, None)
            }
            Source::Molecule { setup, t_max, n_t } => {
                let s = setup.solve()?;
                let g = TimeGrid::new(*t_max, *n_t)?;
                let series = correlation_function(&s.eig, &s.thermal, &g)?;
                let c0 = offset(&s.eig, &s.thermal, setup.tol_deg)?.c0;
                (g, series.real_part(), Some(c0))
            }
        };
        let stretched = if self.stretched {
            Some(fit_correlation(&grid, &y, &self.opts)?)
        } else {
            None
        };
        let weak = if self.weak {
            Some(fit_weak_coupling(&grid, &y, &self.opts)?)
        } else {
            None
        };

        let mut cols = vec!["t".to_string(), "data".to_string()];
        if stretched.is_some() {
            cols.push("stretched".into());
        }
        if weak.is_some() {
            cols.push("weak_coupling".into());
        }
        let rows = (0..grid.len).map(|i| {
            let t = grid.t(i);
            let mut row = vec![t, y[i]];
            if let Some(f) = &stretched {
                row.push(f.model.eval(t));
            }
            if let Some(f) = &weak {
                row.push(f.model.eval(t));
            }
            row
        });
        out.csv("fit_curve.csv", &cols, rows)?;
        out.json(
            "fit.json",
            &FitReport {
                samples: grid.len,
                t_max: grid.t_max(),
                eigen_offset,
                stretched,
                weak_coupling: weak,
            },
        )?;
        Ok(())
    }
}
