use bathcorr::eigencorr::{
    averaging_grid, bkk_statistics, correlation_function, davies_diagnostic, long_time_average, offset,
    window_is_adequate, CorrelationKernel,
};
use bathcorr::oracles::StretchedModel;
use bathcorr::{OffsetReport, TimeGrid};
use rayon::prelude::*;
use serde::Serialize;

use super::{real_series, time_grid, Experiment, MoleculeSetup, RunResult};
use crate::config::{Config, ConfigResult};
use crate::output::{header, Output};

pub struct Correlation {
    molecule: MoleculeSetup,
    t_max: f64,
    n_t: usize,
    average_span: f64,
    average_points: usize,
}

#[derive(Serialize)]
struct CorrelationReport {
    dim: usize,
    n_max: usize,
    mean_b: f64,
    offset: OffsetReport,
    long_time_average: f64,
    averaging_t_max: f64,
    averaging_points: usize,
    averaging_window_adequate: bool,
}

impl Correlation {
    pub fn read(cfg: &mut Config) -> ConfigResult<Self> {
        let molecule = MoleculeSetup::read(cfg, 1)?;
        let (t_max, n_t) = time_grid(cfg, 50.0, 2001)?;
        Ok(Self {
            molecule,
            t_max,
            n_t,
            average_span: cfg.f64("average_span", 200.0)?,
            average_points: cfg.usize("average_points", 200_000)?,
        })
    }
}

impl Experiment for Correlation {
    fn run(&self, out: &mut Output) -> RunResult<()> {
        let s = self.molecule.solve()?;
        let grid = TimeGrid::new(self.t_max, self.n_t)?;
        let series = correlation_function(&s.eig, &s.thermal, &grid)?;
        let off = offset(&s.eig, &s.thermal, self.molecule.tol_deg)?;

        // Long-time average on a grid spanning many periods of the slowest frequency.
        let avg_grid = averaging_grid(&s.eig, &s.thermal, self.average_span, self.average_points)?;
        let long = correlation_function(&s.eig, &s.thermal, &avg_grid)?;
        let lta = long_time_average(&long, 0.5)?;
        let adequate = match CorrelationKernel::new(&s.eig, &s.thermal)?.frequency_span(s.eig.default_tol_deg()) {
            Some((lo, _)) => window_is_adequate(&long, 0.5, lo),
            None => true,
        };

        let rows = series
            .values
            .iter()
            .enumerate()
            .map(|(i, z)| vec![grid.t(i), z.re, z.im, off.c0, lta]);
        out.csv(
            "correlation.csv",
            &header(&["t", "re_c", "im_c", "offset", "long_time_average"]),
            rows,
        )?;
        out.json(
            "correlation.json",
            &CorrelationReport {
                dim: s.eig.dim(),
                n_max: s.n_max,
                mean_b: series.mean_b,
                offset: off,
                long_time_average: lta,
                averaging_t_max: avg_grid.t_max(),
                averaging_points: avg_grid.len,
                averaging_window_adequate: adequate,
            },
        )?;
        Ok(())
    }
}

pub struct OffsetScan {
    molecule: MoleculeSetup,
    betas: Vec<f64>,
    rs: Vec<f64>,
}

#[derive(Serialize)]
struct ScanReport {
    betas: Vec<f64>,
    rs: Vec<f64>,
    /// `c0[i][j]` at `betas[i]`, `rs[j]`.
    c0: Vec<Vec<f64>>,
    dims: Vec<Vec<usize>>,
}

impl OffsetScan {
    pub fn read(cfg: &mut Config) -> ConfigResult<Self> {
        for (key, list) in [("beta", "betas"), ("r", "rs")] {
            if cfg.has(key) {
                return Err(cfg.invalid(key, cfg.line_of(key), format!("offset-scan takes `{list}` instead")));
            }
        }
        let molecule = MoleculeSetup::read(cfg, 1)?;
        cfg.forget("beta");
        cfg.forget("r");
        Ok(Self {
            molecule,
            betas: cfg.f64_list("betas", &[0.5, 1.0, 2.0, 5.0, 10.0])?,
            rs: cfg.f64_list("rs", &[0.1, 0.25, 0.5, 0.75, 1.0])?,
        })
    }
}

impl Experiment for OffsetScan {
    fn run(&self, out: &mut Output) -> RunResult<()> {
        let cells: Vec<(f64, f64)> = self
            .betas
            .iter()
            .flat_map(|&b| self.rs.iter().map(move |&r| (b, r)))
            .collect();
        let results: Vec<bathcorr::Result<(OffsetReport, usize)>> = cells
            .par_iter()
            .map(|&(beta, r)| {
                let m = self.molecule.with(beta, r);
                let s = m.solve()?;
                Ok((offset(&s.eig, &s.thermal, m.tol_deg)?, s.eig.dim()))
            })
            .collect();
        let mut rows = Vec::with_capacity(cells.len());
        for (&(beta, r), res) in cells.iter().zip(results) {
            let (o, dim) = res?;
            rows.push((beta, r, o, dim));
        }
        let nr = self.rs.len();
        out.csv(
            "offset_scan.csv",
            &header(&["beta", "r", "c0", "variance_part", "degeneracy_part", "dim"]),
            rows.iter()
                .map(|(b, r, o, d)| vec![*b, *r, o.c0, o.variance_part, o.degeneracy_part, *d as f64]),
        )?;
        out.json(
            "offset_scan.json",
            &ScanReport {
                betas: self.betas.clone(),
                rs: self.rs.clone(),
                c0: rows.chunks(nr).map(|row| row.iter().map(|x| x.2.c0).collect()).collect(),
                dims: rows.chunks(nr).map(|row| row.iter().map(|x| x.3).collect()).collect(),
            },
        )?;
        Ok(())
    }
}

pub struct BkkStats {
    molecule: MoleculeSetup,
    bins: usize,
}

#[derive(Serialize)]
struct BkkReport {
    dim: usize,
    n_max: usize,
    participation_range: f64,
    bin_edges: Vec<f64>,
    counts: Vec<usize>,
    weights: Vec<f64>,
}

impl BkkStats {
    pub fn read(cfg: &mut Config) -> ConfigResult<Self> {
        Ok(Self {
            molecule: MoleculeSetup::read(cfg, 2)?,
            bins: cfg.usize("bins", 40)?,
        })
    }
}

impl Experiment for BkkStats {
    fn run(&self, out: &mut Output) -> RunResult<()> {
        let s = self.molecule.solve()?;
        let d = bkk_statistics(&s.eig, &s.thermal, self.bins)?;
        out.csv(
            "bkk.csv",
            &header(&["rescaled_energy", "bkk", "weight", "participation"]),
            (0..d.bkk.len()).map(|k| vec![d.rescaled_energy[k], d.bkk[k], d.weights[k], d.participation[k]]),
        )?;
        let h = &d.histogram;
        out.csv(
            "bkk_histogram.csv",
            &header(&["bin_lo", "bin_hi", "count", "weight"]),
            (0..h.counts.len()).map(|i| vec![h.edges[i], h.edges[i + 1], h.counts[i] as f64, h.weights[i]]),
        )?;
        out.json(
            "bkk_stats.json",
            &BkkReport {
                dim: s.eig.dim(),
                n_max: s.n_max,
                participation_range: d.participation_range,
                bin_edges: h.edges.clone(),
                counts: h.counts.clone(),
                weights: h.weights.clone(),
            },
        )?;
        Ok(())
    }
}

enum DaviesSource {
    Molecule(MoleculeSetup),
    Exponential { amplitude: f64, rate: f64 },
    Constant(f64),
    Stretched(StretchedModel),
}

pub struct Davies {
    source: DaviesSource,
    epsilon_exp: f64,
    horizon: Option<f64>,
    t_max: f64,
    n_t: usize,
}

impl Davies {
    pub fn read(cfg: &mut Config) -> ConfigResult<Self> {
        let kind = cfg.choice("source", &["exponential", "constant", "stretched", "molecule"])?;
        let source = match kind.as_str() {
            "molecule" => DaviesSource::Molecule(MoleculeSetup::read(cfg, 1)?),
            "exponential" => DaviesSource::Exponential {
                amplitude: cfg.f64("amplitude", 1.0)?,
                rate: cfg.f64("rate", 1.0)?,
            },
            "constant" => DaviesSource::Constant(cfg.f64("value", 0.3)?),
            _ => DaviesSource::Stretched(read_stretched(cfg)?),
        };
        let (t_max, n_t) = time_grid(cfg, 500.0, 50_001)?;
        Ok(Self {
            source,
            epsilon_exp: cfg.f64("epsilon_exp", 0.5)?,
            horizon: cfg.opt_f64("horizon")?,
            t_max,
            n_t,
        })
    }
}

impl Experiment for Davies {
    fn run(&self, out: &mut Output) -> RunResult<()> {
        let grid = TimeGrid::new(self.t_max, self.n_t)?;
        let series = match &self.source {
            DaviesSource::Molecule(m) => {
                let s = m.solve()?;
                correlation_function(&s.eig, &s.thermal, &grid)?
            }
            DaviesSource::Exponential { amplitude, rate } => {
                let v: Vec<f64> = grid.times().iter().map(|t| amplitude * (-rate * t).exp()).collect();
                real_series(&grid, &v)
            }
            DaviesSource::Constant(c) => real_series(&grid, &vec![*c; grid.len]),
            DaviesSource::Stretched(m) => {
                let v: Vec<f64> = grid.times().iter().map(|&t| m.eval(t)).collect();
                real_series(&grid, &v)
            }
        };
        let report = davies_diagnostic(&series, self.epsilon_exp, self.horizon)?;
        out.csv(
            "davies.csv",
            &header(&["t", "integral"]),
            report.horizons.iter().zip(&report.integrals).map(|(t, i)| vec![*t, *i]),
        )?;
        out.json("davies.json", &report)?;
        Ok(())
    }
}

/// Stretched-exponential parameters; `t0 = auto` or `inf` means no decay of the offset.
pub(super) fn read_stretched(cfg: &mut Config) -> ConfigResult<StretchedModel> {
    let m = StretchedModel {
        a0: cfg.f64("a0", 0.5)?,
        omega0: cfg.f64("omega0", 1.4)?,
        b0: cfg.f64("b0", 0.1)?,
        a: cfg.f64("a", 1.5)?,
        c0: cfg.f64("c0", 0.3)?,
        t0: cfg.opt_f64("t0")?.filter(|t| t.is_finite()),
    };
    Ok(m)
}
