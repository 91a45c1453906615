use bathcorr::eth_synth::{seed_study, verify_polynomial_decay, DiagonalMode, EthSpec, PolynomialDecayReport};
use bathcorr::TimeGrid;
use serde::Serialize;

use super::{time_grid, Experiment, RunResult};
use crate::config::{Config, ConfigResult};
use crate::output::{header, Output};

pub struct EthDemo {
    spec: EthSpec,
    dims: Vec<usize>,
    seeds: Vec<u64>,
    beta: f64,
    decay_order: u32,
    t_max: f64,
    n_t: usize,
}

#[derive(Serialize)]
struct DimSummary {
    dim: usize,
    median_offset: f64,
    offsets: Vec<f64>,
    decay: PolynomialDecayReport,
}

#[derive(Serialize)]
struct EthReport {
    seeds: Vec<u64>,
    dims: Vec<DimSummary>,
    /// Medians strictly decrease with dimension.
    suppressed: bool,
}

impl EthDemo {
    pub fn read(cfg: &mut Config, seed: u64) -> ConfigResult<Self> {
        let dims = cfg.usize_list("dims", &[100, 400])?;
        let n_seeds = cfg.u64("n_seeds", 20)?;
        let diagonal = match cfg.choice("diagonal", &["ansatz", "typical"])?.as_str() {
            "typical" => DiagonalMode::Typical,
            _ => DiagonalMode::Ansatz,
        };
        let spec = EthSpec {
            dim: dims[0],
            sigma_e: cfg.f64("sigma_e", 1.0)?,
            w_f: cfg.f64("w_f", 0.5)?,
            b_bar: cfg.f64("b_bar", 0.1)?,
            noise_amplitude: cfg.f64("noise_amplitude", 1.0)?,
            complex_noise: cfg.bool("complex_noise", false)?,
            diagonal,
            seed,
        };
        let beta = cfg.f64("beta", 0.5)?;
        let decay_order = cfg.u64("decay_order", 1)? as u32;
        let (t_max, n_t) = time_grid(cfg, 20.0, 401)?;
        Ok(Self {
            spec,
            dims,
            seeds: (0..n_seeds).map(|i| seed.wrapping_add(i)).collect(),
            beta,
            decay_order,
            t_max,
            n_t,
        })
    }
}

impl Experiment for EthDemo {
    fn run(&self, out: &mut Output) -> RunResult<()> {
        let grid = TimeGrid::new(self.t_max, self.n_t)?;
        let mut summaries = Vec::new();
        let mut offset_rows = Vec::new();
        for &dim in &self.dims {
            let study = seed_study(&EthSpec { dim, ..self.spec }, &self.seeds, self.beta, &grid)?;
            let decay = verify_polynomial_decay(&study.decaying_part, self.decay_order);
            for (s, c0) in study.seeds.iter().zip(&study.offsets) {
                offset_rows.push(vec![dim as f64, *s as f64, *c0]);
            }
            let series = &study.decaying_part;
            out.csv(
                &format!("eth_decay_dim{dim}.csv"),
                &header(&["t", "re_c", "im_c", "abs_c"]),
                series
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, z)| vec![grid.t(i), z.re, z.im, z.norm()]),
            )?;
            summaries.push(DimSummary {
                dim,
                median_offset: study.median_offset(),
                offsets: study.offsets.clone(),
                decay,
            });
        }
        out.csv("eth_offsets.csv", &header(&["dim", "seed", "c0"]), offset_rows)?;
        let suppressed = summaries
            .windows(2)
            .all(|w| w[1].dim <= w[0].dim || w[1].median_offset < w[0].median_offset);
        out.json(
            "eth_demo.json",
            &EthReport {
                seeds: self.seeds.clone(),
                dims: summaries,
                suppressed,
            },
        )?;
        Ok(())
    }
}
