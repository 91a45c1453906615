use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform time grid starting at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    /// `len` points spanning `[0, t_max]` inclusive.
    pub fn new(t_max: f64, len: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(invalid("t_max", format!("must be positive, got {t_max}")));
        }
        if len < 2 {
            return Err(invalid("n_t", format!("need at least 2 points, got {len}")));
        }
        Ok(Self {
            dt: t_max / (len - 1) as f64,
            len,
        })
    }

    /// Grid with fixed spacing `dt` covering at least `[0, t_max]`.
    pub fn with_step(dt: f64, t_max: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let steps = (t_max / dt - 1e-9).ceil().max(1.0) as usize;
        Ok(Self { dt, len: steps + 1 })
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.t(self.len - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.t(i)).collect()
    }
}
