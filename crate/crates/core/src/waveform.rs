use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled real intensity signal. Sample `k` sits at `t0 + k·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    samples: Vec<f64>,
    dt: f64,
    t0: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, dt: f64, t0: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("grid step must be positive, got {dt}")));
        }
        Ok(Self { samples, dt, t0 })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Same grid, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            dt: self.dt,
            t0: self.t0,
        }
    }
}
