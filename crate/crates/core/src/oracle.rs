//! Simulated labeling oracle.
//!
//! In Gaussian mode each answer is `y + ε` with
//! `ε ~ N(0, (scale · std(current labels))²)`. The normal deviate for the
//! `k`-th query is drawn from a ChaCha8 generator seeded with the oracle seed
//! on stream `k`, via the Box–Muller transform
//! `sqrt(-2 ln(1 - u1)) · cos(2π u2)` with `u1, u2` uniform on `[0, 1)`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{mean_std, DEGENERATE_STD};
use crate::error::{Error, Result};

pub const DEFAULT_NOISE_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Exact,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub noise_kind: NoiseKind,
    pub noise_scale: f64,
    pub rng_seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            noise_kind: NoiseKind::Exact,
            noise_scale: DEFAULT_NOISE_SCALE,
            rng_seed: 0,
        }
    }
}

/// Standard normal deviate number `counter` of the stream family `seed`.
pub fn standard_normal(seed: u64, counter: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(counter);
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos()
}

#[derive(Debug, Clone)]
pub struct LabelOracle {
    config: OracleConfig,
    queries: u64,
    fallback_std: f64,
}

impl LabelOracle {
    /// `initial_labels` supplies the noise scale while fewer than two labels exist.
    pub fn new(config: OracleConfig, initial_labels: &[f64]) -> Result<Self> {
        if !(config.noise_scale.is_finite() && config.noise_scale >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise scale must be finite and >= 0, got {}",
                config.noise_scale
            )));
        }
        let fallback_std = if initial_labels.is_empty() {
            0.0
        } else {
            mean_std(initial_labels).1
        };
        Ok(Self {
            config,
            queries: 0,
            fallback_std,
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    /// Answers a query for `idx`. `labeled_targets` are the labels currently in L.
    pub fn label(&mut self, targets: &[f64], idx: usize, labeled_targets: &[f64]) -> Result<f64> {
        let y = *targets
            .get(idx)
            .ok_or_else(|| Error::InvalidInput(format!("label index {idx} out of range")))?;
        let k = self.queries;
        self.queries += 1;
        match self.config.noise_kind {
            NoiseKind::Exact => Ok(y),
            NoiseKind::Gaussian => {
                let std = if labeled_targets.len() >= 2 {
                    mean_std(labeled_targets).1
                } else {
                    self.fallback_std
                };
                let sigma = if std < DEGENERATE_STD {
                    0.0
                } else {
                    self.config.noise_scale * std
                };
                if sigma == 0.0 {
                    return Ok(y);
                }
                Ok(y + sigma * standard_normal(self.config.rng_seed, k))
            }
        }
    }
}
