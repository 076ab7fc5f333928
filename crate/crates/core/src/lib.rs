//! Graph-based active learning for regression.
//!
//! Unlabeled points are scored by how much labeling them would shrink the
//! total L1 nearest-neighbor distance from the pool to the labeled set
//! ([`graph::NnGraph`]). Sequential and batch (single-swap local search)
//! selectors live in [`strategy`] next to random, greedy, QBC and EMCM
//! baselines; [`harness`] runs seeded multi-trial benchmarks and writes CSV
//! reports.

pub mod dataset;
pub mod error;
pub mod exact;
pub mod features;
pub mod graph;
pub mod harness;
pub mod matrix;
pub mod oracle;
pub mod regression;
pub mod strategy;
pub mod validate;

pub use dataset::{Dataset, DatasetManifest, Manifest};
pub use error::{Error, Result};
pub use graph::NnGraph;
pub use matrix::Matrix;
pub use regression::LinearModel;
pub use strategy::{SelectionTrace, StrategyConfig, StrategyKind};
