//! Training and evaluation engine for PowerMat, a context-aware matrix
//! factorization model whose updates need only context, not ratings,
//! together with DotMat and classic matrix factorization baselines.
//!
//! - [`kernel`]: embeddings, prediction rules, single-sample update steps
//! - [`data`]: CSV ingestion, context encoding, splits, synthetic data
//! - [`trainers`]: SGD loops, initialisation, cold-start prediction
//! - [`metrics`]: MAE/RMSE, top-K lists, rank-frequency fits, Matthew degree
//! - [`harness`]: experiment configs, runs, sweeps, reports and the CLI

pub mod data;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod metrics;
pub mod trainers;

pub use error::{Error, Result};
