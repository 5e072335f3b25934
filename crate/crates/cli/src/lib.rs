//! Command-line front end for gradchain-core: instance generation,
//! derivative checking, chain-backed training runs, rewrite-attack
//! estimates, and persisted-chain verification.
//!
//! Every command lives here as a library function returning a typed
//! report; `main.rs` is a thin argument-parsing shell around them. Tests
//! call the functions directly and drive the binary through
//! `CARGO_BIN_EXE`. Exit codes follow the usual convention: 0 for
//! success, 1 for a failed check, 2 for usage or IO trouble.

pub mod attack;
pub mod bench;
pub mod config;
pub mod gen;
pub mod gradcheck;
pub mod instance;
pub mod train;
pub mod verify;

pub use config::{parse_sketch_spec, InstanceSource, Overrides, RunConfig};

use gradchain_core::attention::AttentionError;
use gradchain_core::chain::ChainError;
use gradchain_core::fedopt::FedError;
use gradchain_core::netsim::NetsimError;
use gradchain_core::sketch::SketchError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad instance file: {0}")]
    BadInstanceFile(String),
    #[error("bad sketch spec {0:?}: want kind:b (sparse kinds kind:s:b) or the word none")]
    BadSketchSpec(String),
    #[error("{0}")]
    BadArgs(String),
    #[error("training diverged at round {round}")]
    Diverged { round: usize },
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Fed(#[from] FedError),
    #[error(transparent)]
    Netsim(#[from] NetsimError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Doubles in reports and on-disk artifacts: 17 significant digits, enough
/// for an exact f64 round trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Relative error with a unit floor, so near-zero references are compared
/// absolutely instead of blowing up.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / (1.0 + want.abs())
}
