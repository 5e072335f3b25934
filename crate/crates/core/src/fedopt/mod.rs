//! K-local-step federated training with sketched model deltas.
//!
//! Each round one user (the proof-of-work winner, supplied by the caller)
//! runs K gradient steps on its share of the blocks, sketches the resulting
//! model delta, and broadcasts it; everyone applies the de-sketched delta.
//! The step size comes from the smoothness estimate and the sketch's
//! embedding parameter, and the trace records enough per round to check the
//! linear convergence guarantee after the fact.

mod constants;
mod partition;
mod trainer;

pub use constants::{choose_eta, convergence_bound, estimate_constants, Constants};
pub use partition::{partition_data, LocalObjective};
pub use trainer::{
    gd_steps, local_update, run_training, RoundRecord, TraceRow, TrainTrace, Trainer,
};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::attention::AttentionError;
use crate::scalar::Scalar;
use crate::sketch::{SketchConfig, SketchError};

pub(crate) const TAG_PARTITION: u64 = 0x66_01;
pub(crate) const TAG_CONSTANTS: u64 = 0x66_02;
pub(crate) const TAG_SKETCH: u64 = 0x66_03;

#[derive(Debug, Error, PartialEq)]
pub enum FedError {
    #[error("more users ({users}) than data blocks ({blocks})")]
    TooManyUsers { users: usize, blocks: usize },
    #[error("config needs at least one user and one local step")]
    BadConfig,
    #[error("step size must be positive and finite")]
    BadEta,
    #[error("smoothness estimate must be positive and finite")]
    BadSmoothness,
    #[error("embedding parameter must be nonnegative and finite")]
    BadAlpha,
    #[error("constant estimation needs at least one sample")]
    NoSamples,
    #[error("winner id {got} out of range for {users} users")]
    BadWinner { got: usize, users: usize },
    #[error("non-finite iterate at local step {step}")]
    NonFiniteIterate { step: usize },
    #[error("training diverged at round {round}")]
    Diverged { round: usize },
    #[error("newton stalled after {iterations} iterations at gradient norm {grad_norm}")]
    NewtonStalled { iterations: usize, grad_norm: f64 },
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// Step size selection: `Auto` applies the 1/(8(1+alpha)LK) rule, a value
/// is taken as-is. JSON form is the string "auto" or a bare number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Eta<T: Scalar> {
    Auto,
    Value(T),
}

impl<T: Scalar + Serialize> Serialize for Eta<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Eta::Auto => serializer.serialize_str("auto"),
            Eta::Value(v) => v.serialize(serializer),
        }
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Eta<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Num(T),
            Text(String),
        }
        match Raw::<T>::deserialize(deserializer)? {
            Raw::Num(v) => Ok(Eta::Value(v)),
            Raw::Text(s) if s == "auto" => Ok(Eta::Auto),
            Raw::Text(s) => Err(D::Error::custom(format!(
                "eta must be a number or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FedConfig<T: Scalar> {
    pub num_users: usize,
    pub local_steps: usize,
    pub global_rounds: usize,
    pub eta: Eta<T>,
    pub sketch: Option<SketchConfig>,
    pub master_seed: u64,
    /// Also scale the broadcast payload by eta (the delta already carries
    /// eta inside each local step). Off by default.
    #[serde(default)]
    pub double_eta: bool,
}

/// Who wins each round when no proof-of-work race is in play.
#[derive(Clone, Copy, Debug)]
pub enum WinnerSchedule {
    RoundRobin,
    Fixed(usize),
    Seeded(u64),
}

impl WinnerSchedule {
    pub fn winner_for(&self, round: usize, users: usize) -> usize {
        debug_assert!(round >= 1 && users >= 1);
        match *self {
            WinnerSchedule::RoundRobin => (round - 1) % users,
            WinnerSchedule::Fixed(u) => u,
            WinnerSchedule::Seeded(seed) => {
                use rand::Rng;
                let mut rng = crate::seed::rng_from(crate::seed::derive_seed(seed, round as u64));
                rng.gen_range(0..users)
            }
        }
    }
}
