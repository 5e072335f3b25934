//! Deterministic discrete-event network simulation: users broadcast coin
//! transactions, race on proof-of-work, and take turns appending gradient
//! blocks, with training rounds interleaved. A separate Monte-Carlo
//! harness measures how hard rewriting settled history is.
//!
//! Everything is a function of the master seed. Per-round randomness comes
//! from derived streams with a fixed draw order, state lives in ordered
//! containers, and events are generated in already-sorted (tick, insertion)
//! order, so two runs of the same config produce identical logs, traces,
//! and head digests.

mod race;
mod sim;

pub use race::{adversary_rewrite, pow_race};
pub use sim::{Rejection, SimState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, RejectReason};
use crate::fedopt::{FedConfig, FedError};

pub(crate) const TAG_USER_KEYS: u64 = 0x4E_01;
pub(crate) const TAG_ROUND: u64 = 0x4E_02;
pub(crate) const TAG_ATTACK: u64 = 0x4E_03;

/// A user who will try to rewrite history by private mining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub user: usize,
    pub rewrite_depth: usize,
}

/// One scheduled payment attempt: at `tick`, `payer` tries to send
/// `amount` coins to `payee` out of its unspent outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxScheduleEntry {
    pub tick: u64,
    pub payer: usize,
    pub payee: usize,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_users: usize,
    pub hash_rates: Vec<f64>,
    pub latency_ticks: u64,
    pub difficulty_bits: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversaryConfig>,
    pub fed: FedConfig<f64>,
    #[serde(default)]
    pub tx_schedule: Vec<TxScheduleEntry>,
    pub master_seed: u64,
}

impl SimConfig {
    /// Structural checks shared by the simulator and the attack harness.
    /// Rates may be zero per user (an idle or hypothetical participant)
    /// but must be finite, non-negative, and positive in total.
    pub fn validate(&self) -> Result<(), NetsimError> {
        if self.num_users == 0 {
            return Err(NetsimError::EmptyNetwork);
        }
        if self.hash_rates.len() != self.num_users {
            return Err(NetsimError::RateCountMismatch {
                rates: self.hash_rates.len(),
                users: self.num_users,
            });
        }
        if self.hash_rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(NetsimError::BadRate);
        }
        if self.hash_rates.iter().sum::<f64>() <= 0.0 {
            return Err(NetsimError::NoHashPower);
        }
        if self.fed.num_users != self.num_users {
            return Err(NetsimError::UserCountMismatch {
                fed: self.fed.num_users,
                sim: self.num_users,
            });
        }
        if let Some(adv) = &self.adversary {
            if adv.user >= self.num_users {
                return Err(NetsimError::AdversaryOutOfRange {
                    user: adv.user,
                    users: self.num_users,
                });
            }
        }
        for (i, entry) in self.tx_schedule.iter().enumerate() {
            if entry.payer >= self.num_users || entry.payee >= self.num_users {
                return Err(NetsimError::ScheduleUserOutOfRange { entry: i });
            }
            if entry.amount == 0 {
                return Err(NetsimError::ZeroAmount { entry: i });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    TxBroadcast,
    BlockFound,
    BlockArrived,
    RoundStart,
}

/// One line of the event log. `actor` is a user id, or -1 for the
/// simulation clock itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub tick: u64,
    pub kind: EventKind,
    pub actor: i64,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("network needs at least one user")]
    EmptyNetwork,
    #[error("{rates} hash rates for {users} users")]
    RateCountMismatch { rates: usize, users: usize },
    #[error("hash rates must be finite and non-negative")]
    BadRate,
    #[error("total hash power must be positive")]
    NoHashPower,
    #[error("optimizer is configured for {fed} users but the network has {sim}")]
    UserCountMismatch { fed: usize, sim: usize },
    #[error("adversary id {user} out of range for {users} users")]
    AdversaryOutOfRange { user: usize, users: usize },
    #[error("schedule entry {entry} names an unknown user")]
    ScheduleUserOutOfRange { entry: usize },
    #[error("schedule entry {entry} moves zero coins")]
    ZeroAmount { entry: usize },
    #[error("no adversary configured")]
    NoAdversary,
    #[error("rewrite depth must be at least 1")]
    BadDepth,
    #[error("mining exhausted its budget in round {round}")]
    MiningExhausted { round: u64 },
    #[error("round {round}: winner's own block rejected: {reason}")]
    SelfReject { round: u64, reason: RejectReason },
    #[error(transparent)]
    Fed(#[from] FedError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}
