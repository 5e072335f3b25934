//! The gradient-block ledger: hash-linked blocks carrying one model delta
//! and a batch of coin transactions each, secured by proof-of-work.
//!
//! Blocks hash over a fixed little-endian byte layout, so digests are
//! bit-exact across platforms and any byte of history is load-bearing.
//! Validation is UTXO-based: a transaction spends previously unspent
//! outputs, signs the spend with the output owner's key, and may leave a
//! fee, which the block's coinbase collects on top of the fixed reward.

mod block;
mod ledger;
mod persist;
mod sig;

pub use block::{
    coinbase, hash_block, meets_difficulty, mine, GradientBlock, MineOutcome, Transaction, TxInput,
    TxOutput,
};
pub use ledger::{resolve_fork, ForkCandidate, GradChain, RejectReason};
pub use persist::{load_chain, save_chain};
pub use sig::{sign_transaction, Ed25519Scheme, Keypair, SignatureScheme};

use thiserror::Error;

/// Coins minted per block. Configurable on the chain; this is the default.
pub const BLOCK_REWARD: u64 = 50;

/// Leading-zero-bit difficulties beyond this are out of scope.
pub const MAX_DIFFICULTY_BITS: u32 = 32;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("difficulty {0} exceeds the {MAX_DIFFICULTY_BITS}-bit cap")]
    DifficultyTooHigh(u32),
    #[error("no fork candidates")]
    NoCandidates,
    #[error("unknown transaction id")]
    UnknownTx,
    #[error("no held key matches an input's owner")]
    UnknownKey,
    #[error("broken chain link at height {0}")]
    BrokenLink(usize),
    #[error("malformed binary encoding")]
    Malformed,
    #[error("delta length {got} does not match model dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("recorded digest does not match recomputed bytes")]
    HashMismatch,
    #[error("block at height {height} rejected: {reason}")]
    Rejected { height: usize, reason: RejectReason },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
