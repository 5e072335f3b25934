//! Chain snapshots as JSON. Digests travel hex-encoded alongside the raw
//! fields and are recomputed on load; any mismatch fails the load, so a
//! snapshot cannot smuggle in bytes its own hashes disown. Loading also
//! replays full validation from genesis.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::chain::block::{GradientBlock, Transaction, TxInput, TxOutput};
use crate::chain::ledger::GradChain;
use crate::chain::sig::SignatureScheme;
use crate::chain::ChainError;

#[derive(Serialize, Deserialize)]
struct ChainFile {
    difficulty_bits: u32,
    block_reward: u64,
    blocks: Vec<BlockJson>,
}

#[derive(Serialize, Deserialize)]
struct BlockJson {
    prev_hash: String,
    nonce: u64,
    timestamp: u64,
    t_index: u64,
    miner_pubkey: String,
    delta_x: Vec<f64>,
    transactions: Vec<TxJson>,
    hash: String,
}

#[derive(Serialize, Deserialize)]
struct TxJson {
    inputs: Vec<TxInputJson>,
    outputs: Vec<TxOutputJson>,
    txid: String,
}

#[derive(Serialize, Deserialize)]
struct TxInputJson {
    prev_txid: String,
    output_index: u32,
    signature: String,
    spender_pubkey: String,
}

#[derive(Serialize, Deserialize)]
struct TxOutputJson {
    amount: u64,
    recipient_pubkey: String,
}

fn digest32(hex_str: &str) -> Result<[u8; 32], ChainError> {
    let bytes = hex::decode(hex_str).map_err(|_| ChainError::HashMismatch)?;
    bytes.try_into().map_err(|_| ChainError::HashMismatch)
}

fn tx_to_json(tx: &Transaction) -> TxJson {
    TxJson {
        inputs: tx
            .inputs
            .iter()
            .map(|i| TxInputJson {
                prev_txid: hex::encode(i.prev_txid),
                output_index: i.output_index,
                signature: hex::encode(&i.signature),
                spender_pubkey: hex::encode(&i.spender_pubkey),
            })
            .collect(),
        outputs: tx
            .outputs
            .iter()
            .map(|o| TxOutputJson {
                amount: o.amount,
                recipient_pubkey: hex::encode(&o.recipient_pubkey),
            })
            .collect(),
        txid: hex::encode(tx.txid()),
    }
}

fn tx_from_json(tx: &TxJson) -> Result<Transaction, ChainError> {
    let rebuilt = Transaction {
        inputs: tx
            .inputs
            .iter()
            .map(|i| {
                Ok(TxInput {
                    prev_txid: digest32(&i.prev_txid)?,
                    output_index: i.output_index,
                    signature: hex::decode(&i.signature).map_err(|_| ChainError::HashMismatch)?,
                    spender_pubkey: hex::decode(&i.spender_pubkey)
                        .map_err(|_| ChainError::HashMismatch)?,
                })
            })
            .collect::<Result<_, ChainError>>()?,
        outputs: tx
            .outputs
            .iter()
            .map(|o| {
                Ok(TxOutput {
                    amount: o.amount,
                    recipient_pubkey: hex::decode(&o.recipient_pubkey)
                        .map_err(|_| ChainError::HashMismatch)?,
                })
            })
            .collect::<Result<_, ChainError>>()?,
    };
    if hex::encode(rebuilt.txid()) != tx.txid {
        return Err(ChainError::HashMismatch);
    }
    Ok(rebuilt)
}

pub fn save_chain(chain: &GradChain, path: &Path) -> Result<(), ChainError> {
    let file = ChainFile {
        difficulty_bits: chain.difficulty_bits(),
        block_reward: chain.block_reward(),
        blocks: chain
            .blocks()
            .iter()
            .map(|b| BlockJson {
                prev_hash: hex::encode(b.prev_hash),
                nonce: b.nonce,
                timestamp: b.timestamp,
                t_index: b.t_index,
                miner_pubkey: hex::encode(&b.miner_pubkey),
                delta_x: b.delta_x.iter().copied().collect(),
                transactions: b.transactions.iter().map(tx_to_json).collect(),
                hash: hex::encode(b.hash()),
            })
            .collect(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_chain<S: SignatureScheme>(path: &Path, scheme: &S) -> Result<GradChain, ChainError> {
    let file: ChainFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let mut blocks = Vec::with_capacity(file.blocks.len());
    for b in &file.blocks {
        let block = GradientBlock {
            prev_hash: digest32(&b.prev_hash)?,
            nonce: b.nonce,
            timestamp: b.timestamp,
            t_index: b.t_index,
            miner_pubkey: hex::decode(&b.miner_pubkey).map_err(|_| ChainError::HashMismatch)?,
            delta_x: DVector::from_vec(b.delta_x.clone()),
            transactions: b
                .transactions
                .iter()
                .map(tx_from_json)
                .collect::<Result<_, ChainError>>()?,
        };
        if hex::encode(block.hash()) != b.hash {
            return Err(ChainError::HashMismatch);
        }
        blocks.push(block);
    }
    GradChain::from_blocks(file.difficulty_bits, file.block_reward, blocks, scheme)
}
