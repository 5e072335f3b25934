use nalgebra::DVector;
use sha2::{Digest, Sha256};

use crate::chain::{ChainError, MAX_DIFFICULTY_BITS};

/// An unspent output: an amount payable to whoever holds the named key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxOutput {
    pub amount: u64,
    pub recipient_pubkey: Vec<u8>,
}

/// A claim on a prior output, authorized by the owner's signature over the
/// spending transaction's signing digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxInput {
    pub prev_txid: [u8; 32],
    pub output_index: u32,
    pub signature: Vec<u8>,
    pub spender_pubkey: Vec<u8>,
}

/// A coin transfer: spends some outputs, creates at most two new ones
/// (payment plus change). A coinbase transaction has no inputs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transaction {
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
}

fn push_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// Bounds-checked reader over a canonical encoding. Every length prefix is
/// validated against the remaining input before anything is allocated.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ChainError> {
        let end = self.pos.checked_add(n).ok_or(ChainError::Malformed)?;
        if end > self.bytes.len() {
            return Err(ChainError::Malformed);
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, ChainError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ChainError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn digest(&mut self) -> Result<[u8; 32], ChainError> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    fn prefixed(&mut self) -> Result<Vec<u8>, ChainError> {
        let len = self.u32()? as usize;
        Ok(self.take(len)?.to_vec())
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

impl Transaction {
    /// Canonical byte layout, little-endian throughout:
    /// input count (u32), then per input prev_txid (32 bytes), output index
    /// (u32), signature (length-prefixed), spender key (length-prefixed);
    /// output count (u32), then per output amount (u64) and recipient key
    /// (length-prefixed).
    pub fn encode(&self) -> Vec<u8> {
        self.encode_with_signatures(true)
    }

    fn encode_with_signatures(&self, include: bool) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.inputs.len() as u32).to_le_bytes());
        for input in &self.inputs {
            out.extend_from_slice(&input.prev_txid);
            out.extend_from_slice(&input.output_index.to_le_bytes());
            if include {
                push_bytes(&mut out, &input.signature);
            } else {
                push_bytes(&mut out, &[]);
            }
            push_bytes(&mut out, &input.spender_pubkey);
        }
        out.extend_from_slice(&(self.outputs.len() as u32).to_le_bytes());
        for output in &self.outputs {
            out.extend_from_slice(&output.amount.to_le_bytes());
            push_bytes(&mut out, &output.recipient_pubkey);
        }
        out
    }

    pub fn txid(&self) -> [u8; 32] {
        sha256(&self.encode())
    }

    fn decode_from(cur: &mut Cursor) -> Result<Self, ChainError> {
        let n_inputs = cur.u32()? as usize;
        let mut inputs = Vec::new();
        for _ in 0..n_inputs {
            inputs.push(TxInput {
                prev_txid: cur.digest()?,
                output_index: cur.u32()?,
                signature: cur.prefixed()?,
                spender_pubkey: cur.prefixed()?,
            });
        }
        let n_outputs = cur.u32()? as usize;
        let mut outputs = Vec::new();
        for _ in 0..n_outputs {
            outputs.push(TxOutput {
                amount: cur.u64()?,
                recipient_pubkey: cur.prefixed()?,
            });
        }
        Ok(Transaction { inputs, outputs })
    }

    /// Parses one canonical encoding; the bytes must be consumed exactly.
    pub fn decode(bytes: &[u8]) -> Result<Self, ChainError> {
        let mut cur = Cursor::new(bytes);
        let tx = Self::decode_from(&mut cur)?;
        if !cur.done() {
            return Err(ChainError::Malformed);
        }
        Ok(tx)
    }

    /// What gets signed: the encoding with every signature field emptied,
    /// so signatures cover the full spend and payout structure without
    /// covering each other.
    pub fn signing_digest(&self) -> [u8; 32] {
        sha256(&self.encode_with_signatures(false))
    }

    pub fn is_coinbase(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Mints `amount` to the named key. Every block opens with one of these.
pub fn coinbase(recipient_pubkey: Vec<u8>, amount: u64) -> Transaction {
    Transaction {
        inputs: Vec::new(),
        outputs: vec![TxOutput {
            amount,
            recipient_pubkey,
        }],
    }
}

/// One link of the chain: a proof-of-work header around a model delta and
/// the round's transactions.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBlock {
    pub prev_hash: [u8; 32],
    pub nonce: u64,
    pub timestamp: u64,
    pub t_index: u64,
    pub miner_pubkey: Vec<u8>,
    pub delta_x: DVector<f64>,
    pub transactions: Vec<Transaction>,
}

/// Byte offset of the nonce inside the canonical encoding; the miner
/// rewrites these eight bytes in place instead of re-encoding per attempt.
const NONCE_OFFSET: usize = 32;

impl GradientBlock {
    /// Canonical byte layout: prev_hash (32 bytes), nonce (u64 LE),
    /// timestamp (u64 LE), t_index (u64 LE), miner key (length-prefixed),
    /// delta length (u32 LE) and entries as IEEE-754 doubles LE, transaction
    /// count (u32 LE), then each transaction's canonical encoding.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.prev_hash);
        out.extend_from_slice(&self.nonce.to_le_bytes());
        out.extend_from_slice(&self.timestamp.to_le_bytes());
        out.extend_from_slice(&self.t_index.to_le_bytes());
        push_bytes(&mut out, &self.miner_pubkey);
        out.extend_from_slice(&(self.delta_x.len() as u32).to_le_bytes());
        for v in self.delta_x.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.transactions.len() as u32).to_le_bytes());
        for tx in &self.transactions {
            out.extend_from_slice(&tx.encode());
        }
        out
    }

    pub fn hash(&self) -> [u8; 32] {
        sha256(&self.encode())
    }

    /// Inverse of [`GradientBlock::encode`]; the bytes must parse exactly,
    /// with nothing left over.
    pub fn decode(bytes: &[u8]) -> Result<Self, ChainError> {
        let mut cur = Cursor::new(bytes);
        let prev_hash = cur.digest()?;
        let nonce = cur.u64()?;
        let timestamp = cur.u64()?;
        let t_index = cur.u64()?;
        let miner_pubkey = cur.prefixed()?;
        let n_delta = cur.u32()? as usize;
        let mut delta = Vec::new();
        for _ in 0..n_delta {
            delta.push(f64::from_le_bytes(cur.take(8)?.try_into().unwrap()));
        }
        let n_txs = cur.u32()? as usize;
        let mut transactions = Vec::new();
        for _ in 0..n_txs {
            transactions.push(Transaction::decode_from(&mut cur)?);
        }
        if !cur.done() {
            return Err(ChainError::Malformed);
        }
        Ok(GradientBlock {
            prev_hash,
            nonce,
            timestamp,
            t_index,
            miner_pubkey,
            delta_x: DVector::from_vec(delta),
            transactions,
        })
    }

    /// The fixed first block: all-zero parent, zero nonce and clock, an
    /// empty delta, and no transactions. Every chain starts here.
    pub fn genesis() -> Self {
        GradientBlock {
            prev_hash: [0; 32],
            nonce: 0,
            timestamp: 0,
            t_index: 0,
            miner_pubkey: Vec::new(),
            delta_x: DVector::zeros(0),
            transactions: Vec::new(),
        }
    }
}

pub fn hash_block(block: &GradientBlock) -> [u8; 32] {
    block.hash()
}

/// True when the digest starts with at least `bits` zero bits.
pub fn meets_difficulty(digest: &[u8; 32], bits: u32) -> bool {
    let full = (bits / 8) as usize;
    let rem = bits % 8;
    if digest[..full].iter().any(|&b| b != 0) {
        return false;
    }
    rem == 0 || digest[full] >> (8 - rem) == 0
}

/// Outcome of a mining run. Running out of attempts is an expected event
/// in a race, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MineOutcome {
    Found { nonce: u64, attempts: u64 },
    Exhausted { attempts: u64 },
}

/// Scans nonces sequentially from `nonce_start`, hashing the template with
/// each candidate patched in, and returns the first nonce whose digest
/// clears `difficulty_bits` leading zero bits. Each hash evaluation counts
/// as one attempt against `max_attempts`.
pub fn mine(
    template: &GradientBlock,
    difficulty_bits: u32,
    nonce_start: u64,
    max_attempts: u64,
) -> Result<MineOutcome, ChainError> {
    if difficulty_bits > MAX_DIFFICULTY_BITS {
        return Err(ChainError::DifficultyTooHigh(difficulty_bits));
    }
    let mut buf = template.encode();
    for attempt in 0..max_attempts {
        let nonce = nonce_start.wrapping_add(attempt);
        buf[NONCE_OFFSET..NONCE_OFFSET + 8].copy_from_slice(&nonce.to_le_bytes());
        if meets_difficulty(&sha256(&buf), difficulty_bits) {
            return Ok(MineOutcome::Found {
                nonce,
                attempts: attempt + 1,
            });
        }
    }
    Ok(MineOutcome::Exhausted {
        attempts: max_attempts,
    })
}
