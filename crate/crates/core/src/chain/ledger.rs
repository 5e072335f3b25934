use std::collections::BTreeMap;

use nalgebra::DVector;
use thiserror::Error;

use crate::attention::WeightVector;
use crate::chain::block::{hash_block, meets_difficulty, GradientBlock, Transaction, TxOutput};
use crate::chain::sig::SignatureScheme;
use crate::chain::{ChainError, MAX_DIFFICULTY_BITS};

/// Why a candidate block was refused. The `Display` form is the stable
/// kebab-case tag that shows up in logs and CLI output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RejectReason {
    #[error("bad-link")]
    BadLink,
    #[error("bad-pow")]
    BadPow,
    #[error("bad-time")]
    BadTime,
    #[error("bad-coinbase")]
    BadCoinbase,
    #[error("double-spend")]
    DoubleSpend,
    #[error("bad-signature")]
    BadSignature,
    #[error("bad-structure")]
    BadStructure,
}

type OutPoint = ([u8; 32], u32);

/// A validated chain plus the set of currently spendable outputs. All
/// mutation goes through [`GradChain::verify_and_append`], so holding a
/// value of this type is holding a proof that every block checked out.
#[derive(Debug, Clone, PartialEq)]
pub struct GradChain {
    blocks: Vec<GradientBlock>,
    utxo: BTreeMap<OutPoint, TxOutput>,
    difficulty_bits: u32,
    block_reward: u64,
}

impl GradChain {
    pub fn new(difficulty_bits: u32, block_reward: u64) -> Result<Self, ChainError> {
        if difficulty_bits > MAX_DIFFICULTY_BITS {
            return Err(ChainError::DifficultyTooHigh(difficulty_bits));
        }
        Ok(GradChain {
            blocks: vec![GradientBlock::genesis()],
            utxo: BTreeMap::new(),
            difficulty_bits,
            block_reward,
        })
    }

    pub fn blocks(&self) -> &[GradientBlock] {
        &self.blocks
    }

    pub fn tip(&self) -> &GradientBlock {
        self.blocks.last().expect("chains always hold genesis")
    }

    pub fn head_hash(&self) -> [u8; 32] {
        hash_block(self.tip())
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn difficulty_bits(&self) -> u32 {
        self.difficulty_bits
    }

    pub fn block_reward(&self) -> u64 {
        self.block_reward
    }

    pub fn utxo(&self) -> &BTreeMap<OutPoint, TxOutput> {
        &self.utxo
    }

    /// Total unspent value. Fees are recycled into coinbases rather than
    /// burned, so this always equals reward times non-genesis block count.
    pub fn supply(&self) -> u64 {
        self.utxo.values().map(|o| o.amount).sum()
    }

    /// Blank header for the next height: parent and index filled in,
    /// nonce zeroed for the miner to solve.
    pub fn next_template(
        &self,
        timestamp: u64,
        miner_pubkey: Vec<u8>,
        delta_x: DVector<f64>,
        transactions: Vec<Transaction>,
    ) -> GradientBlock {
        GradientBlock {
            prev_hash: self.head_hash(),
            nonce: 0,
            timestamp,
            t_index: self.tip().t_index + 1,
            miner_pubkey,
            delta_x,
            transactions,
        }
    }

    /// Full admission control. Checks, in order: the parent link and height,
    /// proof-of-work, a strictly advancing clock, block structure (a leading
    /// coinbase, no other input-free transactions, at most two outputs per
    /// transaction), then replays the spends against a scratch copy of the
    /// UTXO set so transactions may chain within the block, and finally that
    /// the coinbase mints exactly reward plus collected fees. State changes
    /// only if every check passes.
    pub fn verify_and_append<S: SignatureScheme>(
        &mut self,
        block: GradientBlock,
        scheme: &S,
    ) -> Result<(), RejectReason> {
        let tip = self.tip();
        if block.prev_hash != hash_block(tip) || block.t_index != tip.t_index + 1 {
            return Err(RejectReason::BadLink);
        }
        if !meets_difficulty(&block.hash(), self.difficulty_bits) {
            return Err(RejectReason::BadPow);
        }
        if block.timestamp <= tip.timestamp {
            return Err(RejectReason::BadTime);
        }

        let txs = &block.transactions;
        match txs.first() {
            Some(first) if first.is_coinbase() => {}
            _ => return Err(RejectReason::BadStructure),
        }
        if txs.iter().any(|tx| tx.outputs.len() > 2) {
            return Err(RejectReason::BadStructure);
        }
        if txs[1..].iter().any(|tx| tx.is_coinbase()) {
            return Err(RejectReason::BadStructure);
        }

        // Spends see the parent state plus outputs created earlier in this
        // block. The coinbase payout lands last, so it is spendable from the
        // next block onward, never inside its own block.
        let mut view = self.utxo.clone();
        let mut fees: u64 = 0;
        for tx in &txs[1..] {
            let digest = tx.signing_digest();
            let mut in_sum: u64 = 0;
            for input in &tx.inputs {
                let key = (input.prev_txid, input.output_index);
                let Some(prev_out) = view.get(&key) else {
                    return Err(RejectReason::DoubleSpend);
                };
                if prev_out.recipient_pubkey != input.spender_pubkey {
                    return Err(RejectReason::BadSignature);
                }
                if !scheme.verify(&input.spender_pubkey, &digest, &input.signature) {
                    return Err(RejectReason::BadSignature);
                }
                in_sum = in_sum
                    .checked_add(prev_out.amount)
                    .ok_or(RejectReason::BadStructure)?;
                view.remove(&key);
            }
            let mut out_sum: u64 = 0;
            for output in &tx.outputs {
                out_sum = out_sum
                    .checked_add(output.amount)
                    .ok_or(RejectReason::BadStructure)?;
            }
            if out_sum > in_sum {
                return Err(RejectReason::BadStructure);
            }
            fees += in_sum - out_sum;
            let id = tx.txid();
            for (i, output) in tx.outputs.iter().enumerate() {
                if view.insert((id, i as u32), output.clone()).is_some() {
                    return Err(RejectReason::BadStructure);
                }
            }
        }

        let minted: u64 = txs[0].outputs.iter().map(|o| o.amount).sum();
        let owed = self
            .block_reward
            .checked_add(fees)
            .ok_or(RejectReason::BadStructure)?;
        if minted != owed {
            return Err(RejectReason::BadCoinbase);
        }
        let cb_id = txs[0].txid();
        for (i, output) in txs[0].outputs.iter().enumerate() {
            // A coinbase identical to a still-unspent one would silently
            // merge two mints into one ledger entry; refuse it instead.
            if view.insert((cb_id, i as u32), output.clone()).is_some() {
                return Err(RejectReason::BadStructure);
            }
        }

        self.utxo = view;
        self.blocks.push(block);
        Ok(())
    }

    /// Validates an untrusted block list from scratch: the first block must
    /// be genesis and every later one must pass full admission control. On
    /// success the returned chain carries the replayed UTXO set.
    pub fn from_blocks<S: SignatureScheme>(
        difficulty_bits: u32,
        block_reward: u64,
        blocks: Vec<GradientBlock>,
        scheme: &S,
    ) -> Result<Self, ChainError> {
        let mut chain = GradChain::new(difficulty_bits, block_reward)?;
        let mut iter = blocks.into_iter();
        match iter.next() {
            Some(genesis) if genesis == GradientBlock::genesis() => {}
            _ => {
                return Err(ChainError::Rejected {
                    height: 0,
                    reason: RejectReason::BadStructure,
                })
            }
        }
        for (height, block) in iter.enumerate() {
            chain
                .verify_and_append(block, scheme)
                .map_err(|reason| ChainError::Rejected {
                    height: height + 1,
                    reason,
                })?;
        }
        Ok(chain)
    }

    /// Re-validates the whole chain from genesis by replaying every block
    /// through a fresh ledger. Returns the offending height and reason on
    /// the first failure.
    pub fn verify_all<S: SignatureScheme>(&self, scheme: &S) -> Result<(), (usize, RejectReason)> {
        match GradChain::from_blocks(
            self.difficulty_bits,
            self.block_reward,
            self.blocks.clone(),
            scheme,
        ) {
            Ok(_) => Ok(()),
            Err(ChainError::Rejected { height, reason }) => Err((height, reason)),
            Err(_) => Err((0, RejectReason::BadStructure)),
        }
    }

    /// Folds every post-genesis delta onto `x0` in chain order, verifying
    /// each parent link on the way. The fold applies one addition per block
    /// in the same order training did, so a replay is bit-identical.
    pub fn reconstruct_weights(
        &self,
        x0: &WeightVector<f64>,
    ) -> Result<WeightVector<f64>, ChainError> {
        let mut x = x0.as_vector().clone();
        for (height, window) in self.blocks.windows(2).enumerate() {
            if window[1].prev_hash != hash_block(&window[0]) {
                return Err(ChainError::BrokenLink(height + 1));
            }
            let delta = &window[1].delta_x;
            if delta.len() != x.len() {
                return Err(ChainError::DimensionMismatch {
                    got: delta.len(),
                    want: x.len(),
                });
            }
            x += delta;
        }
        Ok(WeightVector::new_unchecked(x))
    }

    /// Walks the ownership trail of `txid` back to its minting coinbases,
    /// re-verifying every signature hop. Returns false as soon as any hop
    /// fails to verify or a referenced transaction is missing.
    pub fn verify_coin_history<S: SignatureScheme>(
        &self,
        txid: &[u8; 32],
        scheme: &S,
    ) -> Result<bool, ChainError> {
        let mut index: BTreeMap<[u8; 32], &Transaction> = BTreeMap::new();
        for block in &self.blocks {
            for tx in &block.transactions {
                index.insert(tx.txid(), tx);
            }
        }
        if !index.contains_key(txid) {
            return Err(ChainError::UnknownTx);
        }
        let mut stack = vec![*txid];
        let mut seen = std::collections::BTreeSet::new();
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            let Some(tx) = index.get(&id) else {
                return Ok(false);
            };
            let digest = tx.signing_digest();
            for input in &tx.inputs {
                let Some(prev) = index.get(&input.prev_txid) else {
                    return Ok(false);
                };
                let Some(prev_out) = prev.outputs.get(input.output_index as usize) else {
                    return Ok(false);
                };
                if prev_out.recipient_pubkey != input.spender_pubkey {
                    return Ok(false);
                }
                if !scheme.verify(&input.spender_pubkey, &digest, &input.signature) {
                    return Ok(false);
                }
                stack.push(input.prev_txid);
            }
        }
        Ok(true)
    }

    #[cfg(test)]
    pub(crate) fn blocks_mut(&mut self) -> &mut Vec<GradientBlock> {
        &mut self.blocks
    }
}

/// A competing chain plus the tick its head arrived at the resolving node.
#[derive(Debug, Clone)]
pub struct ForkCandidate {
    pub chain: GradChain,
    pub head_arrival_tick: u64,
}

/// Picks the winning fork: strictly longest chain first, then earliest
/// head arrival, then lexicographically smaller head digest. All three
/// keys together are total, so every node picks the same winner.
pub fn resolve_fork(candidates: Vec<ForkCandidate>) -> Result<GradChain, ChainError> {
    candidates
        .into_iter()
        .map(|c| {
            let key = (
                std::cmp::Reverse(c.chain.len()),
                c.head_arrival_tick,
                c.chain.head_hash(),
            );
            (key, c.chain)
        })
        .min_by(|a, b| a.0.cmp(&b.0))
        .map(|(_, chain)| chain)
        .ok_or(ChainError::NoCandidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::block::{coinbase, mine, MineOutcome, TxInput};
    use crate::chain::sig::{sign_transaction, Ed25519Scheme, Keypair, SignatureScheme};

    fn scheme() -> Ed25519Scheme {
        Ed25519Scheme
    }

    fn key(seed: u64) -> Keypair {
        scheme().keypair_from_seed(seed)
    }

    /// Mines and appends a block at difficulty 0 for ledger-logic tests.
    fn push_block(
        chain: &mut GradChain,
        miner: &Keypair,
        timestamp: u64,
        mut txs: Vec<Transaction>,
        fees: u64,
    ) -> GradientBlock {
        let mut all = vec![coinbase(miner.public.clone(), chain.block_reward() + fees)];
        all.append(&mut txs);
        let mut block =
            chain.next_template(timestamp, miner.public.clone(), DVector::zeros(0), all);
        let MineOutcome::Found { nonce, .. } =
            mine(&block, chain.difficulty_bits(), 0, 1 << 20).unwrap()
        else {
            panic!("mining exhausted at test difficulty");
        };
        block.nonce = nonce;
        chain
            .verify_and_append(block.clone(), &scheme())
            .expect("test block should be valid");
        block
    }

    /// Spends `(txid, index)` paying `amount` to `payee` with change back
    /// to the owner.
    fn payment(
        chain: &GradChain,
        owner: &Keypair,
        outpoint: OutPoint,
        payee: &Keypair,
        amount: u64,
        fee: u64,
    ) -> Transaction {
        let have = chain.utxo()[&outpoint].amount;
        let mut outputs = vec![TxOutput {
            amount,
            recipient_pubkey: payee.public.clone(),
        }];
        let change = have - amount - fee;
        if change > 0 {
            outputs.push(TxOutput {
                amount: change,
                recipient_pubkey: owner.public.clone(),
            });
        }
        let tx = Transaction {
            inputs: vec![TxInput {
                prev_txid: outpoint.0,
                output_index: outpoint.1,
                signature: Vec::new(),
                spender_pubkey: owner.public.clone(),
            }],
            outputs,
        };
        sign_transaction(&scheme(), std::slice::from_ref(owner), tx).unwrap()
    }

    #[test]
    fn fresh_chains_hold_exactly_genesis() {
        let chain = GradChain::new(4, 50).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.supply(), 0);
        assert_eq!(chain.head_hash(), GradientBlock::genesis().hash());
        assert!(matches!(
            GradChain::new(40, 50),
            Err(ChainError::DifficultyTooHigh(40))
        ));
    }

    #[test]
    fn coinbase_only_blocks_extend_the_chain_and_mint_reward() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let miner = key(1);
        push_block(&mut chain, &miner, 1, vec![], 0);
        push_block(&mut chain, &key(2), 2, vec![], 0);
        assert_eq!(chain.len(), 3);
        assert_eq!(chain.supply(), 100);
        assert_eq!(chain.utxo().len(), 2);
        assert!(chain.verify_all(&scheme()).is_ok());
    }

    #[test]
    fn wrong_parent_or_height_is_bad_link() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let miner = key(1);
        let mut block = chain.next_template(
            1,
            miner.public.clone(),
            DVector::zeros(0),
            vec![coinbase(miner.public.clone(), 50)],
        );
        block.prev_hash = [1; 32];
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadLink)
        );
        let mut block = chain.next_template(
            1,
            miner.public.clone(),
            DVector::zeros(0),
            vec![coinbase(miner.public.clone(), 50)],
        );
        block.t_index = 5;
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadLink)
        );
        assert_eq!(chain.len(), 1, "rejected blocks must not mutate state");
    }

    #[test]
    fn insufficient_work_is_bad_pow() {
        let mut chain = GradChain::new(16, 50).unwrap();
        let miner = key(1);
        let template = chain.next_template(
            1,
            miner.public.clone(),
            DVector::zeros(0),
            vec![coinbase(miner.public.clone(), 50)],
        );
        // A nonce that fails the 16-bit target exists within a few tries.
        let mut block = template;
        for nonce in 0..64 {
            block.nonce = nonce;
            if !meets_difficulty(&block.hash(), 16) {
                break;
            }
        }
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadPow)
        );
    }

    #[test]
    fn stalled_clock_is_bad_time() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let miner = key(1);
        push_block(&mut chain, &miner, 5, vec![], 0);
        let block = chain.next_template(
            5,
            miner.public.clone(),
            DVector::zeros(0),
            vec![coinbase(miner.public.clone(), 50)],
        );
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadTime)
        );
    }

    #[test]
    fn wrong_mint_is_bad_coinbase() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let miner = key(1);
        for amount in [49, 51] {
            let block = chain.next_template(
                1,
                miner.public.clone(),
                DVector::zeros(0),
                vec![coinbase(miner.public.clone(), amount)],
            );
            assert_eq!(
                chain.verify_and_append(block, &scheme()),
                Err(RejectReason::BadCoinbase)
            );
        }
    }

    #[test]
    fn missing_or_extra_coinbase_is_bad_structure() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let miner = key(1);
        let block = chain.next_template(1, miner.public.clone(), DVector::zeros(0), vec![]);
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadStructure)
        );
        let block = chain.next_template(
            1,
            miner.public.clone(),
            DVector::zeros(0),
            vec![
                coinbase(miner.public.clone(), 50),
                coinbase(miner.public.clone(), 1),
            ],
        );
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadStructure)
        );
    }

    #[test]
    fn fees_flow_into_the_coinbase() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let alice = key(1);
        let bob = key(2);
        let b1 = push_block(&mut chain, &alice, 1, vec![], 0);
        let cb_id = b1.transactions[0].txid();
        // Alice pays Bob 30 with a fee of 2 and 18 change.
        let tx = payment(&chain, &alice, (cb_id, 0), &bob, 30, 2);
        push_block(&mut chain, &bob, 2, vec![tx], 2);
        assert_eq!(chain.supply(), 100);
        assert!(chain.verify_all(&scheme()).is_ok());
        let amounts: Vec<u64> = chain.utxo().values().map(|o| o.amount).collect();
        let mut sorted = amounts.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![18, 30, 52]);
    }

    #[test]
    fn underpaying_the_fee_collector_is_bad_coinbase() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let alice = key(1);
        let bob = key(2);
        let b1 = push_block(&mut chain, &alice, 1, vec![], 0);
        let cb_id = b1.transactions[0].txid();
        let tx = payment(&chain, &alice, (cb_id, 0), &bob, 30, 2);
        // Coinbase claims only the bare reward, ignoring the 2-unit fee.
        let block = chain.next_template(
            2,
            bob.public.clone(),
            DVector::zeros(0),
            vec![coinbase(bob.public.clone(), 50), tx],
        );
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadCoinbase)
        );
    }

    #[test]
    fn spending_an_output_twice_is_double_spend() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let alice = key(1);
        let bob = key(2);
        let carol = key(3);
        let b1 = push_block(&mut chain, &alice, 1, vec![], 0);
        let cb_id = b1.transactions[0].txid();
        let tx1 = payment(&chain, &alice, (cb_id, 0), &bob, 30, 0);
        let tx2 = payment(&chain, &alice, (cb_id, 0), &carol, 10, 0);
        // Same block: second spend of the coinbase must be refused.
        let block = chain.next_template(
            2,
            bob.public.clone(),
            DVector::zeros(0),
            vec![coinbase(bob.public.clone(), 50), tx1.clone(), tx2.clone()],
        );
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::DoubleSpend)
        );
        // Across blocks: spend once, then try again.
        push_block(&mut chain, &bob, 2, vec![tx1], 0);
        let block = chain.next_template(
            3,
            bob.public.clone(),
            DVector::zeros(0),
            vec![coinbase(bob.public.clone(), 50), tx2],
        );
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::DoubleSpend)
        );
    }

    #[test]
    fn chained_spends_inside_one_block_are_accepted() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let alice = key(1);
        let bob = key(2);
        let carol = key(3);
        let b1 = push_block(&mut chain, &alice, 1, vec![], 0);
        let cb_id = b1.transactions[0].txid();
        let tx1 = payment(&chain, &alice, (cb_id, 0), &bob, 30, 0);
        // tx2 spends tx1's payout in the same block.
        let tx2 = {
            let tx = Transaction {
                inputs: vec![TxInput {
                    prev_txid: tx1.txid(),
                    output_index: 0,
                    signature: Vec::new(),
                    spender_pubkey: bob.public.clone(),
                }],
                outputs: vec![TxOutput {
                    amount: 30,
                    recipient_pubkey: carol.public.clone(),
                }],
            };
            sign_transaction(&scheme(), std::slice::from_ref(&bob), tx).unwrap()
        };
        push_block(&mut chain, &carol, 2, vec![tx1, tx2], 0);
        assert_eq!(chain.supply(), 100);
        assert!(chain.verify_all(&scheme()).is_ok());
    }

    #[test]
    fn tampered_payee_invalidates_the_signature() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let alice = key(1);
        let bob = key(2);
        let mallory = key(66);
        let b1 = push_block(&mut chain, &alice, 1, vec![], 0);
        let cb_id = b1.transactions[0].txid();
        let mut tx = payment(&chain, &alice, (cb_id, 0), &bob, 30, 0);
        tx.outputs[0].recipient_pubkey = mallory.public.clone();
        let block = chain.next_template(
            2,
            bob.public.clone(),
            DVector::zeros(0),
            vec![coinbase(bob.public.clone(), 50), tx],
        );
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadSignature)
        );
    }

    #[test]
    fn spending_someone_elses_output_is_bad_signature() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let alice = key(1);
        let mallory = key(66);
        let b1 = push_block(&mut chain, &alice, 1, vec![], 0);
        let cb_id = b1.transactions[0].txid();
        // Mallory signs with her own key but the output belongs to Alice.
        let tx = {
            let tx = Transaction {
                inputs: vec![TxInput {
                    prev_txid: cb_id,
                    output_index: 0,
                    signature: Vec::new(),
                    spender_pubkey: mallory.public.clone(),
                }],
                outputs: vec![TxOutput {
                    amount: 50,
                    recipient_pubkey: mallory.public.clone(),
                }],
            };
            sign_transaction(&scheme(), std::slice::from_ref(&mallory), tx).unwrap()
        };
        let block = chain.next_template(
            2,
            mallory.public.clone(),
            DVector::zeros(0),
            vec![coinbase(mallory.public.clone(), 50), tx],
        );
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadSignature)
        );
    }

    #[test]
    fn more_than_two_outputs_is_bad_structure() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let alice = key(1);
        let b1 = push_block(&mut chain, &alice, 1, vec![], 0);
        let cb_id = b1.transactions[0].txid();
        let tx = {
            let outputs = (0..3)
                .map(|i| TxOutput {
                    amount: 10 + i,
                    recipient_pubkey: alice.public.clone(),
                })
                .collect();
            let tx = Transaction {
                inputs: vec![TxInput {
                    prev_txid: cb_id,
                    output_index: 0,
                    signature: Vec::new(),
                    spender_pubkey: alice.public.clone(),
                }],
                outputs,
            };
            sign_transaction(&scheme(), std::slice::from_ref(&alice), tx).unwrap()
        };
        let block = chain.next_template(
            2,
            alice.public.clone(),
            DVector::zeros(0),
            vec![coinbase(alice.public.clone(), 67), tx],
        );
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadStructure)
        );
    }

    #[test]
    fn overspending_inputs_is_bad_structure() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let alice = key(1);
        let b1 = push_block(&mut chain, &alice, 1, vec![], 0);
        let cb_id = b1.transactions[0].txid();
        let tx = {
            let tx = Transaction {
                inputs: vec![TxInput {
                    prev_txid: cb_id,
                    output_index: 0,
                    signature: Vec::new(),
                    spender_pubkey: alice.public.clone(),
                }],
                outputs: vec![TxOutput {
                    amount: 51,
                    recipient_pubkey: alice.public.clone(),
                }],
            };
            sign_transaction(&scheme(), std::slice::from_ref(&alice), tx).unwrap()
        };
        let block = chain.next_template(
            2,
            alice.public.clone(),
            DVector::zeros(0),
            vec![coinbase(alice.public.clone(), 50), tx],
        );
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadStructure)
        );
    }

    #[test]
    fn duplicate_coinbase_payouts_are_refused() {
        // Same miner key, same amount, no fees: byte-identical coinbase,
        // whose second appearance would alias the first ledger entry.
        let mut chain = GradChain::new(0, 50).unwrap();
        let miner = key(1);
        push_block(&mut chain, &miner, 1, vec![], 0);
        let block = chain.next_template(
            2,
            miner.public.clone(),
            DVector::zeros(0),
            vec![coinbase(miner.public.clone(), 50)],
        );
        assert_eq!(
            chain.verify_and_append(block, &scheme()),
            Err(RejectReason::BadStructure)
        );
    }

    #[test]
    fn reconstruction_folds_deltas_in_chain_order() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let miner = key(1);
        let deltas = [
            DVector::from_vec(vec![1.0, 0.0, -2.0, 0.5]),
            DVector::from_vec(vec![0.25, -1.5, 3.0, 0.125]),
        ];
        for (i, delta) in deltas.iter().enumerate() {
            let mut block = chain.next_template(
                (i + 1) as u64,
                miner.public.clone(),
                delta.clone(),
                vec![coinbase(
                    scheme().keypair_from_seed(100 + i as u64).public,
                    50,
                )],
            );
            let MineOutcome::Found { nonce, .. } = mine(&block, 0, 0, 4).unwrap() else {
                panic!()
            };
            block.nonce = nonce;
            chain.verify_and_append(block, &scheme()).unwrap();
        }
        let x0 = WeightVector::new_unchecked(DVector::from_vec(vec![0.5, 0.5, 0.5, 0.5]));
        let got = chain.reconstruct_weights(&x0).unwrap();
        let want = x0.as_vector() + &deltas[0] + &deltas[1];
        assert_eq!(got.as_vector(), &want);
    }

    #[test]
    fn reconstruction_detects_broken_links_and_bad_dimensions() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let miner = key(1);
        push_block(&mut chain, &miner, 1, vec![], 0);
        push_block(&mut chain, &key(2), 2, vec![], 0);
        let x0 = WeightVector::zeros(0);
        assert!(chain.reconstruct_weights(&x0).is_ok());
        let mut broken = chain.clone();
        broken.blocks_mut()[2].prev_hash = [0xFF; 32];
        assert!(matches!(
            broken.reconstruct_weights(&x0),
            Err(ChainError::BrokenLink(2))
        ));
        let x0_wide = WeightVector::zeros(2);
        assert!(matches!(
            chain.reconstruct_weights(&x0_wide),
            Err(ChainError::DimensionMismatch { got: 0, want: 4 })
        ));
    }

    #[test]
    fn coin_history_walks_back_to_the_mint() {
        let mut chain = GradChain::new(0, 50).unwrap();
        let alice = key(1);
        let bob = key(2);
        let carol = key(3);
        let b1 = push_block(&mut chain, &alice, 1, vec![], 0);
        let cb_id = b1.transactions[0].txid();
        let tx1 = payment(&chain, &alice, (cb_id, 0), &bob, 30, 0);
        let tx1_id = tx1.txid();
        push_block(&mut chain, &key(10), 2, vec![tx1], 0);
        let tx2 = payment(&chain, &bob, (tx1_id, 0), &carol, 30, 0);
        let tx2_id = tx2.txid();
        push_block(&mut chain, &key(11), 3, vec![tx2], 0);

        assert!(chain.verify_coin_history(&cb_id, &scheme()).unwrap());
        assert!(chain.verify_coin_history(&tx2_id, &scheme()).unwrap());
        assert!(matches!(
            chain.verify_coin_history(&[5; 32], &scheme()),
            Err(ChainError::UnknownTx)
        ));

        // Corrupt the middle hop's signature in place; the history of the
        // downstream transaction must now fail to verify.
        let mut corrupted = chain.clone();
        for block in corrupted.blocks_mut() {
            for tx in &mut block.transactions {
                if tx.txid() == tx1_id {
                    tx.inputs[0].signature[0] ^= 0x40;
                }
            }
        }
        assert!(!corrupted.verify_coin_history(&tx2_id, &scheme()).unwrap());
    }

    #[test]
    fn fork_resolution_prefers_length_then_arrival_then_digest() {
        let miner = key(1);
        let mut three = GradChain::new(0, 50).unwrap();
        let mut five = GradChain::new(0, 50).unwrap();
        for t in 1..=3 {
            push_block(&mut three, &key(t), t, vec![], 0);
        }
        for t in 1..=5 {
            push_block(&mut five, &key(10 + t), t, vec![], 0);
        }
        let picked = resolve_fork(vec![
            ForkCandidate {
                chain: three.clone(),
                head_arrival_tick: 1,
            },
            ForkCandidate {
                chain: five.clone(),
                head_arrival_tick: 99,
            },
        ])
        .unwrap();
        assert_eq!(picked.head_hash(), five.head_hash());

        // Equal length: earliest arrival wins.
        let mut other_five = GradChain::new(0, 50).unwrap();
        for t in 1..=5 {
            push_block(&mut other_five, &key(20 + t), t, vec![], 0);
        }
        let picked = resolve_fork(vec![
            ForkCandidate {
                chain: five.clone(),
                head_arrival_tick: 10,
            },
            ForkCandidate {
                chain: other_five.clone(),
                head_arrival_tick: 7,
            },
        ])
        .unwrap();
        assert_eq!(picked.head_hash(), other_five.head_hash());

        // Equal length and arrival: smaller head digest wins.
        let low = std::cmp::min(five.head_hash(), other_five.head_hash());
        let picked = resolve_fork(vec![
            ForkCandidate {
                chain: five.clone(),
                head_arrival_tick: 4,
            },
            ForkCandidate {
                chain: other_five.clone(),
                head_arrival_tick: 4,
            },
        ])
        .unwrap();
        assert_eq!(picked.head_hash(), low);

        let single = resolve_fork(vec![ForkCandidate {
            chain: three.clone(),
            head_arrival_tick: 0,
        }])
        .unwrap();
        assert_eq!(single.head_hash(), three.head_hash());
        assert!(matches!(
            resolve_fork(vec![]),
            Err(ChainError::NoCandidates)
        ));
        let _ = miner;
    }
}
