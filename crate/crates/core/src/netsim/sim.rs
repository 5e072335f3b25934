use std::collections::BTreeSet;

use rand::Rng;

use crate::attention::AttentionInstance;
use crate::chain::{
    coinbase, mine, sign_transaction, Ed25519Scheme, GradChain, GradientBlock, Keypair,
    MineOutcome, RejectReason, SignatureScheme, Transaction, TxInput, TxOutput, BLOCK_REWARD,
};
use crate::fedopt::Trainer;
use crate::netsim::{
    pow_race, EventKind, NetsimError, SimConfig, SimEvent, TxScheduleEntry, TAG_ROUND,
    TAG_USER_KEYS,
};
use crate::seed::{derive_seed, derive_seed2, rng_from};

type OutPoint = ([u8; 32], u32);

fn short_hex(digest: [u8; 32]) -> String {
    hex::encode(&digest[..8])
}

/// One user's view of the world: its replica of the chain, its key ring
/// (identity key first, then one fresh key per block it mined), and the
/// transactions it has heard about but not yet seen confirmed.
struct UserState {
    chain: GradChain,
    keys: Vec<Keypair>,
    inbox: Vec<(u64, Transaction)>,
    mempool: Vec<Transaction>,
    reserved: BTreeSet<OutPoint>,
}

impl UserState {
    fn owns(&self, pubkey: &[u8]) -> Option<&Keypair> {
        self.keys.iter().find(|k| k.public == pubkey)
    }
}

/// A block rejection observed at some user, kept for post-run inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rejection {
    pub round: u64,
    pub user: usize,
    pub reason: RejectReason,
}

/// The whole network: every user replica, the shared training state, the
/// logical clock, and the event log. Advance it one mining round at a
/// time with [`SimState::run_round`].
pub struct SimState {
    cfg: SimConfig,
    users: Vec<UserState>,
    trainer: Trainer<f64>,
    scheme: Ed25519Scheme,
    tick: u64,
    round: u64,
    schedule: Vec<TxScheduleEntry>,
    next_schedule: usize,
    events: Vec<SimEvent>,
    rejections: Vec<Rejection>,
    round_seed_base: u64,
    key_seed_base: u64,
}

impl SimState {
    pub fn new(inst: AttentionInstance<f64>, cfg: SimConfig) -> Result<Self, NetsimError> {
        cfg.validate()?;
        let scheme = Ed25519Scheme;
        let key_seed_base = derive_seed(cfg.master_seed, TAG_USER_KEYS);
        let users = (0..cfg.num_users)
            .map(|u| {
                Ok(UserState {
                    chain: GradChain::new(cfg.difficulty_bits, BLOCK_REWARD)?,
                    keys: vec![scheme.keypair_from_seed(derive_seed2(key_seed_base, u as u64, 0))],
                    inbox: Vec::new(),
                    mempool: Vec::new(),
                    reserved: BTreeSet::new(),
                })
            })
            .collect::<Result<Vec<_>, NetsimError>>()?;
        let trainer = Trainer::new(inst, &cfg.fed)?;
        let mut schedule = cfg.tx_schedule.clone();
        schedule.sort_by_key(|e| e.tick);
        Ok(SimState {
            users,
            trainer,
            scheme,
            tick: 0,
            round: 0,
            schedule,
            next_schedule: 0,
            events: Vec::new(),
            rejections: Vec::new(),
            round_seed_base: derive_seed(cfg.master_seed, TAG_ROUND),
            key_seed_base,
            cfg,
        })
    }

    fn push_event(&mut self, tick: u64, kind: EventKind, actor: i64, detail: String) {
        self.events.push(SimEvent {
            tick,
            kind,
            actor,
            detail,
        });
    }

    /// Moves inbox entries that have arrived by `now` into the mempool,
    /// preserving broadcast order.
    fn ingest(&mut self, user: usize, now: u64) {
        let u = &mut self.users[user];
        let mut kept = Vec::new();
        for (arrival, tx) in u.inbox.drain(..) {
            if arrival <= now {
                u.mempool.push(tx);
            } else {
                kept.push((arrival, tx));
            }
        }
        u.inbox = kept;
    }

    /// Assembles a payment for a schedule entry out of the payer's
    /// unreserved unspent outputs, oldest ledger entry first. Returns None
    /// when the spendable balance cannot cover the amount.
    fn build_payment(&self, entry: &TxScheduleEntry) -> Option<Transaction> {
        let payer = &self.users[entry.payer];
        let payee_pub = self.users[entry.payee].keys[0].public.clone();
        let mut picked: Vec<(OutPoint, Vec<u8>)> = Vec::new();
        let mut total = 0u64;
        for (op, out) in payer.chain.utxo() {
            if payer.reserved.contains(op) {
                continue;
            }
            if payer.owns(&out.recipient_pubkey).is_some() {
                picked.push((*op, out.recipient_pubkey.clone()));
                total += out.amount;
                if total >= entry.amount {
                    break;
                }
            }
        }
        if total < entry.amount {
            return None;
        }
        let mut outputs = vec![TxOutput {
            amount: entry.amount,
            recipient_pubkey: payee_pub,
        }];
        let change = total - entry.amount;
        if change > 0 {
            outputs.push(TxOutput {
                amount: change,
                recipient_pubkey: payer.keys[0].public.clone(),
            });
        }
        let tx = Transaction {
            inputs: picked
                .into_iter()
                .map(|(op, owner)| TxInput {
                    prev_txid: op.0,
                    output_index: op.1,
                    signature: Vec::new(),
                    spender_pubkey: owner,
                })
                .collect(),
            outputs,
        };
        sign_transaction(&self.scheme, &payer.keys, tx).ok()
    }

    /// Winner-side mempool filtering: replays candidates in arrival order
    /// against a scratch copy of the ledger, keeping the ones that apply
    /// cleanly (later candidates may spend earlier ones' outputs). Invalid
    /// candidates are dropped from this user's mempool for good. Returns
    /// the selected transactions and their total fee.
    fn select_valid(&mut self, user: usize) -> (Vec<Transaction>, u64) {
        let u = &mut self.users[user];
        let mut view = u.chain.utxo().clone();
        let mut selected = Vec::new();
        let mut fees = 0u64;
        for tx in std::mem::take(&mut u.mempool) {
            let mut ok = tx.outputs.len() <= 2 && !tx.is_coinbase();
            let mut in_sum = 0u64;
            let digest = tx.signing_digest();
            if ok {
                for input in &tx.inputs {
                    let key = (input.prev_txid, input.output_index);
                    let Some(prev) = view.get(&key) else {
                        ok = false;
                        break;
                    };
                    if prev.recipient_pubkey != input.spender_pubkey
                        || !self
                            .scheme
                            .verify(&input.spender_pubkey, &digest, &input.signature)
                    {
                        ok = false;
                        break;
                    }
                    in_sum += prev.amount;
                }
            }
            let out_sum: u64 = tx.outputs.iter().map(|o| o.amount).sum();
            if ok && out_sum <= in_sum {
                for input in &tx.inputs {
                    view.remove(&(input.prev_txid, input.output_index));
                }
                let id = tx.txid();
                for (i, out) in tx.outputs.iter().enumerate() {
                    view.insert((id, i as u32), out.clone());
                }
                fees += in_sum - out_sum;
                selected.push(tx);
            } else {
                // Dead on this replica; free any of our own reservations.
                for input in &tx.inputs {
                    u.reserved.remove(&(input.prev_txid, input.output_index));
                }
            }
        }
        (selected, fees)
    }

    /// After a block lands on `user`'s replica: confirmed transactions
    /// leave the mempool, and so does anything whose inputs the new state
    /// no longer holds. Reservations follow the mempool.
    fn gc_after_block(&mut self, user: usize, block: &GradientBlock) {
        let included: BTreeSet<[u8; 32]> = block.transactions.iter().map(|tx| tx.txid()).collect();
        let u = &mut self.users[user];
        let mut kept = Vec::new();
        for tx in u.mempool.drain(..) {
            let confirmed = included.contains(&tx.txid());
            let spendable = tx
                .inputs
                .iter()
                .all(|i| u.chain.utxo().contains_key(&(i.prev_txid, i.output_index)));
            if confirmed || !spendable {
                for input in &tx.inputs {
                    u.reserved.remove(&(input.prev_txid, input.output_index));
                }
            } else {
                kept.push(tx);
            }
        }
        u.mempool = kept;
    }

    /// One full protocol round: scheduled payments go out, the PoW race
    /// picks a winner, the winner trains its local objective and packages
    /// the update with the valid pending transactions into a mined block,
    /// and everyone appends it as it propagates.
    pub fn run_round(&mut self) -> Result<(), NetsimError> {
        let t = self.round + 1;
        let t0 = self.tick;
        self.push_event(t0, EventKind::RoundStart, -1, format!("round {t}"));

        let mut rng = rng_from(derive_seed2(self.round_seed_base, t, 0));
        let (winner, solve_ticks) =
            pow_race(&self.cfg.hash_rates, self.cfg.difficulty_bits, &mut rng)?;
        let t_found = t0 + solve_ticks;

        // Payments scheduled up to the block's discovery are broadcast now;
        // they reach every peer one latency later (the sender immediately).
        while self.next_schedule < self.schedule.len()
            && self.schedule[self.next_schedule].tick <= t_found
        {
            let entry = self.schedule[self.next_schedule];
            self.next_schedule += 1;
            let btick = entry.tick.max(t0);
            match self.build_payment(&entry) {
                Some(tx) => {
                    self.push_event(
                        btick,
                        EventKind::TxBroadcast,
                        entry.payer as i64,
                        short_hex(tx.txid()),
                    );
                    for input in &tx.inputs {
                        self.users[entry.payer]
                            .reserved
                            .insert((input.prev_txid, input.output_index));
                    }
                    let arrival = btick + self.cfg.latency_ticks;
                    for u in 0..self.cfg.num_users {
                        if u == entry.payer {
                            self.users[u].mempool.push(tx.clone());
                        } else {
                            self.users[u].inbox.push((arrival, tx.clone()));
                        }
                    }
                }
                None => {
                    self.push_event(
                        btick,
                        EventKind::TxBroadcast,
                        entry.payer as i64,
                        "skipped:insufficient-funds".into(),
                    );
                }
            }
        }

        // The winner assembles from what has reached it by discovery time.
        self.ingest(winner, t_found);
        let record = self.trainer.step(winner)?;
        let (selected, fees) = self.select_valid(winner);
        let cb_key =
            self.scheme
                .keypair_from_seed(derive_seed2(self.key_seed_base, winner as u64, t));
        self.users[winner].keys.push(cb_key.clone());
        let mut txs = vec![coinbase(cb_key.public, BLOCK_REWARD + fees)];
        txs.extend(selected);
        let template = self.users[winner].chain.next_template(
            t_found,
            self.users[winner].keys[0].public.clone(),
            record.applied.clone(),
            txs,
        );

        let nonce_start: u64 = rng.gen();
        let budget = 1u64
            .checked_shl(self.cfg.difficulty_bits + 16)
            .unwrap_or(u64::MAX);
        let block = match mine(&template, self.cfg.difficulty_bits, nonce_start, budget)? {
            MineOutcome::Found { nonce, .. } => {
                let mut b = template;
                b.nonce = nonce;
                b
            }
            MineOutcome::Exhausted { .. } => return Err(NetsimError::MiningExhausted { round: t }),
        };
        self.push_event(
            t_found,
            EventKind::BlockFound,
            winner as i64,
            short_hex(block.hash()),
        );
        self.users[winner]
            .chain
            .verify_and_append(block.clone(), &self.scheme)
            .map_err(|reason| NetsimError::SelfReject { round: t, reason })?;
        self.gc_after_block(winner, &block);

        let t_arrive = t_found + self.cfg.latency_ticks;
        for u in 0..self.cfg.num_users {
            if u == winner {
                continue;
            }
            self.ingest(u, t_arrive);
            match self.users[u]
                .chain
                .verify_and_append(block.clone(), &self.scheme)
            {
                Ok(()) => {
                    self.push_event(
                        t_arrive,
                        EventKind::BlockArrived,
                        u as i64,
                        "accepted".into(),
                    );
                    self.gc_after_block(u, &block);
                }
                Err(reason) => {
                    self.push_event(
                        t_arrive,
                        EventKind::BlockArrived,
                        u as i64,
                        format!("rejected:{reason}"),
                    );
                    self.rejections.push(Rejection {
                        round: t,
                        user: u,
                        reason,
                    });
                }
            }
        }

        self.tick = t_arrive;
        self.round = t;
        Ok(())
    }

    /// Runs the configured number of global rounds.
    pub fn run(&mut self) -> Result<(), NetsimError> {
        for _ in 0..self.cfg.fed.global_rounds {
            self.run_round()?;
        }
        Ok(())
    }

    /// Drops a transaction straight into every mempool, bypassing
    /// construction and broadcast. Lets experiments stage arbitrary
    /// (including invalid) traffic.
    pub fn inject_raw_transaction(&mut self, tx: Transaction) {
        for u in &mut self.users {
            u.mempool.push(tx.clone());
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn trainer(&self) -> &Trainer<f64> {
        &self.trainer
    }

    pub fn chain(&self, user: usize) -> &GradChain {
        &self.users[user].chain
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    /// The log in its on-disk form: one JSON object per line.
    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&serde_json::to_string(ev).expect("events always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn rejections(&self) -> &[Rejection] {
        &self.rejections
    }

    pub fn head_hash(&self) -> [u8; 32] {
        self.users[0].chain.head_hash()
    }

    pub fn heads_agree(&self) -> bool {
        let head = self.users[0].chain.head_hash();
        self.users.iter().all(|u| u.chain.head_hash() == head)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fedopt::{Eta, FedConfig};

    fn instance() -> AttentionInstance<f64> {
        AttentionInstance::generate(6, 2, 33)
    }

    fn config(users: usize, rounds: usize, seed: u64) -> SimConfig {
        SimConfig {
            num_users: users,
            hash_rates: vec![1.0; users],
            latency_ticks: 1,
            difficulty_bits: 4,
            adversary: None,
            fed: FedConfig {
                num_users: users,
                local_steps: 2,
                global_rounds: rounds,
                eta: Eta::Auto,
                sketch: None,
                master_seed: seed,
                double_eta: false,
            },
            tx_schedule: Vec::new(),
            master_seed: seed,
        }
    }

    #[test]
    fn quiet_rounds_mint_coinbase_only_blocks() {
        let mut sim = SimState::new(instance(), config(3, 4, 7)).unwrap();
        sim.run().unwrap();
        for user in 0..3 {
            let chain = sim.chain(user);
            assert_eq!(chain.len(), 5);
            for block in &chain.blocks()[1..] {
                assert_eq!(block.transactions.len(), 1);
                assert!(block.transactions[0].is_coinbase());
            }
            assert_eq!(chain.supply(), 4 * BLOCK_REWARD);
        }
        assert!(sim.heads_agree());
        assert!(sim.rejections().is_empty());
    }

    #[test]
    fn scheduled_payment_lands_in_exactly_one_block() {
        let mut cfg = config(3, 6, 8);
        cfg.tx_schedule = vec![TxScheduleEntry {
            tick: 3,
            payer: 0,
            payee: 1,
            amount: 10,
        }];
        let mut sim = SimState::new(instance(), cfg).unwrap();
        sim.run().unwrap();
        // The payer may only be funded after it first wins a round; count
        // how many accepted blocks carry a non-coinbase transaction.
        let chain = sim.chain(2);
        let carriers: Vec<usize> = chain
            .blocks()
            .iter()
            .enumerate()
            .filter(|(_, b)| b.transactions.len() > 1)
            .map(|(h, _)| h)
            .collect();
        let broadcasts: Vec<&SimEvent> = sim
            .events()
            .iter()
            .filter(|e| e.kind == EventKind::TxBroadcast && !e.detail.starts_with("skipped"))
            .collect();
        assert_eq!(carriers.len(), broadcasts.len());
        assert!(sim.heads_agree());
        assert_eq!(chain.supply(), 6 * BLOCK_REWARD);
    }

    #[test]
    fn broke_payers_are_skipped_and_logged() {
        let mut cfg = config(2, 1, 9);
        cfg.tx_schedule = vec![TxScheduleEntry {
            tick: 0,
            payer: 0,
            payee: 1,
            amount: 1_000_000,
        }];
        let mut sim = SimState::new(instance(), cfg).unwrap();
        sim.run().unwrap();
        let skipped: Vec<&SimEvent> = sim
            .events()
            .iter()
            .filter(|e| e.detail == "skipped:insufficient-funds")
            .collect();
        assert_eq!(skipped.len(), 1);
        assert_eq!(sim.chain(0).blocks()[1].transactions.len(), 1);
    }

    #[test]
    fn nonexistent_outputs_never_enter_a_block() {
        let mut cfg = config(2, 3, 10);
        cfg.fed.global_rounds = 3;
        let mut sim = SimState::new(instance(), cfg).unwrap();
        let scheme = Ed25519Scheme;
        let ghost = scheme.keypair_from_seed(424242);
        let tx = Transaction {
            inputs: vec![TxInput {
                prev_txid: [0xAB; 32],
                output_index: 0,
                signature: Vec::new(),
                spender_pubkey: ghost.public.clone(),
            }],
            outputs: vec![TxOutput {
                amount: 5,
                recipient_pubkey: ghost.public.clone(),
            }],
        };
        let tx = sign_transaction(&scheme, std::slice::from_ref(&ghost), tx).unwrap();
        sim.inject_raw_transaction(tx);
        sim.run().unwrap();
        for user in 0..2 {
            for block in sim.chain(user).blocks() {
                assert!(block.transactions.iter().all(|t| t.inputs.is_empty()));
            }
        }
        assert!(sim.rejections().is_empty());
    }

    #[test]
    fn event_log_is_sorted_and_structured() {
        let mut cfg = config(3, 5, 11);
        cfg.tx_schedule = vec![TxScheduleEntry {
            tick: 2,
            payer: 1,
            payee: 2,
            amount: 5,
        }];
        let mut sim = SimState::new(instance(), cfg).unwrap();
        sim.run().unwrap();
        let events = sim.events();
        assert!(events.windows(2).all(|w| w[0].tick <= w[1].tick));
        assert_eq!(
            events
                .iter()
                .filter(|e| e.kind == EventKind::RoundStart)
                .count(),
            5
        );
        assert_eq!(
            events
                .iter()
                .filter(|e| e.kind == EventKind::BlockFound)
                .count(),
            5
        );
        // Two non-winners acknowledge each of the five blocks.
        assert_eq!(
            events
                .iter()
                .filter(|e| e.kind == EventKind::BlockArrived)
                .count(),
            10
        );
        for line in sim.events_jsonl().lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("tick").is_some());
            assert!(v.get("kind").is_some());
            assert!(v.get("actor").is_some());
            assert!(v.get("detail").is_some());
        }
    }

    #[test]
    fn trainer_and_chain_stay_in_lockstep() {
        let mut sim = SimState::new(instance(), config(2, 8, 12)).unwrap();
        sim.run().unwrap();
        let x0 = crate::attention::WeightVector::new(nalgebra::DVector::zeros(4)).unwrap();
        let rebuilt = sim.chain(1).reconstruct_weights(&x0).unwrap();
        assert_eq!(rebuilt.as_vector(), sim.trainer().x().as_vector());
    }
}
