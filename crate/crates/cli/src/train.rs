//! `train`: run the chain-backed training loop and persist its artifacts:
//! trace CSV, chain JSON, event log, effective config, and a summary that
//! scores the run against the convergence bound.

use std::fs;
use std::path::PathBuf;

use gradchain_core::chain::save_chain;
use gradchain_core::fedopt::{convergence_bound, FedError};
use gradchain_core::netsim::{NetsimError, SimState};
use gradchain_core::Weights;
use nalgebra::DVector;

use crate::config::RunConfig;
use crate::{fmt_f64, CliError};

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub rounds: usize,
    pub final_f: f64,
    pub final_gap: f64,
    pub bound: f64,
    pub bound_pass: bool,
    pub eta: f64,
    pub alpha: f64,
    pub l_est: f64,
    pub mu_est: f64,
    pub init_dist_sq: f64,
    pub blocks: usize,
    pub supply: u64,
    pub head_hash: String,
    pub reconstruct_ok: bool,
    pub rejections: usize,
}

impl TrainSummary {
    pub fn to_json(&self) -> String {
        format!(
            "{{\n  \"rounds\": {},\n  \"final_f\": {},\n  \"final_gap\": {},\n  \
             \"bound\": {},\n  \"bound_pass\": {},\n  \"eta\": {},\n  \"alpha\": {},\n  \
             \"l_est\": {},\n  \"mu_est\": {},\n  \"init_dist_sq\": {},\n  \
             \"blocks\": {},\n  \"supply\": {},\n  \"head_hash\": \"{}\",\n  \
             \"reconstruct_ok\": {},\n  \"rejections\": {}\n}}\n",
            self.rounds,
            fmt_f64(self.final_f),
            fmt_f64(self.final_gap),
            fmt_f64(self.bound),
            self.bound_pass,
            fmt_f64(self.eta),
            fmt_f64(self.alpha),
            fmt_f64(self.l_est),
            fmt_f64(self.mu_est),
            fmt_f64(self.init_dist_sq),
            self.blocks,
            self.supply,
            self.head_hash,
            self.reconstruct_ok,
            self.rejections
        )
    }
}

pub struct TrainArtifacts {
    pub summary: TrainSummary,
    pub out_dir: PathBuf,
}

pub fn run(cfg: &RunConfig) -> Result<TrainArtifacts, CliError> {
    let out_dir = cfg.out_dir.clone().ok_or_else(|| {
        CliError::BadArgs("no output directory: set out_dir in the config or pass --out-dir".into())
    })?;
    let inst = cfg.instance.resolve()?;
    let mut sim = SimState::new(inst.clone(), cfg.sim.clone())?;
    sim.run().map_err(|e| match e {
        NetsimError::Fed(FedError::Diverged { round }) => CliError::Diverged { round },
        other => CliError::from(other),
    })?;

    fs::create_dir_all(&out_dir)?;
    let trace = sim.trainer().trace();
    fs::write(out_dir.join("trace.csv"), trace.to_csv())?;
    fs::write(out_dir.join("events.jsonl"), sim.events_jsonl())?;
    save_chain(sim.chain(0), &out_dir.join("chain.json"))?;
    fs::write(
        out_dir.join("config.json"),
        serde_json::to_string_pretty(cfg)? + "\n",
    )?;

    let consts = sim.trainer().constants();
    let first = &trace.rows[0];
    let last = trace.rows.last().expect("trace always has row 0");
    let bound = convergence_bound(
        consts.l_est,
        consts.mu_est,
        sim.trainer().eta(),
        last.round,
        first.dist_sq,
    );

    let x0 = Weights::new(DVector::zeros(inst.dim())).expect("origin is a valid start");
    let rebuilt = sim.chain(0).reconstruct_weights(&x0)?;
    let reconstruct_ok = rebuilt
        .as_vector()
        .iter()
        .zip(sim.trainer().x().as_vector().iter())
        .all(|(a, b)| a.to_bits() == b.to_bits());

    let summary = TrainSummary {
        rounds: last.round,
        final_f: last.f,
        final_gap: last.gap,
        bound,
        bound_pass: last.gap <= bound,
        eta: sim.trainer().eta(),
        alpha: sim.trainer().alpha(),
        l_est: consts.l_est,
        mu_est: consts.mu_est,
        init_dist_sq: first.dist_sq,
        blocks: sim.chain(0).len(),
        supply: sim.chain(0).supply(),
        head_hash: hex::encode(sim.head_hash()),
        reconstruct_ok,
        rejections: sim.rejections().len(),
    };
    fs::write(out_dir.join("summary.json"), summary.to_json())?;
    Ok(TrainArtifacts { summary, out_dir })
}
