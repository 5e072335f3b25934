//! `attack`: estimate chain-rewrite success rates. Produces one headline
//! number for the configured adversary plus a share-by-depth grid that is
//! checked for monotonicity (up in hash share, down in confirmation depth)
//! with a two-standard-error allowance for Monte Carlo noise.

use gradchain_core::netsim::{adversary_rewrite, AdversaryConfig, SimConfig};

use crate::config::RunConfig;
use crate::{fmt_f64, CliError};

pub const GRID_SHARES: [f64; 3] = [0.1, 0.2, 0.3];
pub const GRID_DEPTHS: [usize; 3] = [2, 4, 6];

#[derive(Clone, Debug)]
pub struct AttackReport {
    pub share: f64,
    pub depth: usize,
    pub trials: usize,
    pub headline_rate: f64,
    /// `grid[i][j]` is the success rate at `GRID_SHARES[i]`, `GRID_DEPTHS[j]`.
    pub grid: [[f64; 3]; 3],
    pub monotone_in_share: bool,
    pub monotone_in_depth: bool,
}

fn binomial_se(rate: f64, trials: usize) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

/// Two-sided slack for comparing a pair of Monte Carlo frequencies.
fn pair_slack(a: f64, b: f64, trials: usize) -> f64 {
    let sa = binomial_se(a, trials);
    let sb = binomial_se(b, trials);
    2.0 * (sa * sa + sb * sb).sqrt()
}

impl AttackReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        out.push_str(&format!("  \"share\": {},\n", fmt_f64(self.share)));
        out.push_str(&format!("  \"depth\": {},\n", self.depth));
        out.push_str(&format!("  \"trials\": {},\n", self.trials));
        out.push_str(&format!(
            "  \"headline_rate\": {},\n",
            fmt_f64(self.headline_rate)
        ));
        out.push_str("  \"grid\": [\n");
        for (i, row) in self.grid.iter().enumerate() {
            out.push_str(&format!(
                "    {{\"share\": {}, \"rates\": [{}]}}{}\n",
                fmt_f64(GRID_SHARES[i]),
                row.iter()
                    .map(|r| fmt_f64(*r))
                    .collect::<Vec<_>>()
                    .join(", "),
                if i + 1 < self.grid.len() { "," } else { "" }
            ));
        }
        out.push_str("  ],\n");
        out.push_str(&format!(
            "  \"depths\": [{}],\n",
            GRID_DEPTHS
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ));
        out.push_str(&format!(
            "  \"monotone_in_share\": {},\n",
            self.monotone_in_share
        ));
        out.push_str(&format!(
            "  \"monotone_in_depth\": {}\n",
            self.monotone_in_depth
        ));
        out.push_str("}\n");
        out
    }
}

/// A two-user network carrying `share` of the hash power on the attacker,
/// used for grid cells. Keeps the caller's master seed so every cell sees
/// common random numbers and the monotonicity comparison is low-variance.
fn grid_config(base: &SimConfig, share: f64, depth: usize) -> SimConfig {
    let mut fed = base.fed;
    fed.num_users = 2;
    SimConfig {
        num_users: 2,
        hash_rates: vec![1.0 - share, share],
        latency_ticks: base.latency_ticks,
        difficulty_bits: base.difficulty_bits,
        adversary: Some(AdversaryConfig {
            user: 1,
            rewrite_depth: depth,
        }),
        fed,
        tx_schedule: Vec::new(),
        master_seed: base.master_seed,
    }
}

pub fn run(cfg: &RunConfig, depth: usize, trials: usize) -> Result<AttackReport, CliError> {
    let adv = cfg
        .sim
        .adversary
        .as_ref()
        .ok_or_else(|| CliError::BadArgs("config has no adversary".into()))?;
    let total: f64 = cfg.sim.hash_rates.iter().sum();
    let share = cfg.sim.hash_rates[adv.user] / total;

    let headline_rate = adversary_rewrite(&cfg.sim, depth, trials)?;

    let mut grid = [[0.0; 3]; 3];
    for (i, s) in GRID_SHARES.iter().enumerate() {
        for (j, dep) in GRID_DEPTHS.iter().enumerate() {
            let cell = grid_config(&cfg.sim, *s, *dep);
            grid[i][j] = adversary_rewrite(&cell, *dep, trials)?;
        }
    }

    let mut monotone_in_share = true;
    for j in 0..GRID_DEPTHS.len() {
        for i in 1..GRID_SHARES.len() {
            let prev = grid[i - 1][j];
            let cur = grid[i][j];
            if cur < prev - pair_slack(prev, cur, trials) {
                monotone_in_share = false;
            }
        }
    }
    let mut monotone_in_depth = true;
    for row in &grid {
        for j in 1..GRID_DEPTHS.len() {
            let prev = row[j - 1];
            let cur = row[j];
            if cur > prev + pair_slack(prev, cur, trials) {
                monotone_in_depth = false;
            }
        }
    }

    Ok(AttackReport {
        share,
        depth,
        trials,
        headline_rate,
        grid,
        monotone_in_share,
        monotone_in_depth,
    })
}
