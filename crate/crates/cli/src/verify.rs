//! `verify-chain`: reload a persisted chain and replay it from genesis.
//! Any mismatch between the file and a freshly validated chain is a
//! verification failure; only trouble reading the file itself is an error.

use std::path::Path;

use gradchain_core::chain::{load_chain, ChainError, Ed25519Scheme};

use crate::CliError;

#[derive(Clone, Debug)]
pub enum VerifyOutcome {
    Valid {
        blocks: usize,
        supply: u64,
        head: String,
    },
    Invalid {
        reason: String,
    },
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, VerifyOutcome::Valid { .. })
    }

    pub fn render(&self) -> String {
        match self {
            VerifyOutcome::Valid {
                blocks,
                supply,
                head,
            } => {
                format!("verify-chain: PASS ({blocks} blocks, supply {supply}, head {head})\n")
            }
            VerifyOutcome::Invalid { reason } => format!("verify-chain: FAIL ({reason})\n"),
        }
    }
}

pub fn run(path: &Path) -> Result<VerifyOutcome, CliError> {
    match load_chain(path, &Ed25519Scheme) {
        Ok(chain) => Ok(VerifyOutcome::Valid {
            blocks: chain.len(),
            supply: chain.supply(),
            head: hex::encode(chain.head_hash()),
        }),
        Err(ChainError::Io(e)) => Err(CliError::Io(e)),
        Err(other) => Ok(VerifyOutcome::Invalid {
            reason: other.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gradchain_core::chain::save_chain;
    use gradchain_core::fedopt::{Eta, FedConfig};
    use gradchain_core::netsim::{SimConfig, SimState};
    use gradchain_core::Instance;

    fn saved_chain(dir: &Path) -> std::path::PathBuf {
        let inst = Instance::generate(4, 2, 9);
        let cfg = SimConfig {
            num_users: 2,
            hash_rates: vec![1.0, 1.0],
            latency_ticks: 1,
            difficulty_bits: 2,
            adversary: None,
            fed: FedConfig {
                num_users: 2,
                local_steps: 1,
                global_rounds: 4,
                eta: Eta::Auto,
                sketch: None,
                master_seed: 9,
                double_eta: false,
            },
            tx_schedule: Vec::new(),
            master_seed: 9,
        };
        let mut sim = SimState::new(inst, cfg).unwrap();
        sim.run().unwrap();
        let path = dir.join("chain.json");
        save_chain(sim.chain(0), &path).unwrap();
        path
    }

    #[test]
    fn valid_file_passes() {
        let dir = tempfile::tempdir().unwrap();
        let path = saved_chain(dir.path());
        let out = run(&path).unwrap();
        assert!(out.passed(), "{}", out.render());
        assert!(out.render().contains("PASS (5 blocks"));
    }

    #[test]
    fn tampered_file_fails_with_reason() {
        let dir = tempfile::tempdir().unwrap();
        let path = saved_chain(dir.path());
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replacen("\"nonce\": ", "\"nonce\": 1", 1);
        assert_ne!(text, tampered);
        std::fs::write(&path, tampered).unwrap();
        let out = run(&path).unwrap();
        assert!(!out.passed());
        assert!(out.render().starts_with("verify-chain: FAIL"));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let res = run(&dir.path().join("nope.json"));
        assert!(matches!(res, Err(CliError::Io(_))));
    }
}
