//! Run configuration: where the instance comes from, the simulator
//! settings, the output directory, and the flag overrides that take
//! precedence over file values.

use std::path::{Path, PathBuf};

use gradchain_core::netsim::SimConfig;
use gradchain_core::sketch::{SketchConfig, SketchKind};
use gradchain_core::Instance;
use serde::{Deserialize, Serialize};

use crate::instance::InstanceFile;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSource {
    /// Run the canonical seeded generator.
    Generate { n: usize, d: usize, seed: u64 },
    /// Load an instance file produced by `gen` (or shaped like one).
    File { path: PathBuf },
    /// Full instance data embedded in the config.
    Inline(InstanceFile),
}

impl InstanceSource {
    pub fn resolve(&self) -> Result<Instance, CliError> {
        match self {
            InstanceSource::Generate { n, d, seed } => crate::gen::checked_generate(*n, *d, *seed),
            InstanceSource::File { path } => InstanceFile::load(path)?.to_instance(),
            InstanceSource::Inline(file) => file.to_instance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub instance: InstanceSource,
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Flags win over file values. The seed flag steers both the network
    /// seed and the trainer seed so one number pins the whole run.
    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(seed) = ov.seed {
            self.sim.master_seed = seed;
            self.sim.fed.master_seed = seed;
        }
        if let Some(rounds) = ov.rounds {
            self.sim.fed.global_rounds = rounds;
        }
        if let Some(sketch) = ov.sketch {
            self.sim.fed.sketch = sketch;
        }
        if let Some(bits) = ov.difficulty {
            self.sim.difficulty_bits = bits;
        }
        if let Some(dir) = &ov.out_dir {
            self.out_dir = Some(dir.clone());
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rounds: Option<usize>,
    /// Outer None: flag absent. Inner None: sketching disabled.
    pub sketch: Option<Option<SketchConfig>>,
    pub difficulty: Option<u32>,
    pub out_dir: Option<PathBuf>,
}

/// `kind:b`, with an extra middle field for the sparse kinds' per-column
/// fill (`sparse-embedding-ii:2:4` is s = 2, b = 4). `none` disables
/// sketching.
pub fn parse_sketch_spec(spec: &str) -> Result<Option<SketchConfig>, CliError> {
    if spec == "none" {
        return Ok(None);
    }
    let bad = || CliError::BadSketchSpec(spec.to_string());
    let parts: Vec<&str> = spec.split(':').collect();
    let (kind, b_str) = match parts.as_slice() {
        [kind, b] => (parse_kind(kind, None).ok_or_else(bad)?, *b),
        [kind, s, b] => {
            let s: usize = s.parse().map_err(|_| bad())?;
            (parse_kind(kind, Some(s)).ok_or_else(bad)?, *b)
        }
        _ => return Err(bad()),
    };
    let b_sketch: usize = b_str.parse().map_err(|_| bad())?;
    Ok(Some(SketchConfig {
        kind,
        b_sketch,
        seed: None,
    }))
}

fn parse_kind(name: &str, s: Option<usize>) -> Option<SketchKind> {
    match (name, s) {
        ("gaussian", None) => Some(SketchKind::Gaussian),
        ("srht", None) => Some(SketchKind::Srht),
        ("ams", None) => Some(SketchKind::Ams),
        ("count-sketch", None) => Some(SketchKind::CountSketch),
        ("sparse-embedding-i", Some(s)) => Some(SketchKind::SparseEmbeddingI { s }),
        ("sparse-embedding-ii", Some(s)) => Some(SketchKind::SparseEmbeddingII { s }),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gradchain_core::fedopt::{Eta, FedConfig};

    #[test]
    fn sketch_specs_parse() {
        let got = parse_sketch_spec("gaussian:4").unwrap().unwrap();
        assert_eq!(got.kind, SketchKind::Gaussian);
        assert_eq!(got.b_sketch, 4);
        let got = parse_sketch_spec("sparse-embedding-ii:2:6")
            .unwrap()
            .unwrap();
        assert_eq!(got.kind, SketchKind::SparseEmbeddingII { s: 2 });
        assert_eq!(got.b_sketch, 6);
        assert_eq!(parse_sketch_spec("none").unwrap(), None);
        for bad in [
            "",
            "gaussian",
            "gaussian:x",
            "blurry:4",
            "srht:2:4",
            "a:b:c:d",
        ] {
            assert!(parse_sketch_spec(bad).is_err(), "{bad:?} should fail");
        }
    }

    fn base_config() -> RunConfig {
        RunConfig {
            instance: InstanceSource::Generate {
                n: 4,
                d: 2,
                seed: 1,
            },
            sim: SimConfig {
                num_users: 2,
                hash_rates: vec![1.0, 1.0],
                latency_ticks: 1,
                difficulty_bits: 4,
                adversary: None,
                fed: FedConfig {
                    num_users: 2,
                    local_steps: 2,
                    global_rounds: 10,
                    eta: Eta::Auto,
                    sketch: None,
                    master_seed: 9,
                    double_eta: false,
                },
                tx_schedule: vec![],
                master_seed: 9,
            },
            out_dir: None,
        }
    }

    #[test]
    fn flags_win_over_file_values() {
        let mut cfg = base_config();
        cfg.apply(&Overrides {
            seed: Some(77),
            rounds: Some(3),
            sketch: Some(parse_sketch_spec("srht:2").unwrap()),
            difficulty: Some(6),
            out_dir: Some(PathBuf::from("elsewhere")),
        });
        assert_eq!(cfg.sim.master_seed, 77);
        assert_eq!(cfg.sim.fed.master_seed, 77);
        assert_eq!(cfg.sim.fed.global_rounds, 3);
        assert_eq!(cfg.sim.fed.sketch.unwrap().kind, SketchKind::Srht);
        assert_eq!(cfg.sim.difficulty_bits, 6);
        assert_eq!(cfg.out_dir.unwrap(), PathBuf::from("elsewhere"));
    }

    #[test]
    fn empty_overrides_change_nothing() {
        let mut cfg = base_config();
        cfg.apply(&Overrides::default());
        assert_eq!(cfg, base_config());
    }

    #[test]
    fn run_config_round_trips_through_json() {
        let cfg = base_config();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
