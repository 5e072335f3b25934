use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradchain_sim::config::{parse_sketch_spec, Overrides, RunConfig};
use gradchain_sim::{attack, bench, gen, gradcheck, train, verify, CliError};

#[derive(Parser)]
#[command(
    name = "gradchain-sim",
    version,
    about = "Proof-of-work training chain simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a regression instance and write it to a JSON file
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check analytic gradient and Hessian against finite differences
    Gradcheck {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        points: usize,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Run chain-backed training and write trace, chain, and summary files
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<usize>,
        /// kind:b, sparse kinds kind:s:b, or the word none
        #[arg(long)]
        sketch: Option<String>,
        #[arg(long)]
        difficulty: Option<u32>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Estimate chain-rewrite success rates for the configured adversary
    Attack {
        #[arg(long)]
        config: PathBuf,
        /// Confirmation depth to race against (default: the config's)
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reload a persisted chain and re-validate it from genesis
    VerifyChain {
        #[arg(long)]
        chain: PathBuf,
    },
    /// Audit the sketch operators' unbiasedness and energy bounds
    SketchBench {
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 4)]
        b: usize,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn dispatch(cmd: Cmd) -> Result<u8, CliError> {
    match cmd {
        Cmd::Gen { n, d, seed, out } => {
            let report = gen::run(n, d, seed, &out)?;
            print!("{}", report.render());
            Ok(0)
        }
        Cmd::Gradcheck {
            instance,
            seed,
            points,
            corrupt_gradient,
        } => {
            let report = gradcheck::run_file(&instance, seed, points, corrupt_gradient)?;
            print!("{}", report.render());
            Ok(if report.passed() { 0 } else { 1 })
        }
        Cmd::Train {
            config,
            seed,
            rounds,
            sketch,
            difficulty,
            out_dir,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            let ov = Overrides {
                seed,
                rounds,
                sketch: match sketch {
                    None => None,
                    Some(spec) => Some(parse_sketch_spec(&spec)?),
                },
                difficulty,
                out_dir,
            };
            cfg.apply(&ov);
            let art = train::run(&cfg)?;
            print!("{}", art.summary.to_json());
            Ok(if art.summary.reconstruct_ok { 0 } else { 1 })
        }
        Cmd::Attack {
            config,
            depth,
            trials,
            seed,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.apply(&Overrides {
                seed,
                ..Overrides::default()
            });
            let depth = match depth.or_else(|| cfg.sim.adversary.as_ref().map(|a| a.rewrite_depth))
            {
                Some(d) if d > 0 => d,
                _ => {
                    return Err(CliError::BadArgs(
                        "no rewrite depth: pass --depth or configure the adversary".into(),
                    ))
                }
            };
            let report = attack::run(&cfg, depth, trials)?;
            print!("{}", report.render());
            Ok(0)
        }
        Cmd::VerifyChain { chain } => {
            let outcome = verify::run(&chain)?;
            print!("{}", outcome.render());
            Ok(if outcome.passed() { 0 } else { 1 })
        }
        Cmd::SketchBench {
            dim,
            b,
            draws,
            seed,
        } => {
            let report = bench::run(dim, b, draws, seed)?;
            print!("{}", report.render());
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(err @ CliError::Diverged { .. }) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
