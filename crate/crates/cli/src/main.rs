use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use segia_cli::commands::{self, Method, Role, Timing};
use segia_cli::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "segia", version, about = "Single-edge graph injection attack experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel runs for batches and sweeps.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the surrogate (or the victim) and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "surrogate")]
        role: Role,
    },
    /// Run the attack (or a baseline) `n_seeds` times and evaluate each run.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "segia")]
        method: Method,
        /// Edges per injected node for the multi-edge baseline.
        #[arg(long, default_value_t = 3)]
        edges_per_node: usize,
        #[arg(long)]
        n_seeds: Option<usize>,
        /// Also write each attacked graph in graph file format.
        #[arg(long)]
        save_graphs: bool,
    },
    /// Apply the pruning defender to the graph produced by a plan file.
    Defend {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Victim misclassification on the clean graph, and on a plan if given.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Grid over the configured alpha, depth and perturbation-rate axes.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Paired SEGIA vs multi-edge comparison of homophily distance and
    /// defended attack loss.
    Theorem1 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_seeds: Option<usize>,
    },
    /// Write the configured graph in graph file format.
    GenSynthetic {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common) -> Result<ExperimentConfig> {
    let base = match &common.config {
        Some(path) => ExperimentConfig::read(path)?,
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides {
        seed: common.seed,
        out: common.out.clone(),
        jobs: common.jobs,
    };
    Ok(base.resolve(&overrides))
}

fn run(cli: Cli) -> Result<bool> {
    let mut timing = Timing::default();
    let (cfg, ok) = match cli.command {
        Command::Train { common, role } => {
            let cfg = resolve(&common)?;
            cfg.validate()?;
            let ok = commands::cmd_train(&cfg, role, &mut timing)?;
            (cfg, ok)
        }
        Command::Attack {
            common,
            method,
            edges_per_node,
            n_seeds,
            save_graphs,
        } => {
            let mut cfg = resolve(&common)?;
            if let Some(n) = n_seeds {
                cfg.n_seeds = n;
            }
            cfg.validate()?;
            let ok = commands::cmd_attack(&cfg, method, edges_per_node, save_graphs, &mut timing)?;
            (cfg, ok)
        }
        Command::Defend { common, plan } => {
            let cfg = resolve(&common)?;
            cfg.validate()?;
            let ok = commands::cmd_defend(&cfg, &plan, &mut timing)?;
            (cfg, ok)
        }
        Command::Evaluate { common, plan } => {
            let cfg = resolve(&common)?;
            cfg.validate()?;
            let ok = commands::cmd_evaluate(&cfg, plan.as_deref(), &mut timing)?;
            (cfg, ok)
        }
        Command::Sweep { common } => {
            let cfg = resolve(&common)?;
            cfg.validate()?;
            cfg.validate_sweep()?;
            let ok = commands::cmd_sweep(&cfg, &mut timing)?;
            (cfg, ok)
        }
        Command::Theorem1 { common, n_seeds } => {
            let mut cfg = resolve(&common)?;
            if let Some(n) = n_seeds {
                cfg.theorem1.n_seeds = n;
            }
            cfg.validate()?;
            let ok = commands::cmd_theorem1(&cfg, &mut timing)?;
            (cfg, ok)
        }
        Command::GenSynthetic { common } => {
            let cfg = resolve(&common)?;
            cfg.validate()?;
            let ok = commands::gen_synthetic(&cfg, &mut timing)?;
            (cfg, ok)
        }
    };
    timing.write(cfg.out_dir()?)?;
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some runs failed; see the summary for details");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
