//! Experiment runner: builds worlds and models, executes probing,
//! captioning, profiling, sweep, inspection, and judging workflows from a
//! JSON config plus flag overrides, and writes reports.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
//! usage.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use declab_core::parallel::with_workers;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "declab",
    version,
    about = "Decoding-strategy laboratory experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config JSON; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for scene-level parallelism (0 = default pool).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Restrict/replace the decode list with these strategies (repeatable).
    #[arg(long = "strategy", global = true)]
    strategies: Vec<String>,

    /// Override alpha on every decode entry.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Override beta on every decode entry.
    #[arg(long, global = true)]
    beta: Option<f64>,

    /// Override the selection layer on every decode entry.
    #[arg(long, global = true)]
    layer: Option<usize>,

    /// Override the keep ratio on every decode entry.
    #[arg(long = "keep-ratio", global = true)]
    keep_ratio: Option<f64>,

    /// Restrict probing to one setting: random, popular, or adversarial.
    #[arg(long, global = true)]
    setting: Option<String>,

    /// Override the number of scenes.
    #[arg(long, global = true)]
    scenes: Option<usize>,

    /// Override the generation budget.
    #[arg(long = "max-new-tokens", global = true)]
    max_new_tokens: Option<usize>,

    /// Dotted-path config override, e.g. model.prior_strength=3.0
    /// (repeatable).
    #[arg(long = "set", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Object-existence probing; writes pope.csv and scenes.jsonl.
    Pope,
    /// Captioning hallucination ratios; writes chair.csv and scenes.jsonl.
    Chair,
    /// Compute-cost profile over strategies; writes efficiency.json.
    Bench,
    /// Sensitivity grid over alpha/beta/layer/keep-ratio; writes sweep.csv.
    Sweep,
    /// Per-step importance scores and kept sets as JSONL.
    Inspect {
        /// Which scene to inspect.
        #[arg(long, default_value_t = 0)]
        scene: usize,
    },
    /// Score caption pairs via an external judge endpoint (network).
    Judge {
        /// How many scenes to judge.
        #[arg(long, default_value_t = 4)]
        pairs: usize,
        /// Prompt template file; built-in template when omitted.
        #[arg(long)]
        template: Option<PathBuf>,
        /// Endpoint URL; JUDGE_ENDPOINT when omitted.
        #[arg(long)]
        endpoint: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut config = match ExperimentConfig::load(cli.config.as_deref(), &cli.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = apply_flags(&mut config, &cli)
        .and_then(|_| config.validate())
        .and_then(|_| commands::validate_decodes(&config))
    {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }

    let result = with_workers(config.workers, || match &cli.command {
        Command::Pope => commands::cmd_pope(&config),
        Command::Chair => commands::cmd_chair(&config),
        Command::Bench => commands::cmd_bench(&config),
        Command::Sweep => commands::cmd_sweep(&config),
        Command::Inspect { scene } => commands::cmd_inspect(&config, *scene),
        Command::Judge {
            pairs,
            template,
            endpoint,
        } => commands::cmd_judge(&config, *pairs, template.as_deref(), endpoint.as_deref()),
    });

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn apply_flags(config: &mut ExperimentConfig, cli: &Cli) -> anyhow::Result<()> {
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.display().to_string();
    }
    if let Some(n) = cli.scenes {
        config.scenes.count = n;
    }
    if let Some(n) = cli.max_new_tokens {
        config.max_new_tokens = n;
        for dc in &mut config.decodes {
            dc.max_new_tokens = n;
        }
    }
    if !cli.strategies.is_empty() {
        let base = config.decodes[0].clone();
        config.decodes = cli
            .strategies
            .iter()
            .map(|name| {
                let strategy = name.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
                let mut dc = base.clone();
                dc.strategy = strategy;
                Ok(dc)
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
    }
    for dc in &mut config.decodes {
        if let Some(alpha) = cli.alpha {
            dc.alpha = alpha;
        }
        if let Some(beta) = cli.beta {
            dc.beta = beta;
        }
        if let Some(layer) = cli.layer {
            dc.layer_i = layer;
        }
        if let Some(ratio) = cli.keep_ratio {
            dc.keep_ratio = ratio;
        }
    }
    if let Some(setting) = &cli.setting {
        config.pope.settings = vec![setting.clone()];
        config.sweep.setting = setting.clone();
    }
    Ok(())
}
