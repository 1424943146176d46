use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stackgcn::data::SyntheticSpec;
use stackgcn::experiment::{
    cmd_ablate, cmd_bound, cmd_depth_sweep, cmd_gen_synthetic, cmd_run, DatasetConfig, ExperimentConfig, Method,
};
use stackgcn::Result;

#[derive(Parser)]
#[command(
    name = "stackgcn",
    version,
    about = "Stacked classical classifiers feeding a graph convolutional network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML). Without one, the built-in 4-cluster synthetic graph is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds run in parallel.
    #[arg(long)]
    jobs: Option<usize>,
    /// Base seed; runs use seed, seed+1, ...
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeded runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Restrict to these methods (repeatable).
    #[arg(long = "method", value_parser = ["sstagcn", "gcn-raw", "stack-only"])]
    methods: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline plus baselines over repeated seeds.
    Run {
        #[command(flatten)]
        common: Common,
        /// Save the first seed's models as JSON checkpoints.
        #[arg(long)]
        save_checkpoints: bool,
    },
    /// Stacked GCN over several classifier combinations.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated classifier names, e.g. `knn,random_forest,gaussian_nb` (repeatable).
        #[arg(long = "combo", required = true)]
        combos: Vec<String>,
    },
    /// Accuracy of raw and stacked GCNs as depth grows.
    DepthSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7")]
        depths: Vec<usize>,
    },
    /// Generalization bound for a two-layer checkpoint.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Write the synthetic dataset as bundle files plus a manifest.
    GenSynthetic {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(DatasetConfig::synthetic(SyntheticSpec::four_clusters(0))),
    };
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if let Some(jobs) = common.jobs {
        config.jobs = jobs;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(runs) = common.runs {
        config.n_runs = runs;
    }
    if !common.methods.is_empty() {
        config.methods = common.methods.iter().map(|m| Method::parse(m)).collect::<Result<_>>()?;
    }
    config.validate()?;
    Ok(config)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            common,
            save_checkpoints,
        } => {
            let mut config = load_config(&common)?;
            config.save_checkpoints |= save_checkpoints;
            let report = cmd_run(&config)?;
            for s in &report.summaries {
                println!(
                    "{:<11} acc {:.4} ± {:.4}  f1 {:.4} ± {:.4}  {:.3}s",
                    s.method,
                    s.accuracy.mean,
                    s.accuracy.half_width,
                    s.macro_f1.mean,
                    s.macro_f1.half_width,
                    s.mean_train_seconds
                );
            }
            for f in &report.failures {
                eprintln!("seed {} failed: {}", f.seed, f.error);
            }
            Ok(report.failures.is_empty())
        }
        Command::Ablate { common, combos } => {
            let config = load_config(&common)?;
            let combos: Vec<Vec<String>> = combos
                .iter()
                .map(|c| {
                    c.split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                })
                .collect();
            let report = cmd_ablate(&config, &combos)?;
            for r in &report.rows {
                println!(
                    "{:<40} acc {:.4} ± {:.4}  {:.3}s",
                    r.classifiers.join("+"),
                    r.summary.accuracy.mean,
                    r.summary.accuracy.half_width,
                    r.summary.mean_train_seconds
                );
            }
            Ok(report.failures.is_empty())
        }
        Command::DepthSweep { common, depths } => {
            let config = load_config(&common)?;
            let report = cmd_depth_sweep(&config, &depths)?;
            for r in &report.rows {
                println!(
                    "depth {:<2} {:<11} acc {:.4}",
                    r.depth, r.summary.method, r.summary.accuracy.mean
                );
            }
            for d in &report.drops {
                println!("{} drop {}→{}: {:.4}", d.method, d.from_depth, d.to_depth, d.drop);
            }
            Ok(report.failures.is_empty())
        }
        Command::Bound { common, checkpoint } => {
            let config = load_config(&common)?;
            print_json(&cmd_bound(&config, &checkpoint)?)?;
            Ok(true)
        }
        Command::GenSynthetic { common } => {
            let config = load_config(&common)?;
            let dir = cmd_gen_synthetic(&config)?;
            println!("{}", dir.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
