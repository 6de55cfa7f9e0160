//! Command-line front end for the experiment layer.
//!
//! Every subcommand reads an optional key-value config file, applies
//! trailing `KEY=VALUE` overrides, and writes its outputs (plus a
//! resolved config) into `--out`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deeptcsr::experiments::{self, KvConfig};

#[derive(Parser)]
#[command(
    name = "dtcsr",
    about = "Discrete-time survival regression experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Key-value config file (`dotted.key = value` per line).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for results and the resolved config.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Base seed; overrides the `seed` config key.
    #[arg(long)]
    seed: Option<u64>,
    /// Trailing `KEY=VALUE` overrides, applied after the config file.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random-walk dataset (JSONL).
    Generate(CommonArgs),
    /// Train a model on a dataset file.
    Train(CommonArgs),
    /// Evaluate a checkpoint on a dataset file.
    Evaluate(CommonArgs),
    /// Sweep methods x training sizes x seeds and tabulate CI/IBS.
    Compare(CommonArgs),
    /// Sweep the target learning rate and tabulate estimate variability.
    AblateTau(CommonArgs),
}

fn build_config(args: &CommonArgs) -> deeptcsr::Result<KvConfig> {
    let mut cfg = match &args.config {
        Some(path) => KvConfig::from_file(path)?,
        None => KvConfig::new(),
    };
    cfg.apply_overrides(&args.overrides)?;
    if let Some(seed) = args.seed {
        cfg.set("seed", seed);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> deeptcsr::Result<ExitCode> {
    match &cli.command {
        Command::Generate(args) => {
            let cfg = build_config(args)?;
            let outcome = experiments::cmd_generate(&cfg, &args.out)?;
            println!("wrote {}", outcome.dataset_path.display());
            println!(
                "n={} dim={} horizon={} max_duration={} censoring={}",
                outcome.stats.n,
                outcome.stats.feature_dim,
                outcome.stats.horizon,
                outcome.stats.max_duration,
                outcome
                    .stats
                    .censoring_fraction
                    .map(|f| format!("{f:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
            );
        }
        Command::Train(args) => {
            let cfg = build_config(args)?;
            let outcome = experiments::cmd_train(&cfg, &args.out)?;
            println!(
                "wrote {} and {} (final mean loss {:.6})",
                outcome.checkpoint_path.display(),
                outcome.log_path.display(),
                outcome.final_loss
            );
        }
        Command::Evaluate(args) => {
            let cfg = build_config(args)?;
            let report = experiments::cmd_evaluate(&cfg, &args.out)?;
            println!(
                "ci={} ibs={:.6} pairs={}",
                report
                    .ci
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_else(|| "null".into()),
                report.ibs,
                report.n_pairs_used
            );
        }
        Command::Compare(args) => {
            let cfg = build_config(args)?;
            let outcome = experiments::cmd_compare(&cfg, &args.out)?;
            println!(
                "{} cells ({} failed); tables at {} and {}",
                outcome.cells.len(),
                outcome.n_failed,
                outcome.cells_csv.display(),
                outcome.aggregate_csv.display()
            );
            if outcome.n_failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::AblateTau(args) => {
            let cfg = build_config(args)?;
            let outcome = experiments::cmd_ablate_tau(&cfg, &args.out)?;
            for row in &outcome.rows {
                println!(
                    "tau={:<6} mean_delta={} ci_mean={} ibs_mean={:.6}",
                    format!("{:?}", row.tau),
                    row.mean_delta
                        .map(|v| format!("{v:.6}"))
                        .unwrap_or_else(|| "n/a".into()),
                    row.ci_mean
                        .map(|v| format!("{v:.6}"))
                        .unwrap_or_else(|| "n/a".into()),
                    row.ibs_mean
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(inner) = source {
                eprintln!("  caused by: {inner}");
                source = inner.source();
            }
            ExitCode::FAILURE
        }
    }
}
