//! `pan ingest|train|eval|ablate --config <path> [--scale desk|paper] [--seed N]`
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 numerical
//! failure, 4 artifact mismatch.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pan_core::pipeline::{self, RunConfig, RunPaths, Scale};
use pan_core::PanError;

#[derive(Parser, Debug)]
#[command(name = "pan", version, about = "Position-aware network traffic forecaster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rasterise the trip CSV into a frame archive.
    Ingest(Args),
    /// Train the configured model and write a checkpoint and loss trace.
    Train(Args),
    /// Score the checkpoint and the HA/persistence baselines on the test split.
    Eval(Args),
    /// Train and score the full, no_pac and one_pac variants.
    Ablate(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// JSON config layered over the preset.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value_t = ScaleArg::Paper)]
    scale: ScaleArg,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

fn configure_threads() -> Result<(), PanError> {
    let Ok(raw) = std::env::var("PAN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| PanError::Config(format!("PAN_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PanError::Config(format!("cannot size the worker pool: {e}")))
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.4}"))
}

fn run(cli: Cli) -> Result<(), PanError> {
    configure_threads()?;
    let (Command::Ingest(args) | Command::Train(args) | Command::Eval(args) | Command::Ablate(args)) = &cli.command;
    let cfg = RunConfig::load(&args.config, args.scale.into(), args.seed)?;
    let paths = RunPaths::new(&cfg);
    match cli.command {
        Command::Ingest(_) => {
            let r = pipeline::ingest(&cfg)?;
            println!("archive: {}", paths.archive.display());
            println!("trips: {}  malformed rows: {}", r.trips, r.malformed);
            println!("start events: counted {}  dropped {}", r.counted_start, r.dropped_start);
            println!("end events:   counted {}  dropped {}", r.counted_end, r.dropped_end);
        }
        Command::Train(_) => {
            let out = pipeline::train(&cfg)?;
            println!("checkpoint: {}", out.checkpoint.display());
            println!("loss trace: {}", out.loss_csv.display());
            if let Some(last) = out.trace.epoch_losses.last() {
                println!("epochs: {}  final mean loss: {last:.6e}", out.trace.epoch_losses.len());
            } else {
                println!("epochs: 0 (checkpoint holds the initialised model)");
            }
        }
        Command::Eval(_) => {
            let report = pipeline::eval(&cfg)?;
            println!("report: {}", paths.report.display());
            println!("{:<12} {:<6} {:>12} {:>10} {:>10}", "method", "state", "rmse", "mape", "evaluated");
            for m in &report.results {
                for s in &m.states {
                    println!(
                        "{:<12} {:<6} {:>12} {:>10} {:>10}",
                        m.method,
                        s.state,
                        fmt_metric(s.rmse),
                        fmt_metric(s.mape),
                        s.evaluated
                    );
                }
            }
        }
        Command::Ablate(_) => {
            let rows = pipeline::ablate(&cfg)?;
            println!("table: {}", paths.ablation_csv.display());
            for r in rows {
                println!("{:<8} {:<6} rmse {:>12} mape {:>10}", r.variant.name(), r.state, fmt_metric(r.rmse), fmt_metric(r.mape));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pan: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
