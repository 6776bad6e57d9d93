use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nagqn::bench::{
    compare_runs, run_experiment, run_seeds, summarize, write_run, LoggedRun, RunConfig, RunLog, StopReason,
};
use nagqn::model::{mlp_gradient_check, parse_layer_sizes, Activation, LossKind, MlpSpec};

#[derive(Parser)]
#[command(name = "nagqn", version, about = "Stochastic quasi-Newton training benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and log per-epoch metrics as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV output path (stdout when omitted). With --seeds, one file per
        /// seed is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Runs this many consecutive seeds and reports medians.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Compare backprop against central finite differences on random MLPs.
    CheckGrad {
        /// Layer sizes such as `64-20-10-10`.
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        #[arg(long, default_value = "relu")]
        activation: Activation,
        #[arg(long, default_value = "softmax_cross_entropy")]
        loss: LossKind,
        #[arg(long, default_value_t = 8)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Tabulate epochs-to-threshold, final test metric and wall time.
    Compare {
        #[arg(required = true, num_args = 2..)]
        csv: Vec<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
        /// Also write the table as CSV.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

type BoxError = Box<dyn std::error::Error>;

fn run(command: Command) -> Result<ExitCode, BoxError> {
    match command {
        Command::Run { config, out, seed, seeds } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            match seeds {
                None | Some(1) => {
                    let log = run_experiment(&cfg)?;
                    match &out {
                        Some(path) => write_run(&log, path)?,
                        None => print!("{}", nagqn::bench::records_to_csv(&log.records)),
                    }
                    report_single(&log);
                    Ok(exit_for(&[log]))
                }
                Some(0) => Err("--seeds must be at least 1".into()),
                Some(n) => {
                    let list: Vec<u64> = (cfg.seed..cfg.seed + n).collect();
                    let logs = run_seeds(&cfg, &list)?;
                    if let Some(path) = &out {
                        for log in &logs {
                            write_run(log, seed_path(path, log.seed))?;
                        }
                    }
                    let s = summarize(&logs);
                    println!("dataset {}  optimizer {}  seeds {:?}", cfg.dataset, cfg.optimizer, s.seeds);
                    for log in &logs {
                        let e = log.epochs_to_threshold().map_or("—".into(), |e| e.to_string());
                        println!(
                            "  seed {:>4}  epochs {:>3}  train_loss {:.6e}  test_metric {:.6}",
                            log.seed,
                            e,
                            log.last().train_loss,
                            log.last().test_metric
                        );
                    }
                    let me = s.median_epochs.map_or("—".into(), |e| e.to_string());
                    println!(
                        "median: epochs {me}  train_loss {:.6e}  test_metric {:.6}  wall_ms {:.1}  diverged {}",
                        s.median_final_train_loss, s.median_final_test_metric, s.median_wall_ms, s.diverged
                    );
                    Ok(exit_for(&logs))
                }
            }
        }
        Command::CheckGrad { spec, trials, activation, loss, batch_size, tol, seed } => {
            let spec = MlpSpec::new(parse_layer_sizes(&spec)?, activation, loss)?;
            let mut worst: f64 = 0.0;
            for t in 0..trials {
                worst = worst.max(mlp_gradient_check(&spec, batch_size, seed + t)?);
            }
            let ok = worst <= tol;
            println!(
                "{} trials, max relative error {worst:.3e} (tolerance {tol:e}): {}",
                trials,
                if ok { "ok" } else { "FAILED" }
            );
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Compare { csv, threshold, csv_out } => {
            let runs = csv.iter().map(LoggedRun::read).collect::<Result<Vec<_>, _>>()?;
            let cmp = compare_runs(&runs, threshold)?;
            print!("{}", cmp.to_table());
            if let Some(path) = csv_out {
                std::fs::write(path, cmp.to_csv())?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn report_single(log: &RunLog) {
    let e = log.epochs_to_threshold().map_or("—".into(), |e| e.to_string());
    eprintln!(
        "{} on {}: stop {:?}, epochs to threshold {e}, final train_loss {:.6e}, test_metric {:.6}",
        log.optimizer,
        log.dataset,
        log.stop,
        log.last().train_loss,
        log.last().test_metric
    );
}

fn exit_for(logs: &[RunLog]) -> ExitCode {
    if logs.iter().any(|l| l.stop == StopReason::Diverged) {
        eprintln!("error: training diverged (non-finite loss)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

/// `runs/x.csv` → `runs/x.seed3.csv`.
fn seed_path(path: &std::path::Path, seed: u64) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}.seed{seed}.{ext}"))
}
