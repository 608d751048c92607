use std::env;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use muhs_cli::acceptance::{self, DEFAULT_SEED};
use muhs_cli::config::{load_config, ScenarioConfig};
use muhs_cli::scenario::{build_initial, execute, norm_table, ReportStatus};
use rayon::prelude::*;

/// Caps the number of scenarios run in parallel by `muhs run`.
const BATCH_WIDTH_VAR: &str = "MUHS_BATCH_WIDTH";

const EXIT_VALIDATION: u8 = 4;
const EXIT_INTERNAL: u8 = 5;
const EXIT_SELFTEST_FAILED: u8 = 1;

#[derive(Parser)]
#[command(
    name = "muhs",
    version,
    about = "Periodic two-component mu-Hunter-Saxton laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios; each writes into its own directory.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Output directory (per-config subdirectories when several are given).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed recorded in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the norm table of the initial data as CSV.
    Norms { config: PathBuf },
    /// Run the acceptance suite.
    Selftest {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string())
}

fn out_dir(config: &ScenarioConfig, path: &Path, out: Option<&Path>, batch: bool) -> PathBuf {
    match (out, batch) {
        (Some(dir), true) => dir.join(stem(path)),
        (Some(dir), false) => dir.to_path_buf(),
        (None, _) => config
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(stem(path))),
    }
}

fn run_one(path: &Path, out: Option<&Path>, seed: Option<u64>, batch: bool) -> u8 {
    let mut config = match load_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return EXIT_VALIDATION;
        }
    };
    if seed.is_some() {
        config.seed = seed;
    }
    let dir = out_dir(&config, path, out, batch);
    let report = execute(&config, &dir);
    println!(
        "{}: {} at t = {} ({}) -> {}",
        path.display(),
        serde_json::to_string(&report.status)
            .unwrap_or_default()
            .trim_matches('"'),
        report
            .t_final
            .map_or("-".to_string(), |t| format!("{t:.6}")),
        report.reason,
        dir.display()
    );
    report.status.exit_code() as u8
}

fn batch_width() -> Option<usize> {
    env::var(BATCH_WIDTH_VAR)
        .ok()?
        .parse()
        .ok()
        .filter(|&w| w > 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { configs, out, seed } => {
            let batch = configs.len() > 1;
            let work = || {
                configs
                    .par_iter()
                    .map(|p| run_one(p, out.as_deref(), seed, batch))
                    .collect::<Vec<_>>()
            };
            let codes = match batch_width() {
                Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                    Ok(pool) => pool.install(work),
                    Err(e) => {
                        eprintln!("cannot build thread pool: {e}");
                        return ExitCode::from(EXIT_INTERNAL);
                    }
                },
                None => work(),
            };
            // Report the most severe outcome; validation errors rank above run statuses.
            let worst = codes
                .into_iter()
                .max_by_key(|&c| match c {
                    0 => 0,
                    2 => 1,
                    3 => 2,
                    EXIT_VALIDATION => 3,
                    _ => 4,
                })
                .unwrap_or(0);
            ExitCode::from(worst)
        }
        Command::Norms { config } => {
            let config = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    return ExitCode::from(EXIT_VALIDATION);
                }
            };
            let initial = match build_initial(&config) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_INTERNAL);
                }
            };
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for row in norm_table(&initial, config.norms.as_deref()) {
                if w.serialize(row).is_err() {
                    return ExitCode::from(EXIT_INTERNAL);
                }
            }
            if w.flush().is_err() {
                return ExitCode::from(EXIT_INTERNAL);
            }
            ExitCode::from(ReportStatus::Completed.exit_code() as u8)
        }
        Command::Selftest { seed } => {
            let mut failed = 0;
            for (_, criterion) in acceptance::all() {
                let outcome = criterion(seed);
                println!("{}", outcome.line());
                failed += usize::from(!outcome.passed);
            }
            println!("{} of 10 criteria passed", 10 - failed);
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_SELFTEST_FAILED)
            }
        }
    }
}
