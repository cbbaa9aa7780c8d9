use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adabal_cli::{prepare, runner, selfcheck, serve, CliError};

/// Adaptive batch-mode active learning for anomaly detection.
///
/// Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime failure.
#[derive(Debug, Parser)]
#[command(name = "adabal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a raw UCI file (abalone, thyroid, cardiotocography) into a canonical CSV.
    Prepare {
        name: String,
        raw: PathBuf,
        out: PathBuf,
        /// Dataset manifest to add the prepared entry to.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Run the experiment sweep described by a run manifest.
    Run {
        manifest: PathBuf,
        /// Worker threads; defaults to the number of cores.
        #[arg(long, env = "ADABAL_WORKERS")]
        workers: Option<usize>,
        /// Output directory; overrides the manifest's `output_dir`.
        #[arg(long, env = "ADABAL_OUT_DIR")]
        out: Option<PathBuf>,
    },
    /// Serve the labeling-session HTTP API.
    Serve {
        #[arg(long, env = "ADABAL_BIND", default_value = "127.0.0.1:8080")]
        bind: String,
        /// Manifest listing the datasets to offer; a built-in synthetic set otherwise.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Where session snapshots are kept.
        #[arg(long, env = "ADABAL_STATE_DIR", default_value = "adabal-state")]
        state_dir: PathBuf,
    },
    /// Validate a results.jsonl file and the files written next to it.
    Selfcheck { results: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare { name, raw, out, manifest } => {
            let report = prepare::prepare_dataset(&name, &raw, &out, manifest.as_deref())?;
            eprintln!("{}: n={} d={} anomalies={}", report.entry.name, report.n, report.d, report.anomalies);
            println!("{}", serde_json::to_string_pretty(&report.entry).map_err(CliError::runtime)?);
        }
        Command::Run { manifest, workers, out } => {
            let workers = match workers {
                Some(0) => return Err(CliError::Config("--workers must be at least 1".into())),
                Some(w) => w,
                None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            };
            let report = runner::run_manifest(&manifest, out.as_deref(), workers)?;
            println!("{}", report.summary);
            eprintln!("{} cells written to {}", report.cells, report.out_dir.display());
        }
        Command::Serve { bind, manifest, state_dir } => {
            let datasets = serve::load_datasets(manifest.as_deref())?;
            serve::serve(&bind, datasets, state_dir, |addr| {
                println!("listening on http://{addr}");
                let _ = std::io::stdout().flush();
            })?;
        }
        Command::Selfcheck { results } => {
            let report = selfcheck::selfcheck(&results)?;
            let files: Vec<String> = report.checked.iter().map(|p| p.display().to_string()).collect();
            println!("ok: {} rows in {} series ({})", report.rows, report.series, files.join(", "));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
