//! `spagent`: planning, compression, optimization and detection experiments
//! from one configuration file.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::detect::DetectMode;
use config::{Overrides, ProviderKind, RunConfig};
use error::{config_err, CliResult};
use report::ExperimentReport;

#[derive(Parser, Debug)]
#[command(name = "spagent", version, about = "Signal-processing agent toolkit")]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderKind>,
    /// Output directory for reports and generated data.
    #[arg(long = "out-dir", global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    budget: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose a request and plan every subtask.
    Plan {
        /// Request file (JSON).
        #[arg(long)]
        request: PathBuf,
    },
    /// Compress a file, or sweep context lengths over corpus blocks.
    Compress {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Predictor model (`.slpm`).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "context-len", default_value_t = 2)]
        context_len: usize,
        /// Per-block CE table for every configured context length.
        #[arg(long, conflicts_with = "output")]
        sweep: bool,
    },
    Decompress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Directory of predictor models.
        #[arg(long = "model-dir")]
        model_dir: Option<PathBuf>,
    },
    /// Compare hybrid, DE and SA on an objective.
    Optimize {
        /// sphere, rastrigin or detection.
        #[arg(long, default_value = "sphere")]
        objective: String,
    },
    Detect {
        #[arg(long, value_enum, default_value = "supervised")]
        mode: DetectMode,
    },
    /// Write scenes, the reference predictor, the knowledge base and the corpus.
    GenData,
    /// Print a report file as text.
    Report { file: PathBuf },
}

fn finish(mut report: ExperimentReport) -> CliResult<()> {
    let path = report.default_path();
    report.artifacts.push(path.clone());
    report.write(Some(&path))?;
    print!("{}", report.to_text());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let flags = Overrides { seed: cli.seed, provider: cli.provider, output: cli.out_dir, budget: cli.budget };
    if let Command::Report { file } = &cli.command {
        let text = std::fs::read_to_string(file).map_err(|e| config_err(format!("{}: {e}", file.display())))?;
        let report: ExperimentReport =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", file.display())))?;
        print!("{}", report.to_text());
        return Ok(());
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &flags)?;
    match cli.command {
        Command::Plan { request } => {
            let report = commands::plan::run(&cfg, &request)?;
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Compress { input, output, model, context_len, sweep } => {
            if sweep {
                finish(commands::codec::sweep(&cfg, input.as_deref(), model.as_deref())?)
            } else {
                let (Some(input), Some(output)) = (input, output) else {
                    return Err(config_err("compress needs --input and --output, or --sweep"));
                };
                finish(commands::codec::compress_file(&cfg, &input, &output, model.as_deref(), context_len)?)
            }
        }
        Command::Decompress { input, output, model_dir } => {
            commands::codec::decompress_file(&cfg, &input, &output, model_dir)
        }
        Command::Optimize { objective } => finish(commands::optimize::run(&cfg, &objective)?),
        Command::Detect { mode } => finish(commands::detect::run(&cfg, mode)?),
        Command::GenData => finish(commands::gen_data::run(&cfg)?),
        Command::Report { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
