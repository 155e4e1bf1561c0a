use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sfksd::cli::{run_power, run_sample, run_test, run_type1, run_verify};
use sfksd::config::ExperimentConfig;
use sfksd::io::{matrix_to_string, read_matrix_path};
use sfksd::Error;

/// Kernel Stein discrepancy goodness-of-fit tests for unnormalised models.
#[derive(Debug, Parser)]
#[command(name = "sfksd", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path (default: the config's "output", else stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test a model against a headerless CSV sample; prints the result as JSON.
    Test {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Headerless CSV, one observation per row.
        #[arg(long)]
        data: PathBuf,
        /// Also write the Stein kernel matrix as CSV.
        #[arg(long)]
        gram: Option<PathBuf>,
    },
    /// Rejection rates under perturbed alternatives (CSV).
    Power(ConfigArg),
    /// Rejection rates under the null (CSV).
    Type1(ConfigArg),
    /// Run the certification suite (JSON report).
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Draw samples from the configured model (CSV).
    Sample(ConfigArg),
}

fn load(path: &Path, cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Io(e.to_string()))
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Test { cfg, data, gram } => {
            let cfg = load(&cfg.config, cli)?;
            let samples = read_matrix_path(data)?;
            let run = run_test(&cfg, &samples)?;
            if let Some(g) = gram {
                emit(Some(g), &matrix_to_string(&run.gram)?)?;
            }
            emit(cfg.output.as_deref(), &to_json(&run.result)?)?;
        }
        Command::Power(c) => {
            let cfg = load(&c.config, cli)?;
            emit(cfg.output.as_deref(), &run_power(&cfg)?.to_csv()?)?;
        }
        Command::Type1(c) => {
            let cfg = load(&c.config, cli)?;
            emit(cfg.output.as_deref(), &run_type1(&cfg)?.to_csv()?)?;
        }
        Command::Verify { config } => {
            let mut cfg = match config {
                Some(p) => load(p, cli)?,
                None => ExperimentConfig::from_json("{}")?,
            };
            if config.is_none() {
                cfg.seed = cli.seed.unwrap_or(cfg.seed);
                cfg.output = cli.out.clone();
            }
            let report = run_verify(&cfg)?;
            emit(cfg.output.as_deref(), &to_json(&report)?)?;
            if !report.all_as_predicted {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Sample(c) => {
            let cfg = load(&c.config, cli)?;
            emit(cfg.output.as_deref(), &matrix_to_string(&run_sample(&cfg)?)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
