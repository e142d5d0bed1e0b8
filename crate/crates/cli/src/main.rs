//! `coherest`: run coherence-estimation experiments from config files.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use coherest::coherence::sample_size_bound;
use coherest::experiment::{
    read_raw_csv, run_to_file, summarize, write_atomically, write_summary_csv, ExperimentConfig,
};

/// Relative output paths are placed under this directory when it is set.
const OUTPUT_DIR_ENV: &str = "COHEREST_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "coherest",
    version,
    about = "Sampling-based matrix coherence experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a key = value config file.
    Run {
        config: PathBuf,
        /// Override a config key; may be repeated.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Raw CSV destination (overrides the config's `output`).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// Base seed; trial `t` uses `seed + t`.
        #[arg(long)]
        seed: Option<u64>,
        /// Record per-row wall times (output is then no longer reproducible).
        #[arg(long)]
        timing: bool,
        /// Also write the per-(l, method) summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Aggregate a raw results CSV into means and standard deviations.
    Summarize {
        raw: PathBuf,
        /// Destination; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Number of sampled columns that suffices with probability `1 - delta`.
    Bound {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        mu0: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        c1: f64,
        #[arg(long)]
        c2: f64,
    },
}

fn parse_override(raw: &str) -> Result<(String, String)> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_owned(), v.trim().to_owned())),
        _ => bail!("--set expects KEY=VALUE, got '{raw}'"),
    }
}

fn output_dir() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn resolve(path: &Path) -> PathBuf {
    match output_dir() {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn run(
    config_path: &Path,
    overrides: &[String],
    output: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
    timing: bool,
    summary: Option<PathBuf>,
) -> Result<()> {
    let mut pairs = overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<Result<Vec<_>>>()?;
    if let Some(t) = trials {
        pairs.push(("trials".into(), t.to_string()));
    }
    if let Some(s) = seed {
        pairs.push(("base_seed".into(), s.to_string()));
    }
    if timing {
        pairs.push(("record_timing".into(), "true".into()));
    }
    if let Some(o) = &output {
        pairs.push(("output".into(), o.display().to_string()));
    }
    let config = ExperimentConfig::from_file(config_path, &pairs)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let path = config.output_path(output_dir().as_deref());
    let rows = run_to_file(&config, &path)
        .with_context(|| format!("running experiment '{}'", config.id))?;
    eprintln!("wrote {} rows to {}", rows.len(), path.display());
    if let Some(s) = summary {
        let s = resolve(&s);
        let table = summarize(&rows)?;
        write_atomically(&s, |f| write_summary_csv(f, &table))?;
        eprintln!("wrote summary to {}", s.display());
    }
    Ok(())
}

fn summarize_file(raw: &Path, output: Option<PathBuf>) -> Result<()> {
    let file = File::open(raw).with_context(|| format!("opening {}", raw.display()))?;
    let rows =
        read_raw_csv(BufReader::new(file)).with_context(|| format!("reading {}", raw.display()))?;
    let table = summarize(&rows)?;
    match output {
        Some(path) => write_atomically(&resolve(&path), |f| write_summary_csv(f, &table))?,
        None => {
            let mut stdout = io::stdout().lock();
            write_summary_csv(&mut stdout, &table)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            overrides,
            output,
            trials,
            seed,
            timing,
            summary,
        } => run(&config, &overrides, output, trials, seed, timing, summary),
        Command::Summarize { raw, output } => summarize_file(&raw, output),
        Command::Bound {
            r,
            mu0,
            delta,
            c1,
            c2,
        } => sample_size_bound(r, mu0, delta, c1, c2)
            .map(|l| println!("{l}"))
            .map_err(Into::into),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
