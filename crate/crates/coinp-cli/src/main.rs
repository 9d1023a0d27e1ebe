//! Command-line driver: `simulate` runs the replicated experiment grid,
//! `analyze` tests every feature of one CSV dataset, `report` re-derives
//! summary and CDF files from a records file.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime
//! failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use coinp::analyze::analyze_dataset_with_workers;
use coinp::data::load_csv;
use coinp::harness::{emit_report, read_records, run_grid, summarize, write_records};

use config::{load, Profile, Resolved, RunConfig};

#[derive(Parser)]
#[command(
    name = "coinp",
    version,
    about = "Permutation-based conditional independence testing for regression data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replicated scenario grid and write records + report files.
    Simulate {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Override the configured master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured profile (desk, paper, custom).
        #[arg(long)]
        profile: Option<String>,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test each feature of a CSV dataset against the remaining features.
    Analyze {
        /// Input CSV with a header row.
        csv: PathBuf,
        /// Label (response) column name.
        #[arg(long)]
        label: Option<String>,
        /// Run configuration (TOML); optional.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Override the configured seed (split and permutations).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild summary and CDF files from a records file.
    Report {
        /// Records CSV produced by `simulate`.
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Significance level for the power column.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

/// Distinguishes flag/config mistakes (exit 1) from failures of a valid
/// run (exit 2).
enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage<T>(r: anyhow::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::Usage)
}

fn runtime<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Runtime(e.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            workers,
            seed,
            profile,
            out,
        } => cmd_simulate(&config, workers, seed, profile.as_deref(), out),
        Command::Analyze {
            csv,
            label,
            config,
            workers,
            seed,
            out,
        } => cmd_analyze(&csv, label.as_deref(), config.as_deref(), workers, seed, out),
        Command::Report { records, out, alpha } => cmd_report(&records, out, alpha),
    }
}

fn resolve_config(
    path: Option<&Path>,
    profile: Option<&str>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> anyhow::Result<Resolved> {
    let mut cfg = match path {
        Some(p) => load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.master_seed = Some(seed);
    }
    if let Some(dir) = out {
        cfg.output_dir = Some(dir);
    }
    let profile = profile.map(Profile::parse).transpose()?;
    cfg.resolve(profile)
}

fn write_manifest(resolved: &Resolved, out_dir: &Path) -> anyhow::Result<()> {
    let manifest = resolved.manifest()?;
    std::fs::write(out_dir.join("manifest.toml"), manifest)
        .context("cannot write manifest.toml")?;
    Ok(())
}

fn cmd_simulate(
    config: &Path,
    workers: usize,
    seed: Option<u64>,
    profile: Option<&str>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let resolved = usage(resolve_config(Some(config), profile, seed, out))?;
    let out_dir = resolved.output_dir.clone();
    runtime(std::fs::create_dir_all(&out_dir))?;
    usage(write_manifest(&resolved, &out_dir))?;

    eprintln!(
        "profile {:?}: {} grid records to produce",
        resolved.profile,
        resolved.grid.total_records()
    );
    let records = runtime(run_grid(&resolved.grid, workers))?;
    let records_path = out_dir.join("records.csv");
    runtime(write_records(&records, &records_path))?;
    runtime(emit_report(&records, resolved.grid.alpha, &out_dir))?;

    for cell in runtime(summarize(&records, resolved.grid.alpha))? {
        eprintln!(
            "cell {}: power={:.3} ks={:.3} ok={} failed={}",
            cell.cell, cell.power, cell.ks_stat, cell.n_ok, cell.n_failed
        );
    }
    println!("{}", records_path.display());
    Ok(())
}

fn cmd_analyze(
    csv: &Path,
    label: Option<&str>,
    config: Option<&Path>,
    workers: usize,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let resolved = usage(resolve_config(config, None, seed, out))?;
    let label = usage(
        label
            .map(str::to_owned)
            .or_else(|| resolved.analyze_label.clone())
            .ok_or_else(|| anyhow!("no label column: pass --label or set analyze.label_column")),
    )?;
    let out_dir = resolved.output_dir.clone();
    runtime(std::fs::create_dir_all(&out_dir))?;
    let mut with_label = resolved.clone();
    with_label.analyze_label = Some(label.clone());
    usage(write_manifest(&with_label, &out_dir))?;

    let dataset = runtime(load_csv(csv, &label, &resolved.encoding))?;
    let matrix = runtime(analyze_dataset_with_workers(
        &dataset,
        &resolved.analyze,
        workers,
    ))?;
    let out_path = out_dir.join("pvalues.csv");
    runtime(matrix.write_csv(&out_path))?;
    println!("{}", out_path.display());
    Ok(())
}

fn cmd_report(records: &Path, out: Option<PathBuf>, alpha: f64) -> Result<(), CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(anyhow!("--alpha must be in (0, 1)")));
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from("coinp-out"));
    let records = runtime(read_records(records))?;
    if records.is_empty() {
        return Err(CliError::Runtime(anyhow!("records file has no data rows")));
    }
    runtime(std::fs::create_dir_all(&out_dir))?;
    let paths = runtime(emit_report(&records, alpha, &out_dir))?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}
