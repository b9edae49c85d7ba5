use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use loggamma_lab::harness::{emit, run_experiment, ExperimentConfig};
use loggamma_lab::Error;

/// Numerical laboratory for the log-gamma directed polymer.
#[derive(Parser, Debug)]
#[command(name = "loggamma-lab", version)]
struct Cli {
    /// experiment name: verify_laplace, tw_convergence, tails, bbp,
    /// lln_phase, invariants, tables, cdf_table
    experiment: String,
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// RNG seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample count override
    #[arg(long)]
    samples: Option<usize>,
    /// output directory for report.json and data.csv
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// worker thread count; falls back to LOGGAMMA_THREADS, then all cores
    #[arg(long)]
    threads: Option<usize>,
    /// config override as key=value (value in JSON syntax); repeatable
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let threads = cli.threads.or_else(|| {
        std::env::var("LOGGAMMA_THREADS").ok().and_then(|s| s.parse().ok())
    });
    #[cfg(feature = "parallel")]
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {}", e)))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;

    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::Config(format!("{}: {}", cli.config.display(), e)))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    for kv in &cli.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(samples) = cli.samples {
        cfg.samples = samples;
    }

    let report = run_experiment(&cli.experiment, &cfg)?;
    emit(&report, &cli.out)?;
    for m in &report.metrics {
        println!(
            "{} {}: value={:.6e} threshold={:.6e}",
            if m.pass { "PASS" } else { "FAIL" },
            m.name,
            m.value,
            m.threshold
        );
    }
    println!(
        "{}: {} ({} metrics, report in {})",
        cli.experiment,
        if report.pass { "pass" } else { "FAIL" },
        report.metrics.len(),
        cli.out.display()
    );
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(2),
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {}", e);
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("numeric error: {}", e);
            ExitCode::from(4)
        }
    }
}
