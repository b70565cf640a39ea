use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use heston_unbiased::config::{validate_config, ExperimentConfig, Severity};
use heston_unbiased::diagnostics::{moment_suite, MOMENT_Z_LIMIT};
use heston_unbiased::harness::{
    ensure_valid, run_convergence, run_price, run_rmse_table, write_convergence, write_csv, HarnessOptions, RmseRow,
};
use heston_unbiased::Error;

const DEFAULT_DIAGNOSTIC_DRAWS: u64 = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "heston-unbiased", version, about = "Unbiased Monte Carlo pricing under Heston with stochastic rates")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides experiment.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides experiment.samples (draw count for `diagnostics`).
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// CSV destination; overrides the config's `output`. Without one, CSV goes to stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Caps the random level of the coupled sum. Biases the estimate; for diagnostics only.
    #[arg(long, global = true)]
    max_level: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration and print its diagnostics.
    Validate,
    /// Coupled-sum prices with 95% confidence intervals.
    Price,
    /// Mean squared level error against a fine reference, with the fitted slope.
    Convergence,
    /// RMSE, work and time of the coupled sum against a fixed-level reference.
    RmseTable,
    /// Moment checks of the exact transition samplers.
    Diagnostics,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::Unsupported(_) => 2,
        Error::Diagnostic(_) | Error::Invariant(_) => 3,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let path = cli.config.as_deref().ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut c = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        c.seed = seed;
    }
    if let Some(samples) = cli.samples {
        c.samples = samples;
    }
    if let Some(output) = &cli.output {
        c.output_path = Some(output.clone());
    }
    Ok(c)
}

fn emit_csv<T: serde::Serialize>(path: Option<&Path>, rows: &[T]) -> Result<(), Error> {
    match path {
        Some(p) => {
            write_csv(p, rows)?;
            log::info!("wrote {}", p.display());
        }
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn log_warnings(c: &ExperimentConfig) -> Result<(), Error> {
    for d in ensure_valid(c)? {
        log::warn!("[{}] {}", d.code, d.message);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let opts = HarnessOptions { workers: cli.workers, max_level: cli.max_level };
    if cli.max_level.is_some() {
        log::warn!("--max-level truncates the coupled sum; estimates are biased");
    }
    match cli.command {
        Command::Validate => {
            let c = load(cli)?;
            let diags = validate_config(&c);
            let mut out = std::io::stdout().lock();
            for d in &diags {
                writeln!(out, "{}", serde_json::to_string(d)?)?;
            }
            if diags.iter().any(|d| d.severity == Severity::Error) {
                return Err(Error::Config(format!("{} error(s) in configuration", diags.len())));
            }
            if diags.is_empty() {
                writeln!(out, "ok")?;
            }
        }
        Command::Price => {
            let c = load(cli)?;
            log_warnings(&c)?;
            let rows = run_price(&c, &opts)?;
            emit_csv(c.output_path.as_deref(), &rows)?;
        }
        Command::Convergence => {
            let c = load(cli)?;
            log_warnings(&c)?;
            let reports = run_convergence(&c, &opts)?;
            for r in &reports {
                eprintln!(
                    "{}: slope {:.4} (bootstrap se {:.4}) over levels {:?}, reference level {}",
                    r.payoff, r.slope, r.slope_se, r.fit_levels, r.ref_level
                );
            }
            match c.output_path.as_deref() {
                Some(p) => {
                    for written in write_convergence(p, &reports)? {
                        log::info!("wrote {}", written.display());
                    }
                }
                None => {
                    for r in &reports {
                        println!("# {}", r.payoff);
                        emit_csv(None, &r.rows)?;
                    }
                }
            }
        }
        Command::RmseTable => {
            let c = load(cli)?;
            log_warnings(&c)?;
            let results = run_rmse_table(&c, &opts)?;
            for r in &results {
                eprintln!(
                    "{} {}: estimate {:.6} ± {:.2e}, reference {:.6} ± {:.2e}",
                    r.row.model, r.row.payoff, r.estimate.mean, r.estimate.std_error, r.reference.mean, r.reference.std_error
                );
            }
            let rows: Vec<RmseRow> = results.into_iter().map(|r| r.row).collect();
            emit_csv(c.output_path.as_deref(), &rows)?;
        }
        Command::Diagnostics => {
            let c = load(cli)?;
            let draws = cli.samples.unwrap_or(DEFAULT_DIAGNOSTIC_DRAWS);
            let checks = moment_suite(&c, draws as usize, c.seed)?;
            let mut failed = 0;
            for m in &checks {
                println!(
                    "{:<6} {:<40} expected {:>14.8} estimate {:>14.8} se {:.2e} z {:+.2}",
                    if m.passed { "PASS" } else { "FAIL" },
                    m.name,
                    m.expected,
                    m.estimate,
                    m.std_error,
                    m.z_score
                );
                failed += usize::from(!m.passed);
            }
            if failed > 0 {
                return Err(Error::Diagnostic(format!(
                    "{failed} moment check(s) outside {MOMENT_Z_LIMIT} standard errors"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
