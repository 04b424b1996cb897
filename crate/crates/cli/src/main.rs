use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mbac_core::{
    emit_reports, parse_config, render_config, run_experiment, run_policy, AggregateReport, Error,
    ExperimentConfig, SchemeKind, SelectionPolicy,
};

/// Admission-control simulator: compare peak-rate, measurement-based and
/// hybrid admission schemes on a token-bucket shaped link.
#[derive(Parser)]
#[command(name = "mbac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured selection policy over all seeds.
    Run(RunArgs),
    /// Run every scheme on shared seeds and tabulate gains.
    Compare(RunArgs),
    /// Parse and validate a config file, then print it with defaults filled in.
    ValidateConfig {
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (`key = value` lines). Defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Directory for CSV and manifest output.
    #[arg(short, long, default_value = "out")]
    out_dir: PathBuf,
    /// Override `experiment.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override `experiment.runs`.
    #[arg(long)]
    runs: Option<usize>,
    /// Restrict to these schemes (`run`: route every request to the one given).
    #[arg(long = "scheme", value_parser = parse_scheme)]
    schemes: Vec<SchemeKind>,
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    SchemeKind::parse(s).ok_or_else(|| format!("unknown scheme `{s}` (expected PBAC-ES, SWMSA, GEB or EWMA-PBAC)"))
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut config = match &args.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(runs) = args.runs {
        config.runs = runs;
    }
    config.validate()?;
    Ok(config)
}

fn print_summary(report: &AggregateReport) {
    println!("{:<10} {:>5}  {:>16}  {:>16}", "scheme", "runs", "blocking", "utilization");
    for s in &report.summaries {
        let ci = |c: Option<f64>| c.map_or_else(|| "n/a".to_string(), |v| format!("±{v:.4}"));
        println!(
            "{:<10} {:>5}  {:.4} {:>9}  {:.4} {:>9}",
            s.label,
            s.runs,
            s.mean_blocking,
            ci(s.ci95_blocking),
            s.mean_utilization,
            ci(s.ci95_utilization)
        );
    }
    for g in &report.gains {
        let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}%"));
        println!(
            "{} vs {}: blocking decrease {}, utilization increase {} (relative)",
            g.target,
            g.baseline,
            pct(g.blocking_decrease_pct),
            pct(g.utilization_increase_pct)
        );
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::ValidateConfig { config } => {
            let config = parse_config(&config)?;
            print!("{}", render_config(&config));
        }
        Command::Run(args) => {
            let mut config = load(&args)?;
            match args.schemes.as_slice() {
                [] => {}
                [one] => config.policy = SelectionPolicy::single(*one),
                _ => {
                    return Err(Error::Config {
                        key: "--scheme".into(),
                        message: "`run` takes at most one scheme; use `compare` for several".into(),
                    })
                }
            }
            let report = run_policy(&config)?;
            let bundle = emit_reports(&report, &config, &args.out_dir)?;
            print_summary(&report);
            eprintln!("wrote {}", bundle.manifest.display());
        }
        Command::Compare(args) => {
            let mut config = load(&args)?;
            if !args.schemes.is_empty() {
                config.schemes = args.schemes.clone();
            }
            let report = run_experiment(&config)?;
            let bundle = emit_reports(&report, &config, &args.out_dir)?;
            print_summary(&report);
            eprintln!("wrote {}", bundle.manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (category, code) = match &e {
                Error::Config { .. } | Error::EpsilonDomain { .. } => ("config", 2),
                Error::Io { .. } => ("io", 3),
                Error::OutOfInterval { .. } | Error::Bookkeeping(_) => ("internal", 1),
            };
            eprintln!("error[{category}]: {e}");
            ExitCode::from(code)
        }
    }
}
