use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use shockline::experiments::{parse_config, run_experiment, Mode};
use shockline::Error;

/// Viscous 2-shock stability experiments on a half-line with outflow.
///
/// Exit status: 0 all checks passed, 1 a check failed, 2 bad configuration,
/// 3 the run aborted.
#[derive(Debug, Parser)]
#[command(name = "shockline", version)]
struct Cli {
    #[arg(value_enum)]
    mode: Mode,

    /// TOML config file.
    #[arg(long)]
    config: PathBuf,

    /// Override a config key, e.g. `--set N=6000 --set perturbation.amplitude=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

fn report_error(e: &Error) -> ExitCode {
    eprintln!("error [{}]: {e}", e.module());
    if let Error::Positivity { dump: Some(p), .. } = e {
        eprintln!("last accepted field written to {}", p.display());
    }
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let spec = match parse_config(cli.mode, &cli.config, &cli.sets, &cli.out) {
        Ok(s) => s,
        Err(e) => return report_error(&e),
    };
    log::info!("{} -> {}", cli.mode.name(), spec.out_dir.display());
    let outcome = match run_experiment(&spec) {
        Ok(o) => o,
        Err(e) => return report_error(&e),
    };
    for line in &outcome.summary {
        println!("{line}");
    }
    for c in &outcome.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{tag} {}", c.name);
        } else {
            println!("{tag} {}: {}", c.name, c.detail);
        }
    }
    let failed = outcome.checks.iter().filter(|c| !c.pass).count();
    println!("{} checks, {failed} failed; report in {}", outcome.checks.len(), spec.out_dir.join("report.json").display());
    ExitCode::from(outcome.exit_code() as u8)
}
