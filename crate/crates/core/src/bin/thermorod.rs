use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thermorod::scenario::{
    convergence_csv, convergence_from_config, parse_config, run_scenario, Quantity, RunOptions, ScenarioConfig, PRESETS,
};
use thermorod::Error;

#[derive(Parser)]
#[command(name = "thermorod", version, about = "Thermo-viscoelastic rod scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Config file or preset name
    #[arg(long)]
    config: String,
    /// Override the time step [s]
    #[arg(long)]
    h: Option<f64>,
    /// Override the degree (comma list for `convergence`)
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    /// Override the control points per patch (comma list for `convergence`)
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Snapshot times [s], e.g. 0.5,1.5
        #[arg(long, value_delimiter = ',')]
        snapshot_times: Option<Vec<f64>>,
    },
    /// Spatial convergence table against a fine reference
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Built-in presets
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Validate a config without running it
    Check {
        #[arg(long)]
        config: String,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
}

fn load(source: &str) -> thermorod::Result<ScenarioConfig> {
    let text = if PRESETS.contains(&source) { source.to_string() } else { std::fs::read_to_string(source)? };
    parse_config(&text)
}

fn apply_overrides(cfg: &mut ScenarioConfig, c: &Common, single: bool) -> thermorod::Result<()> {
    if let Some(h) = c.h {
        cfg.discretization.h = Quantity::Si(h);
    }
    if single {
        if let Some(p) = c.p.as_ref().and_then(|v| v.first()) {
            cfg.discretization.degree = *p;
        }
        if let Some(n) = c.n.as_ref().and_then(|v| v.first()) {
            cfg.discretization.control_points = *n;
        }
    }
    cfg.validate()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::InvalidArgument(_) | Error::Geometry(_) | Error::TemperatureOutOfRange { .. } => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> thermorod::Result<u8> {
    match cli.command {
        Command::Presets { action: PresetAction::List } => {
            for name in PRESETS {
                let cfg = parse_config(name)?;
                let tag = if cfg.long_running { " [long-running]" } else { "" };
                println!("{name}{tag}: {}", cfg.description);
            }
            Ok(0)
        }
        Command::Check { config } => {
            let cfg = load(&config)?;
            println!("{}: ok", cfg.name);
            Ok(0)
        }
        Command::Run { common, out, snapshot_times } => {
            let mut cfg = load(&common.config)?;
            apply_overrides(&mut cfg, &common, true)?;
            let outcome = run_scenario(&cfg, &RunOptions { out_dir: Some(out.clone()), snapshot_times, stop_time: None })?;
            match &outcome.failure {
                None => {
                    println!("{}: {} steps written to {}", cfg.name, outcome.records.len() - 1, out.display());
                    Ok(0)
                }
                Some(e) => {
                    eprintln!("{}: {e}; last good state at t = {} s", cfg.name, outcome.simulation.time);
                    Ok(3)
                }
            }
        }
        Command::Convergence { common, out, threads } => {
            let mut cfg = load(&common.config)?;
            apply_overrides(&mut cfg, &common, false)?;
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
            let rows = convergence_from_config(&cfg, common.p.clone(), common.n.clone(), threads)?;
            std::fs::create_dir_all(&out)?;
            let csv = convergence_csv(&rows);
            std::fs::write(out.join("convergence.csv"), &csv)?;
            print!("{csv}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
