use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sgflow::simulation::SimConfig;
use sgflow_cli::commands::{self, CliError};
use sgflow_cli::config::{parse_config, parse_list, parse_number, preset, PRESETS};

#[derive(Parser)]
#[command(name = "sgflow", version, about = "Semigeostrophic flow in dual space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write field samples at the snapshot times.
    Run {
        /// Configuration file.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in configuration: test3-text or test3-caption.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value = "sgflow-out/run")]
        out: PathBuf,
        /// Sample points per axis.
        #[arg(long, default_value_t = 101)]
        resolution: usize,
    },
    /// Test-2 errors over a list of mesh sizes with dt = h^2.
    Converge {
        /// Comma-separated mesh sizes; fractions allowed.
        #[arg(long, default_value = "1/12,1/20,1/32")]
        h: String,
        #[arg(long, default_value = "0.01")]
        eps: String,
        #[arg(long, default_value = "0.25")]
        t: String,
        #[arg(long, default_value = "sgflow-out/converge")]
        out: PathBuf,
    },
    /// Test-1 errors against the unregularized solution over a list of epsilon.
    Epsweep {
        #[arg(long, default_value = "0.05,0.025,0.0125,0.00625")]
        eps: String,
        #[arg(long, default_value = "1/34")]
        h: String,
        #[arg(long, default_value = "0.001")]
        dt: String,
        #[arg(long, default_value = "0.25")]
        t: String,
        #[arg(long, default_value = "sgflow-out/epsweep")]
        out: PathBuf,
    },
    /// Solver and discretization self-checks.
    Check {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "sgflow-out/check")]
        out: PathBuf,
    },
}

fn number(s: &str) -> Result<f64, CliError> {
    parse_number(s).map_err(CliError::Usage)
}

fn list(s: &str) -> Result<Vec<f64>, CliError> {
    parse_list(s).map_err(CliError::Usage)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let summary = match cli.command {
        Command::Run { config, preset: name, out, resolution } => {
            let cfg = match (config, name) {
                (Some(path), _) => parse_config(path)?,
                (None, Some(n)) => preset(&n).ok_or_else(|| {
                    CliError::Usage(format!("unknown preset `{n}`, expected one of {}", PRESETS.join(", ")))
                })?,
                (None, None) => return Err(CliError::Usage("give --config or --preset".into())),
            };
            commands::run(&cfg, &out, resolution)?
        }
        Command::Converge { h, eps, t, out } => {
            commands::converge(&list(&h)?, number(&eps)?, number(&t)?, &SimConfig::default(), &out)?
        }
        Command::Epsweep { eps, h, dt, t, out } => {
            commands::epsweep(&list(&eps)?, number(&h)?, number(&dt)?, number(&t)?, &SimConfig::default(), &out)?
        }
        Command::Check { seed, out } => commands::check(seed, &out)?,
    };
    print!("{}", summary.render());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sgflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
