use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ftnsim::harness::{emit_results, mse_theory_csv, run_sweep, FtnConfig, OutputFormat};
use ftnsim::Error;

/// Faster-than-Nyquist link simulator.
#[derive(Parser)]
#[command(name = "ftnsim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo sweep and write results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// `section.key=value`, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the closed-form CE MSE curves as CSV.
    MseTheory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check the config's invariants.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

const FLAGGED_LIMIT: f64 = 0.01;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } => 2,
        Error::Io { .. } => 3,
        _ => 4,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.cmd {
        Command::Run {
            config,
            out,
            format,
            workers,
            overrides,
        } => {
            let cfg = FtnConfig::load(&config, &overrides)?;
            let table = run_sweep(&cfg, workers)?;
            let format = match format {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
                Format::Both => OutputFormat::Both,
            };
            for path in emit_results(&table, format, &out)? {
                eprintln!("wrote {}", path.display());
            }
            let worst = table
                .rows
                .iter()
                .map(|r| r.flagged_fraction())
                .fold(0.0, f64::max);
            if worst > FLAGGED_LIMIT {
                eprintln!(
                    "error: {:.2}% of trials hit the LS conditioning floor (limit {:.0}%)",
                    100.0 * worst,
                    100.0 * FLAGGED_LIMIT
                );
                return Ok(4);
            }
            Ok(0)
        }
        Command::MseTheory { config, overrides } => {
            let cfg = FtnConfig::load(&config, &overrides)?;
            print!("{}", mse_theory_csv(&cfg)?);
            Ok(0)
        }
        Command::Validate { config, overrides } => {
            let cfg = FtnConfig::load(&config, &overrides)?;
            // building each scenario also checks the ISI spectrum
            for tau in cfg.taus() {
                ftnsim::harness::Scenario::new(&cfg, tau)?;
            }
            println!("ok {}", cfg.scenario_hash());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
