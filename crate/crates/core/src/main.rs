use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lrl::expcli::{
    self, divergence_csv, kernels_csv, load_config, run_bounds, run_kernels, run_sweep, run_verify,
    sweep_csv, write_output, ExperimentConfig, SweepMode, EXIT_CHECK_FAILED, EXIT_DIVERGENCE,
    EXIT_OK, EXIT_USAGE,
};
use lrl::Error;

/// Lieb-Robinson certification for classical oscillator lattices.
#[derive(Debug, Parser)]
#[command(name = "lrl", version)]
struct Cli {
    /// Write output here instead of the configured path or stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kernel table with decay margins over the schedule.
    Kernels { config: PathBuf },
    /// Measured bracket against the envelope over the schedule.
    Sweep {
        #[arg(long, value_parser = ["harmonic", "anharmonic", "multisite"])]
        mode: String,
        config: PathBuf,
    },
    /// Run every invariant check.
    Verify { config: PathBuf },
    /// Print velocities and constants.
    Bounds { config: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentConfig, Error> {
    let mut cfg = load_config(path)?;
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32, Error> {
    match &cli.command {
        Command::Kernels { config } => {
            let cfg = load(cli, config)?;
            eprint!("{}", cfg.echo());
            let rows = run_kernels(&cfg)?;
            write_output(cfg.output.as_deref(), &kernels_csv(&rows))?;
            Ok(if rows.iter().all(|r| r.pass) {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
        Command::Sweep { mode, config } => {
            let mode: SweepMode = mode.parse()?;
            let cfg = load(cli, config)?;
            eprint!("{}", cfg.echo());
            match run_sweep(&cfg, mode) {
                Ok(rows) => {
                    write_output(cfg.output.as_deref(), &sweep_csv(mode, &rows))?;
                    Ok(if rows.iter().all(|r| r.pass) {
                        EXIT_OK
                    } else {
                        EXIT_CHECK_FAILED
                    })
                }
                Err(err @ Error::Divergence { time, .. }) => {
                    write_output(cfg.output.as_deref(), &divergence_csv(mode, time))?;
                    eprintln!("error: {err}");
                    Ok(EXIT_DIVERGENCE)
                }
                Err(err) => Err(err),
            }
        }
        Command::Verify { config } => {
            let cfg = load(cli, config)?;
            let report = run_verify(&cfg)?;
            write_output(
                cfg.output.as_deref(),
                &format!("{}{}", cfg.echo(), report.to_text()),
            )?;
            Ok(if report.all_pass() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
        Command::Bounds { config } => {
            let cfg = load(cli, config)?;
            let report = run_bounds(&cfg)?;
            write_output(
                cfg.output.as_deref(),
                &format!("{}{}", cfg.echo(), report.to_text()),
            )?;
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = run(&cli).unwrap_or_else(|err| {
        eprintln!("error: {err}");
        expcli::exit_code(&err)
    });
    ExitCode::from(code as u8)
}
