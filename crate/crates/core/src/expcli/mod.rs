//! Configuration-driven experiment runner behind the `lrl` binary.

mod config;
mod run;
mod verify;

use std::io::Write;
use std::path::Path;

pub use config::{
    load_config, parse_config, ExperimentConfig, ObservableConfig, PotentialConfig, PotentialKind,
    Schedule,
};
pub use run::{
    divergence_csv, kernels_csv, run_bounds, run_kernels, run_sweep, sweep_csv, BoundsEntry,
    BoundsReport, KernelRow, SweepMode, SweepRecord, KAPPA_QUAD_TOL,
};
pub use verify::{run_verify, CheckOutcome, VerifyReport, ENERGY_TOL};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

/// Process exit code for an error that aborted a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::Assumption(_) | Error::Consistency(_) => EXIT_CHECK_FAILED,
        _ => EXIT_USAGE,
    }
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}
