//! The `entbound` command-line tool.
//!
//! Commands: `measure`, `sweep-fig1`, `sweep-fig2`, `verify`, `nonadditivity`.
//! Exit codes: 0 success, 1 failed verification, 2 bad input, 3 solver failure.
//! Reports are JSON, sweeps are CSV with 17 significant digits; both are
//! byte-identical across runs unless `--timings` is given.

pub mod args;
pub mod commands;
pub mod error;
pub mod family;

pub use args::{Cli, RunConfig};
pub use commands::{run, Outcome};
pub use error::CliError;
