//! File formats, reports and the command-line driver around `plab-core`.
//!
//! - [`problem_file`]: JSON problem descriptions and problem lookup.
//! - [`trajectory_io`]: trajectory CSV files with a JSON sidecar.
//! - [`direction_io`]: second-order direction files.
//! - [`report`]: versioned JSON reports with 17 significant digits.
//! - [`cli`]: argument parsing and the subcommands.

pub mod cli;
pub mod commands;
pub mod direction_io;
pub mod error;
pub mod problem_file;
pub mod report;
pub mod trajectory_io;

pub use error::CliError;
