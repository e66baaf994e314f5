//! File formats and command-line plumbing for the `lrsim` degradation
//! model: PGM/PNG image IO, checkpoints, run configs, sweep reports and
//! kernel dumps.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod imageio;
pub mod kernel_dump;
pub mod pgm;
pub mod pngio;
pub mod report;

pub use error::{CliError, Result};
