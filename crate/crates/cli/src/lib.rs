//! Sweeps, power-law fits, Ω optimization and the squeezing budget on top of
//! `spinsq-core`, plus the CSV/JSON plumbing used by the `spinsq` binary.

pub mod budget;
pub mod config;
pub mod error;
pub mod fit;
pub mod optimize;
pub mod oracle;
pub mod output;
pub mod sweep;

pub use error::{CliError, Result};
