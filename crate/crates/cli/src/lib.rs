//! Command-line surface for the stalm solver: config parsing, run
//! orchestration, the oracle suite and parameter sweeps.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run_command, run_to, sweep_command, verify_command, RunSummary};
pub use config::{parse_config, RunConfig};
pub use error::{CliError, Result};
