//! Command-line layer of the NV DNP toolkit: configuration, CSV ingestion,
//! sweeps and result records.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod record;

pub use commands::{run, CommandKind};
pub use config::RunConfig;
pub use error::{CliError, CliResult, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
pub use record::ResultRecord;
