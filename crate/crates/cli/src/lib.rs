//! Command line driver: configuration, file formats, subcommands and the
//! end-to-end pipeline.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use config::{Mode, PipelineConfig};
pub use error::{CliError, CliResult};
