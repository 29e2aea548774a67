//! Batch experiments over the `slelab` library: every run writes a JSON
//! manifest, CSV tables and optional SVG plots into its output directory.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod plot;
pub mod report;
pub mod table;

pub use cli::run;
pub use error::{CliError, CliResult};
