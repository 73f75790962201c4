//! File formats, experiment configuration, the staged pipeline and the
//! command line for `esnq-core`.

pub mod artifact;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod exec;
pub mod pipeline;
pub mod report;

pub use error::{CliError, Result};
