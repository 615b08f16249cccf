//! Command-line pipeline around the ablation toolkit: train trials, record
//! ablation deltas, cluster them, and render report figures.

pub mod config;
pub mod error;
pub mod figures;
pub mod pipeline;
pub mod svg;

pub use config::RunConfig;
pub use error::{CliError, ErrorKind};
