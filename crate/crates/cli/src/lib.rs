//! File formats and command-line pipelines around `xltag-core`.

pub mod binary;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod text;

pub use error::{Error, Result};
