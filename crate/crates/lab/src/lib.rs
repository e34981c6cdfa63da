//! File formats, experiment commands and the command-line runner built on
//! `rrm-core`.

pub mod artifacts;
pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset_io;
pub mod error;

pub use error::{LabError, Result};
