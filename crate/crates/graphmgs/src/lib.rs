//! File formats, configuration and the `graphmgs` command line on top of
//! [`graphmgs_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::{CliError, Result};
