//! Command-line front-end for `nvpulse-core`: TOML run configurations,
//! delimited-text artifacts, IQ waveform export and a threaded executor.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod waveform;

pub use error::{CliError, CliResult};
pub use io::VERSION;
