//! Configuration, output formats and the command-line surface.

pub mod cli;
pub mod config;
pub mod output;

pub use cli::main_with;
pub use config::{load_config, parse_config, LoadedConfig, RunConfig};
