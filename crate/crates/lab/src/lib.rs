//! Batch driver for the `mckean-core` numerics: TOML run configs, CSV and
//! JSON-lines outputs, and static SVG plots.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod svg;

pub use commands::{run_subcommand, Command, Report};
pub use config::{parse_config, RunConfig};
pub use error::LabError;

/// Environment variable that overrides the output directory. It is the only
/// setting read from the environment.
pub const OUT_DIR_ENV: &str = "MCKEAN_LAB_OUT";
