//! Configuration ingestion, scenario sweeps and CSV reporting on top of
//! `cvqkd_core`.

use thiserror::Error;

pub mod config;
pub mod report;
pub mod sweep;

pub use config::{parse_config, parse_mode, SweepConfig};
pub use report::{emit_report, parse_report, render_report, CSV_HEADER};
pub use sweep::{run_sweep, SweepRow};

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed TOML or an unknown key.
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),

    /// Well-formed TOML with an out-of-bounds or inconsistent value.
    #[error("config validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] cvqkd_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
