//! Experiment driver: configuration, deterministic inputs, staged runs, sweeps and
//! digest-stamped manifests.

pub mod config;
pub mod input;
pub mod run;

pub use config::ExperimentConfig;
pub use run::{run, sweep, Axis, RunManifest, RunOutcome};

/// Invalid configuration or command-line input.
#[derive(Debug, thiserror::Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Exit status for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<sparsedom::Error>() {
            return match e {
                sparsedom::Error::Parameter(_)
                | sparsedom::Error::Alignment(_)
                | sparsedom::Error::Validation(_)
                | sparsedom::Error::Parse(_) => EXIT_CONFIG,
                _ => EXIT_NUMERIC,
            };
        }
    }
    EXIT_NUMERIC
}
