//! Named, seeded experiments over the `pobs` model with CSV and JSON output,
//! and the acceptance suite behind `pobs verify`.

pub mod config;
pub mod report;
pub mod run;
pub mod sample;
pub mod verify;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use report::{Check, RunReport, Table};
pub use run::{run, RunError};
