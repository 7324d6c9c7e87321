//! Config-driven experiment harness: seeded cells run on a worker pool,
//! results streamed as CSV.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod seed;

pub use config::{Experiment, ExperimentConfig, RawConfig, SCHEMA_VERSION};
pub use error::CliError;
pub use output::{summarize, write_summary, Row, Status, SummaryRow, COLUMNS};
pub use run::{build_cells, run_cell, run_cells, run_experiment, run_single, write_bounds, Cell, RunResult};

/// Environment variable that sets the worker count when `--workers` is absent.
pub const WORKERS_ENV: &str = "SKETCHLORD_WORKERS";
