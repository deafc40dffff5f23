//! Monte Carlo harness comparing FS-ANM against plain ANM and grid OMP.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod tools;

pub use config::{ExperimentConfig, Mode, Sensing};
pub use error::{BenchError, Result};
pub use output::{csv_string, emit_results, write_csv, write_json, Format, CSV_HEADER};
pub use runner::{derive_seed, run_experiment, summarize, Failure, Method, ResultRow, RunOutput, SummaryRow};
