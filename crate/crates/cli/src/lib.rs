//! Command-line front end: CSV ingestion, run configuration, the
//! `estimate` and `simulate` commands, and report writers.

pub mod args;
pub mod commands;
pub mod config;
mod error;
pub mod ingest;
pub mod output;
pub mod synth;

pub use commands::{
    estimate, estimate_command, simulate, simulate_command, with_threads, EstimateOutput,
    SimulateOutput,
};
pub use config::{Mode, Preset, RunConfig};
pub use error::{CliError, Result};
pub use ingest::{ingest_csv, Ingested, Schema};
