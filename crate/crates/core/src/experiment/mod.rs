//! Configured experiments: parse a TOML description, run it, write results.

pub mod analysis;
pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, ExperimentConfig, ExperimentKind};
pub use output::{emit_replay, emit_results};
pub use run::{replay_counts, run, RunOutput};
