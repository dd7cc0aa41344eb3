//! Experiment harness for single-edge graph injection attacks: config
//! handling and the subcommands behind the `segia` binary.

pub mod commands;
pub mod config;

pub use commands::{Method, Role, Timing};
pub use config::{ExperimentConfig, GraphConfig, GraphSource, ModelSpec, Overrides, SweepAxes};
