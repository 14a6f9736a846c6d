//! Config-driven experiment pipelines with persisted, resumable artifacts.

mod config;
mod run;
mod store;

pub use config::{Backend, ExperimentConfig, McDual, TerminalPolicy};
pub use run::*;
pub use store::{decode_rows, read_trajectory_file, StoredInterval, TrajectoryHeader, TrajectoryWriter};
