//! Experiment configuration, verification runs, and the command line.

mod cli;
pub mod config;
pub mod verify;

pub use cli::run_cli;
pub use config::ExperimentConfig;
pub use verify::{evaluate_bounds, simulate, verify, Status, VerificationReport};
