//! Configuration-driven experiments on the simulated transmon: pulse
//! spectra, trajectories, leakage metrology, benchmarks and calibration.
//! Every run writes CSV/JSON artifacts, a resolved configuration and a
//! manifest into its own directory.

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod schema;

pub use config::{ExperimentConfig, Kind, Overrides, SpamMode};
