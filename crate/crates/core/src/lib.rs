//! Transmon single-qubit gate synthesis, simulation and characterisation.
//!
//! Frequencies are angular (rad/s) and times are seconds throughout; unit
//! strings such as `"204.8 MHz"` are only accepted at the configuration
//! boundary (see [`units`]).

pub mod analysis;
pub mod bench;
pub mod calibration;
pub mod device;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod metrology;
pub mod nelder_mead;
pub mod propagator;
pub mod pulse;
pub mod sequence;
pub mod units;

pub use error::{Error, Result};
