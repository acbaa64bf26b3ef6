//! Experiment harness: config files, figure presets, trace emission and
//! acceptance checks for the beamforming feedback simulator.

pub mod checks;
pub mod config;
pub mod error;
pub mod experiment;
pub mod histogram;
pub mod presets;

pub use error::{HarnessError, Result};
