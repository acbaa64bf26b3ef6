//! Feedback-controlled distributed transmit beamforming.
//!
//! A network of N sensors transmits a common signal to a base station. Each
//! timeslot every sensor applies a small random perturbation to its carrier
//! phase; the base station broadcasts one bit saying whether the received
//! signal strength beat the best value seen so far, and sensors keep or
//! discard the perturbation accordingly. This crate provides:
//!
//! - [`phasor`] — received-signal magnitude and the zero-phase rotated frame,
//! - [`perturbation`] — the perturbation families, their cosine moments and
//!   the moment feasibility region,
//! - [`protocol`] — the Monte-Carlo simulator of the feedback loop, with
//!   optional per-sensor channel drift,
//! - [`model`] — the deterministic recursion predicting the expected
//!   convergence trajectory,
//! - [`optimizer`] — per-timeslot selection of perturbation parameters that
//!   maximize the model's one-step gain,
//! - [`scaling`] — convergence-time analysis versus the number of sensors.

pub mod error;
pub mod model;
pub mod optimizer;
pub mod perturbation;
pub mod phasor;
pub mod protocol;
pub mod quadrature;
pub mod scaling;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
