//! Controller synthesis and simulation lab for an unstable ring network
//! sensed through two channels on opposite ends of the speed-accuracy
//! spectrum: an instant sensor reading a few eigendirections, and a dense
//! sensor delivering every node with a fixed delay.
//!
//! The crate is organized around a pipeline:
//!
//! - [`ring`] builds the circulant plant, its eigensystem, the
//!   delay-augmented state space, and the sensing matrices;
//! - [`riccati`] solves the discrete algebraic Riccati equation with zero
//!   measurement noise and synthesizes optimal full-control gains and
//!   their state-feedback duals;
//! - [`sim`] runs open- and closed-loop impulse responses and classifies
//!   trajectories;
//! - [`ifp`] splits gains into forward and internal-feedback blocks and
//!   runs knockout experiments;
//! - [`ofsynth`] covers the output-feedback variant with both actuation
//!   and sensing delays;
//! - [`sweep`] evaluates parameter grids deterministically and locates
//!   stability breaking points.

pub mod ifp;
pub mod linalg;
pub mod ofsynth;
pub mod riccati;
pub mod ring;
pub mod sim;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("synthesis failed: {0}")]
    SynthesisFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
