//! Experiment configuration, dispatch, and deterministic emitters behind
//! the `desslab` binary.

pub mod config;
pub mod emit;
pub mod run;
