//! Bayesian model-averaged mediation analysis for a binary intermediate
//! response and a time-to-event outcome in two-arm trials.

pub mod cli;
pub mod data;
pub mod error;
pub mod fmt;
pub mod likelihood;
pub mod mediation;
mod linalg;
pub mod model_space;
pub mod prediction;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod simulation;

pub use error::{Error, Result};
