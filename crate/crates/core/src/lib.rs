//! Unambiguous radial-velocity estimation from wrapped Doppler phase
//! differences collected on several carrier bands under random packet timing.
//!
//! The pipeline runs from band definitions ([`model`]) and channel synthesis
//! ([`channel`]), through timing selection ([`traffic`]) and pairwise phase
//! measurements ([`measurements`]), to the integer least-squares estimator
//! ([`solver`]) and its baselines ([`benchmarks`]). [`experiments`] wires it
//! into a reproducible Monte-Carlo harness.

pub mod benchmarks;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod measurements;
pub mod model;
pub mod solver;
pub mod traffic;

pub use error::{Error, Result};
