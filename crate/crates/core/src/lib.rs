//! DAE-aware control barrier functions.
//!
//! Building blocks for enforcing and checking safety of control-affine
//! semi-explicit DAEs: projected dynamics on the constraint manifold,
//! a QP safety filter, a simulator and a sampling-based verifier with
//! Farkas certificates.

pub mod benchmarks;
pub mod config;
pub mod error;
pub mod filter;
pub mod model;
pub mod numeric;
pub mod parallel;
pub mod projection;
pub mod simulator;
pub mod verifier;

pub use config::Tolerances;
pub use error::{Error, Result};
