//! Vehicle-to-vehicle mmWave link simulator with joint radar sensing, and
//! actor-critic agents that pick the modulation order and OFDM frame count per
//! slot.
//!
//! The numeric core is generic over [`num::Real`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations.

// Guards like `!(x > 0)` are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod num;
pub mod rng;
pub mod sensing;
pub mod traffic;

pub use error::{Error, Result, Violation};
pub use num::Real;

pub type LinkParams64 = channel::LinkParams<f64>;
pub type LinkState64 = channel::LinkState<f64>;
pub type SensingParams64 = sensing::SensingParams<f64>;
pub type TrafficParams64 = traffic::TrafficParams<f64>;
pub type EnvParams64 = env::EnvParams<f64>;
pub type Env64 = env::Env<f64>;
pub type StepOutcome64 = env::StepOutcome<f64>;
pub type PolicyValueNet64 = agents::PolicyValueNet<f64>;
pub type PolicyValueNet32 = agents::PolicyValueNet<f32>;
pub type Agent64 = agents::Agent<f64>;
pub type Agent32 = agents::Agent<f32>;
pub type RolloutBuffer64 = agents::RolloutBuffer<f64>;
