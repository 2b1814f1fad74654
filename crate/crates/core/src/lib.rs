//! Deterministic simulation of spacecraft swarms around rotating small bodies.

pub mod body_model;
pub mod conjunction;
pub mod driver;
pub mod dynamics;
pub mod error;
pub mod gravimetry;
pub mod guidance;
pub mod poly;
pub mod propagator;
pub mod scenario;

pub use error::{Result, SwarmError};
