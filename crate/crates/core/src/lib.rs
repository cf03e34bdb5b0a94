//! Driven-dissipative collective spin models: mean-field flow, Gaussian
//! fluctuations, exact Lindblad steady states and squeezing observables.

pub mod collective_spin;
pub mod error;
pub mod fluctuations;
pub mod lindblad;
pub mod meanfield;
pub mod numerics;
pub mod observables;

pub use error::{Error, Result};
