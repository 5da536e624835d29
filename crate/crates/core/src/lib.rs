//! Simulator for communication-bounded distributed estimation of Gaussian
//! means, with bit-exact blackboard transcripts, a Monte Carlo risk harness
//! and exact checks of the information inequalities behind the lower bounds.

pub mod cli;
pub mod codec;
pub mod error;
pub mod harness;
pub mod info;
pub mod model;
pub mod normal;
pub mod protocols;
pub mod rng;
pub mod transcript;

pub use error::{Error, Result};
