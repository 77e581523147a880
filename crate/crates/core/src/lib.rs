//! Bayesian inference for max-stable distributions using the full
//! likelihood with latent partitions.

pub mod error;
pub mod experiments;
pub mod inference;
pub mod models;
pub mod numerics;
pub mod partition;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use partition::Partition;
