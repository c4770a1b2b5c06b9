//! Latent factor models for knowledge-graph link prediction, synthetic
//! benchmarks that isolate relational properties, and the logic baselines
//! that bound what the models can learn from them.

pub mod error;
pub mod exec;
pub mod harness;
pub mod kg;
pub mod models;
pub mod oracle;
pub mod seed;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
