//! Pathwise stochastic calculus on the canonical space of jump configurations.

pub mod canonical;
pub mod catalog;
pub mod chaos;
pub mod cho;
pub mod error;
pub mod harness;
pub mod measure;
pub mod operators;
pub mod quad;
pub mod sampler;
pub mod volterra;

pub use canonical::{JumpConfiguration, JumpPoint};
pub use error::{Error, Result};
pub use measure::{JumpMeasure, JumpSizes, Rate, Region, TabulatedDensity};
