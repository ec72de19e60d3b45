//! Numerics for unit-sphere maps between finite-dimensional function lattices.

pub mod config;
pub mod convexity;
pub mod dual;
pub mod duality;
pub mod entropy;
pub mod error;
pub mod function;
pub mod homeo;
pub mod mazur;
pub mod norm;
pub mod sampling;
pub mod space;

pub use error::{Error, Result};
pub use function::LatticeFunction;
pub use norm::{LatticeNorm, NormVariant};
pub use space::{FiniteProbabilitySpace, Space};
