//! Finite probability spaces: the measure every function lattice lives over.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability space.
pub const MASS_TOL: f64 = 1e-12;

/// A finite probability space: `n` atoms with strictly positive weights
/// summing to 1 (within [`MASS_TOL`]). Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteProbabilitySpace {
    weights: Vec<f64>,
}

/// Shared handle to a space. Functions and norms hold one of these; spaces
/// are compared by value, so independently constructed equal spaces match.
pub type Space = Arc<FiniteProbabilitySpace>;

impl FiniteProbabilitySpace {
    pub fn new(weights: Vec<f64>) -> Result<Space> {
        if weights.is_empty() {
            return Err(Error::InvalidSpace("no atoms".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidSpace(format!(
                    "atom {i} has non-positive weight {w}"
                )));
            }
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidSpace(format!(
                "total mass {mass} differs from 1 by more than {MASS_TOL}"
            )));
        }
        Ok(Arc::new(Self { weights }))
    }

    /// The uniform space on `n` atoms.
    pub fn uniform(n: usize) -> Space {
        assert!(n > 0, "uniform space needs at least one atom");
        let w = 1.0 / n as f64;
        Arc::new(Self {
            weights: vec![w; n],
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `∫ v dμ = Σ μ_i v_i`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights
            .iter()
            .zip(values)
            .map(|(&w, &v)| w * v)
            .sum()
    }
}
