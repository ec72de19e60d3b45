//! Real functions on the atoms of a finite probability space.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::space::Space;

/// Sign with the convention `sgn(0) = 0` (Rust's `f64::signum` maps 0 to ±1).
pub fn sgn(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum()
    }
}

/// A real vector over the atoms of a space. Values are finite and immutable
/// after construction, so the support is always consistent with the values.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction {
    space: Space,
    values: Vec<f64>,
}

impl LatticeFunction {
    pub fn new(space: Space, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value {bad}")));
        }
        Ok(Self { space, values })
    }

    pub fn zeros(space: Space) -> Self {
        let n = space.len();
        Self {
            space,
            values: vec![0.0; n],
        }
    }

    /// The indicator of the whole space, `χ_Ω`.
    pub fn indicator_all(space: Space) -> Self {
        let n = space.len();
        Self {
            space,
            values: vec![1.0; n],
        }
    }

    /// The indicator of a set of atoms, `χ_B`.
    pub fn indicator(space: Space, atoms: &[usize]) -> Self {
        let mut values = vec![0.0; space.len()];
        for &i in atoms {
            values[i] = 1.0;
        }
        Self { space, values }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// `supp f = { i : f_i ≠ 0 }`.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn same_space(&self, other: &Self) -> bool {
        std::sync::Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space
    }

    fn check_space(&self, other: &Self) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            })
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            space: self.space.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise signed power `|f|^a · sgn f` with `0^a = 0`.
    pub fn signed_power(&self, a: f64) -> Self {
        self.map(|v| if v == 0.0 { 0.0 } else { v.abs().powf(a) * sgn(v) })
    }

    /// `‖f‖_{L1(μ)} = Σ μ_i |f_i|`.
    pub fn l1_norm(&self) -> f64 {
        self.space
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(&w, &v)| w * v.abs())
            .sum()
    }

    /// `‖f‖_∞ = max |f_i|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        self.check_space(other)?;
        Ok(self
            .space
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(&w, (&a, &b))| w * (a - b).abs())
            .sum())
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.check_space(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// `∫ f g dμ`.
    pub fn pair(&self, other: &Self) -> Result<f64> {
        self.check_space(other)?;
        Ok(self
            .space
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(&w, (&a, &b))| w * a * b)
            .sum())
    }
}

impl Serialize for LatticeFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.values.len()))?;
        for v in &self.values {
            seq.serialize_element(v)?;
        }
        seq.end()
    }
}
