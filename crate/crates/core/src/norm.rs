//! Evaluable monotone absolute norms on a finite probability space.
//!
//! Every variant is absolute (`‖f‖ = ‖|f|‖`), monotone (`|f| ≤ |g|` implies
//! `‖f‖ ≤ ‖g‖`) and positively homogeneous, so each one turns the space of
//! functions into a finite-dimensional Banach lattice:
//!
//! * `WeightedLp(p)` - `(Σ μ_i |f_i|^p)^{1/p}`, `p ≥ 1`, using the space
//!   weights;
//! * `LInfinity` - `max_i |f_i|`;
//! * `Lorentz(w, p)` - `(Σ_k w_k (|f|*_k)^p)^{1/p}` with `|f|*` the decreasing
//!   rearrangement of `|f|` (ties broken by atom index) and `w` positive
//!   nonincreasing;
//! * `Convexified(base, p)` - the p-convexification `‖|f|^p‖_base^{1/p}`;
//! * `Renormed(base, q)` - the supremum of `(Σ_j ‖f·χ_{A_j}‖_base^q)^{1/q}`
//!   over set partitions `{A_j}` of the support of `f`, used to push the
//!   q-concavity constant to 1 on disjointly supported vectors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::{sgn, LatticeFunction};
use crate::space::Space;

/// Atom-count cap for the partition-supremum renorming (Bell-number growth).
pub const RENORM_MAX_ATOMS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NormVariant {
    WeightedLp {
        p: f64,
    },
    LInfinity,
    Lorentz {
        weights: Vec<f64>,
        p: f64,
    },
    Convexified {
        base: Box<NormVariant>,
        p: f64,
    },
    Renormed {
        base: Box<NormVariant>,
        q: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeNorm {
    space: Space,
    variant: NormVariant,
}

impl NormVariant {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            NormVariant::WeightedLp { p } => {
                if !p.is_finite() || *p < 1.0 {
                    return Err(Error::InvalidNorm(format!("weighted-lp needs p >= 1, got {p}")));
                }
            }
            NormVariant::LInfinity => {}
            NormVariant::Lorentz { weights, p } => {
                if weights.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: weights.len(),
                    });
                }
                if !p.is_finite() || *p < 1.0 {
                    return Err(Error::InvalidNorm(format!("lorentz needs p >= 1, got {p}")));
                }
                for (k, &w) in weights.iter().enumerate() {
                    if !w.is_finite() || w <= 0.0 {
                        return Err(Error::InvalidNorm(format!(
                            "lorentz weight {k} must be positive, got {w}"
                        )));
                    }
                    if k > 0 && w > weights[k - 1] {
                        return Err(Error::InvalidNorm(
                            "lorentz weights must be nonincreasing".into(),
                        ));
                    }
                }
            }
            NormVariant::Convexified { base, p } => {
                if !p.is_finite() || *p <= 1.0 {
                    return Err(Error::Domain(format!(
                        "convexification exponent must exceed 1, got {p}"
                    )));
                }
                base.validate(n)?;
            }
            NormVariant::Renormed { base, q } => {
                if !q.is_finite() || *q < 1.0 {
                    return Err(Error::InvalidNorm(format!("renorming needs q >= 1, got {q}")));
                }
                if n > RENORM_MAX_ATOMS {
                    return Err(Error::TooLarge {
                        n,
                        max: RENORM_MAX_ATOMS,
                    });
                }
                base.validate(n)?;
            }
        }
        Ok(())
    }

    fn eval(&self, space: &Space, values: &[f64]) -> f64 {
        match self {
            NormVariant::WeightedLp { p } => {
                let p = *p;
                if p == 1.0 {
                    space
                        .weights()
                        .iter()
                        .zip(values)
                        .map(|(&w, &v)| w * v.abs())
                        .sum()
                } else if p == 2.0 {
                    space
                        .weights()
                        .iter()
                        .zip(values)
                        .map(|(&w, &v)| w * v * v)
                        .sum::<f64>()
                        .sqrt()
                } else {
                    space
                        .weights()
                        .iter()
                        .zip(values)
                        .map(|(&w, &v)| w * v.abs().powf(p))
                        .sum::<f64>()
                        .powf(1.0 / p)
                }
            }
            NormVariant::LInfinity => values.iter().fold(0.0f64, |m, &v| m.max(v.abs())),
            NormVariant::Lorentz { weights, p } => {
                let order = decreasing_order(values);
                let p = *p;
                if p == 1.0 {
                    order
                        .iter()
                        .zip(weights)
                        .map(|(&i, &w)| w * values[i].abs())
                        .sum()
                } else {
                    order
                        .iter()
                        .zip(weights)
                        .map(|(&i, &w)| w * values[i].abs().powf(p))
                        .sum::<f64>()
                        .powf(1.0 / p)
                }
            }
            NormVariant::Convexified { base, p } => {
                let powered: Vec<f64> = values.iter().map(|&v| v.abs().powf(*p)).collect();
                base.eval(space, &powered).powf(1.0 / p)
            }
            NormVariant::Renormed { base, q } => {
                let supp: Vec<usize> = (0..values.len()).filter(|&i| values[i] != 0.0).collect();
                if supp.is_empty() {
                    return 0.0;
                }
                let q = *q;
                let mut buf = vec![0.0; values.len()];
                let mut best = 0.0f64;
                for_each_partition(supp.len(), |assignment| {
                    let blocks = assignment.iter().copied().max().unwrap() + 1;
                    let mut acc = 0.0f64;
                    for b in 0..blocks {
                        for v in buf.iter_mut() {
                            *v = 0.0;
                        }
                        for (slot, &atom) in assignment.iter().zip(&supp) {
                            if *slot == b {
                                buf[atom] = values[atom];
                            }
                        }
                        let piece = base.eval(space, &buf);
                        acc += if q == 1.0 { piece } else { piece.powf(q) };
                    }
                    let total = if q == 1.0 { acc } else { acc.powf(1.0 / q) };
                    best = best.max(total);
                });
                best
            }
        }
    }

    /// Euclidean gradient `∂‖f‖/∂f_i`, valid wherever the norm is smooth
    /// (almost every point); at kinks a fixed subgradient is returned.
    /// Requires `values ≠ 0`.
    fn gradient(&self, space: &Space, values: &[f64]) -> Vec<f64> {
        match self {
            NormVariant::WeightedLp { p } => {
                let p = *p;
                let norm = self.eval(space, values);
                if p == 1.0 {
                    space
                        .weights()
                        .iter()
                        .zip(values)
                        .map(|(&w, &v)| w * sgn(v))
                        .collect()
                } else {
                    let scale = norm.powf(1.0 - p);
                    space
                        .weights()
                        .iter()
                        .zip(values)
                        .map(|(&w, &v)| {
                            if v == 0.0 {
                                0.0
                            } else {
                                scale * w * v.abs().powf(p - 1.0) * sgn(v)
                            }
                        })
                        .collect()
                }
            }
            NormVariant::LInfinity => {
                let mut arg = 0usize;
                let mut best = -1.0f64;
                for (i, &v) in values.iter().enumerate() {
                    if v.abs() > best {
                        best = v.abs();
                        arg = i;
                    }
                }
                let mut g = vec![0.0; values.len()];
                g[arg] = sgn(values[arg]);
                g
            }
            NormVariant::Lorentz { weights, p } => {
                let order = decreasing_order(values);
                let p = *p;
                let mut g = vec![0.0; values.len()];
                if p == 1.0 {
                    for (rank, &i) in order.iter().enumerate() {
                        g[i] = weights[rank] * sgn(values[i]);
                    }
                } else {
                    let norm = self.eval(space, values);
                    let scale = norm.powf(1.0 - p);
                    for (rank, &i) in order.iter().enumerate() {
                        if values[i] != 0.0 {
                            g[i] =
                                scale * weights[rank] * values[i].abs().powf(p - 1.0) * sgn(values[i]);
                        }
                    }
                }
                g
            }
            NormVariant::Convexified { base, p } => {
                let p = *p;
                let powered: Vec<f64> = values.iter().map(|&v| v.abs().powf(p)).collect();
                let inner = base.eval(space, &powered);
                let gb = base.gradient(space, &powered);
                let scale = inner.powf(1.0 / p - 1.0);
                values
                    .iter()
                    .zip(gb)
                    .map(|(&v, gi)| {
                        if v == 0.0 {
                            0.0
                        } else {
                            scale * gi * v.abs().powf(p - 1.0) * sgn(v)
                        }
                    })
                    .collect()
            }
            NormVariant::Renormed { base, q } => {
                // Gradient of the best-partition term (a.e. unique argmax).
                let supp: Vec<usize> = (0..values.len()).filter(|&i| values[i] != 0.0).collect();
                let q = *q;
                let mut g = vec![0.0; values.len()];
                if supp.is_empty() {
                    return g;
                }
                let mut best = -1.0f64;
                let mut best_assignment: Vec<usize> = Vec::new();
                let mut buf = vec![0.0; values.len()];
                for_each_partition(supp.len(), |assignment| {
                    let blocks = assignment.iter().copied().max().unwrap() + 1;
                    let mut acc = 0.0f64;
                    for b in 0..blocks {
                        for v in buf.iter_mut() {
                            *v = 0.0;
                        }
                        for (slot, &atom) in assignment.iter().zip(&supp) {
                            if *slot == b {
                                buf[atom] = values[atom];
                            }
                        }
                        let piece = base.eval(space, &buf);
                        acc += if q == 1.0 { piece } else { piece.powf(q) };
                    }
                    let total = if q == 1.0 { acc } else { acc.powf(1.0 / q) };
                    if total > best {
                        best = total;
                        best_assignment = assignment.to_vec();
                    }
                });
                let blocks = best_assignment.iter().copied().max().unwrap() + 1;
                for b in 0..blocks {
                    for v in buf.iter_mut() {
                        *v = 0.0;
                    }
                    for (slot, &atom) in best_assignment.iter().zip(&supp) {
                        if *slot == b {
                            buf[atom] = values[atom];
                        }
                    }
                    let piece = base.eval(space, &buf);
                    let gb = base.gradient(space, &buf);
                    let factor = if q == 1.0 {
                        1.0
                    } else {
                        best.powf(1.0 - q) * piece.powf(q - 1.0)
                    };
                    for (slot, &atom) in best_assignment.iter().zip(&supp) {
                        if *slot == b {
                            g[atom] = factor * gb[atom];
                        }
                    }
                }
                g
            }
        }
    }

    fn as_weighted_lp(&self) -> Option<f64> {
        match self {
            NormVariant::WeightedLp { p } => Some(*p),
            NormVariant::Convexified { base, p } => base.as_weighted_lp().map(|b| b * p),
            _ => None,
        }
    }

    fn as_lorentz(&self) -> Option<(&[f64], f64)> {
        match self {
            NormVariant::Lorentz { weights, p } => Some((weights, *p)),
            NormVariant::Convexified { base, p } => {
                base.as_lorentz().map(|(w, b)| (w, b * p))
            }
            _ => None,
        }
    }
}

/// Atom indices sorted so `|values|` is nonincreasing; ties broken by index.
fn decreasing_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| {
        values[j]
            .abs()
            .total_cmp(&values[i].abs())
            .then(i.cmp(&j))
    });
    idx
}

/// Enumerate all set partitions of `{0, …, m−1}` as restricted growth
/// strings: `visit` receives the block index of each element.
pub(crate) fn for_each_partition(m: usize, mut visit: impl FnMut(&[usize])) {
    assert!(m >= 1);
    let mut a = vec![0usize; m];
    let mut bmax = vec![0usize; m];
    loop {
        visit(&a);
        let mut advanced = false;
        let mut j = m;
        while j > 1 {
            j -= 1;
            if a[j] <= bmax[j - 1] {
                a[j] += 1;
                bmax[j] = bmax[j - 1].max(a[j]);
                for k in j + 1..m {
                    a[k] = 0;
                    bmax[k] = bmax[j];
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            return;
        }
    }
}

impl LatticeNorm {
    pub fn new(space: Space, variant: NormVariant) -> Result<Self> {
        variant.validate(space.len())?;
        Ok(Self { space, variant })
    }

    pub fn weighted_lp(space: Space, p: f64) -> Result<Self> {
        Self::new(space, NormVariant::WeightedLp { p })
    }

    pub fn l_infinity(space: Space) -> Result<Self> {
        Self::new(space, NormVariant::LInfinity)
    }

    pub fn lorentz(space: Space, weights: Vec<f64>, p: f64) -> Result<Self> {
        Self::new(space, NormVariant::Lorentz { weights, p })
    }

    /// Lorentz norm with its weights rescaled into the representation regime
    /// `‖f‖_1 ≤ ‖f‖ ≤ 2 ‖f‖_∞`.
    ///
    /// The lower bound holds for every `f` once the partial sums of the
    /// scaled weights dominate the partial sums of the atom masses sorted
    /// decreasingly (Abel summation against the decreasing rearrangement),
    /// and the upper bound once `(Σ_k w_k)^{1/p} ≤ 2`. The minimal scale
    /// satisfying the first condition is used; if it breaks the second the
    /// weights are incompatible with the regime and an error is returned.
    pub fn lorentz_sandwiched(space: Space, weights: Vec<f64>, p: f64) -> Result<Self> {
        // Validate shape first with a throwaway variant.
        NormVariant::Lorentz {
            weights: weights.clone(),
            p,
        }
        .validate(space.len())?;
        let mut mu: Vec<f64> = space.weights().to_vec();
        mu.sort_by(|a, b| b.total_cmp(a));
        let mut t_low = 0.0f64;
        let mut pw = 0.0;
        let mut pm = 0.0;
        for (w, m) in weights.iter().zip(&mu) {
            pw += w;
            pm += m;
            t_low = t_low.max(pm.powf(p) / pw);
        }
        let total: f64 = weights.iter().sum();
        let t_high = 2.0f64.powf(p) / total;
        if t_low > t_high {
            return Err(Error::InvalidNorm(format!(
                "lorentz weights cannot be scaled into the sandwich regime \
                 (need scale >= {t_low} for the L1 bound but <= {t_high} for the sup bound)"
            )));
        }
        let scaled: Vec<f64> = weights.iter().map(|w| w * t_low).collect();
        Self::lorentz(space, scaled, p)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn variant(&self) -> &NormVariant {
        &self.variant
    }

    pub fn is_l_infinity(&self) -> bool {
        matches!(self.variant, NormVariant::LInfinity)
    }

    /// If this norm is algebraically a weighted L_p (possibly through nested
    /// convexifications), the effective exponent.
    pub fn as_weighted_lp(&self) -> Option<f64> {
        self.variant.as_weighted_lp()
    }

    /// If this norm is algebraically a Lorentz norm `(Σ w_k (|f|*_k)^P)^{1/P}`
    /// (possibly through nested convexifications), its weights and effective
    /// exponent.
    pub fn as_lorentz(&self) -> Option<(&[f64], f64)> {
        self.variant.as_lorentz()
    }

    fn check_space(&self, f: &LatticeFunction) -> Result<()> {
        if std::sync::Arc::ptr_eq(&self.space, f.space()) || *self.space == **f.space() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.space.len(),
                actual: f.len(),
            })
        }
    }

    /// `‖f‖`; zero iff `f = 0`.
    pub fn eval(&self, f: &LatticeFunction) -> Result<f64> {
        self.check_space(f)?;
        Ok(self.variant.eval(&self.space, f.values()))
    }

    /// Norm of a raw value slice on this norm's space (no space check).
    pub fn eval_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.space.len());
        self.variant.eval(&self.space, values)
    }

    /// Euclidean gradient `∂‖·‖/∂f_i` at `f ≠ 0` (a.e. defined; at kinks one
    /// subgradient is selected deterministically).
    pub fn gradient(&self, f: &LatticeFunction) -> Result<Vec<f64>> {
        self.check_space(f)?;
        if f.is_zero() {
            return Err(Error::Domain("norm gradient at 0".into()));
        }
        Ok(self.variant.gradient(&self.space, f.values()))
    }

    pub fn gradient_values(&self, values: &[f64]) -> Vec<f64> {
        self.variant.gradient(&self.space, values)
    }

    /// Radial retraction `f ↦ f/‖f‖` onto the unit sphere.
    pub fn normalize(&self, f: &LatticeFunction) -> Result<LatticeFunction> {
        let n = self.eval(f)?;
        if n == 0.0 {
            return Err(Error::Domain("cannot normalize the zero function".into()));
        }
        Ok(f.scaled(1.0 / n))
    }

    /// Max over sampled checks of `‖f‖_1 − ‖f‖` and `‖f‖ − 2‖f‖_∞`
    /// (positive = violation of the representation sandwich).
    pub fn sandwich_margins(&self, samples: &[LatticeFunction]) -> Result<(f64, f64)> {
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for f in samples {
            let nx = self.eval(f)?;
            lower = lower.max(f.l1_norm() - nx);
            upper = upper.max(nx - 2.0 * f.sup_norm());
        }
        Ok((lower, upper))
    }
}
