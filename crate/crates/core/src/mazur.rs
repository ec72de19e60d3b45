//! The signed power map `G_p(f) = |f|^p sgn f` carrying `S(X^(p))` onto
//! `S(X)`, its inverse, and the explicit two-sided distortion bounds
//! `H(δ) ≤ ‖G_p f − G_p g‖ ≤ F(δ)` in terms of `δ = ‖f−g‖_{X^(p)}`.

use serde::Serialize;

use crate::convexity::convexify;
use crate::error::{Error, Result};
use crate::function::LatticeFunction;
use crate::norm::LatticeNorm;
use crate::sampling;

/// Verification tolerance for the sandwich: a pair only counts as a
/// violation when it leaves `[H(δ) − TOL, F(δ) + TOL]`.
pub const SANDWICH_TOL: f64 = 1e-9;

/// `G_p(f) = |f|^p sgn f`, mapping `S(X^(p))` onto `S(X)`. Zero atoms stay
/// zero; signs are preserved.
pub fn mazur_map(f: &LatticeFunction, p: f64) -> LatticeFunction {
    assert!(p > 1.0, "convexification exponent must exceed 1");
    f.signed_power(p)
}

/// The inverse `|x|^{1/p} sgn x`, mapping `S(X)` back onto `S(X^(p))`.
pub fn mazur_inverse(x: &LatticeFunction, p: f64) -> LatticeFunction {
    assert!(p > 1.0, "convexification exponent must exceed 1");
    x.signed_power(1.0 / p)
}

/// Lower distortion bound `H(δ) = δ^p / 2^{p−1}` (valid for any `δ ≥ 0`).
pub fn mazur_lower_bound(delta: f64, p: f64) -> f64 {
    assert!(delta >= 0.0 && p >= 1.0);
    delta.powf(p) / 2.0f64.powf(p - 1.0)
}

/// Upper distortion bound
/// `F(δ) = 2(1 − (1 − δ^{1/p})^p) + δ^{p−1} + δ^p`, valid for `0 ≤ δ < 1`.
pub fn mazur_upper_bound(delta: f64, p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Domain(format!(
            "upper bound requires 0 <= delta < 1, got {delta}"
        )));
    }
    if p < 1.0 {
        return Err(Error::Domain(format!("p must be >= 1, got {p}")));
    }
    Ok(2.0 * (1.0 - (1.0 - delta.powf(1.0 / p)).powf(p)) + delta.powf(p - 1.0) + delta.powf(p))
}

#[derive(Debug, Clone, Serialize)]
pub struct MazurBoundReport {
    pub p: f64,
    /// Pairs actually verified (degenerate draws with δ ≥ 1 are resampled and
    /// eventually skipped).
    pub samples: usize,
    pub violations_lower: usize,
    pub violations_upper: usize,
    /// Smallest slack `min(dist − H(δ), F(δ) − dist)` over all pairs;
    /// nonnegative (up to [`SANDWICH_TOL`]) when the sandwich holds.
    pub worst_margin: f64,
    /// The pair attaining `worst_margin`.
    pub witness: Option<(LatticeFunction, LatticeFunction)>,
    pub seed: u64,
    /// Per-pair rows `(delta, distance, lower, upper)` in sample order.
    pub rows: Vec<(f64, f64, f64, f64)>,
}

impl MazurBoundReport {
    /// Recompute the margin of the recorded witness pair.
    pub fn witness_margin(&self, base_norm: &LatticeNorm) -> Result<Option<f64>> {
        let Some((f, g)) = &self.witness else {
            return Ok(None);
        };
        let conv = convexify(base_norm, self.p)?;
        let delta = conv.eval(&f.sub(g)?)?;
        let dist = base_norm.eval(&mazur_map(f, self.p).sub(&mazur_map(g, self.p))?)?;
        let lower = mazur_lower_bound(delta, self.p);
        let upper = mazur_upper_bound(delta, self.p)?;
        Ok(Some((dist - lower).min(upper - dist)))
    }
}

/// Sample pairs `f, g ∈ S(X^(p))` with `δ = ‖f−g‖_{X^(p)} < 1` and check the
/// sandwich pair by pair. Distances are drawn log-uniformly in
/// `[1e−4, 0.9]` so all δ scales are exercised.
pub fn verify_mazur_sandwich(
    base_norm: &LatticeNorm,
    p: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<MazurBoundReport> {
    if p <= 1.0 {
        return Err(Error::Precondition(format!("p must exceed 1, got {p}")));
    }
    let conv = convexify(base_norm, p)?;

    struct PairOutcome {
        index: u64,
        row: Option<(f64, f64, f64, f64, LatticeFunction, LatticeFunction)>,
    }

    let sample = |k: u64| -> PairOutcome {
        let mut rng = sampling::rng_for(seed, k);
        for _retry in 0..50 {
            let f = sampling::sphere_point(&conv, &mut rng);
            let g = sampling::sphere_partner(&conv, &f, &mut rng, 1e-4, 0.9);
            let delta = conv
                .eval(&f.sub(&g).expect("same space"))
                .expect("same space");
            if delta >= 1.0 {
                continue;
            }
            let dist = base_norm
                .eval(&mazur_map(&f, p).sub(&mazur_map(&g, p)).expect("same space"))
                .expect("same space");
            let lower = mazur_lower_bound(delta, p);
            let upper = mazur_upper_bound(delta, p).expect("delta < 1");
            return PairOutcome {
                index: k,
                row: Some((delta, dist, lower, upper, f, g)),
            };
        }
        PairOutcome { index: k, row: None }
    };

    struct Acc {
        samples: usize,
        violations_lower: usize,
        violations_upper: usize,
        worst: f64,
        worst_index: u64,
        witness: Option<(LatticeFunction, LatticeFunction)>,
        rows: Vec<(u64, f64, f64, f64, f64)>,
    }
    let acc = sampling::map_fold_indexed(
        n_pairs as u64,
        Acc {
            samples: 0,
            violations_lower: 0,
            violations_upper: 0,
            worst: f64::INFINITY,
            worst_index: u64::MAX,
            witness: None,
            rows: Vec::new(),
        },
        sample,
        |mut acc, outcome| {
            if let Some((delta, dist, lower, upper, f, g)) = outcome.row {
                acc.samples += 1;
                if dist < lower - SANDWICH_TOL {
                    acc.violations_lower += 1;
                }
                if dist > upper + SANDWICH_TOL {
                    acc.violations_upper += 1;
                }
                let margin = (dist - lower).min(upper - dist);
                if margin < acc.worst || (margin == acc.worst && outcome.index < acc.worst_index) {
                    acc.worst = margin;
                    acc.worst_index = outcome.index;
                    acc.witness = Some((f, g));
                }
                acc.rows.push((outcome.index, delta, dist, lower, upper));
            }
            acc
        },
    );

    let mut rows = acc.rows;
    rows.sort_by_key(|r| r.0);
    Ok(MazurBoundReport {
        p,
        samples: acc.samples,
        violations_lower: acc.violations_lower,
        violations_upper: acc.violations_upper,
        worst_margin: if acc.samples == 0 { f64::NAN } else { acc.worst },
        witness: acc.witness,
        seed,
        rows: rows.into_iter().map(|r| (r.1, r.2, r.3, r.4)).collect(),
    })
}
