//! Supporting functionals and the inverse of the entropy map.
//!
//! At a smooth point `x` of the unit sphere the supporting functional `x*`
//! is the gradient of the norm; represented here as a density `g` against μ
//! so that `x*(f) = ∫ f g dμ`. The inverse entropy map is the pointwise
//! product `G(x) = |x*|·x`, which recovers the density `h` with
//! `F_X(h) = x`. The membership certificate `|‖h/f‖_{X*} − 1|` vanishes
//! exactly when `f` maximizes `E(h,·)` over the positive unit ball.

use serde::Serialize;

use crate::dual::{dual_norm_eval, dual_norm_eval_opts, DualOptions};
use crate::error::{Error, Result};
use crate::function::LatticeFunction;
use crate::norm::LatticeNorm;

#[derive(Debug, Clone, Serialize)]
pub struct SupportingFunctional {
    /// Density of the functional against μ.
    pub g: LatticeFunction,
    /// `x*(x) = Σ μ_i g_i x_i`; equals `‖x‖ = 1` by Euler's identity.
    pub pairing: f64,
    /// `‖g‖_{X*}`; 1 at smooth points of the sphere.
    pub dual_norm: f64,
}

/// Finite-difference step for the generic gradient path.
const FD_STEP: f64 = 1e-5;

/// The supporting functional of `x ∈ S(X)`.
///
/// Weighted L_p norms use the closed form `g = |x|^{p−1} sgn x`; everything
/// else goes through central finite differences of the norm with a one-sided
/// smoothness check (disagreeing quotients beyond `10·tol` report the
/// offending atom) and one level of Richardson refinement when the dual-norm
/// residual exceeds `tol`.
pub fn supporting_functional(
    norm: &LatticeNorm,
    x: &LatticeFunction,
    tol: f64,
) -> Result<SupportingFunctional> {
    let nx = norm.eval(x)?;
    if (nx - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "x must lie on the unit sphere: ‖x‖ = {nx}"
        )));
    }
    if let Some(p) = norm.as_weighted_lp() {
        let g = x.signed_power(p - 1.0);
        let pairing = g.pair(x)?;
        let dual_norm = dual_norm_eval(norm, &g, (tol * 1e-2).clamp(1e-13, 1e-9))?;
        return Ok(SupportingFunctional {
            g,
            pairing,
            dual_norm,
        });
    }
    supporting_functional_fd(norm, x, tol)
}

/// Generic finite-difference path (also used as the independent oracle for
/// the closed forms in tests).
pub(crate) fn supporting_functional_fd(
    norm: &LatticeNorm,
    x: &LatticeFunction,
    tol: f64,
) -> Result<SupportingFunctional> {
    let n = x.len();
    let mu = norm.space().weights();
    let base = x.values().to_vec();
    let nx = norm.eval_values(&base);

    let quotients = |step: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut right = vec![0.0; n];
        let mut left = vec![0.0; n];
        let mut buf = base.clone();
        for i in 0..n {
            let orig = buf[i];
            buf[i] = orig + step;
            let plus = norm.eval_values(&buf);
            buf[i] = orig - step;
            let minus = norm.eval_values(&buf);
            buf[i] = orig;
            right[i] = (plus - nx) / step;
            left[i] = (nx - minus) / step;
        }
        Ok((right, left))
    };

    // One-sided quotients at smooth points still differ by O(step·curvature),
    // so the detection tolerance is floored at that truncation scale; genuine
    // kinks produce O(1) derivative jumps far above it.
    let check_tol = 10.0 * tol.max(25.0 * FD_STEP);
    let (right, left) = quotients(FD_STEP)?;
    for i in 0..n {
        if (right[i] - left[i]).abs() > check_tol {
            return Err(Error::NonSmooth {
                atom: i,
                left: left[i],
                right: right[i],
            });
        }
    }
    let mut grad: Vec<f64> = right
        .iter()
        .zip(&left)
        .map(|(&r, &l)| 0.5 * (r + l))
        .collect();

    let build = |grad: &[f64]| -> Result<SupportingFunctional> {
        let g_values: Vec<f64> = grad.iter().zip(mu).map(|(&d, &m)| d / m).collect();
        let g = LatticeFunction::new(norm.space().clone(), g_values)?;
        let pairing = g.pair(x)?;
        let dual_norm = dual_norm_eval_opts(
            norm,
            &g,
            &DualOptions {
                tol: (tol * 1e-2).clamp(1e-13, 1e-9),
                warm_start: Some(x.values().to_vec()),
                ..DualOptions::default()
            },
        )?;
        Ok(SupportingFunctional {
            g,
            pairing,
            dual_norm,
        })
    };

    let first = build(&grad)?;
    if (first.dual_norm - 1.0).abs() <= tol && (first.pairing - 1.0).abs() <= tol {
        return Ok(first);
    }
    // Richardson refinement: one halving of the step.
    let (right2, left2) = quotients(FD_STEP * 0.5)?;
    for i in 0..n {
        let central2 = 0.5 * (right2[i] + left2[i]);
        grad[i] = (4.0 * central2 - grad[i]) / 3.0;
    }
    build(&grad)
}

/// `G(x) = |x*| · x`: the density recovered from a sphere point, landing on
/// the L1(μ) sphere with the sign pattern of `x`.
pub fn inverse_entropy_map(
    norm: &LatticeNorm,
    x: &LatticeFunction,
    tol: f64,
) -> Result<LatticeFunction> {
    let sf = supporting_functional(norm, x, tol)?;
    sf.g.zip_map(x, |gi, xi| gi.abs() * xi)
}

/// `|‖h/f‖_{X*} − 1|` for `h ∈ S(L1(μ))⁺` and `f > 0` on `supp h`; the
/// quotient is 0 off the support. A value ≤ tol certifies `f = F_X(h)` to
/// solver precision.
pub fn claim1_certificate(
    norm: &LatticeNorm,
    h: &LatticeFunction,
    f: &LatticeFunction,
    tol: f64,
) -> Result<f64> {
    if h.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("h must be nonnegative".into()));
    }
    if (h.l1_norm() - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "h must lie on the L1 sphere: ‖h‖_1 = {}",
            h.l1_norm()
        )));
    }
    let mut quotient = vec![0.0; h.len()];
    for (i, (&hi, &fi)) in h.values().iter().zip(f.values()).enumerate() {
        if hi != 0.0 {
            if fi <= 0.0 {
                return Err(Error::Domain(format!(
                    "f must be strictly positive on supp h (atom {i})"
                )));
            }
            quotient[i] = hi / fi;
        }
    }
    let q = LatticeFunction::new(norm.space().clone(), quotient)?;
    let dual = dual_norm_eval_opts(
        norm,
        &q,
        &DualOptions {
            tol: (tol * 1e-2).clamp(1e-13, 1e-9),
            warm_start: Some(f.values().to_vec()),
            ..DualOptions::default()
        },
    )?;
    Ok((dual - 1.0).abs())
}
