//! The entropy functional `E(h,f) = ∫ h log |f| dμ` and its constrained
//! maximization over the positive unit ball of a lattice norm.
//!
//! For `h ≥ 0` on the L1(μ) sphere the maximizer `f ∈ S(X)⁺` is unique when
//! the norm is strictly convex, shares the support of `h` exactly, and the
//! optimal value `λ` satisfies `−log 2 ≤ λ ≤ ‖h‖_∞`. The solver works in
//! `u = log f` on the support, where the objective after radial
//! renormalization is the concave function `Σ μ_i h_i u_i − log ‖exp u‖`:
//! preconditioned gradient steps with backtracking accept only entropy
//! increases. Optimality is certified by the dual residual
//! `|‖h/f‖_{X*} − 1|`, which vanishes exactly at the maximizer.

use serde::Serialize;

use crate::dual::{dual_norm_eval_opts, DualOptions};
use crate::error::{Error, Result};
use crate::function::LatticeFunction;
use crate::norm::LatticeNorm;

/// Extended-real entropy value; `0·log 0 ≡ 0`, and `E = −∞` (a distinguished
/// sentinel, never a floating NaN) when `h` charges an atom where `f = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EntropyValue {
    NegInfinity,
    Finite(f64),
}

impl EntropyValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, EntropyValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            EntropyValue::Finite(v) => Some(*v),
            EntropyValue::NegInfinity => None,
        }
    }

    /// Total order: `−∞` below every finite value.
    pub fn cmp_total(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        use EntropyValue::*;
        match (self, other) {
            (NegInfinity, NegInfinity) => Equal,
            (NegInfinity, Finite(_)) => Less,
            (Finite(_), NegInfinity) => Greater,
            (Finite(a), Finite(b)) => a.total_cmp(b),
        }
    }
}

/// `E(h,f) = Σ μ_i |h_i| log |f_i|` over atoms with `h_i ≠ 0`
/// (the general signed case reduces to `E(|h|,|f|)`).
pub fn entropy_eval(h: &LatticeFunction, f: &LatticeFunction) -> Result<EntropyValue> {
    if !h.same_space(f) {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            actual: f.len(),
        });
    }
    let mu = h.space().weights();
    let mut acc = 0.0f64;
    for (&m, (&hv, &fv)) in mu.iter().zip(h.values().iter().zip(f.values())) {
        let hi = hv.abs();
        if hi == 0.0 {
            continue;
        }
        let fi = fv.abs();
        if fi == 0.0 {
            return Ok(EntropyValue::NegInfinity);
        }
        acc += m * hi * fi.ln();
    }
    Ok(EntropyValue::Finite(acc))
}

#[derive(Debug, Clone)]
pub struct EntropySolverOptions {
    /// Relative entropy-improvement threshold of the stopping rule.
    pub tol: f64,
    pub max_iter: usize,
    /// Extra stopping gate: `Σ_i |μ_i h_i − f_i ∂_i‖f‖| ≤ g`. This quantity
    /// equals the L1 distance between `h` and the recovered density
    /// `|x*|·x`, so it bounds the round-trip error directly.
    pub grad_l1_tol: Option<f64>,
    /// Extra stopping gate on per-atom stationarity:
    /// `max_i f_i |1 − s_i/w_i| ≤ v`, controlling sup-norm accuracy of the
    /// maximizer on atoms where `h` is small.
    pub stationarity_inf_tol: Option<f64>,
    /// Use closed forms for weighted L_p (maximizer `h^{1/p}`) and for the
    /// sup norm (maximizer `χ_supp h`).
    pub use_fast_path: bool,
    /// Starting point for the iterative path (default `χ_supp h`); its
    /// absolute value restricted to `supp h` must be strictly positive.
    pub init: Option<LatticeFunction>,
    /// Tolerance handed to the dual evaluation inside the certificate.
    pub dual_tol: f64,
}

impl Default for EntropySolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            grad_l1_tol: None,
            stationarity_inf_tol: None,
            use_fast_path: true,
            init: None,
            dual_tol: 1e-10,
        }
    }
}

impl EntropySolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            dual_tol: (tol * 1e-2).clamp(1e-14, 1e-9),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropySolution {
    /// The maximizer `f ∈ S(X)⁺`; zero off the support of `h` exactly.
    pub maximizer: LatticeFunction,
    /// The attained entropy `λ = E(h, maximizer)`.
    pub lambda: f64,
    /// `|‖h/f‖_{X*} − 1|` at the returned iterate.
    pub certificate_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the norm is the sup norm and `supp h ⊊ Ω`: the uniform
    /// convexity hypothesis fails there and the maximizer is not stable
    /// under support collapse.
    pub degenerate: bool,
}

/// The dual residual `|‖h/f‖_{X*} − 1|` of a candidate maximizer, with the
/// quotient taken on `supp h` and zero elsewhere.
fn certificate_residual(
    norm: &LatticeNorm,
    h: &LatticeFunction,
    f_values: &[f64],
    dual_opts: &DualOptions,
) -> Result<f64> {
    let mut quotient = vec![0.0; h.len()];
    for i in 0..h.len() {
        let hi = h.get(i);
        if hi != 0.0 {
            let fi = f_values[i];
            if fi <= 0.0 {
                return Err(Error::Domain(format!(
                    "candidate maximizer vanishes on supp h at atom {i}"
                )));
            }
            quotient[i] = hi / fi;
        }
    }
    let q = LatticeFunction::new(norm.space().clone(), quotient)?;
    // The candidate itself pairs with the quotient to ∫ h dμ = 1, so it is
    // the natural warm start: the ascent then certifies from ‖h/f‖_* ≥ 1.
    let opts = DualOptions {
        warm_start: Some(f_values.to_vec()),
        ..dual_opts.clone()
    };
    let dual = dual_norm_eval_opts(norm, &q, &opts)?;
    Ok((dual - 1.0).abs())
}

fn validate_positive_unit_density(h: &LatticeFunction) -> Result<()> {
    if h.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("h must be nonnegative".into()));
    }
    if h.is_zero() {
        return Err(Error::Precondition("h must be nonzero".into()));
    }
    if (h.l1_norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "h must lie on the L1 sphere: ‖h‖_1 = {}",
            h.l1_norm()
        )));
    }
    Ok(())
}

/// Maximize `E(h, ·)` over `Ba(X)⁺` for `h ≥ 0` on the L1(μ) sphere.
pub fn entropy_max(norm: &LatticeNorm, h: &LatticeFunction, tol: f64) -> Result<EntropySolution> {
    entropy_max_with(norm, h, &EntropySolverOptions::with_tol(tol))
}

pub fn entropy_max_with(
    norm: &LatticeNorm,
    h: &LatticeFunction,
    opts: &EntropySolverOptions,
) -> Result<EntropySolution> {
    if norm.space().len() != h.len() || **norm.space() != **h.space() {
        return Err(Error::DimensionMismatch {
            expected: norm.space().len(),
            actual: h.len(),
        });
    }
    validate_positive_unit_density(h)?;
    let space = norm.space().clone();
    let n = space.len();
    let supp = h.support();
    let dual_opts = DualOptions {
        tol: opts.dual_tol,
        ..DualOptions::default()
    };

    // Sup norm: the entropy factorizes over atoms, so the maximizer is the
    // support indicator regardless of the weights. Flag the regime as
    // degenerate when the support is proper: nearby supports produce
    // maximizers at sup-distance 1.
    if norm.is_l_infinity() {
        let f = LatticeFunction::indicator(space.clone(), &supp);
        let lambda = 0.0;
        let cert = certificate_residual(norm, h, f.values(), &dual_opts)?;
        return Ok(EntropySolution {
            maximizer: f,
            lambda,
            certificate_residual: cert,
            iterations: 0,
            converged: true,
            degenerate: supp.len() < n,
        });
    }

    // Weighted L_p (possibly via nested convexifications): stationarity gives
    // f_i^p = h_i on the support.
    if opts.use_fast_path {
        if let Some(p) = norm.as_weighted_lp() {
            let f_raw = h.signed_power(1.0 / p);
            let f = norm.normalize(&f_raw)?;
            let lambda = match entropy_eval(h, &f)? {
                EntropyValue::Finite(v) => v,
                EntropyValue::NegInfinity => {
                    return Err(Error::Domain("unexpected -inf entropy on supp h".into()))
                }
            };
            let cert = certificate_residual(norm, h, f.values(), &dual_opts)?;
            return Ok(EntropySolution {
                maximizer: f,
                lambda,
                certificate_residual: cert,
                iterations: 0,
                converged: true,
                degenerate: false,
            });
        }
        // Lorentz-structured norms (Σ w_k (f*_k)^P)^{1/P}: the maximizer
        // aligns with the ranking of c_i = μ_i h_i, and stationarity under
        // the monotone rearrangement constraint is solved exactly by
        // pool-adjacent-violators on the ratios c/w. Pooled blocks produce
        // genuinely tied coordinates; the norm is non-smooth there but the
        // dual certificate still applies.
        if let Some((weights, p_eff)) = norm.as_lorentz() {
            let weights = weights.to_vec();
            let m = supp.len();
            let c: Vec<f64> = supp.iter().map(|&i| space.weight(i) * h.get(i)).collect();
            let mut ord: Vec<usize> = (0..m).collect();
            ord.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(supp[a].cmp(&supp[b])));
            struct Block {
                sum_c: f64,
                sum_w: f64,
                count: usize,
            }
            let mut blocks: Vec<Block> = Vec::new();
            for k in 0..m {
                let mut blk = Block {
                    sum_c: c[ord[k]],
                    sum_w: weights[k],
                    count: 1,
                };
                while let Some(prev) = blocks.last() {
                    // Ratios must be strictly decreasing across blocks.
                    if prev.sum_c * blk.sum_w < blk.sum_c * prev.sum_w {
                        let prev = blocks.pop().expect("nonempty");
                        blk = Block {
                            sum_c: prev.sum_c + blk.sum_c,
                            sum_w: prev.sum_w + blk.sum_w,
                            count: prev.count + blk.count,
                        };
                    } else {
                        break;
                    }
                }
                blocks.push(blk);
            }
            let lambda_mult: f64 = c.iter().sum();
            let mut f_full = vec![0.0f64; n];
            let mut k = 0usize;
            for blk in &blocks {
                let level = (blk.sum_c / (lambda_mult * blk.sum_w)).powf(1.0 / p_eff);
                for _ in 0..blk.count {
                    f_full[supp[ord[k]]] = level;
                    k += 1;
                }
            }
            let f = norm.normalize(&LatticeFunction::new(space.clone(), f_full)?)?;
            let lambda = match entropy_eval(h, &f)? {
                EntropyValue::Finite(v) => v,
                EntropyValue::NegInfinity => {
                    return Err(Error::Domain("unexpected -inf entropy on supp h".into()))
                }
            };
            let cert = certificate_residual(norm, h, f.values(), &dual_opts)?;
            return Ok(EntropySolution {
                maximizer: f,
                lambda,
                certificate_residual: cert,
                iterations: 0,
                converged: true,
                degenerate: false,
            });
        }
    }

    // Iterative path: preconditioned ascent in u = log f on the support.
    let w: Vec<f64> = supp.iter().map(|&i| space.weight(i) * h.get(i)).collect();
    let m = supp.len();

    let mut f_full = vec![0.0f64; n];
    match &opts.init {
        Some(start) => {
            if start.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: start.len(),
                });
            }
            for &i in &supp {
                let v = start.get(i).abs();
                if v <= 0.0 {
                    return Err(Error::Precondition(
                        "init must be strictly positive on supp h".into(),
                    ));
                }
                f_full[i] = v;
            }
        }
        None => {
            for &i in &supp {
                f_full[i] = 1.0;
            }
        }
    }
    let nf = norm.eval_values(&f_full);
    if !(nf.is_finite() && nf > 0.0) {
        return Err(Error::Domain("invalid starting norm".into()));
    }
    for v in f_full.iter_mut() {
        *v /= nf;
    }
    let mut u: Vec<f64> = supp.iter().map(|&i| f_full[i].ln()).collect();
    let mut entropy: f64 = w.iter().zip(&u).map(|(&wi, &ui)| wi * ui).sum();

    let mut t = 0.25f64;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut cert = f64::INFINITY;
    let mut stalls = 0usize;
    let mut since_cert_check = usize::MAX / 2;

    // Entropy of exp(u_try) after radial renormalization, plus the log-norm
    // needed to renormalize u_try itself.
    let eval_candidate = |u_try: &[f64], f_buf: &mut [f64]| -> Option<(f64, f64)> {
        for v in f_buf.iter_mut() {
            *v = 0.0;
        }
        for (j, &i) in supp.iter().enumerate() {
            f_buf[i] = u_try[j].exp();
        }
        let ncand = norm.eval_values(f_buf);
        if !(ncand.is_finite() && ncand > 0.0) {
            return None;
        }
        let log_n = ncand.ln();
        let e: f64 = w
            .iter()
            .zip(u_try)
            .map(|(&wi, &ui)| wi * (ui - log_n))
            .sum();
        Some((e, log_n))
    };

    let mut u_cand = vec![0.0f64; m];
    let mut f_cand = vec![0.0f64; n];

    while iterations < opts.max_iter {
        iterations += 1;
        since_cert_check = since_cert_check.saturating_add(1);

        let grad_full = norm.gradient_values(&f_full);
        let mut grad_l1 = 0.0f64;
        let mut stat_inf = 0.0f64;
        let mut d = vec![0.0f64; m];
        for (j, &i) in supp.iter().enumerate() {
            let s = f_full[i] * grad_full[i];
            grad_l1 += (w[j] - s).abs();
            let dir = (1.0 - s / w[j]).max(-32.0);
            d[j] = dir;
            stat_inf = stat_inf.max(f_full[i] * dir.abs());
        }

        let mut accepted = false;
        let mut improvement = 0.0f64;
        let accept_floor = 1e-18 * entropy.abs().max(1.0);
        let mut tt = t;
        for _ in 0..60 {
            for j in 0..m {
                u_cand[j] = u[j] + tt * d[j];
            }
            if let Some((cand_entropy, log_n)) = eval_candidate(&u_cand, &mut f_cand) {
                if cand_entropy > entropy + accept_floor {
                    improvement = cand_entropy - entropy;
                    entropy = cand_entropy;
                    for (j, &i) in supp.iter().enumerate() {
                        u[j] = u_cand[j] - log_n;
                        f_full[i] = u[j].exp();
                    }
                    t = (tt * 1.4).min(8.0);
                    accepted = true;
                    break;
                }
            }
            tt *= 0.5;
        }

        // Single-coordinate sweeps harvest improvements below the float
        // floor of the joint direction (coordinates with tiny weights move
        // on much smaller entropy scales than the dominant ones).
        if !accepted {
            for j in 0..m {
                for dir in [1.0f64, -1.0] {
                    let mut step = 0.25f64;
                    for _ in 0..20 {
                        u_cand.copy_from_slice(&u);
                        u_cand[j] += step * dir;
                        if let Some((cand_entropy, log_n)) = eval_candidate(&u_cand, &mut f_cand) {
                            if cand_entropy > entropy + accept_floor {
                                improvement += cand_entropy - entropy;
                                entropy = cand_entropy;
                                for (jj, &i) in supp.iter().enumerate() {
                                    u[jj] = u_cand[jj] - log_n;
                                    f_full[i] = u[jj].exp();
                                }
                                accepted = true;
                                break;
                            }
                        }
                        step *= 0.5;
                    }
                }
            }
        }

        // Joint two-coordinate moves escape rearrangement kinks where the
        // single preconditioned direction cannot ascend (tied coordinates
        // of Lorentz-like norms move together).
        if !accepted && (2..=24).contains(&m) {
            'escape: for j1 in 0..m {
                for j2 in (j1 + 1)..m {
                    for (s1, s2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                        let mut step = 0.25f64;
                        for _ in 0..20 {
                            u_cand.copy_from_slice(&u);
                            u_cand[j1] += step * s1;
                            u_cand[j2] += step * s2;
                            if let Some((cand_entropy, log_n)) =
                                eval_candidate(&u_cand, &mut f_cand)
                            {
                                if cand_entropy > entropy + accept_floor {
                                    improvement = cand_entropy - entropy;
                                    entropy = cand_entropy;
                                    for (j, &i) in supp.iter().enumerate() {
                                        u[j] = u_cand[j] - log_n;
                                        f_full[i] = u[j].exp();
                                    }
                                    accepted = true;
                                    break 'escape;
                                }
                            }
                            step *= 0.5;
                        }
                    }
                }
            }
        }

        let rel_improvement = improvement / entropy.abs().max(1.0);
        if rel_improvement < opts.tol {
            let mut gates_ok = true;
            if let Some(g) = opts.grad_l1_tol {
                gates_ok &= grad_l1 <= g;
            }
            if let Some(v) = opts.stationarity_inf_tol {
                gates_ok &= stat_inf <= v;
            }
            if gates_ok && (since_cert_check >= 8 || !accepted) {
                since_cert_check = 0;
                cert = certificate_residual(norm, h, &f_full, &dual_opts)?;
                if cert <= 10.0 * opts.tol {
                    converged = true;
                    break;
                }
            }
            if !accepted {
                stalls += 1;
                t = 1.0;
                if stalls >= 5 {
                    break;
                }
            }
        } else {
            stalls = 0;
        }
    }

    if cert.is_infinite() {
        cert = certificate_residual(norm, h, &f_full, &dual_opts)?;
    }
    let maximizer = LatticeFunction::new(space, f_full)?;
    let lambda = match entropy_eval(h, &maximizer)? {
        EntropyValue::Finite(v) => v,
        EntropyValue::NegInfinity => return Err(Error::Domain("iterate left supp h".into())),
    };
    Ok(EntropySolution {
        maximizer,
        lambda,
        certificate_residual: cert,
        iterations,
        converged,
        degenerate: false,
    })
}

/// Signed extension `F_X(h) = sgn(h) · F_X(|h|)` for `h` on the L1 sphere.
pub fn entropy_max_signed(
    norm: &LatticeNorm,
    h: &LatticeFunction,
    tol: f64,
) -> Result<LatticeFunction> {
    entropy_max_signed_with(norm, h, &EntropySolverOptions::with_tol(tol))
}

pub fn entropy_max_signed_with(
    norm: &LatticeNorm,
    h: &LatticeFunction,
    opts: &EntropySolverOptions,
) -> Result<LatticeFunction> {
    if (h.l1_norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "h must lie on the L1 sphere: ‖h‖_1 = {}",
            h.l1_norm()
        )));
    }
    let solution = entropy_max_with(norm, &h.abs(), opts)?;
    solution
        .maximizer
        .zip_map(h, |f, hi| f * crate::function::sgn(hi))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MidpointCheck {
    /// `‖(F_X(h1) + F_X(h2))/2‖_X`.
    pub lhs: f64,
    /// `1 − ‖h1 − h2‖_1^{1/2}`.
    pub rhs: f64,
    pub l1_distance: f64,
    pub ok: bool,
}

/// Check the midpoint inequality `‖(x1+x2)/2‖ ≥ 1 − ‖h1−h2‖_1^{1/2}` for the
/// entropy maximizers of `h1, h2 ∈ S(L1(μ))⁺` with `‖h1−h2‖_1 ≤ 1`.
pub fn midpoint_check(
    norm: &LatticeNorm,
    h1: &LatticeFunction,
    h2: &LatticeFunction,
    tol: f64,
) -> Result<MidpointCheck> {
    midpoint_check_with(norm, h1, h2, tol, &EntropySolverOptions::default())
}

pub fn midpoint_check_with(
    norm: &LatticeNorm,
    h1: &LatticeFunction,
    h2: &LatticeFunction,
    tol: f64,
    solver: &EntropySolverOptions,
) -> Result<MidpointCheck> {
    validate_positive_unit_density(h1)?;
    validate_positive_unit_density(h2)?;
    let dist = h1.l1_distance(h2)?;
    if dist > 1.0 {
        return Err(Error::Precondition(format!(
            "midpoint inequality requires ‖h1−h2‖_1 <= 1, got {dist}"
        )));
    }
    let x1 = entropy_max_with(norm, h1, solver)?.maximizer;
    let x2 = entropy_max_with(norm, h2, solver)?.maximizer;
    let mid = x1.add(&x2)?.scaled(0.5);
    let lhs = norm.eval(&mid)?;
    let rhs = 1.0 - dist.sqrt();
    Ok(MidpointCheck {
        lhs,
        rhs,
        l1_distance: dist,
        ok: lhs >= rhs - tol,
    })
}
