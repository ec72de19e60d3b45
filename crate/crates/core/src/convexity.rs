//! p-convexification, concavity/convexity constant estimation, renorming to
//! unit concavity constant on disjoint vectors, and uniform convexity /
//! smoothness modulus curves.
//!
//! Constant estimators report certified lower bounds with witnesses: the
//! defining ratios are evaluated on sampled tuples (20% disjointly
//! supported, the extremal regime for concavity) and refined by
//! hill-climbing. No upper-bound certification is attempted.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::LatticeFunction;
use crate::norm::{LatticeNorm, NormVariant};
use crate::sampling;

/// The p-convexification `X^(p)`: `|||f||| = ‖|f|^p‖^{1/p}`.
pub fn convexify(norm: &LatticeNorm, p: f64) -> Result<LatticeNorm> {
    LatticeNorm::new(
        norm.space().clone(),
        NormVariant::Convexified {
            base: Box::new(norm.variant().clone()),
            p,
        },
    )
}

/// Partition-supremum renorming: `|||x||| = max over set partitions {A_j} of
/// supp(x) of (Σ_j ‖x·χ_{A_j}‖^q)^{1/q}`. Dominates the base norm and has
/// q-concavity constant 1 on disjointly supported tuples.
pub fn renorm_unit_concavity(norm: &LatticeNorm, q: f64) -> Result<LatticeNorm> {
    LatticeNorm::new(
        norm.space().clone(),
        NormVariant::Renormed {
            base: Box::new(norm.variant().clone()),
            q,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ConstantKind {
    Concavity { q: f64 },
    Convexity { p: f64 },
}

impl ConstantKind {
    pub fn exponent(&self) -> f64 {
        match self {
            ConstantKind::Concavity { q } => *q,
            ConstantKind::Convexity { p } => *p,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ConstantKind::Concavity { .. } => "concavity",
            ConstantKind::Convexity { .. } => "convexity",
        }
    }
}

/// A certified lower bound on `M_q` or `M^p`, with the witness tuple that
/// attains it.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantEstimate {
    pub kind: ConstantKind,
    pub lower_bound: f64,
    pub witness: Vec<LatticeFunction>,
    pub samples: usize,
    pub seed: u64,
}

/// The (★) ratio `(Σ ‖x_i‖^q)^{1/q} / ‖(Σ |x_i|^q)^{1/q}‖`, or `None` when
/// the denominator vanishes (all-zero tuple).
pub fn concavity_ratio(norm: &LatticeNorm, tuple: &[LatticeFunction], q: f64) -> Result<Option<f64>> {
    ratio(norm, tuple, q, true)
}

/// The (★★) ratio `‖(Σ |x_i|^p)^{1/p}‖ / (Σ ‖x_i‖^p)^{1/p}`.
pub fn convexity_ratio(norm: &LatticeNorm, tuple: &[LatticeFunction], p: f64) -> Result<Option<f64>> {
    ratio(norm, tuple, p, false)
}

fn ratio(
    norm: &LatticeNorm,
    tuple: &[LatticeFunction],
    r: f64,
    concavity: bool,
) -> Result<Option<f64>> {
    if tuple.is_empty() {
        return Err(Error::Precondition("empty tuple".into()));
    }
    let n = norm.space().len();
    let mut combined = vec![0.0; n];
    let mut sum_norms_r = 0.0f64;
    for x in tuple {
        let nx = norm.eval(x)?;
        sum_norms_r += nx.powf(r);
        for (acc, &v) in combined.iter_mut().zip(x.values()) {
            *acc += v.abs().powf(r);
        }
    }
    for v in combined.iter_mut() {
        *v = v.powf(1.0 / r);
    }
    let combined_norm = norm.eval_values(&combined);
    let sum_norms = sum_norms_r.powf(1.0 / r);
    let (num, den) = if concavity {
        (sum_norms, combined_norm)
    } else {
        (combined_norm, sum_norms)
    };
    if den == 0.0 {
        return Ok(None);
    }
    Ok(Some(num / den))
}

/// Lower-bound `M_q(X)` by sampled + hill-climbed (★) ratios.
pub fn estimate_concavity(
    norm: &LatticeNorm,
    q: f64,
    n_tuples: usize,
    tuple_size: usize,
    seed: u64,
) -> Result<ConstantEstimate> {
    estimate_constant(norm, ConstantKind::Concavity { q }, n_tuples, tuple_size, seed)
}

/// Lower-bound `M^p(X)` by sampled + hill-climbed (★★) ratios.
pub fn estimate_convexity(
    norm: &LatticeNorm,
    p: f64,
    n_tuples: usize,
    tuple_size: usize,
    seed: u64,
) -> Result<ConstantEstimate> {
    estimate_constant(norm, ConstantKind::Convexity { p }, n_tuples, tuple_size, seed)
}

fn estimate_constant(
    norm: &LatticeNorm,
    kind: ConstantKind,
    n_tuples: usize,
    tuple_size: usize,
    seed: u64,
) -> Result<ConstantEstimate> {
    let r = kind.exponent();
    if r < 1.0 {
        return Err(Error::Precondition(format!(
            "{} exponent must be >= 1, got {r}",
            kind.label()
        )));
    }
    if n_tuples == 0 || tuple_size == 0 {
        return Err(Error::Precondition("need at least one tuple and one vector".into()));
    }
    let space = norm.space().clone();
    let eval_ratio = |tuple: &[LatticeFunction]| -> Result<Option<f64>> {
        match kind {
            ConstantKind::Concavity { q } => concavity_ratio(norm, tuple, q),
            ConstantKind::Convexity { p } => convexity_ratio(norm, tuple, p),
        }
    };

    type Best = Option<(f64, Vec<LatticeFunction>)>;
    // Gaussian components normalized onto the sphere; 20% of tuples drawn
    // disjointly supported (the extremal regime for concavity).
    let sample_one = |k: u64| -> Result<Best> {
        let mut rng = sampling::rng_for(seed, k);
        use rand::Rng;
        let disjoint = tuple_size > 1 && rng.gen::<f64>() < 0.2;
        let mut tuple = Vec::with_capacity(tuple_size);
        if disjoint {
            // Random assignment of atoms to tuple members; the tuple is
            // disjointly supported by construction. Members that end up
            // with no atoms stay zero and are kept (the ratio ignores them).
            let owner: Vec<usize> = (0..space.len()).map(|_| rng.gen_range(0..tuple_size)).collect();
            for member in 0..tuple_size {
                let values: Vec<f64> = owner
                    .iter()
                    .map(|&o| {
                        if o == member {
                            sampling::standard_normal(&mut rng)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let piece = LatticeFunction::new(space.clone(), values)?;
                if piece.is_zero() {
                    tuple.push(piece);
                } else {
                    tuple.push(norm.normalize(&piece)?);
                }
            }
        } else {
            for _ in 0..tuple_size {
                tuple.push(sampling::sphere_point(norm, &mut rng));
            }
        }
        if tuple.iter().all(|x| x.is_zero()) {
            return Ok(None); // degenerate tuple: skipped
        }
        Ok(eval_ratio(&tuple)?.map(|v| (v, tuple)))
    };

    let mut valid = 0usize;
    let mut best: Best = None;
    for k in 0..n_tuples as u64 {
        if let Some((v, tuple)) = sample_one(k)? {
            valid += 1;
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, tuple));
            }
        }
    }
    if valid == 0 {
        return Err(Error::DegenerateSampling(
            "every sampled tuple was degenerate".into(),
        ));
    }
    let (mut best_v, mut best_tuple) = best.expect("valid > 0");

    // Hill-climb the best tuple: coordinate perturbations, shrinking step.
    let mut step = 0.5f64;
    let mut rng = sampling::rng_for(seed, n_tuples as u64);
    use rand::Rng;
    for _round in 0..60 {
        let mut improved = false;
        for member in 0..best_tuple.len() {
            for atom in 0..space.len() {
                for dir in [1.0, -1.0] {
                    let mut cand = best_tuple.clone();
                    let mut vals = cand[member].values().to_vec();
                    vals[atom] += dir * step * (1.0 + rng.gen::<f64>());
                    cand[member] = LatticeFunction::new(space.clone(), vals)?;
                    if let Some(v) = eval_ratio(&cand)? {
                        if v > best_v * (1.0 + 1e-14) {
                            best_v = v;
                            best_tuple = cand;
                            improved = true;
                        }
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-9 {
                break;
            }
        }
    }

    // A singleton tuple attains ratio 1 exactly (both sides equal ‖x‖), so 1
    // is always a certified lower bound.
    if best_v < 1.0 {
        best_v = 1.0;
        best_tuple = vec![sampling::sphere_point(norm, &mut sampling::rng_for(seed, 0))];
    }

    Ok(ConstantEstimate {
        kind,
        lower_bound: best_v,
        witness: best_tuple,
        samples: n_tuples,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModulusKind {
    UniformConvexity,
    UniformSmoothness,
}

/// Whether grid estimates bound the true curve from above (sampled min of an
/// inf) or below (sampled max of a sup).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimateDirection {
    UpperBound,
    LowerBound,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusPoint {
    pub argument: f64,
    /// `None` marks a grid point where no feasible sample existed.
    pub estimate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusCurve {
    pub kind: ModulusKind,
    pub direction: EstimateDirection,
    pub grid: Vec<ModulusPoint>,
    pub samples: usize,
    pub seed: u64,
}

impl ModulusCurve {
    /// Least-squares power-law fit `value ≈ K · argument^e` over the grid
    /// points with positive estimates. Needs at least two such points.
    pub fn fit_power_law(&self) -> Option<PowerFit> {
        let pts: Vec<(f64, f64)> = self
            .grid
            .iter()
            .filter_map(|p| match p.estimate {
                Some(v) if v > 0.0 && p.argument > 0.0 => Some((p.argument.ln(), v.ln())),
                _ => None,
            })
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() < 1e-300 {
            return None;
        }
        let exponent = (n * sxy - sx * sy) / denom;
        let intercept = (sy - exponent * sx) / n;
        Some(PowerFit {
            coefficient: intercept.exp(),
            exponent,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerFit {
    pub coefficient: f64,
    pub exponent: f64,
}

/// Move from `x` along direction `d`, renormalized, bisecting the step so the
/// distance to `x` lands in `[target, target(1+1e-12)]`. `None` if the
/// direction cannot reach the target distance.
fn partner_at_distance(
    norm: &LatticeNorm,
    x: &LatticeFunction,
    d: &LatticeFunction,
    target: f64,
) -> Option<LatticeFunction> {
    let y_at = |s: f64| -> Option<LatticeFunction> {
        let cand = x.add(&d.scaled(s)).ok()?;
        if cand.is_zero() {
            return None;
        }
        norm.normalize(&cand).ok()
    };
    let dist_at = |s: f64| -> Option<f64> {
        let y = y_at(s)?;
        norm.eval(&x.sub(&y).ok()?).ok()
    };
    // Find an upper bracket.
    let mut hi = target.max(1e-6);
    let mut d_hi = dist_at(hi)?;
    let mut grow = 0;
    while d_hi < target {
        hi *= 2.0;
        grow += 1;
        if grow > 80 {
            return None;
        }
        d_hi = dist_at(hi)?;
    }
    let mut lo = 0.0f64;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        match dist_at(mid) {
            Some(dm) if dm >= target => hi = mid,
            Some(_) => lo = mid,
            None => return None,
        }
    }
    let y = y_at(hi)?;
    let d_final = norm.eval(&x.sub(&y).ok()?).ok()?;
    (d_final >= target && d_final <= target * (1.0 + 1e-6) + 1e-12).then_some(y)
}

/// Deterministic structured sphere pairs: sign-flip and axis families that
/// witness extremal behavior of polyhedral norms.
fn structured_pairs(norm: &LatticeNorm) -> Vec<(LatticeFunction, LatticeFunction)> {
    let space = norm.space().clone();
    let n = space.len();
    let mut pairs = Vec::new();
    let ones = LatticeFunction::indicator_all(space.clone());
    if let Ok(xu) = norm.normalize(&ones) {
        for i in 0..n {
            let mut vals = ones.values().to_vec();
            vals[i] = -1.0;
            let flipped = LatticeFunction::new(space.clone(), vals).expect("finite");
            if let Ok(yu) = norm.normalize(&flipped) {
                pairs.push((xu.clone(), yu));
            }
        }
    }
    if n >= 2 {
        for i in 0..n.min(4) {
            for j in (i + 1)..n.min(4) {
                let mut a = vec![0.0; n];
                let mut b = vec![0.0; n];
                a[i] = 1.0;
                a[j] = 1.0;
                b[i] = 1.0;
                b[j] = -1.0;
                let fa = LatticeFunction::new(space.clone(), a).expect("finite");
                let fb = LatticeFunction::new(space.clone(), b).expect("finite");
                if let (Ok(xa), Ok(xb)) = (norm.normalize(&fa), norm.normalize(&fb)) {
                    pairs.push((xa, xb));
                }
            }
        }
    }
    pairs
}

/// Estimate the uniform convexity modulus
/// `δ_X(ε) = inf { 1 − ‖(x+y)/2‖ : x, y ∈ S(X), ‖x−y‖ ≥ ε }` on a grid.
///
/// Sampled minima are upper bounds on the true infimum; pooling all pairs
/// across grid points makes the curve nondecreasing by construction, and a
/// running-maximum repair is applied afterwards as a safety net.
pub fn estimate_ucx_modulus(
    norm: &LatticeNorm,
    eps_grid: &[f64],
    n_pairs: usize,
    seed: u64,
) -> Result<ModulusCurve> {
    if eps_grid.is_empty() {
        return Err(Error::Precondition("empty epsilon grid".into()));
    }
    for &e in eps_grid {
        if !(e > 0.0 && e <= 2.0) {
            return Err(Error::Precondition(format!(
                "epsilon grid values must lie in (0, 2], got {e}"
            )));
        }
    }
    let mut grid: Vec<f64> = eps_grid.to_vec();
    grid.sort_by(f64::total_cmp);

    struct PairInfo {
        x: LatticeFunction,
        d: LatticeFunction,
        dist: f64,
        violation: f64,
    }
    let violation_of = |norm: &LatticeNorm, x: &LatticeFunction, y: &LatticeFunction| -> f64 {
        let mid = x.add(y).expect("same space").scaled(0.5);
        (1.0 - norm.eval_values(mid.values())).max(0.0)
    };

    // Sample pool: each pair targets one grid distance (round-robin). With a
    // fixed seed the first N pairs are a prefix of the first 2N, so estimates
    // can only decrease as n_pairs grows.
    let mut pool: Vec<PairInfo> = Vec::new();
    for k in 0..n_pairs as u64 {
        let mut rng = sampling::rng_for(seed, k);
        let x = sampling::sphere_point(norm, &mut rng);
        let d = sampling::gaussian_function(norm.space(), &mut rng);
        if d.is_zero() {
            continue;
        }
        let target = grid[(k as usize) % grid.len()];
        if let Some(y) = partner_at_distance(norm, &x, &d, target) {
            let dist = norm.eval(&x.sub(&y).expect("same space")).expect("same space");
            let violation = violation_of(norm, &x, &y);
            pool.push(PairInfo { x, d, dist, violation });
        }
    }
    // Structured extremal pairs (deterministic).
    let structured_from = pool.len();
    for (x, y) in structured_pairs(norm) {
        let dist = norm.eval(&x.sub(&y).expect("same space")).expect("same space");
        if dist > 0.0 {
            let violation = violation_of(norm, &x, &y);
            let d = y.sub(&x).expect("same space");
            pool.push(PairInfo { x, d, dist, violation });
        }
    }

    // Refinement starts are restricted to the structured pairs plus a fixed
    // prefix of sampled indices, so the refined value does not depend on
    // n_pairs and the monotone-in-samples contract survives refinement.
    const REFINE_PREFIX: usize = 16;
    let refinable = |pi: usize| pi < REFINE_PREFIX.min(structured_from) || pi >= structured_from;

    let mut estimates: Vec<Option<f64>> = Vec::with_capacity(grid.len());
    for &eps in grid.iter() {
        let mut pool_min: Option<f64> = None;
        let mut start: Option<(f64, usize)> = None;
        for (pi, pair) in pool.iter().enumerate() {
            if pair.dist >= eps {
                if pool_min.is_none_or(|bv| pair.violation < bv) {
                    pool_min = Some(pair.violation);
                }
                if refinable(pi) && start.is_none_or(|(bv, _)| pair.violation < bv) {
                    start = Some((pair.violation, pi));
                }
            }
        }
        // Deterministic hill descent from the fixed start, re-bisecting the
        // partner to distance exactly eps after each move.
        let refined = start.map(|(mut bv, pi)| {
            let mut x = pool[pi].x.clone();
            let mut d = pool[pi].d.clone();
            if let Some(y) = partner_at_distance(norm, &x, &d, eps) {
                bv = bv.min(violation_of(norm, &x, &y));
            }
            let mut step = 0.3f64;
            for _round in 0..30 {
                let mut improved = false;
                for atom in 0..norm.space().len() {
                    for target in [0usize, 1] {
                        for dir in [1.0, -1.0] {
                            let (mut cx, mut cd) = (x.clone(), d.clone());
                            if target == 0 {
                                let mut vals = cx.values().to_vec();
                                vals[atom] += dir * step;
                                let cand = LatticeFunction::new(norm.space().clone(), vals)
                                    .expect("finite");
                                if cand.is_zero() {
                                    continue;
                                }
                                cx = norm.normalize(&cand).expect("nonzero");
                            } else {
                                let mut vals = cd.values().to_vec();
                                vals[atom] += dir * step;
                                cd = LatticeFunction::new(norm.space().clone(), vals)
                                    .expect("finite");
                                if cd.is_zero() {
                                    continue;
                                }
                            }
                            if let Some(y) = partner_at_distance(norm, &cx, &cd, eps) {
                                let v = violation_of(norm, &cx, &y);
                                if v < bv - 1e-15 {
                                    bv = v;
                                    x = cx;
                                    d = cd;
                                    improved = true;
                                }
                            }
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                    if step < 1e-7 {
                        break;
                    }
                }
            }
            bv
        });
        estimates.push(match (pool_min, refined) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        });
    }

    // Monotone repair (running maximum over increasing ε).
    let mut running = f64::NEG_INFINITY;
    for v in estimates.iter_mut().flatten() {
        running = running.max(*v);
        *v = running;
    }

    Ok(ModulusCurve {
        kind: ModulusKind::UniformConvexity,
        direction: EstimateDirection::UpperBound,
        grid: grid
            .iter()
            .zip(estimates)
            .map(|(&argument, estimate)| ModulusPoint { argument, estimate })
            .collect(),
        samples: n_pairs,
        seed,
    })
}

/// Estimate the uniform smoothness modulus
/// `ρ_X(τ) = sup { (‖x+τy‖+‖x−τy‖)/2 − 1 : x, y ∈ S(X) }` on a grid.
/// Sampled maxima are lower bounds on the true supremum.
pub fn estimate_smoothness_modulus(
    norm: &LatticeNorm,
    tau_grid: &[f64],
    n_pairs: usize,
    seed: u64,
) -> Result<ModulusCurve> {
    if tau_grid.is_empty() {
        return Err(Error::Precondition("empty tau grid".into()));
    }
    for &t in tau_grid {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::Precondition(format!(
                "tau grid values must be positive, got {t}"
            )));
        }
    }
    let mut grid: Vec<f64> = tau_grid.to_vec();
    grid.sort_by(f64::total_cmp);

    let rho = |x: &LatticeFunction, y: &LatticeFunction, tau: f64| -> f64 {
        let plus = x.add(&y.scaled(tau)).expect("same space");
        let minus = x.sub(&y.scaled(tau)).expect("same space");
        (0.5 * (norm.eval_values(plus.values()) + norm.eval_values(minus.values())) - 1.0).max(0.0)
    };

    // Prefix-sampled pool plus structured pairs; refinement starts come from
    // the structured pairs and a fixed sampled prefix only, so ρ̂ can only
    // grow as n_pairs grows.
    let mut pairs: Vec<(LatticeFunction, LatticeFunction)> = Vec::new();
    for k in 0..n_pairs as u64 {
        let mut rng = sampling::rng_for(seed, k);
        let x = sampling::sphere_point(norm, &mut rng);
        let y = sampling::sphere_point(norm, &mut rng);
        pairs.push((x, y));
    }
    let structured_from = pairs.len();
    pairs.extend(structured_pairs(norm));
    const REFINE_PREFIX: usize = 16;
    let refinable = |pi: usize| pi < REFINE_PREFIX.min(structured_from) || pi >= structured_from;

    let mut points = Vec::with_capacity(grid.len());
    for &tau in grid.iter() {
        let mut pool_max = 0.0f64;
        let mut start: Option<(f64, usize)> = None;
        for (pi, (x, y)) in pairs.iter().enumerate() {
            let v = rho(x, y, tau);
            pool_max = pool_max.max(v);
            if refinable(pi) && start.is_none_or(|(bv, _)| v > bv) {
                start = Some((v, pi));
            }
        }
        let mut best = pool_max;
        if let Some((mut refined, pi)) = start {
            let (mut x, mut y) = pairs[pi].clone();
            let mut step = 0.3f64;
            for _round in 0..25 {
                let mut improved = false;
                for atom in 0..norm.space().len() {
                    for target in [0usize, 1] {
                        for dir in [1.0, -1.0] {
                            let (mut cx, mut cy) = (x.clone(), y.clone());
                            let vals = if target == 0 {
                                let mut v = cx.values().to_vec();
                                v[atom] += dir * step;
                                v
                            } else {
                                let mut v = cy.values().to_vec();
                                v[atom] += dir * step;
                                v
                            };
                            let cand = LatticeFunction::new(norm.space().clone(), vals)?;
                            if cand.is_zero() {
                                continue;
                            }
                            let cand = norm.normalize(&cand)?;
                            if target == 0 {
                                cx = cand;
                            } else {
                                cy = cand;
                            }
                            let v = rho(&cx, &cy, tau);
                            if v > refined + 1e-15 {
                                refined = v;
                                x = cx;
                                y = cy;
                                improved = true;
                            }
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                    if step < 1e-7 {
                        break;
                    }
                }
            }
            best = best.max(refined);
        }
        points.push(ModulusPoint {
            argument: tau,
            estimate: Some(best),
        });
    }

    Ok(ModulusCurve {
        kind: ModulusKind::UniformSmoothness,
        direction: EstimateDirection::LowerBound,
        grid: points,
        samples: n_pairs,
        seed,
    })
}
