//! Seeded, per-index random sampling.
//!
//! Every sampling loop in the crate draws pair/tuple `k` from
//! `rng_for(seed, k)`, an independent ChaCha stream. Merges are max/min
//! reductions or integer sums, so chunked parallel execution produces exactly
//! the sequential result; the thread count comes from `LATSPHERE_THREADS`
//! (default 1).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::function::LatticeFunction;
use crate::norm::LatticeNorm;
use crate::space::Space;

/// Environment variable controlling worker-thread count (default 1).
pub const THREADS_ENV: &str = "LATSPHERE_THREADS";

/// Deterministic RNG for item `index` of a loop seeded with `seed`.
pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn configured_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

/// Map `0..count` and fold the results in index order. With more than one
/// configured thread the range is chunked; `map` must be pure per index and
/// `fold` associative for the merged result to equal the sequential one
/// (true for the max/min/count merges used in this crate).
pub fn map_fold_indexed<T, A>(
    count: u64,
    init: A,
    map: impl Fn(u64) -> T + Sync,
    fold: impl Fn(A, T) -> A + Sync,
) -> A
where
    T: Send,
    A: Send,
{
    let threads = configured_threads().min(count.max(1) as usize);
    if threads <= 1 {
        let mut acc = init;
        for k in 0..count {
            acc = fold(acc, map(k));
        }
        return acc;
    }
    let chunk = count.div_ceil(threads as u64);
    let mut partials: Vec<Vec<T>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads as u64 {
            let lo = t * chunk;
            let hi = ((t + 1) * chunk).min(count);
            let map = &map;
            handles.push(scope.spawn(move || (lo..hi).map(map).collect::<Vec<T>>()));
        }
        for h in handles {
            partials.push(h.join().expect("sampling worker panicked"));
        }
    });
    let mut acc = init;
    for part in partials {
        for item in part {
            acc = fold(acc, item);
        }
    }
    acc
}

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Vector of i.i.d. standard Gaussians on the atoms.
pub fn gaussian_function(space: &Space, rng: &mut ChaCha8Rng) -> LatticeFunction {
    let values: Vec<f64> = (0..space.len()).map(|_| standard_normal(rng)).collect();
    LatticeFunction::new(space.clone(), values).expect("gaussian values are finite")
}

/// Random point on the unit sphere of `norm` (normalized Gaussian).
pub fn sphere_point(norm: &LatticeNorm, rng: &mut ChaCha8Rng) -> LatticeFunction {
    loop {
        let g = gaussian_function(norm.space(), rng);
        if !g.is_zero() {
            return norm.normalize(&g).expect("nonzero gaussian");
        }
    }
}

/// Random positive density on the L1(μ) sphere: exponential draws normalized
/// so `Σ μ_i h_i = 1`. Full support almost surely.
pub fn positive_density(space: &Space, rng: &mut ChaCha8Rng) -> LatticeFunction {
    loop {
        let values: Vec<f64> = (0..space.len())
            .map(|_| {
                let u: f64 = rng.gen::<f64>();
                -(1.0 - u).ln()
            })
            .collect();
        let f = LatticeFunction::new(space.clone(), values).expect("finite");
        let mass = f.l1_norm();
        if mass > 1e-300 {
            return f.scaled(1.0 / mass);
        }
    }
}

/// Random signed unit vector of L1(μ): Gaussian normalized in `‖·‖_1`.
pub fn signed_density(space: &Space, rng: &mut ChaCha8Rng) -> LatticeFunction {
    loop {
        let g = gaussian_function(space, rng);
        let mass = g.l1_norm();
        if mass > 1e-300 {
            return g.scaled(1.0 / mass);
        }
    }
}

/// Log-uniform draw from `[lo, hi]`.
pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.gen();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

/// A partner for `x` on the sphere of `norm` at a loosely controlled
/// distance: `normalize(x + r·d)` with `d` a random Gaussian direction and
/// `r` log-uniform in `[r_lo, r_hi]`.
pub fn sphere_partner(
    norm: &LatticeNorm,
    x: &LatticeFunction,
    rng: &mut ChaCha8Rng,
    r_lo: f64,
    r_hi: f64,
) -> LatticeFunction {
    loop {
        let d = gaussian_function(norm.space(), rng);
        if d.is_zero() {
            continue;
        }
        let nd = norm.eval(&d).expect("same space");
        if nd == 0.0 {
            continue;
        }
        let r = log_uniform(rng, r_lo, r_hi);
        let cand = x.add(&d.scaled(r / nd)).expect("same space");
        if !cand.is_zero() {
            return norm.normalize(&cand).expect("nonzero");
        }
    }
}
