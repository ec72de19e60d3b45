//! Assembly of the full sphere homeomorphisms and empirical modulus
//! profiling.
//!
//! The L1-to-lattice map factors as an entropy stage into the sphere of the
//! 2-convexified (optionally renormed) lattice followed by the signed square
//! map. Lattice-to-lattice maps route through S(L1) by inverting one factor
//! chain and applying the other; for uniformly convex and smooth pairs the
//! two entropy maps compose directly. Every stage normalizes its input on
//! the sphere of its source space and records the deviation it saw.

use serde::Serialize;

use crate::convexity::{convexify, renorm_unit_concavity, ModulusCurve};
use crate::duality::inverse_entropy_map;
use crate::entropy::{entropy_max_signed_with, EntropySolverOptions};
use crate::error::{Error, Result};
use crate::function::LatticeFunction;
use crate::mazur::{mazur_inverse, mazur_map, mazur_upper_bound};
use crate::norm::{LatticeNorm, RENORM_MAX_ATOMS};
use crate::sampling;

#[derive(Debug, Clone)]
pub enum Stage {
    /// Identity viewed between two norms on the same vectors: `x ↦ x/‖x‖_to`.
    Renormalize { from: LatticeNorm, to: LatticeNorm },
    /// `S(base^{(p)}) → S(base)`, the signed p-th power.
    Mazur { base: LatticeNorm, p: f64 },
    /// `S(base) → S(base^{(p)})`, the signed 1/p-th power.
    MazurInverse { base: LatticeNorm, p: f64 },
    /// `S(L1(μ)) → S(X)`, the signed entropy maximizer.
    Entropy { norm: LatticeNorm },
    /// `S(X) → S(L1(μ))`, the supporting-functional product `|x*|·x`.
    EntropyInverse { norm: LatticeNorm },
}

impl Stage {
    pub fn name(&self) -> String {
        match self {
            Stage::Renormalize { .. } => "renormalize".into(),
            Stage::Mazur { p, .. } => format!("mazur(p={p})"),
            Stage::MazurInverse { p, .. } => format!("mazur-inverse(p={p})"),
            Stage::Entropy { .. } => "entropy".into(),
            Stage::EntropyInverse { .. } => "entropy-inverse".into(),
        }
    }

    /// Norm whose unit sphere the stage's input lives on.
    pub fn source_norm(&self) -> Result<LatticeNorm> {
        match self {
            Stage::Renormalize { from, .. } => Ok(from.clone()),
            Stage::Mazur { base, p } => convexify(base, *p),
            Stage::MazurInverse { base, .. } => Ok(base.clone()),
            Stage::Entropy { norm } => LatticeNorm::weighted_lp(norm.space().clone(), 1.0),
            Stage::EntropyInverse { norm } => Ok(norm.clone()),
        }
    }

    /// Norm whose unit sphere the stage's output lands on.
    pub fn target_norm(&self) -> Result<LatticeNorm> {
        match self {
            Stage::Renormalize { to, .. } => Ok(to.clone()),
            Stage::Mazur { base, .. } => Ok(base.clone()),
            Stage::MazurInverse { base, p } => convexify(base, *p),
            Stage::Entropy { norm } => Ok(norm.clone()),
            Stage::EntropyInverse { norm } => {
                LatticeNorm::weighted_lp(norm.space().clone(), 1.0)
            }
        }
    }

    pub fn inverse(&self) -> Stage {
        match self {
            Stage::Renormalize { from, to } => Stage::Renormalize {
                from: to.clone(),
                to: from.clone(),
            },
            Stage::Mazur { base, p } => Stage::MazurInverse {
                base: base.clone(),
                p: *p,
            },
            Stage::MazurInverse { base, p } => Stage::Mazur {
                base: base.clone(),
                p: *p,
            },
            Stage::Entropy { norm } => Stage::EntropyInverse { norm: norm.clone() },
            Stage::EntropyInverse { norm } => Stage::Entropy { norm: norm.clone() },
        }
    }

    /// Apply the stage; the input is radially renormalized onto the source
    /// sphere first and the observed deviation is returned alongside.
    pub fn apply(&self, x: &LatticeFunction, opts: &PipelineOptions) -> Result<(LatticeFunction, f64)> {
        let source = self.source_norm()?;
        let norm_in = source.eval(x)?;
        if norm_in == 0.0 {
            return Err(Error::Domain("stage input is zero".into()));
        }
        let deviation = (norm_in - 1.0).abs();
        let x = x.scaled(1.0 / norm_in);
        let out = match self {
            Stage::Renormalize { to, .. } => to.normalize(&x)?,
            Stage::Mazur { p, .. } => mazur_map(&x, *p),
            Stage::MazurInverse { p, .. } => mazur_inverse(&x, *p),
            Stage::Entropy { norm } => entropy_max_signed_with(norm, &x, &opts.solver)?,
            Stage::EntropyInverse { norm } => inverse_entropy_map(norm, &x, opts.duality_tol)?,
        };
        Ok((out, deviation))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub solver: EntropySolverOptions,
    /// Tolerance for supporting-functional computations in inverse stages.
    pub duality_tol: f64,
    /// Sphere deviation above which a stage trace entry is flagged.
    pub sphere_tol: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            solver: EntropySolverOptions {
                tol: 1e-12,
                grad_l1_tol: Some(1e-8),
                stationarity_inf_tol: Some(1e-7),
                ..EntropySolverOptions::default()
            },
            duality_tol: 1e-7,
            sphere_tol: 1e-8,
        }
    }
}

/// How the builders obtain a base lattice with q-concavity constant 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RenormPolicy {
    /// Renorm when the constant is not structurally known to be 1 and the
    /// space is small enough; otherwise trust the caller and warn.
    Auto,
    /// Never renorm: the caller asserts the constant is already 1.
    AssumeUnit,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: String,
    /// Deviation of the stage input from its source sphere.
    pub input_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct SphereMapPipeline {
    pub stages: Vec<Stage>,
    pub source: LatticeNorm,
    pub target: LatticeNorm,
    pub warnings: Vec<String>,
    pub options: PipelineOptions,
}

impl SphereMapPipeline {
    pub fn map_id(&self) -> String {
        self.stages
            .iter()
            .map(Stage::name)
            .collect::<Vec<_>>()
            .join(" -> ")
    }

    pub fn eval(&self, x: &LatticeFunction) -> Result<LatticeFunction> {
        Ok(self.eval_traced(x)?.0)
    }

    pub fn eval_traced(&self, x: &LatticeFunction) -> Result<(LatticeFunction, Vec<StageRecord>)> {
        let mut cur = x.clone();
        let mut trace = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let (next, deviation) = stage.apply(&cur, &self.options)?;
            trace.push(StageRecord {
                stage: stage.name(),
                input_deviation: deviation,
            });
            cur = next;
        }
        Ok((cur, trace))
    }

    pub fn inverse(&self) -> SphereMapPipeline {
        SphereMapPipeline {
            stages: self.stages.iter().rev().map(Stage::inverse).collect(),
            source: self.target.clone(),
            target: self.source.clone(),
            warnings: self.warnings.clone(),
            options: self.options.clone(),
        }
    }
}

/// Structural knowledge that `M_q(X) = 1`: weighted L_p (and its nested
/// convexifications) is q-concave with constant 1 for every `q ≥ p`.
fn m_q_is_one(norm: &LatticeNorm, q: f64) -> bool {
    norm.as_weighted_lp().is_some_and(|p| q >= p - 1e-12)
}

/// Base lattice with unit q-concavity constant plus the adapter back to the
/// original norm when a renorming was applied.
fn resolve_base(
    norm: &LatticeNorm,
    q: f64,
    policy: RenormPolicy,
    warnings: &mut Vec<String>,
) -> Result<(LatticeNorm, bool)> {
    if m_q_is_one(norm, q) {
        return Ok((norm.clone(), false));
    }
    match policy {
        RenormPolicy::AssumeUnit => {
            warnings.push(format!(
                "assuming q-concavity constant 1 at q = {q} (renorming disabled)"
            ));
            Ok((norm.clone(), false))
        }
        RenormPolicy::Auto => {
            if norm.space().len() <= RENORM_MAX_ATOMS {
                Ok((renorm_unit_concavity(norm, q)?, true))
            } else {
                warnings.push(format!(
                    "space has {} atoms (> {RENORM_MAX_ATOMS}): assuming q-concavity \
                     constant 1 at q = {q} instead of renorming",
                    norm.space().len()
                ));
                Ok((norm.clone(), false))
            }
        }
    }
}

/// `S(L1(μ)) → S(X)` as entropy maximization into `S(X̄^(2))` followed by
/// the signed square map (plus the renormalization adapter when `X` was
/// renormed).
pub fn build_l1_to_x(
    norm: &LatticeNorm,
    q: f64,
    policy: RenormPolicy,
    options: PipelineOptions,
) -> Result<SphereMapPipeline> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::Precondition(format!(
            "concavity index must satisfy 1 <= q < inf, got {q}"
        )));
    }
    let mut warnings = Vec::new();
    let (base, renormed) = resolve_base(norm, q, policy, &mut warnings)?;
    let x2 = convexify(&base, 2.0)?;
    let mut stages = vec![
        Stage::Entropy { norm: x2 },
        Stage::Mazur {
            base: base.clone(),
            p: 2.0,
        },
    ];
    if renormed {
        stages.push(Stage::Renormalize {
            from: base,
            to: norm.clone(),
        });
    }
    Ok(SphereMapPipeline {
        stages,
        source: LatticeNorm::weighted_lp(norm.space().clone(), 1.0)?,
        target: norm.clone(),
        warnings,
        options,
    })
}

/// `S(X) → S(Y)` through `S(L1(μ))`: invert the X chain, apply the Y chain.
pub fn build_x_to_y(
    norm_x: &LatticeNorm,
    q: f64,
    norm_y: &LatticeNorm,
    q2: f64,
    policy: RenormPolicy,
    options: PipelineOptions,
) -> Result<SphereMapPipeline> {
    if **norm_x.space() != **norm_y.space() {
        return Err(Error::DimensionMismatch {
            expected: norm_x.space().len(),
            actual: norm_y.space().len(),
        });
    }
    let mut warnings = Vec::new();
    let (base_x, renormed_x) = resolve_base(norm_x, q, policy, &mut warnings)?;
    let (base_y, renormed_y) = resolve_base(norm_y, q2, policy, &mut warnings)?;
    let x2 = convexify(&base_x, 2.0)?;
    let y2 = convexify(&base_y, 2.0)?;
    let mut stages = Vec::new();
    if renormed_x {
        stages.push(Stage::Renormalize {
            from: norm_x.clone(),
            to: base_x.clone(),
        });
    }
    stages.push(Stage::MazurInverse {
        base: base_x,
        p: 2.0,
    });
    stages.push(Stage::EntropyInverse { norm: x2 });
    stages.push(Stage::Entropy { norm: y2 });
    stages.push(Stage::Mazur {
        base: base_y.clone(),
        p: 2.0,
    });
    if renormed_y {
        stages.push(Stage::Renormalize {
            from: base_y,
            to: norm_y.clone(),
        });
    }
    Ok(SphereMapPipeline {
        stages,
        source: norm_x.clone(),
        target: norm_y.clone(),
        warnings,
        options,
    })
}

/// `S(X) → S(Y)` directly as `F_Y ∘ (F_X)^{-1}` for uniformly convex and
/// smooth pairs. Degeneracy is probed heuristically via small modulus
/// estimates; a flat convexity curve produces a warning, not an error.
pub fn build_direct_smooth(
    norm_x: &LatticeNorm,
    norm_y: &LatticeNorm,
    options: PipelineOptions,
) -> Result<SphereMapPipeline> {
    if **norm_x.space() != **norm_y.space() {
        return Err(Error::DimensionMismatch {
            expected: norm_x.space().len(),
            actual: norm_y.space().len(),
        });
    }
    let mut warnings = Vec::new();
    for (label, norm) in [("source", norm_x), ("target", norm_y)] {
        let curve = crate::convexity::estimate_ucx_modulus(norm, &[1.0], 64, 0x5eed)?;
        if let Some(v) = curve.grid[0].estimate {
            if v < 1e-9 {
                warnings.push(format!(
                    "{label} norm looks non-uniformly-convex: delta-hat(1) = {v:.3e}"
                ));
            }
        }
    }
    Ok(SphereMapPipeline {
        stages: vec![
            Stage::EntropyInverse {
                norm: norm_x.clone(),
            },
            Stage::Entropy {
                norm: norm_y.clone(),
            },
        ],
        source: norm_x.clone(),
        target: norm_y.clone(),
        warnings,
        options,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileBin {
    pub upper_edge: f64,
    /// Max output distance observed in the bin; `None` when no pair fell in.
    pub max_output: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusProfile {
    pub bins: Vec<ProfileBin>,
    pub samples: usize,
    pub map_id: String,
    pub seed: u64,
}

impl ModulusProfile {
    /// Bin observations `(input_distance, output_distance)` by input
    /// distance; pairs beyond the last edge are dropped.
    pub fn from_observations(
        bin_edges: &[f64],
        map_id: &str,
        seed: u64,
        observations: impl IntoIterator<Item = (f64, f64)>,
    ) -> Result<Self> {
        validate_edges(bin_edges)?;
        let mut bins: Vec<ProfileBin> = bin_edges
            .iter()
            .map(|&upper_edge| ProfileBin {
                upper_edge,
                max_output: None,
                count: 0,
            })
            .collect();
        let mut samples = 0;
        for (din, dout) in observations {
            samples += 1;
            if let Some(bin) = bins.iter_mut().find(|b| din <= b.upper_edge) {
                bin.count += 1;
                bin.max_output = Some(bin.max_output.map_or(dout, |m: f64| m.max(dout)));
            }
        }
        Ok(Self {
            bins,
            samples,
            map_id: map_id.into(),
            seed,
        })
    }

    /// Monotone repair: running maximum over increasing edges (the true
    /// modulus is nondecreasing).
    pub fn monotone_repaired(mut self) -> Self {
        let mut running = f64::NEG_INFINITY;
        for bin in self.bins.iter_mut() {
            if let Some(v) = bin.max_output {
                running = running.max(v);
                bin.max_output = Some(running);
            }
        }
        self
    }
}

fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.is_empty() {
        return Err(Error::Precondition("empty bin edges".into()));
    }
    for (k, &e) in edges.iter().enumerate() {
        if !e.is_finite() || e <= 0.0 {
            return Err(Error::Precondition(format!(
                "bin edges must be positive, got {e}"
            )));
        }
        if k > 0 && e <= edges[k - 1] {
            return Err(Error::Precondition("bin edges must increase".into()));
        }
    }
    Ok(())
}

/// Sample source-sphere pairs at log-uniform distances, push them through
/// the pipeline, and record per-bin maxima of the output distance.
pub fn profile_modulus(
    pipeline: &SphereMapPipeline,
    n_pairs: usize,
    bin_edges: &[f64],
    seed: u64,
) -> Result<ModulusProfile> {
    validate_edges(bin_edges)?;
    let source = &pipeline.source;
    let target = &pipeline.target;
    let lo = (bin_edges[0] * 0.25).max(1e-9);
    let hi = bin_edges[bin_edges.len() - 1];

    let mut observations = Vec::with_capacity(n_pairs);
    for k in 0..n_pairs as u64 {
        let mut rng = sampling::rng_for(seed, k);
        let x = sampling::sphere_point(source, &mut rng);
        let y = sampling::sphere_partner(source, &x, &mut rng, lo, hi);
        let din = source.eval(&x.sub(&y)?)?;
        let fx = pipeline.eval(&x)?;
        let fy = pipeline.eval(&y)?;
        let dout = target.eval(&fx.sub(&fy)?)?;
        observations.push((din, dout));
    }
    Ok(ModulusProfile::from_observations(
        bin_edges,
        &pipeline.map_id(),
        seed,
        observations,
    )?
    .monotone_repaired())
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeBin {
    pub upper_edge: f64,
    pub observed: Option<f64>,
    pub bound: Option<f64>,
    pub ok: bool,
}

/// Soft check of the analytic envelope for the L1-to-lattice map: the
/// entropy stage inverts `η(ε) = δ̂(ε)²` (output distance ≤ smallest grid ε
/// whose η exceeds the input distance) and the square-map stage applies its
/// explicit upper distortion bound. `δ̂` is itself a sampled upper estimate,
/// so violations are reported rather than fatal.
pub fn envelope_check(
    profile: &ModulusProfile,
    delta_curve: &ModulusCurve,
    mazur_p: f64,
) -> Vec<EnvelopeBin> {
    let eta: Vec<(f64, f64)> = delta_curve
        .grid
        .iter()
        .filter_map(|p| p.estimate.map(|v| (p.argument, v * v)))
        .collect();
    profile
        .bins
        .iter()
        .map(|bin| {
            let entropy_out = eta
                .iter()
                .find(|&&(_, eta_v)| eta_v >= bin.upper_edge)
                .map(|&(eps, _)| eps);
            let bound = entropy_out.map(|eps| {
                if eps < 1.0 {
                    mazur_upper_bound(eps, mazur_p).unwrap_or(2.0).min(2.0)
                } else {
                    2.0
                }
            });
            let ok = match (bin.max_output, bound) {
                (Some(obs), Some(b)) => obs <= b + 1e-12,
                _ => true,
            };
            EnvelopeBin {
                upper_edge: bin.upper_edge,
                observed: bin.max_output,
                bound,
                ok,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LinfProbe {
    pub eps: f64,
    pub h_near: LatticeFunction,
    pub h_far: LatticeFunction,
    pub f_near: LatticeFunction,
    pub f_far: LatticeFunction,
    pub input_gap: f64,
    pub output_gap: f64,
}

/// Degeneracy probe for the sup norm: inputs `normalize_1(2−ε, ε, 0, …)` and
/// `(2, 0, …)` on the uniform space are L1-close but their entropy
/// maximizers (support indicators) stay at sup-distance 1 as ε → 0.
pub fn linf_degeneracy_probe(n: usize) -> Result<LinfProbe> {
    linf_degeneracy_probe_with_eps(n, 1e-3)
}

pub fn linf_degeneracy_probe_with_eps(n: usize, eps: f64) -> Result<LinfProbe> {
    if n < 2 {
        return Err(Error::Precondition("probe needs at least two atoms".into()));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Precondition(format!(
            "eps must lie in [0, 1), got {eps}"
        )));
    }
    let space = crate::space::FiniteProbabilitySpace::uniform(n);
    let norm = LatticeNorm::l_infinity(space.clone())?;
    let mut near = vec![0.0; n];
    near[0] = 2.0 - eps;
    near[1] = eps;
    let mut far = vec![0.0; n];
    far[0] = 2.0;
    let h_near = LatticeFunction::new(space.clone(), near)?;
    let h_near = h_near.scaled(1.0 / h_near.l1_norm());
    let h_far = LatticeFunction::new(space, far)?;
    let h_far = h_far.scaled(1.0 / h_far.l1_norm());
    let opts = EntropySolverOptions::default();
    let f_near = entropy_max_signed_with(&norm, &h_near, &opts)?;
    let f_far = entropy_max_signed_with(&norm, &h_far, &opts)?;
    let input_gap = h_near.l1_distance(&h_far)?;
    let output_gap = f_near.sup_distance(&f_far)?;
    Ok(LinfProbe {
        eps,
        h_near,
        h_far,
        f_near,
        f_far,
        input_gap,
        output_gap,
    })
}
