//! Task dispatch: build the configured objects, run the experiment, and
//! assemble a deterministic report plus plot-ready CSV rows.
//!
//! Payload and CSV bytes are functions of (config, seed) only; wall time
//! lives outside the payload so identical runs emit identical data files.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::time::Instant;

use latsphere::config::LatticeSpec;
use latsphere::convexity::{
    estimate_concavity, estimate_convexity, estimate_smoothness_modulus, estimate_ucx_modulus,
    convexify, ModulusCurve,
};
use latsphere::duality::supporting_functional;
use latsphere::entropy::{
    entropy_max_with, midpoint_check_with, EntropySolverOptions,
};
use latsphere::error::Error as CoreError;
use latsphere::function::sgn;
use latsphere::homeo::{
    build_direct_smooth, build_l1_to_x, build_x_to_y, linf_degeneracy_probe_with_eps,
    profile_modulus, ModulusProfile, PipelineOptions, RenormPolicy, SphereMapPipeline, Stage,
};
use latsphere::mazur::verify_mazur_sandwich;
use latsphere::norm::LatticeNorm;
use latsphere::{sampling, LatticeFunction, Space};

use crate::experiment::{
    ConstantKindSpec, CurveKind, ExperimentConfig, HomeoAction, HomeoMode, StageKind, TaskSpec,
};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// Configuration problems: exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Input-domain or numerical-domain failures: exit code 2.
    #[error("task error: {0}")]
    Task(#[from] CoreError),
}

/// Outcome classification driving the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// A hard invariant was violated by the data (exit 1).
    Violation,
    /// An iterative solve failed to converge (exit 3).
    NonConverged,
}

#[derive(Debug, serde::Serialize)]
pub struct Report {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub task: String,
    pub payload: Value,
    pub summary: Value,
    pub wall_time_ms: f64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: Report,
    /// CSV basename (without extension) and lines, when the task is binned
    /// or curve-like.
    pub csv: Option<(String, Vec<String>)>,
    pub status: RunStatus,
}

/// Full-precision decimal (17 significant digits) for CSV cells.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = config.to_canonical_toml();
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    format!("{:x}", hasher.finalize())
}

fn build_named_norm(
    config: &ExperimentConfig,
    name: &str,
) -> Result<(Space, LatticeNorm), RunError> {
    let spec = LatticeSpec {
        space: config.space.clone(),
        norms: config.norms.clone(),
    };
    spec.build_norm(name)
        .map_err(|e| RunError::Config(e.to_string()))
}

fn curve_rows(curve: &ModulusCurve, arg_label: &str, val_label: &str) -> Vec<String> {
    let mut rows = vec![format!("{arg_label},{val_label}")];
    for point in &curve.grid {
        if let Some(v) = point.estimate {
            rows.push(format!("{},{}", csv_float(point.argument), csv_float(v)));
        }
    }
    rows
}

fn profile_rows(profile: &ModulusProfile) -> Vec<String> {
    let mut rows = vec!["t_edge,max_out,samples".to_string()];
    for bin in &profile.bins {
        if let Some(m) = bin.max_output {
            rows.push(format!(
                "{},{},{}",
                csv_float(bin.upper_edge),
                csv_float(m),
                bin.count
            ));
        }
    }
    rows
}

fn build_pipeline(
    config: &ExperimentConfig,
    from: &str,
    to: Option<&str>,
    q: f64,
    q2: Option<f64>,
    mode: Option<HomeoMode>,
) -> Result<SphereMapPipeline, RunError> {
    let (_, from_norm) = build_named_norm(config, from)?;
    let options = PipelineOptions::default();
    match to {
        None => Ok(build_l1_to_x(&from_norm, q, RenormPolicy::Auto, options)?),
        Some(to_name) => {
            let (_, to_norm) = build_named_norm(config, to_name)?;
            match mode.unwrap_or(HomeoMode::ViaL1) {
                HomeoMode::ViaL1 => Ok(build_x_to_y(
                    &from_norm,
                    q,
                    &to_norm,
                    q2.unwrap_or(q),
                    RenormPolicy::Auto,
                    options,
                )?),
                HomeoMode::Direct => Ok(build_direct_smooth(&from_norm, &to_norm, options)?),
            }
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    config.validate().map_err(RunError::Config)?;
    let task = config
        .task
        .as_ref()
        .ok_or_else(|| RunError::Config("config carries no [task] table".into()))?;
    let started = Instant::now();
    let seed = config.seed;
    let (payload, summary, csv, status) = dispatch(config, task, seed)?;
    let report = Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(config),
        seed,
        task: task.kind().to_string(),
        payload,
        summary,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(RunOutput {
        report,
        csv,
        status,
    })
}

type TaskResult = (Value, Value, Option<(String, Vec<String>)>, RunStatus);

fn dispatch(config: &ExperimentConfig, task: &TaskSpec, seed: u64) -> Result<TaskResult, RunError> {
    match task {
        TaskSpec::MazurVerify { norm, p, pairs } => {
            let (_, base) = build_named_norm(config, norm)?;
            let report = verify_mazur_sandwich(&base, *p, *pairs, seed)?;
            let mut rows = vec!["delta,distance,lower_bound,upper_bound,margin".to_string()];
            for &(delta, dist, lower, upper) in &report.rows {
                let margin = (dist - lower).min(upper - dist);
                rows.push(format!(
                    "{},{},{},{},{}",
                    csv_float(delta),
                    csv_float(dist),
                    csv_float(lower),
                    csv_float(upper),
                    csv_float(margin)
                ));
            }
            let violations = report.violations_lower + report.violations_upper;
            let payload = json!({
                "p": report.p,
                "samples": report.samples,
                "violations_lower": report.violations_lower,
                "violations_upper": report.violations_upper,
                "worst_margin": report.worst_margin,
                "witness": report.witness.as_ref().map(|(f, g)| json!({"f": f, "g": g})),
            });
            let summary = json!({
                "violations": violations,
                "worst_margin": report.worst_margin,
            });
            let status = if violations > 0 {
                RunStatus::Violation
            } else {
                RunStatus::Ok
            };
            Ok((payload, summary, Some(("mazur-verify".into(), rows)), status))
        }

        TaskSpec::EntropySolve { norm, h, tol } => {
            let (space, norm_obj) = build_named_norm(config, norm)?;
            let h = LatticeFunction::new(space, h.clone())?;
            if h.is_zero() {
                return Err(RunError::Config("h must be nonzero".into()));
            }
            let h = h.scaled(1.0 / h.l1_norm());
            let opts = EntropySolverOptions::with_tol(*tol);
            let solution = entropy_max_with(&norm_obj, &h.abs(), &opts)?;
            let signed = solution
                .maximizer
                .zip_map(&h, |f, hi| f * sgn(hi))?;
            let status = if solution.converged {
                RunStatus::Ok
            } else {
                RunStatus::NonConverged
            };
            let summary = json!({
                "lambda": solution.lambda,
                "certificate_residual": solution.certificate_residual,
                "iterations": solution.iterations,
                "converged": solution.converged,
                "degenerate": solution.degenerate,
            });
            let payload = json!({
                "solution": solution,
                "signed_maximizer": signed,
                "h": h,
            });
            Ok((payload, summary, None, status))
        }

        TaskSpec::Midpoint { norm, pairs, tol } => {
            let (space, norm_obj) = build_named_norm(config, norm)?;
            let solver = EntropySolverOptions::default();
            let mut rows = vec!["l1_distance,lhs,rhs".to_string()];
            let mut violations = 0usize;
            let mut min_margin = f64::INFINITY;
            for k in 0..*pairs as u64 {
                let mut rng = sampling::rng_for(seed, k);
                let h1 = sampling::positive_density(&space, &mut rng);
                let other = sampling::positive_density(&space, &mut rng);
                let mut r = sampling::log_uniform(&mut rng, 1e-4, 0.99);
                let mut pair = None;
                for _ in 0..60 {
                    let h2 = h1
                        .scaled(1.0 - r)
                        .add(&other.scaled(r))
                        .expect("same space");
                    if h1.l1_distance(&h2).expect("same space") <= 1.0 {
                        pair = Some(h2);
                        break;
                    }
                    r *= 0.5;
                }
                let Some(h2) = pair else { continue };
                let check = midpoint_check_with(&norm_obj, &h1, &h2, *tol, &solver)?;
                if !check.ok {
                    violations += 1;
                }
                min_margin = min_margin.min(check.lhs - check.rhs);
                rows.push(format!(
                    "{},{},{}",
                    csv_float(check.l1_distance),
                    csv_float(check.lhs),
                    csv_float(check.rhs)
                ));
            }
            let payload = json!({
                "pairs": pairs,
                "violations": violations,
                "min_margin": min_margin,
            });
            let summary = payload.clone();
            let status = if violations > 0 {
                RunStatus::Violation
            } else {
                RunStatus::Ok
            };
            Ok((payload, summary, Some(("midpoint".into(), rows)), status))
        }

        TaskSpec::Constants {
            norm,
            constant,
            exponent,
            tuples,
            tuple_size,
        } => {
            let (_, norm_obj) = build_named_norm(config, norm)?;
            let estimate = match constant {
                ConstantKindSpec::Concavity => {
                    estimate_concavity(&norm_obj, *exponent, *tuples, *tuple_size, seed)?
                }
                ConstantKindSpec::Convexity => {
                    estimate_convexity(&norm_obj, *exponent, *tuples, *tuple_size, seed)?
                }
            };
            let rows = vec![
                "kind,parameter,value,witness_id".to_string(),
                format!(
                    "{},{},{},0",
                    estimate.kind.label(),
                    csv_float(*exponent),
                    csv_float(estimate.lower_bound)
                ),
            ];
            let summary = json!({
                "lower_bound": estimate.lower_bound,
                "samples": estimate.samples,
            });
            let payload = serde_json::to_value(&estimate).expect("serializable");
            Ok((payload, summary, Some(("constants".into(), rows)), RunStatus::Ok))
        }

        TaskSpec::Modulus {
            curve,
            norm,
            grid,
            pairs,
            p,
            stage,
        } => {
            let (space, norm_obj) = build_named_norm(config, norm)?;
            let grid = if grid.is_empty() {
                TaskSpec::default_grid(*curve)
            } else {
                grid.clone()
            };
            match curve {
                CurveKind::Ucx => {
                    let curve = estimate_ucx_modulus(&norm_obj, &grid, *pairs, seed)?;
                    let rows = curve_rows(&curve, "epsilon", "delta_hat");
                    let summary = json!({"points": curve.grid.len(), "samples": curve.samples});
                    let payload = serde_json::to_value(&curve).expect("serializable");
                    Ok((payload, summary, Some(("modulus-ucx".into(), rows)), RunStatus::Ok))
                }
                CurveKind::Smooth => {
                    let curve = estimate_smoothness_modulus(&norm_obj, &grid, *pairs, seed)?;
                    let rows = curve_rows(&curve, "tau", "rho_hat");
                    let summary = json!({"points": curve.grid.len(), "samples": curve.samples});
                    let payload = serde_json::to_value(&curve).expect("serializable");
                    Ok((payload, summary, Some(("modulus-smooth".into(), rows)), RunStatus::Ok))
                }
                CurveKind::Map => {
                    let stage = stage.ok_or_else(|| {
                        RunError::Config("modulus map needs a stage (mazur|entropy)".into())
                    })?;
                    let pipeline = match stage {
                        StageKind::Mazur => {
                            let p = p.unwrap_or(2.0);
                            SphereMapPipeline {
                                stages: vec![Stage::Mazur {
                                    base: norm_obj.clone(),
                                    p,
                                }],
                                source: convexify(&norm_obj, p)?,
                                target: norm_obj.clone(),
                                warnings: vec![],
                                options: PipelineOptions::default(),
                            }
                        }
                        StageKind::Entropy => SphereMapPipeline {
                            stages: vec![Stage::Entropy {
                                norm: norm_obj.clone(),
                            }],
                            source: LatticeNorm::weighted_lp(space, 1.0)?,
                            target: norm_obj.clone(),
                            warnings: vec![],
                            options: PipelineOptions::default(),
                        },
                    };
                    let profile = profile_modulus(&pipeline, *pairs, &grid, seed)?;
                    let rows = profile_rows(&profile);
                    let summary = json!({"map_id": profile.map_id, "samples": profile.samples});
                    let payload = serde_json::to_value(&profile).expect("serializable");
                    Ok((payload, summary, Some(("modulus-map".into(), rows)), RunStatus::Ok))
                }
            }
        }

        TaskSpec::Homeo {
            action,
            from,
            to,
            q,
            q2,
            mode,
            pairs,
            bins,
        } => {
            let pipeline = build_pipeline(config, from, to.as_deref(), *q, *q2, *mode)?;
            match action {
                HomeoAction::Build => {
                    // Small self-check: forward-then-inverse on a few points.
                    let inverse = pipeline.inverse();
                    let mut max_err = 0.0f64;
                    for k in 0..10u64 {
                        let mut rng = sampling::rng_for(seed, k);
                        let x = sampling::sphere_point(&pipeline.source, &mut rng);
                        let there = pipeline.eval(&x)?;
                        let back = inverse.eval(&there)?;
                        max_err = max_err.max(pipeline.source.eval(&back.sub(&x)?)?);
                    }
                    let payload = json!({
                        "map_id": pipeline.map_id(),
                        "stages": pipeline.stages.iter().map(Stage::name).collect::<Vec<_>>(),
                        "warnings": pipeline.warnings,
                        "round_trip_points": 10,
                        "round_trip_max_error": max_err,
                    });
                    Ok((payload.clone(), payload, None, RunStatus::Ok))
                }
                HomeoAction::Profile => {
                    let bins = if bins.is_empty() {
                        TaskSpec::default_bins()
                    } else {
                        bins.clone()
                    };
                    let profile = profile_modulus(&pipeline, *pairs, &bins, seed)?;
                    let rows = profile_rows(&profile);
                    let summary = json!({
                        "map_id": profile.map_id,
                        "samples": profile.samples,
                        "warnings": pipeline.warnings,
                    });
                    let payload = serde_json::to_value(&profile).expect("serializable");
                    Ok((payload, summary, Some(("homeo-profile".into(), rows)), RunStatus::Ok))
                }
            }
        }

        TaskSpec::Probe { n, eps } => {
            let probe = linf_degeneracy_probe_with_eps(*n, *eps)?;
            let mut rows = vec!["eps,input_gap,output_gap".to_string()];
            for sweep_eps in [1e-2, 1e-3, 1e-4] {
                let p = linf_degeneracy_probe_with_eps(*n, sweep_eps)?;
                rows.push(format!(
                    "{},{},{}",
                    csv_float(p.eps),
                    csv_float(p.input_gap),
                    csv_float(p.output_gap)
                ));
            }
            let summary = json!({
                "eps": probe.eps,
                "input_gap": probe.input_gap,
                "output_gap": probe.output_gap,
            });
            let payload = serde_json::to_value(&probe).expect("serializable");
            Ok((payload, summary, Some(("probe".into(), rows)), RunStatus::Ok))
        }

        TaskSpec::DualSupport { norm, x, tol } => {
            let (space, norm_obj) = build_named_norm(config, norm)?;
            let x = LatticeFunction::new(space, x.clone())?;
            if x.is_zero() {
                return Err(RunError::Config("x must be nonzero".into()));
            }
            let x = norm_obj.normalize(&x)?;
            let sf = supporting_functional(&norm_obj, &x, *tol)?;
            let recovered = sf.g.zip_map(&x, |gi, xi| gi.abs() * xi)?;
            let summary = json!({
                "pairing": sf.pairing,
                "dual_norm": sf.dual_norm,
            });
            let payload = json!({
                "x": x,
                "functional": sf,
                "inverse_entropy_image": recovered,
            });
            Ok((payload, summary, None, RunStatus::Ok))
        }
    }
}

/// Re-derive the plot CSV from a previously written report JSON.
pub fn emit_plot_data(report_json: &Value) -> Result<Vec<String>, RunError> {
    let task = report_json
        .get("task")
        .and_then(Value::as_str)
        .ok_or_else(|| RunError::Config("report lacks a task field".into()))?;
    let payload = report_json
        .get("payload")
        .ok_or_else(|| RunError::Config("report lacks a payload".into()))?;
    match task {
        "modulus" | "homeo" => {
            // Either a curve (grid of argument/estimate) or a binned profile.
            if let Some(grid) = payload.get("grid").and_then(Value::as_array) {
                let mut rows = vec!["argument,estimate".to_string()];
                for point in grid {
                    let arg = point.get("argument").and_then(Value::as_f64);
                    let est = point.get("estimate").and_then(Value::as_f64);
                    if let (Some(a), Some(e)) = (arg, est) {
                        rows.push(format!("{},{}", csv_float(a), csv_float(e)));
                    }
                }
                return Ok(rows);
            }
            emit_bins(payload)
        }
        _ => {
            if payload.get("grid").is_some() || payload.get("bins").is_some() {
                if let Some(grid) = payload.get("grid").and_then(Value::as_array) {
                    let mut rows = vec!["argument,estimate".to_string()];
                    for point in grid {
                        let arg = point.get("argument").and_then(Value::as_f64);
                        let est = point.get("estimate").and_then(Value::as_f64);
                        if let (Some(a), Some(e)) = (arg, est) {
                            rows.push(format!("{},{}", csv_float(a), csv_float(e)));
                        }
                    }
                    return Ok(rows);
                }
                return emit_bins(payload);
            }
            Err(RunError::Config(format!(
                "report for task '{task}' carries no curve or binned payload"
            )))
        }
    }
}

fn emit_bins(payload: &Value) -> Result<Vec<String>, RunError> {
    let bins = payload
        .get("bins")
        .and_then(Value::as_array)
        .ok_or_else(|| RunError::Config("payload carries no bins".into()))?;
    let mut rows = vec!["t_edge,max_out,samples".to_string()];
    for bin in bins {
        let edge = bin.get("upper_edge").and_then(Value::as_f64);
        let max = bin.get("max_output").and_then(Value::as_f64);
        let count = bin.get("count").and_then(Value::as_u64).unwrap_or(0);
        if let (Some(e), Some(m)) = (edge, max) {
            rows.push(format!("{},{},{}", csv_float(e), csv_float(m), count));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ExperimentConfig;

    fn config(task: &str) -> ExperimentConfig {
        let text = format!(
            r#"
version = 1
seed = 11

[space]
weights = [0.5, 0.3, 0.2]

[norms.l1]
variant = "weighted-lp"
p = 1.0

[norms.l3]
variant = "weighted-lp"
p = 3.0

{task}
"#
        );
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn mazur_task_runs_clean() {
        let cfg = config(
            r#"
[task]
kind = "mazur-verify"
norm = "l1"
p = 2.0
pairs = 200
"#,
        );
        let out = run(&cfg).unwrap();
        assert_eq!(out.status, RunStatus::Ok);
        let (name, rows) = out.csv.unwrap();
        assert_eq!(name, "mazur-verify");
        assert_eq!(rows.len(), 201);
        assert_eq!(out.report.summary["violations"], 0);
    }

    #[test]
    fn entropy_solve_matches_closed_form() {
        let cfg = config(
            r#"
[task]
kind = "entropy-solve"
norm = "l3"
h = [1.2, 0.9, 0.6]
tol = 1e-10
"#,
        );
        let out = run(&cfg).unwrap();
        assert_eq!(out.status, RunStatus::Ok);
        let maximizer = out.report.payload["signed_maximizer"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect::<Vec<_>>();
        let h = out.report.payload["h"].as_array().unwrap();
        for (m, hv) in maximizer.iter().zip(h) {
            let expected = hv.as_f64().unwrap().powf(1.0 / 3.0);
            assert!((m - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_payload_and_rows() {
        let cfg = config(
            r#"
[task]
kind = "midpoint"
norm = "l3"
pairs = 60
"#,
        );
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.report.payload).unwrap(),
            serde_json::to_string(&b.report.payload).unwrap()
        );
        assert_eq!(a.csv.unwrap().1, b.csv.unwrap().1);
    }

    #[test]
    fn emit_round_trips_profile_payloads() {
        let cfg = config(
            r#"
[task]
kind = "modulus"
curve = "ucx"
norm = "l3"
grid = [0.5, 1.0]
pairs = 40
"#,
        );
        let out = run(&cfg).unwrap();
        let report_json = serde_json::to_value(&out.report).unwrap();
        let rows = emit_plot_data(&report_json).unwrap();
        assert!(rows.len() >= 2);
        // A payload without curves is rejected.
        let cfg2 = config(
            r#"
[task]
kind = "entropy-solve"
norm = "l3"
h = [1.0, 1.0, 1.0]
"#,
        );
        let out2 = run(&cfg2).unwrap();
        let rj2 = serde_json::to_value(&out2.report).unwrap();
        assert!(emit_plot_data(&rj2).is_err());
    }
}
