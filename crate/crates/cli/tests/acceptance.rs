//! Acceptance suite: every quantitative contract of the library, one test
//! per criterion, each printing a `PASS`/`FAIL` line (visible under
//! `cargo test --test acceptance -- --nocapture`).
//!
//! Tolerances are pinned in the assertions; nothing is calibrated at run
//! time. Seeds are fixed so every run checks the identical sample sets.

use std::time::Instant;

use latsphere::convexity::{
    convexify, estimate_concavity, estimate_convexity, estimate_smoothness_modulus,
    estimate_ucx_modulus,
};
use latsphere::duality::{claim1_certificate, inverse_entropy_map};
use latsphere::entropy::{entropy_max_with, midpoint_check_with, EntropySolverOptions};
use latsphere::homeo::{
    build_l1_to_x, build_x_to_y, linf_degeneracy_probe_with_eps, PipelineOptions, RenormPolicy,
};
use latsphere::mazur::verify_mazur_sandwich;
use latsphere::norm::LatticeNorm;
use latsphere::{sampling, FiniteProbabilitySpace, LatticeFunction, Space};

fn criterion(number: u32, name: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("acceptance {number:2} ({name}): PASS"),
        Err(msg) => {
            println!("acceptance {number:2} ({name}): FAIL: {msg}");
            panic!("acceptance criterion {number} failed: {msg}");
        }
    }
}

fn sandwiched_lorentz(space: &Space, ratio: f64) -> LatticeNorm {
    let weights: Vec<f64> = (0..space.len()).map(|k| ratio.powi(k as i32)).collect();
    LatticeNorm::lorentz_sandwiched(space.clone(), weights, 1.0).expect("valid weights")
}

/// Density with a prescribed support pattern (used for the support law).
fn partial_support_density(
    space: &Space,
    rng: &mut rand_chacha::ChaCha8Rng,
    keep: usize,
) -> LatticeFunction {
    use rand::Rng;
    let n = space.len();
    let keep = keep.clamp(1, n);
    let full = sampling::positive_density(space, rng);
    let mut values = full.values().to_vec();
    let mut alive: Vec<usize> = (0..n).collect();
    while alive.len() > keep {
        let drop = alive.remove(rng.gen_range(0..alive.len()));
        values[drop] = 0.0;
    }
    let f = LatticeFunction::new(space.clone(), values).expect("finite");
    f.scaled(1.0 / f.l1_norm())
}

#[test]
fn criterion_01_entropy_oracle_equivalence() {
    criterion(1, "entropy oracle equivalence", || {
        let started = Instant::now();
        let opts = EntropySolverOptions {
            use_fast_path: false,
            tol: 1e-12,
            stationarity_inf_tol: Some(5e-7),
            ..Default::default()
        };
        for &p in &[1.5, 2.0, 4.0] {
            for &n in &[2usize, 8, 64] {
                let space = FiniteProbabilitySpace::uniform(n);
                let norm = LatticeNorm::weighted_lp(space.clone(), p).map_err(|e| e.to_string())?;
                for k in 0..100u64 {
                    let mut rng = sampling::rng_for(1_000 + n as u64 + p.to_bits(), k);
                    let h = sampling::positive_density(&space, &mut rng);
                    let sol = entropy_max_with(&norm, &h, &opts).map_err(|e| e.to_string())?;
                    if !sol.converged {
                        return Err(format!("solve p={p} n={n} k={k} did not converge"));
                    }
                    let oracle = h.signed_power(1.0 / p);
                    let sup_err = sol.maximizer.sup_distance(&oracle).map_err(|e| e.to_string())?;
                    if sup_err > 1e-6 {
                        return Err(format!(
                            "p={p} n={n} k={k}: sup error {sup_err:.3e} > 1e-6"
                        ));
                    }
                    let lambda_oracle = (1.0 / p)
                        * space
                            .weights()
                            .iter()
                            .zip(h.values())
                            .map(|(&m, &v)| if v > 0.0 { m * v * v.ln() } else { 0.0 })
                            .sum::<f64>();
                    if (sol.lambda - lambda_oracle).abs() > 1e-8 {
                        return Err(format!(
                            "p={p} n={n} k={k}: lambda error {:.3e} > 1e-8",
                            (sol.lambda - lambda_oracle).abs()
                        ));
                    }
                }
            }
        }
        let elapsed = started.elapsed();
        if elapsed.as_secs_f64() > 120.0 {
            return Err(format!("runtime {:.1}s exceeds 2 minutes", elapsed.as_secs_f64()));
        }
        Ok(())
    });
}

#[test]
fn criterion_02_entropy_value_bounds_and_support_law() {
    criterion(2, "entropy bounds and support law", || {
        let mut solves = 0usize;
        let mut check = |norm: &LatticeNorm,
                         h: &LatticeFunction,
                         sol: &latsphere::entropy::EntropySolution|
         -> Result<(), String> {
            solves += 1;
            if sol.lambda < -std::f64::consts::LN_2 - 1e-12 {
                return Err(format!("lambda {} below -log 2", sol.lambda));
            }
            if sol.lambda > h.sup_norm() + 1e-12 {
                return Err(format!("lambda {} above ||h||_inf {}", sol.lambda, h.sup_norm()));
            }
            if sol.maximizer.support() != h.support() {
                return Err("support law violated".into());
            }
            let _ = norm;
            Ok(())
        };

        // Weighted L_p solves, full and partial support.
        for &p in &[1.5, 2.0, 4.0] {
            for &n in &[2usize, 8] {
                let space = FiniteProbabilitySpace::uniform(n);
                let norm = LatticeNorm::weighted_lp(space.clone(), p).map_err(|e| e.to_string())?;
                for k in 0..120u64 {
                    let mut rng = sampling::rng_for(2_000 + n as u64 + p.to_bits(), k);
                    let h = if k % 3 == 0 && n > 1 {
                        partial_support_density(&space, &mut rng, n / 2 + 1)
                    } else {
                        sampling::positive_density(&space, &mut rng)
                    };
                    let sol = entropy_max_with(&norm, &h, &EntropySolverOptions::default())
                        .map_err(|e| e.to_string())?;
                    check(&norm, &h, &sol)?;
                }
            }
        }
        // Convexified Lorentz solves.
        let space = FiniteProbabilitySpace::uniform(6);
        let norm = convexify(&sandwiched_lorentz(&space, 0.75), 2.0).map_err(|e| e.to_string())?;
        for k in 0..320u64 {
            let mut rng = sampling::rng_for(2_500, k);
            let h = if k % 4 == 0 {
                partial_support_density(&space, &mut rng, 3)
            } else {
                sampling::positive_density(&space, &mut rng)
            };
            let sol = entropy_max_with(&norm, &h, &EntropySolverOptions::default())
                .map_err(|e| e.to_string())?;
            check(&norm, &h, &sol)?;
        }
        if solves < 1_000 {
            return Err(format!("only {solves} solves (need at least 1000)"));
        }
        Ok(())
    });
}

#[test]
fn criterion_03_certificate_separates_maximizers() {
    criterion(3, "optimality certificate", || {
        // Converged solves certify within 1e-4.
        let space = FiniteProbabilitySpace::uniform(6);
        let lorentz = sandwiched_lorentz(&space, 0.75);
        let norms = [
            LatticeNorm::weighted_lp(space.clone(), 1.5).map_err(|e| e.to_string())?,
            LatticeNorm::weighted_lp(space.clone(), 2.0).map_err(|e| e.to_string())?,
            LatticeNorm::weighted_lp(space.clone(), 3.0).map_err(|e| e.to_string())?,
            convexify(&lorentz, 2.0).map_err(|e| e.to_string())?,
        ];
        for (ni, norm) in norms.iter().enumerate() {
            for k in 0..80u64 {
                let mut rng = sampling::rng_for(3_000 + ni as u64, k);
                let h = sampling::positive_density(&space, &mut rng);
                let sol = entropy_max_with(norm, &h, &EntropySolverOptions::default())
                    .map_err(|e| e.to_string())?;
                if sol.converged && sol.certificate_residual > 1e-4 {
                    return Err(format!(
                        "norm {ni} sample {k}: converged residual {:.3e} > 1e-4",
                        sol.certificate_residual
                    ));
                }
            }
        }

        // Deliberate non-maximizers: multiplicative tangent perturbations of
        // size >= 1e-2 on the sphere push the residual above 1e-5.
        let mut tested = 0usize;
        'outer: for &p in &[1.5, 2.0, 3.0] {
            let norm = LatticeNorm::weighted_lp(space.clone(), p).map_err(|e| e.to_string())?;
            for k in 0..400u64 {
                if tested >= 1_000 {
                    break 'outer;
                }
                let mut rng = sampling::rng_for(3_500 + p.to_bits(), k);
                let h = sampling::positive_density(&space, &mut rng);
                let f = norm
                    .normalize(&h.signed_power(1.0 / p))
                    .map_err(|e| e.to_string())?;
                let eta = sampling::gaussian_function(&space, &mut rng);
                let mean = eta.values().iter().sum::<f64>() / eta.len() as f64;
                let eta = eta.map(|v| v - mean);
                let mut scale = 3e-2;
                let mut perturbed = None;
                for _ in 0..40 {
                    let cand = f.zip_map(&eta, |fi, e| fi * (scale * e).exp()).unwrap();
                    let cand = norm.normalize(&cand).map_err(|e| e.to_string())?;
                    let dist = norm.eval(&cand.sub(&f).unwrap()).map_err(|e| e.to_string())?;
                    if dist >= 1e-2 {
                        perturbed = Some(cand);
                        break;
                    }
                    scale *= 2.0;
                }
                let Some(bad) = perturbed else { continue };
                let res = claim1_certificate(&norm, &h, &bad, 1e-10).map_err(|e| e.to_string())?;
                if res <= 1e-5 {
                    return Err(format!(
                        "p={p} sample {k}: perturbed residual {res:.3e} <= 1e-5"
                    ));
                }
                tested += 1;
            }
        }
        if tested < 1_000 {
            return Err(format!("only {tested} perturbed samples (need 1000)"));
        }
        Ok(())
    });
}

#[test]
fn criterion_04_power_map_sandwich() {
    criterion(4, "power-map distortion sandwich", || {
        let space = FiniteProbabilitySpace::uniform(8);
        let norms: Vec<(&str, LatticeNorm)> = vec![
            (
                "weighted-l1",
                LatticeNorm::weighted_lp(space.clone(), 1.0).map_err(|e| e.to_string())?,
            ),
            (
                "weighted-l2",
                LatticeNorm::weighted_lp(space.clone(), 2.0).map_err(|e| e.to_string())?,
            ),
            ("lorentz", sandwiched_lorentz(&space, 0.75)),
        ];
        for (name, norm) in &norms {
            for &p in &[1.5, 2.0, 3.0, 5.0] {
                let report = verify_mazur_sandwich(norm, p, 10_000, 4_000 + p.to_bits())
                    .map_err(|e| e.to_string())?;
                if report.violations_lower + report.violations_upper > 0 {
                    return Err(format!(
                        "{name} p={p}: {} lower / {} upper violations (worst margin {})",
                        report.violations_lower, report.violations_upper, report.worst_margin
                    ));
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_05_midpoint_inequality() {
    criterion(5, "midpoint inequality", || {
        let space = FiniteProbabilitySpace::uniform(6);
        let l1 = LatticeNorm::weighted_lp(space.clone(), 1.0).map_err(|e| e.to_string())?;
        let norms = [
            convexify(&l1, 2.0).map_err(|e| e.to_string())?,
            convexify(&sandwiched_lorentz(&space, 0.75), 2.0).map_err(|e| e.to_string())?,
        ];
        let solver = EntropySolverOptions::default();
        for (ni, norm) in norms.iter().enumerate() {
            for k in 0..10_000u64 {
                let mut rng = sampling::rng_for(5_000 + ni as u64, k);
                let h1 = sampling::positive_density(&space, &mut rng);
                let other = sampling::positive_density(&space, &mut rng);
                let mut r = sampling::log_uniform(&mut rng, 1e-4, 0.99);
                let mut h2 = None;
                for _ in 0..60 {
                    let cand = h1.scaled(1.0 - r).add(&other.scaled(r)).unwrap();
                    if h1.l1_distance(&cand).unwrap() <= 1.0 {
                        h2 = Some(cand);
                        break;
                    }
                    r *= 0.5;
                }
                let Some(h2) = h2 else { continue };
                let check = midpoint_check_with(norm, &h1, &h2, 1e-9, &solver)
                    .map_err(|e| e.to_string())?;
                if !check.ok {
                    return Err(format!(
                        "norm {ni} pair {k}: lhs {} < rhs {} - 1e-9 (distance {})",
                        check.lhs, check.rhs, check.l1_distance
                    ));
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_06_inverse_entropy_round_trips() {
    criterion(6, "inverse entropy round trips", || {
        let space = FiniteProbabilitySpace::uniform(6);
        let lorentz2 = convexify(&sandwiched_lorentz(&space, 0.75), 2.0).map_err(|e| e.to_string())?;
        let norms = [
            LatticeNorm::weighted_lp(space.clone(), 1.5).map_err(|e| e.to_string())?,
            LatticeNorm::weighted_lp(space.clone(), 3.0).map_err(|e| e.to_string())?,
            lorentz2,
        ];
        let solver = EntropySolverOptions {
            tol: 1e-12,
            grad_l1_tol: Some(1e-8),
            stationarity_inf_tol: Some(1e-7),
            ..Default::default()
        };
        for (ni, norm) in norms.iter().enumerate() {
            let lorentz_leg = norm.as_weighted_lp().is_none();
            let mut done = 0usize;
            let mut stream = 0u64;
            while done < 1_000 {
                stream += 1;
                if stream > 20_000 {
                    return Err(format!("norm {ni}: sample budget exhausted"));
                }
                let mut rng = sampling::rng_for(6_000 + ni as u64, stream);
                // Direction 1: h -> F_X(h) -> G. On the Lorentz-type norm the
                // entropy maximizer of a generic density has tied coordinates
                // (pooled stationarity), where the sphere is not smooth, the
                // supporting functional is set-valued, and the entropy map is
                // not injective; h is therefore drawn from the image of the
                // smooth sphere points, the regime where the composition
                // identity is well posed.
                let h = if lorentz_leg {
                    let x = sampling::sphere_point(norm, &mut rng);
                    match inverse_entropy_map(norm, &x, 1e-8) {
                        Ok(h) => h,
                        Err(_) => continue, // near-tied sample: redraw
                    }
                } else {
                    sampling::signed_density(&space, &mut rng)
                };
                let x = latsphere::entropy::entropy_max_signed_with(norm, &h, &solver)
                    .map_err(|e| e.to_string())?;
                let back = match inverse_entropy_map(norm, &x, 1e-8) {
                    Ok(b) => b,
                    Err(e) => return Err(format!("norm {ni} sample {stream}: {e}")),
                };
                let err1 = back.l1_distance(&h).unwrap();
                if err1 > 1e-6 {
                    return Err(format!(
                        "norm {ni} sample {stream}: ||G(F(h)) - h||_1 = {err1:.3e} > 1e-6"
                    ));
                }
                // Direction 2: x -> G(x) -> F_X.
                let x2 = sampling::sphere_point(norm, &mut rng);
                let h2 = match inverse_entropy_map(norm, &x2, 1e-8) {
                    Ok(h) => h,
                    Err(_) if lorentz_leg => continue,
                    Err(e) => return Err(format!("norm {ni} sample {stream}: {e}")),
                };
                let x2_back = latsphere::entropy::entropy_max_signed_with(norm, &h2, &solver)
                    .map_err(|e| e.to_string())?;
                let err2 = norm.eval(&x2_back.sub(&x2).unwrap()).unwrap();
                if err2 > 1e-5 {
                    return Err(format!(
                        "norm {ni} sample {stream}: ||F(G(x)) - x||_X = {err2:.3e} > 1e-5"
                    ));
                }
                done += 1;
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_07_convexification_constants() {
    criterion(7, "convexification constants", || {
        let space = FiniteProbabilitySpace::uniform(6);
        for &(q, base_p) in &[(1.0f64, 1.0f64), (2.0, 2.0)] {
            let base = LatticeNorm::weighted_lp(space.clone(), base_p).map_err(|e| e.to_string())?;
            let x2 = convexify(&base, 2.0).map_err(|e| e.to_string())?;
            // (**) at exponent 2: M^2(X^(2)) = 1.
            let conv = estimate_convexity(&x2, 2.0, 10_000, 3, 7_000 + q.to_bits())
                .map_err(|e| e.to_string())?;
            if conv.lower_bound > 1.0 + 1e-9 {
                return Err(format!(
                    "base L{base_p}: (**) ratio {} exceeds 1 + 1e-9",
                    conv.lower_bound
                ));
            }
            // (*) at exponent 2q: M_{2q}(X^(2)) <= M_q(base)^{1/2} = 1.
            let conc = estimate_concavity(&x2, 2.0 * q, 10_000, 3, 7_100 + q.to_bits())
                .map_err(|e| e.to_string())?;
            if conc.lower_bound > 1.0 + 1e-9 {
                return Err(format!(
                    "base L{base_p}: (*) ratio {} exceeds M_q^(1/2) + 1e-9",
                    conc.lower_bound
                ));
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_08_l1_pipeline_identities() {
    criterion(8, "L1-to-lattice pipeline identities", || {
        let space = FiniteProbabilitySpace::uniform(6);
        // q = 1 over weighted L1: identity on S(L1).
        let l1 = LatticeNorm::weighted_lp(space.clone(), 1.0).map_err(|e| e.to_string())?;
        let pipeline = build_l1_to_x(&l1, 1.0, RenormPolicy::Auto, PipelineOptions::default())
            .map_err(|e| e.to_string())?;
        for k in 0..1_000u64 {
            let mut rng = sampling::rng_for(8_000, k);
            let h = sampling::signed_density(&space, &mut rng);
            let out = pipeline.eval(&h).map_err(|e| e.to_string())?;
            let err = out.sup_distance(&h).unwrap();
            if err > 1e-8 {
                return Err(format!("identity sample {k}: {err:.3e} > 1e-8"));
            }
        }
        // Over weighted L_p: the signed power map h -> sgn(h)|h|^{1/p}.
        for &p in &[1.5, 3.0] {
            let lp = LatticeNorm::weighted_lp(space.clone(), p).map_err(|e| e.to_string())?;
            let pipeline = build_l1_to_x(&lp, p, RenormPolicy::Auto, PipelineOptions::default())
                .map_err(|e| e.to_string())?;
            for k in 0..1_000u64 {
                let mut rng = sampling::rng_for(8_100 + p.to_bits(), k);
                let h = sampling::signed_density(&space, &mut rng);
                let out = pipeline.eval(&h).map_err(|e| e.to_string())?;
                let expected = h.signed_power(1.0 / p);
                let err = out.sup_distance(&expected).unwrap();
                if err > 1e-7 {
                    return Err(format!("p={p} sample {k}: {err:.3e} > 1e-7"));
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_09_lattice_to_lattice_pipeline() {
    criterion(9, "lattice-to-lattice pipeline", || {
        let space = FiniteProbabilitySpace::uniform(6);
        let l2 = LatticeNorm::weighted_lp(space.clone(), 2.0).map_err(|e| e.to_string())?;
        // X = Y: cancellation within 1e-6.
        let idp = build_x_to_y(&l2, 2.0, &l2, 2.0, RenormPolicy::Auto, PipelineOptions::default())
            .map_err(|e| e.to_string())?;
        for k in 0..1_000u64 {
            let mut rng = sampling::rng_for(9_000, k);
            let x = sampling::sphere_point(&l2, &mut rng);
            let out = idp.eval(&x).map_err(|e| e.to_string())?;
            let err = l2.eval(&out.sub(&x).unwrap()).unwrap();
            if err > 1e-6 {
                return Err(format!("cancellation sample {k}: {err:.3e} > 1e-6"));
            }
        }
        // L_p -> L_r matches the power-ratio map; forward∘inverse is the
        // identity.
        let (p, r) = (1.5, 3.0);
        let lp = LatticeNorm::weighted_lp(space.clone(), p).map_err(|e| e.to_string())?;
        let lr = LatticeNorm::weighted_lp(space.clone(), r).map_err(|e| e.to_string())?;
        let pipeline = build_x_to_y(&lp, p, &lr, r, RenormPolicy::Auto, PipelineOptions::default())
            .map_err(|e| e.to_string())?;
        let inverse = pipeline.inverse();
        for k in 0..1_000u64 {
            let mut rng = sampling::rng_for(9_100, k);
            let x = sampling::sphere_point(&lp, &mut rng);
            let out = pipeline.eval(&x).map_err(|e| e.to_string())?;
            let expected = x.signed_power(p / r);
            let err = out.sup_distance(&expected).unwrap();
            if err > 1e-6 {
                return Err(format!("power-map sample {k}: {err:.3e} > 1e-6"));
            }
            let back = inverse.eval(&out).map_err(|e| e.to_string())?;
            let rt = lp.eval(&back.sub(&x).unwrap()).unwrap();
            if rt > 1e-5 {
                return Err(format!("round-trip sample {k}: {rt:.3e} > 1e-5"));
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_10_sup_norm_degeneracy_probe() {
    criterion(10, "sup-norm degeneracy probe", || {
        let probe = linf_degeneracy_probe_with_eps(2, 1e-3).map_err(|e| e.to_string())?;
        if probe.input_gap > 1e-3 + 1e-15 {
            return Err(format!("input gap {} exceeds 1e-3", probe.input_gap));
        }
        if probe.output_gap < 1.0 - 1e-6 {
            return Err(format!("output gap {} below 1 - 1e-6", probe.output_gap));
        }
        // Brute-force grid oracle at n = 2, step 1e-4, restricted to supp h.
        let space = FiniteProbabilitySpace::uniform(2);
        let brute = |h: &LatticeFunction| -> Vec<f64> {
            let steps = 10_000usize;
            let supp = h.support();
            let mut best = (f64::NEG_INFINITY, vec![0.0, 0.0]);
            for lead in &supp {
                for k in 0..=steps {
                    let other = k as f64 / steps as f64;
                    let mut f = vec![0.0, 0.0];
                    f[*lead] = 1.0;
                    for &j in &supp {
                        if j != *lead {
                            f[j] = other;
                        }
                    }
                    let mut e = 0.0;
                    let mut feasible = true;
                    for (i, &fi) in f.iter().enumerate() {
                        if h.get(i) != 0.0 {
                            if fi <= 0.0 {
                                feasible = false;
                                break;
                            }
                            e += space.weight(i) * h.get(i) * fi.ln();
                        }
                    }
                    if feasible && e > best.0 {
                        best = (e, f);
                    }
                }
            }
            best.1
        };
        for (h, f) in [(&probe.h_near, &probe.f_near), (&probe.h_far, &probe.f_far)] {
            let grid = brute(h);
            let grid = LatticeFunction::new(space.clone(), grid).unwrap();
            let err = f.sup_distance(&grid).unwrap();
            if err > 1e-3 {
                return Err(format!("solver disagrees with grid oracle by {err:.3e}"));
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_11_modulus_curves() {
    criterion(11, "modulus curves", || {
        let space = FiniteProbabilitySpace::uniform(4);
        let l2 = LatticeNorm::weighted_lp(space.clone(), 2.0).map_err(|e| e.to_string())?;
        // Uniform convexity of L2 against the Hilbert-space formula.
        let curve = estimate_ucx_modulus(&l2, &[0.5, 1.0], 600, 11_000).map_err(|e| e.to_string())?;
        for point in &curve.grid {
            let exact = 1.0 - (1.0 - point.argument * point.argument / 4.0).sqrt();
            let est = point
                .estimate
                .ok_or_else(|| format!("infeasible grid point {}", point.argument))?;
            if (est - exact).abs() > 1e-3 {
                return Err(format!(
                    "delta-hat({}) = {est} vs Hilbert {exact} (gap {:.3e})",
                    point.argument,
                    (est - exact).abs()
                ));
            }
        }
        // Uniform smoothness of L2 under the Hilbert envelope.
        let rho = estimate_smoothness_modulus(&l2, &[0.25, 0.5, 1.0], 400, 11_100)
            .map_err(|e| e.to_string())?;
        for point in &rho.grid {
            let bound = (1.0 + point.argument * point.argument).sqrt() - 1.0;
            let est = point.estimate.unwrap_or(0.0);
            if est > bound + 1e-9 {
                return Err(format!(
                    "rho-hat({}) = {est} exceeds Hilbert bound {bound}",
                    point.argument
                ));
            }
        }
        // Power type 2 of the 2-convexification of L1.
        let l1 = LatticeNorm::weighted_lp(space.clone(), 1.0).map_err(|e| e.to_string())?;
        let x2 = convexify(&l1, 2.0).map_err(|e| e.to_string())?;
        let curve = estimate_ucx_modulus(&x2, &[0.2, 0.4, 0.6, 0.8, 1.0], 600, 11_200)
            .map_err(|e| e.to_string())?;
        let fit = curve
            .fit_power_law()
            .ok_or("power fit needs positive estimates")?;
        if (fit.exponent - 2.0).abs() > 0.2 {
            return Err(format!(
                "fitted power exponent {} not within 10% of 2",
                fit.exponent
            ));
        }
        Ok(())
    });
}

#[test]
fn criterion_12_cli_determinism() {
    criterion(12, "CLI determinism", || {
        let bin = env!("CARGO_BIN_EXE_latsphere");
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config_path = dir.path().join("config.toml");
        std::fs::write(
            &config_path,
            r#"
version = 1
seed = 20260809

[space]
weights = [0.4, 0.3, 0.2, 0.1]

[norms.l1]
variant = "weighted-lp"
p = 1.0

[norms.lor]
variant = "lorentz"
weights = [1.0, 0.7, 0.5, 0.3]
p = 1.0
sandwich = true

[norms.lor2]
variant = "convexified"
base = "lor"
p = 2.0
"#,
        )
        .map_err(|e| e.to_string())?;

        let tasks: &[(&str, Vec<&str>)] = &[
            (
                "mazur-verify",
                vec!["mazur", "verify", "--norm", "l1", "--p", "2", "--pairs", "400"],
            ),
            (
                "midpoint",
                vec!["entropy", "midpoint", "--norm", "lor2", "--pairs", "120"],
            ),
            (
                "modulus-ucx",
                vec![
                    "modulus", "ucx", "--norm", "l1", "--grid", "0.5,1.0", "--pairs", "120",
                ],
            ),
        ];
        for (csv_name, args) in tasks {
            let mut bytes: Vec<Vec<u8>> = Vec::new();
            for run in 0..2 {
                let out_dir = dir.path().join(format!("{csv_name}-{run}"));
                let status = std::process::Command::new(bin)
                    .arg("--config")
                    .arg(&config_path)
                    .arg("--out")
                    .arg(&out_dir)
                    .args(args.iter())
                    .output()
                    .map_err(|e| e.to_string())?;
                if !status.status.success() {
                    return Err(format!(
                        "{csv_name} run {run} failed: {}",
                        String::from_utf8_lossy(&status.stderr)
                    ));
                }
                let csv = std::fs::read(out_dir.join(format!("{csv_name}.csv")))
                    .map_err(|e| e.to_string())?;
                bytes.push(csv);
            }
            if bytes[0] != bytes[1] {
                return Err(format!("{csv_name}: CSV bytes differ between identical runs"));
            }
        }
        Ok(())
    });
}
