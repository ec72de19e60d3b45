//! End-to-end flows through the `latsphere` binary: every subcommand family,
//! report structure, exit codes, and CSV re-derivation via `emit`.

use std::path::Path;
use std::process::Output;

fn run_bin(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_latsphere"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        r#"
version = 1
seed = 99

[space]
weights = [0.4, 0.3, 0.3]

[norms.l1]
variant = "weighted-lp"
p = 1.0

[norms.l2]
variant = "weighted-lp"
p = 2.0

[norms.l3]
variant = "weighted-lp"
p = 3.0

[norms.lor]
variant = "lorentz"
weights = [1.0, 0.7, 0.4]
p = 1.0
sandwich = true
"#,
    )
    .unwrap();
    path
}

fn report_json(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("report.json")).expect("report exists");
    serde_json::from_str(&text).expect("valid json")
}

#[test]
fn reports_embed_version_seed_and_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    let res = run_bin(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "mazur",
        "verify",
        "--norm",
        "l1",
        "--p",
        "2",
        "--pairs",
        "50",
    ]);
    assert!(res.status.success());
    let report = report_json(&out);
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["seed"], 99);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["summary"]["violations"], 0);
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    let res = run_bin(&[
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
        "constants",
        "estimate",
        "--norm",
        "lor",
        "--kind",
        "concavity",
        "--exponent",
        "2.0",
        "--tuples",
        "100",
    ]);
    assert!(res.status.success());
    let report = report_json(&out);
    assert_eq!(report["seed"], 7);
    assert!(report["payload"]["lower_bound"].as_f64().unwrap() >= 1.0);
    let csv = std::fs::read_to_string(out.join("constants.csv")).unwrap();
    assert!(csv.starts_with("kind,parameter,value,witness_id"));
}

#[test]
fn homeo_build_profile_and_emit() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_build = dir.path().join("build");
    let res = run_bin(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_build.to_str().unwrap(),
        "homeo",
        "build",
        "--from",
        "l2",
        "--to",
        "l3",
        "--q",
        "2",
        "--q2",
        "3",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = report_json(&out_build);
    assert!(report["payload"]["round_trip_max_error"].as_f64().unwrap() < 1e-5);

    let out_profile = dir.path().join("profile");
    let res = run_bin(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_profile.to_str().unwrap(),
        "homeo",
        "profile",
        "--from",
        "l2",
        "--q",
        "2",
        "--pairs",
        "60",
        "--bins",
        "0.1,0.4,0.8",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv_direct = std::fs::read_to_string(out_profile.join("homeo-profile.csv")).unwrap();
    assert!(csv_direct.starts_with("t_edge,max_out,samples"));

    // Re-derive the CSV from the report.
    let emitted = dir.path().join("emitted.csv");
    let res = run_bin(&[
        "emit",
        "--report",
        out_profile.join("report.json").to_str().unwrap(),
        "--out-csv",
        emitted.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv_emitted = std::fs::read_to_string(&emitted).unwrap();
    assert_eq!(csv_direct, csv_emitted);
}

#[test]
fn modulus_map_profiles_a_single_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    let res = run_bin(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "modulus",
        "map",
        "--stage",
        "mazur",
        "--norm",
        "l1",
        "--p",
        "2",
        "--pairs",
        "80",
        "--bins",
        "0.1,0.3,0.7",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.join("modulus-map.csv")).unwrap();
    assert!(csv.lines().count() >= 2);
}

#[test]
fn dual_support_solves_from_vector_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let x_path = dir.path().join("x.txt");
    std::fs::write(&x_path, "1.0 0.5 -0.25\n").unwrap();
    let out = dir.path().join("out");
    let res = run_bin(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "dual",
        "support",
        "--norm",
        "l2",
        "--x",
        x_path.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = report_json(&out);
    let pairing = report["summary"]["pairing"].as_f64().unwrap();
    assert!((pairing - 1.0).abs() < 1e-9);
}

#[test]
fn malformed_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    // Missing weights entirely.
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "version = 1\n[space]\n").unwrap();
    let res = run_bin(&[
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "run",
    ]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("line"), "error should carry a location: {stderr}");

    // Unknown key in the task table.
    let bad2 = dir.path().join("bad2.toml");
    std::fs::write(
        &bad2,
        r#"
version = 1
[space]
weights = [1.0]
[task]
kind = "probe"
n = 2
surprise = true
"#,
    )
    .unwrap();
    let res = run_bin(&[
        "--config",
        bad2.to_str().unwrap(),
        "--out",
        dir.path().join("o2").to_str().unwrap(),
        "run",
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn run_mode_uses_the_config_task() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("full.toml");
    std::fs::write(
        &path,
        r#"
version = 1
seed = 4

[space]
weights = [0.5, 0.5]

[norms.l2]
variant = "weighted-lp"
p = 2.0

[task]
kind = "entropy-solve"
norm = "l2"
h = [1.2, 0.8]
tol = 1e-10
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = run_bin(&[
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "run",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = report_json(&out);
    // Maximizer of L2 entropy is h^{1/2}.
    let maximizer = report["payload"]["signed_maximizer"].as_array().unwrap();
    assert!((maximizer[0].as_f64().unwrap() - 1.2f64.sqrt()).abs() < 1e-8);
    assert!((maximizer[1].as_f64().unwrap() - 0.8f64.sqrt()).abs() < 1e-8);
}
