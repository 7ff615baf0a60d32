//! End-to-end tests of the binary: every command, every exit code, and the
//! reproducibility guarantee, driven through real files in a temp dir.

use std::path::Path;
use std::process::{Command, Output};

use schottky_core::{canonical_translations, AffineDeformation, GroupSpec, Vector};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_schottky"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes the d=1 demo description and returns its path.
fn demo_spec(dir: &Path) -> String {
    let path = dir.join("demo.json").display().to_string();
    let out = run(&["gen", "--d", "1", "--n", "2", "--out", &path]);
    assert_eq!(exit_code(&out), 0, "gen failed: {}", stderr_of(&out));
    path
}

#[test]
fn gen_writes_descriptions_that_build() {
    let dir = tempfile::tempdir().unwrap();
    let path = demo_spec(dir.path());
    let spec: GroupSpec = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(spec.d, 1);
    assert_eq!(spec.n, 2);
    assert_eq!(spec.thetas.len(), 4);
    assert!((spec.epsilon - 0.75).abs() < 1e-15);
    assert!((spec.g_less[0][0][0] - 1e-3).abs() < 1e-15);
    spec.build().expect("demo builds");

    let p3 = dir.path().join("d3.json").display().to_string();
    let out = run(&[
        "gen", "--d", "3", "--n", "2", "--strength", "1e-4", "--out", &p3,
    ]);
    assert_eq!(exit_code(&out), 0);
    let spec3: GroupSpec = serde_json::from_str(&std::fs::read_to_string(&p3).unwrap()).unwrap();
    assert_eq!(spec3.d, 3);
    let (ctx, _) = spec3.build().expect("7-dimensional description builds");
    assert_eq!(ctx.dim(), 7);
}

#[test]
fn gen_refuses_even_dimension_citing_the_wings() {
    let out = run(&["gen", "--d", "2", "--n", "2"]);
    assert_eq!(exit_code(&out), 2);
    let err = stderr_of(&out);
    assert!(err.contains("even"), "unexpected message: {err}");
    assert!(err.contains("wing"), "unexpected message: {err}");
}

#[test]
fn gen_rejects_bad_parameters() {
    assert_eq!(exit_code(&run(&["gen", "--d", "1", "--strength", "1.5"])), 3);
    assert_eq!(exit_code(&run(&["gen", "--d", "1", "--strength", "0.0"])), 3);
    assert_eq!(exit_code(&run(&["gen", "--d", "1", "--n", "0"])), 3);
    assert_eq!(exit_code(&run(&["gen", "--d", "1", "--epsilon", "2.0"])), 3);
    // Wrong arity for the angle override.
    let out = run(&["gen", "--d", "1", "--n", "2", "--thetas", "0.0,1.0"]);
    assert_eq!(exit_code(&out), 3);
    // Unknown flags are argument errors, not crashes.
    assert_eq!(exit_code(&run(&["gen", "--bogus"])), 3);
}

#[test]
fn certify_demo_passes_and_reports_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let spec = demo_spec(dir.path());
    let report_path = dir.path().join("report.json").display().to_string();
    let out = run(&["certify", &spec, "--out", &report_path]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["schema"], "certify v1");
    assert_eq!(report["passed"], true);
    assert_eq!(report["ping_pong"]["passed"], true);
    assert_eq!(report["tan4_ok"], true);
    assert_eq!(report["products"]["passed"], true);
    assert_eq!(report["admissibility"]["admissible"], true);
    assert_eq!(report["angle_control"]["passed"], true);
    // Sampled verdicts carry their provenance.
    assert_eq!(report["config"]["seed"], 7);
    assert!(report["config"]["samples"].as_u64().unwrap() >= 100);
    assert!(report["ping_pong"]["min_domain_gap"].as_f64().unwrap() > 0.0);
    assert!(report["admissibility"]["d_min"].as_f64().unwrap() > 0.0);
}

#[test]
fn certify_sabotaged_strength_fails_with_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("sab.json").display().to_string();
    let out = run(&[
        "gen", "--d", "1", "--n", "2", "--strength", "0.5", "--out", &spec_path,
    ]);
    assert_eq!(exit_code(&out), 0);
    let report_path = dir.path().join("sab_report.json").display().to_string();
    let out = run(&["certify", &spec_path, "--out", &report_path]);
    assert_eq!(exit_code(&out), 1);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    let witnesses = report["ping_pong"]["inclusions"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|m| !m["witness"].is_null())
        .count();
    assert!(witnesses > 0, "a failed inclusion names a witness");
    // Stages that need a certified group are skipped, not faked.
    assert!(report["products"].is_null());
    assert!(report["admissibility"].is_null());
}

#[test]
fn certify_rejects_malformed_descriptions() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"d\": 1, \"n\":").unwrap();
    let out = run(&["certify", &bad.display().to_string()]);
    assert_eq!(exit_code(&out), 3);
    let missing = dir.path().join("missing.json").display().to_string();
    assert_eq!(exit_code(&run(&["certify", &missing])), 3);
    assert_eq!(exit_code(&run(&["certify", &missing, "--samples", "50"])), 3);
}

#[test]
fn trace_random_starts_all_land() {
    let dir = tempfile::tempdir().unwrap();
    let spec = demo_spec(dir.path());
    let csv_path = dir.path().join("traces.csv").display().to_string();
    let out = run(&[
        "trace", &spec, "--random", "200", "--seed", "9", "--out", &csv_path,
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("# schema: trace v1\n"));
    assert!(csv.contains("point,status,step,i,sigma,c0,c1,c2,a,delta"));
    let rows: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("point"))
        .collect();
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("landed")));
    // Every start appears exactly once per trace step, none missing.
    let points: std::collections::BTreeSet<&str> =
        rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(points.len(), 200);
    assert!(csv.lines().last().unwrap().contains("rate 1.0000"));
}

#[test]
fn trace_handles_fundamental_deep_and_budget_starts() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = demo_spec(dir.path());
    // Build the same group the binary sees to place starts precisely.
    let spec: GroupSpec =
        serde_json::from_str(&std::fs::read_to_string(&spec_path).unwrap()).unwrap();
    let (ctx, mut group) = spec.build().unwrap();
    group.certify(&ctx, 2000, 7).unwrap();
    let t0 = canonical_translations(&group).unwrap();
    let def = AffineDeformation::new(&ctx, &group, &t0).unwrap();
    // A start near the origin sits in the fundamental domain; pushing it
    // through two generators costs two pullback steps to come home.
    let home = Vector::from_vec(vec![0.1, 0.2, 0.05]);
    let deep = def.map(0).apply(&def.map(1).apply(&home));
    let points_path = dir.path().join("starts.csv");
    std::fs::write(
        &points_path,
        format!(
            "# starts\n{},{},{}\n{},{},{}\n",
            home[0], home[1], home[2], deep[0], deep[1], deep[2]
        ),
    )
    .unwrap();
    let points = points_path.display().to_string();

    let csv_path = dir.path().join("traces.csv").display().to_string();
    let out = run(&["trace", &spec_path, "--points", &points, "--out", &csv_path]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let rows: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("point"))
        .collect();
    // Point 0: one empty-letter row. Point 1: letters a then b.
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("0,landed,0,,,"));
    assert!(rows[1].starts_with("1,landed,1,1,1,"));
    assert!(rows[2].starts_with("1,landed,2,2,1,"));

    // One step of budget is not enough for the deep start.
    let short_path = dir.path().join("short.csv").display().to_string();
    let out = run(&[
        "trace", &spec_path, "--points", &points, "--max-steps", "1", "--out", &short_path,
    ]);
    assert_eq!(exit_code(&out), 1, "budget exhaustion is a failed verdict");
    let csv = std::fs::read_to_string(&short_path).unwrap();
    assert!(
        csv.lines().any(|l| l.starts_with("1,budget,")),
        "deep start reports budget: {csv}"
    );
}

#[test]
fn trace_validates_its_inputs_and_gate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = demo_spec(dir.path());
    // Exactly one source of starting points.
    assert_eq!(exit_code(&run(&["trace", &spec])), 3);
    let pts = dir.path().join("p.csv").display().to_string();
    std::fs::write(&pts, "0.0,0.0,0.0\n").unwrap();
    let out = run(&["trace", &spec, "--random", "5", "--points", &pts]);
    assert_eq!(exit_code(&out), 3);
    // Wrong arity inside the points file.
    std::fs::write(&pts, "1.0,2.0\n").unwrap();
    assert_eq!(exit_code(&run(&["trace", &spec, "--points", &pts])), 3);

    // A group that fails certification is refused without --force.
    let sab = dir.path().join("sab.json").display().to_string();
    run(&["gen", "--d", "1", "--n", "2", "--strength", "0.5", "--out", &sab]);
    let out = run(&["trace", &sab, "--random", "5"]);
    assert_eq!(exit_code(&out), 4);
    assert!(stderr_of(&out).contains("--force"));
    // --force walks past the gate but the deformation layer still refuses.
    let out = run(&["trace", &sab, "--random", "5", "--force"]);
    assert_eq!(exit_code(&out), 4);
}

#[test]
fn export_writes_versioned_deterministic_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let spec = demo_spec(dir.path());
    for what in ["wings", "domains", "tiles"] {
        let a = dir.path().join(format!("{what}_a.csv")).display().to_string();
        let b = dir.path().join(format!("{what}_b.csv")).display().to_string();
        let out = run(&[
            "export", &spec, "--what", what, "--resolution", "40", "--out", &a,
        ]);
        assert_eq!(exit_code(&out), 0, "{what}: {}", stderr_of(&out));
        let out = run(&[
            "export", &spec, "--what", what, "--resolution", "40", "--out", &b,
        ]);
        assert_eq!(exit_code(&out), 0);
        let cloud = std::fs::read_to_string(&a).unwrap();
        assert_eq!(
            cloud,
            std::fs::read_to_string(&b).unwrap(),
            "{what} reruns are byte-identical"
        );
        assert!(cloud.starts_with("# schema: export v1\n"));
        assert!(cloud.contains("set,index,side,c0,c1,c2"));
        let rows = cloud
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("set"))
            .count();
        // Two generators, two sides each, 40 points per cloud.
        assert_eq!(rows, 160, "{what} cloud count");
    }
    assert_eq!(
        exit_code(&run(&["export", &spec, "--what", "wings", "--resolution", "0"])),
        3
    );
}

#[test]
fn export_gates_cone_clouds_on_certification() {
    let dir = tempfile::tempdir().unwrap();
    let sab = dir.path().join("sab.json").display().to_string();
    run(&["gen", "--d", "1", "--n", "2", "--strength", "0.5", "--out", &sab]);
    // Wing clouds never need the group dynamics.
    let wings = dir.path().join("w.csv").display().to_string();
    let out = run(&[
        "export", &sab, "--what", "wings", "--resolution", "10", "--out", &wings,
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    // Cone clouds do.
    let out = run(&["export", &sab, "--what", "domains", "--resolution", "10"]);
    assert_eq!(exit_code(&out), 4);
}

#[test]
fn certify_reports_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let spec = demo_spec(dir.path());
    let a = dir.path().join("a.json").display().to_string();
    let b = dir.path().join("b.json").display().to_string();
    let out = run(&["certify", &spec, "--seed", "11", "--out", &a]);
    assert_eq!(exit_code(&out), 0);
    let out = run(&["certify", &spec, "--seed", "11", "--out", &b]);
    assert_eq!(exit_code(&out), 0);
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        "same seed, same bytes"
    );
    // A different seed still passes but samples differently.
    let c = dir.path().join("c.json").display().to_string();
    let out = run(&["certify", &spec, "--seed", "12", "--out", &c]);
    assert_eq!(exit_code(&out), 0);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}
