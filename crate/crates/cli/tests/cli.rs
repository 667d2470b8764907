use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

fn plap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn plap")
}

fn run_ok(args: &[&str]) {
    let out = plap(args);
    assert!(out.status.success(), "plap {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(dir, "manifest.json")).unwrap()
}

fn assert_manifest_complete(dir: &Path) {
    let listed: BTreeSet<String> = manifest(dir)["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap().to_string())
        .collect();
    let present: BTreeSet<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(listed, present);
}

fn cells(line: &str) -> Vec<f64> {
    line.split(',').map(|c| c.parse().unwrap()).collect()
}

#[test]
fn reference_disk_rows() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["reference", "--domain", "disk", "--out", dir.path().to_str().unwrap()]);
    let csv = read(dir.path(), "reference.csv");
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "name,value,source");
    for want in ["h1,2.00000,formula", "h2,3.15430,constant", "Lambda1,1.00000,formula", "Lambda2,2.00000,formula"] {
        assert!(rows.contains(&want), "missing {want} in\n{csv}");
    }
    assert_manifest_complete(dir.path());
}

#[test]
fn reference_square_cheeger() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["reference", "--domain", "square", "--out", dir.path().to_str().unwrap()]);
    let csv = read(dir.path(), "reference.csv");
    assert!(csv.contains("h1,1.88623,formula"), "{csv}");
    assert!(csv.contains("Lambda1,1.00000,formula"), "{csv}");
}

#[test]
fn empty_p_list_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["sweep", "--p", "", "--classes", "S1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(read(dir.path(), "eigenvalues.csv"), "p,lambda1,lambda2,lambda_S1\n");
    assert_manifest_complete(dir.path());
}

#[test]
fn second_on_small_square() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    run_ok(&["second", "--domain", "square", "--triangles", "400", "--p", "2", "--out", d]);
    let csv = read(dir.path(), "eigenvalues.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("p,lambda1,lambda2"));
    let row = cells(lines.next().unwrap());
    // coarse-mesh values sit a few percent above π²/2 and 5π²/4
    assert!((row[1] / 4.9348 - 1.0).abs() < 0.05, "{row:?}");
    assert!((row[2] / 12.337 - 1.0).abs() < 0.08, "{row:?}");
    for f in ["mesh.txt", "u1_p2.field", "u2_p2.field", "eigen_p2.vtk", "trace_cdm_p2.csv", "trace_cmpa_p2.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(read(dir.path(), "eigen_p2.vtk").contains("SCALARS u2 double 1"));
    let m = manifest(dir.path());
    assert_eq!(m["command"], "second");
    assert_eq!(m["points"][0]["ok"], true);
    assert!(m["points"][0]["first"]["iterations"].as_u64().unwrap() > 0);
    assert!(m["mesh"]["n_triangles"].as_u64().unwrap() > 0);
    assert_manifest_complete(dir.path());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let common = ["first", "--domain", "disk", "--triangles", "300", "--p", "1.5,2,3"];
    run_ok(&[&common[..], &["--threads", "1", "--out", a.path().to_str().unwrap()]].concat());
    run_ok(&[&common[..], &["--threads", "3", "--out", b.path().to_str().unwrap()]].concat());
    for f in ["eigenvalues.csv", "trace_cdm_p1.5.csv", "trace_cdm_p3.csv", "u1_p2.field", "mesh.txt"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    assert_eq!(read(a.path(), "eigenvalues.csv").lines().count(), 4);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        r#"{"domain": "square", "p": [3.0], "triangles": 200, "cdm": {"w_tol": 1e-5}}"#,
    )
    .unwrap();
    run_ok(&["first", "--config", cfg.to_str().unwrap(), "--p", "2", "--out", out.to_str().unwrap()]);
    let csv = read(&out, "eigenvalues.csv");
    assert!(csv.lines().nth(1).unwrap().starts_with("2.00000,"), "{csv}");
    let m = manifest(&out);
    assert_eq!(m["config"]["cdm"]["w_tol"], 1e-5);
    assert_eq!(m["config"]["triangles"], 200);
}

#[test]
fn radial_writes_profiles() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["radial", "--p", "2", "--intervals", "200", "--out", dir.path().to_str().unwrap()]);
    let csv = read(dir.path(), "radial.csv");
    let row = cells(csv.lines().nth(1).unwrap());
    assert!((row[1] / 5.7832 - 1.0).abs() < 1e-3, "{row:?}");
    assert!((row[2] / 30.471 - 1.0).abs() < 5e-3, "{row:?}");
    let profile = read(dir.path(), "radial_u2_p2.csv");
    assert_eq!(profile.lines().next(), Some("r,u"));
    assert_eq!(profile.lines().count(), 202);
    assert_manifest_complete(dir.path());
}

#[test]
fn field_file_as_midpoint() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    run_ok(&["second", "--domain", "square", "--triangles", "200", "--p", "2", "--out", first.to_str().unwrap()]);
    let em = first.join("u2_p2.field");
    let second = dir.path().join("b");
    run_ok(&[
        "second", "--domain", "square", "--triangles", "200", "--p", "2", "--em", em.to_str().unwrap(), "--out",
        second.to_str().unwrap(),
    ]);
    let l = |d: &Path| cells(read(d, "eigenvalues.csv").lines().nth(1).unwrap())[2];
    assert!((l(&first) / l(&second) - 1.0).abs() < 1e-4);
}

#[test]
fn invalid_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["first", "--p", "20", "--out", d],
        vec!["first", "--domain", "torus", "--out", d],
        vec!["first", "--em", "/nonexistent.field", "--out", d],
        vec!["radial", "--domain", "square", "--out", d],
        vec!["sweep", "--domain", "triangle", "--classes", "S2", "--out", d],
    ] {
        let out = plap(&args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"), "{args:?}");
    }
}
