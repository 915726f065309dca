use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn modlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modlink"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = modlink(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn bench(dir: &Path) -> PathBuf {
    ok(&["gen", "--out", s(&dir.join("bench"))]);
    dir.join("bench/manifest.json")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sweep_single_point_single_entry() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let out = dir.path().join("sweep");
    ok(&[
        "sweep",
        "--manifest",
        s(&m),
        "--ops",
        "0.02",
        "--freq",
        "1:1000:37",
        "--entries",
        "displacement/force",
        "--out",
        s(&out),
    ]);
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 37);
    assert_eq!(lines[0], "op,omega_rad_s,abs[displacement/force],arg[displacement/force]");
    let index = json(&out.join("sweep.json"));
    assert_eq!(index["n_frequencies"], 37);
}

#[test]
fn fifty_positions_need_two_subsystem_frfs() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let cache = dir.path().join("cache");
    let run = |out: &str| {
        ok(&[
            "sweep",
            "--manifest",
            s(&m),
            "--ops",
            "grid:-0.1:0.1:50",
            "--freq",
            "1:2000:50",
            "--cache",
            s(&cache),
            "--out",
            s(&dir.path().join(out)),
        ]);
        json(&dir.path().join(out).join("sweep.json"))["cache"].clone()
    };
    let cold = run("cold");
    assert_eq!(cold["evaluations"], 2);
    let warm = run("warm");
    assert_eq!(warm["evaluations"], 0);
    assert_eq!(warm["hits"], 2);
    let a = std::fs::read(dir.path().join("cold/sweep.csv")).unwrap();
    let b = std::fs::read(dir.path().join("warm/sweep.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn changed_matrix_file_misses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let cache = dir.path().join("cache");
    let args = |out: &Path| {
        vec![
            "sweep".to_string(),
            "--manifest".into(),
            s(&m).into(),
            "--ops".into(),
            "0".into(),
            "--freq".into(),
            "1:100:5".into(),
            "--cache".into(),
            s(&cache).into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let run = |out: &Path| {
        let a = args(out);
        ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
        json(&out.join("sweep.json"))["cache"]["evaluations"].as_u64().unwrap()
    };
    assert_eq!(run(&dir.path().join("a")), 2);
    // Perturb one stiffness entry in the last digit.
    let k = dir.path().join("bench/yz_stage/K.mtx");
    let text = std::fs::read_to_string(&k).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let idx = lines.iter().position(|l| !l.starts_with('%')).unwrap() + 1;
    let mut parts: Vec<String> = lines[idx].split_whitespace().map(String::from).collect();
    let v: f64 = parts[2].parse().unwrap();
    parts[2] = format!("{:?}", f64::from_bits(v.to_bits() ^ 1));
    lines[idx] = parts.join(" ");
    std::fs::write(&k, lines.join("\n") + "\n").unwrap();
    assert_eq!(run(&dir.path().join("b")), 1);
}

#[test]
fn search_orders_pass_and_reports_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let out = dir.path().join("search");
    let stdout = ok(&[
        "search",
        "--manifest",
        s(&m),
        "--method",
        "x_stage=bt,yz_stage=cb",
        "--threshold",
        "0.1",
        "--freq",
        "1:2000:150",
        "--ops",
        "grid:-0.1:0.1:3",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("verified"));
    let report = json(&out.join("search.json"));
    assert!(report["verified_max_error"].as_f64().unwrap() < 0.1);
    let text = std::fs::read_to_string(out.join("final_orders.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("subsystem,method,n,r,"));
    let per_point = std::fs::read_to_string(out.join("per_point_orders.csv")).unwrap();
    assert_eq!(per_point.lines().count(), 1 + 2 * 3);
    assert!(out.join("error_report.csv").is_file());
}

#[test]
fn reduce_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let red = dir.path().join("red");
    ok(&[
        "reduce",
        "--manifest",
        s(&m),
        "--method",
        "x_stage=cb,yz_stage=bt",
        "--order",
        "x_stage=12,yz_stage=30",
        "--freq",
        "1:2000:100",
        "--ops",
        "0;0.05",
        "--out",
        s(&red),
    ]);
    let sidecar = json(&red.join("bases/x_stage.json"));
    assert_eq!(sidecar["method"], "cb");
    assert_eq!(sidecar["order"], 12);
    assert!(red.join("bases/x_stage_V.mtx").is_file());
    assert!(red.join("bases/yz_stage_W.mtx").is_file());

    let cmp = dir.path().join("cmp");
    let reduced = red.join("manifest.json");
    let base = [
        "compare",
        "--manifest",
        s(&m),
        "--reduced",
        s(&reduced),
        "--freq",
        "1:2000:100",
        "--ops",
        "0;0.05",
        "--out",
        s(&cmp),
    ];
    ok(&base);
    let report = json(&cmp.join("error_report.json"));
    let max = report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["max_error"].as_f64().unwrap())
        .fold(0.0, f64::max);
    assert!(max > 0.0);

    let mut strict = base.to_vec();
    strict.extend(["--threshold", "1e-9"]);
    assert_eq!(modlink(&strict).status.code(), Some(2));
}

#[test]
fn compare_with_itself_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let out = dir.path().join("cmp");
    ok(&[
        "compare",
        "--manifest",
        s(&m),
        "--reduced",
        s(&m),
        "--freq",
        "1:500:40",
        "--out",
        s(&out),
        "--threshold",
        "1e-300",
    ]);
    let report = json(&out.join("error_report.json"));
    for e in report["entries"].as_array().unwrap() {
        assert_eq!(e["max_error"], 0.0);
    }
}

#[test]
fn finer_virtual_grid_approaches_the_static_reference() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen", "--static", "--out", s(&dir.path().join("static"))]);
    let reference = dir.path().join("static/manifest.json");
    let error = |n_v: &str| {
        let gen = dir.path().join(format!("nv{n_v}"));
        ok(&["gen", "--n-v", n_v, "--stiffness-scale", "1", "--out", s(&gen)]);
        let out = dir.path().join(format!("cmp{n_v}"));
        ok(&[
            "compare",
            "--manifest",
            s(&reference),
            "--reduced",
            s(&gen.join("manifest.json")),
            "--freq",
            "1:1000:80",
            "--ops",
            "0.06",
            "--out",
            s(&out),
        ]);
        json(&out.join("error_report.json"))["entries"][0]["max_error"].as_f64().unwrap()
    };
    let (coarse, fine) = (error("3"), error("9"));
    assert!(fine < coarse, "n_v 9: {fine}, n_v 3: {coarse}");
}

#[test]
fn assemble_writes_coupling_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let out = dir.path().join("asm");
    ok(&["assemble", "--manifest", s(&m), "--ops", "0;0.05", "--out", s(&out)]);
    assert!(out.join("K11_op0.mtx").is_file());
    assert!(out.join("K11_op1.mtx").is_file());
    assert_eq!(json(&out.join("assemble.json"))["operating_points"].as_array().unwrap().len(), 2);
}

#[test]
fn normalized_sweep_changes_presentation_only() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let out = dir.path().join("n");
    ok(&[
        "sweep", "--manifest", s(&m), "--ops", "0", "--freq", "10:100:3", "--normalize", "10", "--no-cache", "--out",
        s(&out),
    ]);
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("op,f_normalized,"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((first[1] - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = modlink(&["sweep", "--manifest", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));

    let m = bench(dir.path());
    let bad_method = modlink(&["search", "--manifest", s(&m), "--method", "pod", "--out", s(dir.path())]);
    assert_eq!(bad_method.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_method.stderr).contains("unknown reduction method"));

    let bad_freq = modlink(&["sweep", "--manifest", s(&m), "--freq", "10:1:5", "--out", s(dir.path())]);
    assert_eq!(bad_freq.status.code(), Some(1));

    assert_eq!(modlink(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn broken_manifest_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let text = std::fs::read_to_string(&m)
        .unwrap()
        .replace("x_stage/K.mtx", "x_stage/gone.mtx")
        .replace("\"port\": \"q_ext\"", "\"port\": \"nowhere\"");
    let bad = dir.path().join("bench/bad.json");
    std::fs::write(&bad, text).unwrap();
    let out = modlink(&["sweep", "--manifest", s(&bad), "--freq", "1:10:3", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gone.mtx"), "{err}");
    assert!(err.contains("nowhere"), "{err}");
}
