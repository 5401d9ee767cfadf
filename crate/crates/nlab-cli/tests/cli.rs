use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn nlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlab"))
        .args(args)
        .env_remove("NLAB_THREADS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn load(name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(configs().join(name)).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

/// Channel scenario at a coarser epsilon so that a full run takes seconds.
fn quick_channel(solver: Value) -> Value {
    let mut c = load("channel_counterexample.json");
    c["epsilon"] = 0.25.into();
    c["solver"] = solver;
    c
}

#[test]
fn bundled_configs_validate() {
    for name in [
        "annulus_trivial.json",
        "convex_ball.json",
        "channel_counterexample.json",
    ] {
        let out = nlab(&["validate", configs().join(name).to_str().unwrap()]);
        assert_eq!(
            code(&out),
            0,
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stdout).contains("valid"));
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = load("annulus_trivial.json");
    c["obstacle"]["radius"] = 1.0.into();
    let p = write_config(dir.path(), "c.json", &c);
    assert_eq!(code(&nlab(&["validate", &p])), 2);
    let mut c = load("annulus_trivial.json");
    c["schemaVersion"] = 7.into();
    let p = write_config(dir.path(), "d.json", &c);
    assert_eq!(code(&nlab(&["validate", &p])), 2);
}

#[test]
fn oversized_inner_radius_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = load("channel_counterexample.json");
    c["obstacle"]["r0"] = 0.5.into();
    let p = write_config(dir.path(), "c.json", &c);
    let out = nlab(&["validate", &p]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn inadmissible_kappa_is_a_construction_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = load("channel_counterexample.json");
    c["nonlinearity"]["kappa"] = 0.5.into();
    let p = write_config(dir.path(), "c.json", &c);
    let out = nlab(&["validate", &p]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn iteration_cap_exits_with_convergence_code() {
    let dir = tempfile::tempdir().unwrap();
    let c = quick_channel(serde_json::json!({ "maxOuter": 2 }));
    let p = write_config(dir.path(), "c.json", &c);
    let out_dir = dir.path().join("out");
    let out = nlab(&["run", &p, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("run.log").exists());
}

#[test]
fn tight_residual_bound_fails_certification() {
    let dir = tempfile::tempdir().unwrap();
    let c = quick_channel(serde_json::json!({ "outerTol": 1e-2, "residualTol": 1e-14 }));
    let p = write_config(dir.path(), "c.json", &c);
    let out = nlab(&["run", &p, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_nlab"))
        .args([
            "validate",
            configs().join("annulus_trivial.json").to_str().unwrap(),
        ])
        .env("NLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn annulus_run_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("annulus_trivial.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = nlab(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = Command::new(env!("CARGO_BIN_EXE_nlab"))
        .args(["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()])
        .env("NLAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    for f in [
        "solution.bin",
        "solution.csv",
        "solution.pgm",
        "sub.bin",
        "super.bin",
        "mask.pgm",
        "steady_state.json",
        "diagnostics.json",
        "run.log",
    ] {
        assert!(a.join(f).exists(), "missing {f}");
    }
    for f in [
        "solution.bin",
        "solution.pgm",
        "mask.pgm",
        "steady_state.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
    let doc: Value =
        serde_json::from_str(&fs::read_to_string(a.join("steady_state.json")).unwrap()).unwrap();
    assert_eq!(doc["residualMax"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["liouvilleFlag"], Value::Bool(false));
    assert_eq!(doc["certified"], Value::Bool(true));

    // rendering the written solution reproduces the written image
    let img = dir.path().join("again.pgm");
    let out = nlab(&[
        "render",
        a.join("solution.bin").to_str().unwrap(),
        img.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(&img).unwrap(),
        fs::read(a.join("solution.pgm")).unwrap()
    );
}

#[test]
fn constant_field_renders_to_flat_image() {
    let dir = tempfile::tempdir().unwrap();
    let n = 12;
    let domain = nlab::GridDomain64::free(n, 1.0, 1);
    let field = nlab::Field64::constant(n, 1.0);
    let bin = dir.path().join("c.bin");
    nlab::field::write_binary(&bin, &field, &domain).unwrap();
    let img = dir.path().join("c.pgm");
    let out = nlab(&[
        "render",
        bin.to_str().unwrap(),
        img.to_str().unwrap(),
        "--min",
        "0",
        "--max",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = fs::read(&img).unwrap();
    let header = format!("P5\n{n} {n}\n255\n");
    assert!(bytes.starts_with(header.as_bytes()));
    assert!(bytes[header.len()..].iter().all(|&p| p == 128));
    assert_eq!(bytes.len(), header.len() + n * n);
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("annulus_trivial.json");
    let out = nlab(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--eps",
        "1.0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
}
