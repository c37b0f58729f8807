use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vortexlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vortexlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const FLAT: &str = r#"{
  "scenario": "flat_norm_bench",
  "domain": {"lower": [0, 0], "upper": [1, 1]},
  "h": 0.03125,
  "epsilons": [0.1],
  "instances": 6,
  "max_atoms": 4,
  "seed": 99
}"#;

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.json", FLAT);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = vortexlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "1"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["flat_norm_bench.csv", "summary.json", "summary.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("flat_norm_bench.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("instance,atoms,flow,oracle,abs_diff"));
    assert_eq!(csv.lines().count(), 7);

    let c = dir.path().join("c");
    let o = vortexlab(&["run", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "100"]);
    assert!(o.status.success());
    assert_ne!(fs::read(a.join("flat_norm_bench.csv")).unwrap(), fs::read(c.join("flat_norm_bench.csv")).unwrap());
}

#[test]
fn increasing_epsilons_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{
          "scenario": "gamma_limsup",
          "domain": {"lower": [-0.5, -0.5], "upper": [1.5, 1.5], "margin": 0.25},
          "h": 0.0625,
          "epsilons": [0.0001, 0.001, 0.01]
        }"#,
    );
    for args in [vec!["validate", "--config", &cfg], vec!["run", "--config", &cfg, "--out", "unused"]] {
        let o = vortexlab(&args);
        assert_eq!(o.status.code(), Some(1));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.lines().any(|l| l == "validation failed: epsilon list not decreasing"), "{err}");
    }
    assert!(!Path::new("unused").exists());
}

#[test]
fn gamma_run_has_one_row_per_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "super.json",
        r#"{
          "scenario": "gamma_limsup",
          "domain": {"lower": [-0.5, -0.5], "upper": [1.5, 1.5], "margin": 0.25},
          "h": 0.0625,
          "td": {"kind": "constant", "value": [0.3, -0.2]},
          "epsilons": [0.001, 0.0001, 0.00001],
          "regime": "supercritical"
        }"#,
    );
    let out = dir.path().join("out");
    let o = vortexlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("gamma_limsup.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epsilon,N_eps,scaled_energy,gamma_target,core_ratio,jump_ratio,flat_dist,h1_resid");
    assert_eq!(lines.len(), 4);
    let txt = fs::read_to_string(out.join("summary.txt")).unwrap();
    let target: f64 = txt
        .lines()
        .find_map(|l| l.strip_prefix("gamma-limit target: "))
        .and_then(|v| v.parse().ok())
        .expect("target line");
    assert!((target - 1.04).abs() < 1e-9, "{target}");
}

#[test]
fn ball_run_writes_trace_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ball.json",
        r#"{
          "scenario": "ball_lower_bound",
          "domain": {"lower": [0, 0], "upper": [1, 1]},
          "h": 0.0078125,
          "mu": {"atoms": [{"x": 0.4, "y": 0.5, "degree": 1}, {"x": 0.6, "y": 0.5, "degree": -1}]},
          "epsilons": [0.05]
        }"#,
    );
    let out = dir.path().join("out");
    let o = vortexlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("ball_lower_bound.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("event_index,t,ball_id,cx,cy,r,weight,lower_bound_accumulated"));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.json", FLAT);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = vortexlab(&["run", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn selftest_succeeds() {
    let o = vortexlab(&["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().count() >= 7 && text.lines().all(|l| l.starts_with("PASS ")));
}
