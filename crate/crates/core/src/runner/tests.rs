use super::*;

fn flat_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{
            "scenario": "flat_norm_bench",
            "domain": {"lower": [0, 0], "upper": [1, 1]},
            "h": 0.03125,
            "epsilons": [0.1],
            "instances": 4,
            "max_atoms": 3,
            "seed": 11
        }"#,
    )
    .unwrap()
}

#[test]
fn parses_defaults() {
    let c = flat_config();
    assert_eq!(c.scenario, Scenario::FlatNormBench);
    assert_eq!(c.regime, Regime::Critical);
    assert_eq!(c.td, TdSpec::Zero);
    assert_eq!(c.core_resolution, 8.0);
    assert_eq!(c.lattice_n, vec![25, 100, 400]);
    assert!(c.validate().is_ok());
}

#[test]
fn unknown_fields_are_rejected() {
    let err = ExperimentConfig::from_json(
        r#"{"scenario": "lattice_study", "domain": {"lower": [0,0], "upper": [1,1]}, "h": 0.1, "epsilons": [0.1], "bogus": 1}"#,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
}

#[test]
fn gamma_config_messages() {
    let c = ExperimentConfig::from_json(
        r#"{
            "scenario": "gamma_limsup",
            "domain": {"lower": [-0.5, -0.5], "upper": [1.5, 1.5], "margin": 0.25},
            "h": 0.0625,
            "mu": {"pieces": [{"lower": [0, 0], "upper": [1, 1], "level": 1}]},
            "epsilons": [0.01, 0.1],
            "core_resolution": 3
        }"#,
    )
    .unwrap();
    let v = c.violations();
    assert!(v.contains(&"epsilon list not decreasing".to_string()), "{v:?}");
    assert!(v.contains(&"gamma_limsup needs at least three epsilon values".to_string()));
    assert!(v.iter().any(|m| m.starts_with("core grid spacing")));
    match c.validate() {
        Err(Error::Validation(m)) => assert_eq!(m, v),
        other => panic!("{other:?}"),
    }
}

#[test]
fn ball_config_needs_fine_grid() {
    let c = ExperimentConfig::from_json(
        r#"{
            "scenario": "ball_lower_bound",
            "domain": {"lower": [0, 0], "upper": [1, 1]},
            "h": 0.01,
            "mu": {"atoms": [{"x": 0.5, "y": 0.5, "degree": 1}]},
            "epsilons": [0.02]
        }"#,
    )
    .unwrap();
    assert_eq!(c.violations(), vec!["grid spacing h must be below min(epsilon)/4".to_string()]);
    let bad_eps = ExperimentConfig { epsilons: vec![1.5], ..c };
    assert!(bad_eps.violations().contains(&"epsilon values must lie in (0, 1)".to_string()));
}

#[test]
fn flat_bench_is_deterministic() {
    let c = flat_config();
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.table.rows.len(), 4);
    assert!(a.all_passed(), "{:?}", a.checks);
    let other = run_experiment(&ExperimentConfig { seed: 12, ..c }).unwrap();
    assert_ne!(a.table.rows, other.table.rows);
}

#[test]
fn emit_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = ScenarioResult {
        scenario: Scenario::LatticeStudy,
        seed: 0,
        table: Table { file: "lattice_study.csv".into(), header: "a,b".into(), rows: Vec::new() },
        checks: vec![Check::new("x", true, "ok"), Check::new("y", false, "bad")],
        gamma_target: None,
    };
    let paths = emit_report(&r, dir.path()).unwrap();
    assert_eq!(paths.len(), 3);
    assert_eq!(std::fs::read_to_string(&paths[0]).unwrap(), "a,b\n");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[1]).unwrap()).unwrap();
    assert_eq!(json["all_passed"], false);
    assert_eq!(json["rows"], 0);
    let txt = std::fs::read_to_string(&paths[2]).unwrap();
    assert!(txt.contains("PASS x: ok") && txt.contains("FAIL y: bad"));
}

#[test]
fn lattice_study_small() {
    let c = ExperimentConfig::from_json(
        r#"{
            "scenario": "lattice_study",
            "domain": {"lower": [-0.5, -0.5], "upper": [1.5, 1.5]},
            "h": 0.03125,
            "mu": {"pieces": [{"lower": [0, 0], "upper": [1, 1], "level": 1}]},
            "epsilons": [0.1],
            "lattice_n": [25, 100],
            "flat_h_q": 0.0625
        }"#,
    )
    .unwrap();
    let r = run_experiment(&c).unwrap();
    assert_eq!(r.table.rows.len(), 2);
    assert!(r.table.rows[1].starts_with("100,0,1,0.05,81,0.81,"), "{}", r.table.rows[1]);
    assert!(r.all_passed(), "{:?}", r.checks);
}

#[test]
fn selftest_passes() {
    let checks = selftest();
    assert!(checks.len() >= 7);
    for c in &checks {
        assert!(c.passed, "{}: {}", c.name, c.detail);
    }
}
