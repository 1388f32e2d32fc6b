use anisoharm::experiments::{list, run_experiment, ExperimentConfig};

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

#[test]
fn reports_are_deterministic() {
    let cases = [
        ("rho-axioms", r#"{"samples": 2000}"#),
        ("transform", "{}"),
        ("semigroup-law", "{}"),
        ("cz-suite", r#"{"counts": [64, 128]}"#),
    ];
    for (name, json) in cases {
        let c = config(json);
        let a = run_experiment(name, &c).unwrap().to_json().unwrap();
        let b = run_experiment(name, &c).unwrap().to_json().unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn tolerance_overrides_flip_verdicts() {
    let tight = config(r#"{"tolerances": {"unit_ball": 1e-30}}"#);
    let r = run_experiment("polar-volume", &tight).unwrap();
    assert!(!r.passed());
    assert!(r.failures().iter().all(|f| f.ends_with("unit_ball")));
    assert!(run_experiment("polar-volume", &ExperimentConfig::default()).unwrap().passed());
}

#[test]
fn exponents_select_a_single_group() {
    let r = run_experiment("rho-axioms", &config(r#"{"exponents": [1, 3], "samples": 500}"#)).unwrap();
    assert!(r.passed(), "{:?}", r.failures());
    assert!(r.verdicts.keys().all(|k| k.starts_with("a=(1,3)")));
}

#[test]
fn covariance_and_w_alpha_hold() {
    for name in ["d-alpha-covariance", "w-alpha"] {
        let r = run_experiment(name, &ExperimentConfig::default()).unwrap();
        assert!(r.passed(), "{name}: {:?}", r.failures());
    }
}

#[test]
fn emit_writes_report_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment("semigroup-law", &ExperimentConfig::default()).unwrap();
    let paths = r.emit(dir.path()).unwrap();
    assert!(dir.path().join("report.json").exists());
    assert_eq!(paths.len(), 1 + r.series.len());
    let back: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[0]).unwrap()).unwrap();
    assert_eq!(back["name"], "semigroup-law");
}

#[test]
fn precondition_errors_surface() {
    assert!(run_experiment("sharpness", &config(r#"{"exponents": [1, 1], "alpha": 1.5}"#)).is_err());
    assert!(run_experiment("tj-decay", &config(r#"{"range": [3, 1]}"#)).is_err());
    assert!(ExperimentConfig::from_json(r#"{"alpha": "x"}"#).is_err());
    assert_eq!(list().len(), 15);
}
