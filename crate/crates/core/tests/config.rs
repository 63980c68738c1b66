use lie_robust::analysis::Objective;
use lie_robust::cases::CONFIGS;
use lie_robust::config::{parse_degrees, ConfigError, ProblemConfig};

#[test]
fn bundled_configs_roundtrip() {
    for (name, text) in CONFIGS {
        let cfg = ProblemConfig::from_json(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = ProblemConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again, "{name}");
        cfg.build(None).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn pillow_config_builds_the_expected_problem() {
    let text = CONFIGS.iter().find(|c| c.0 == "flow_pillow.json").unwrap().1;
    let p = ProblemConfig::from_json(text).unwrap().build(None).unwrap();
    assert_eq!(p.spec.channels.len(), 3);
    assert_eq!(p.spec.w.dim(), 3);
    assert_eq!(p.degrees, vec![1, 2, 3, 4, 5, 6]);
    assert!(matches!(p.objective, Objective::Peak(_)));
}

#[test]
fn bad_configs_are_reported() {
    let base = CONFIGS[0].1;
    let unknown = base.replacen("\"horizon\"", "\"horizont\"", 1);
    assert!(matches!(ProblemConfig::from_json(&unknown), Err(ConfigError::Json(_))));
    let bad_poly = base.replace("-x1 - x2 + x1^3/3", "-x1 - x9");
    let err = ProblemConfig::from_json(&bad_poly).unwrap().build(None).unwrap_err();
    assert!(matches!(err, ConfigError::Poly { ref field, .. } if field == "dynamics.f0[1]"), "{err}");
    let wrong_dim = base.replace("\"n\": 2", "\"n\": 3");
    assert!(ProblemConfig::from_json(&wrong_dim).unwrap().build(None).is_err());
}

#[test]
fn roa_without_target_is_rejected() {
    let text = CONFIGS.iter().find(|c| c.0 == "roa_controlled_flow.json").unwrap().1;
    let mut cfg = ProblemConfig::from_json(text).unwrap();
    cfg.sets.x_t = None;
    assert!(cfg.build(None).is_err());
}

#[test]
fn degree_ranges() {
    assert_eq!(parse_degrees("1..6").unwrap(), vec![1, 2, 3, 4, 5, 6]);
    assert_eq!(parse_degrees("2,4").unwrap(), vec![2, 4]);
    assert!(parse_degrees("3..1").is_err());
    assert!(parse_degrees("0..2").is_err());
    assert!(parse_degrees("a").is_err());
}
