use lie_robust::cases::{flow_data, flow_truth, sir_observations, twist_dictionary, twist_observations, TwistUnknown};
use lie_robust::datadriven::{build_polytope, check_bounded, read_observations, reduce_redundant, synthesize, write_observations, Dictionary, Observation};
use lie_robust::polyalg::{time_state_vars, PolynomialVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn scalar_observation_gives_an_interval() {
    // ẋ = w·x observed at x = 2 as y = 1 with ε = 0.5: w ∈ [0.25, 0.75].
    let vars = time_state_vars(1);
    let dict = Dictionary { f0: PolynomialVector::parse(&["0"], &vars).unwrap(), channels: vec![PolynomialVector::parse(&["x1"], &vars).unwrap()] };
    let obs = vec![Observation { t: 0.0, x: vec![2.0], y: vec![1.0] }];
    let p = build_polytope(&obs, &dict, &[0.5]).unwrap();
    assert_eq!(p.rows(), 2);
    let (lo, hi) = p.bounding_box().unwrap();
    assert!((lo[0] - 0.25).abs() < 1e-9 && (hi[0] - 0.75).abs() < 1e-9);
}

#[test]
fn duplicated_observations_reduce_to_half() {
    let (obs, dict) = sir_observations(4).unwrap();
    let mut twice = obs.clone();
    twice.extend(obs.iter().cloned());
    let once = reduce_redundant(&build_polytope(&obs, &dict, &[0.1]).unwrap()).unwrap();
    let both = build_polytope(&twice, &dict, &[0.1]).unwrap();
    assert_eq!(both.rows(), 2 * build_polytope(&obs, &dict, &[0.1]).unwrap().rows());
    let red = reduce_redundant(&both).unwrap();
    assert_eq!(red.rows(), once.rows());
}

#[test]
fn sir_regeneration_has_400_rows_and_contains_truth() {
    let (obs, dict) = sir_observations(11).unwrap();
    assert_eq!(obs.len(), 100);
    let p = build_polytope(&obs, &dict, &[0.1]).unwrap();
    assert_eq!(p.rows(), 400);
    assert!(p.contains(&[0.4, 0.1], 1e-12));
    let r = reduce_redundant(&p).unwrap();
    check_bounded(&r).unwrap();
    assert!(r.rows() < 400 && r.contains(&[0.4, 0.1], 1e-12));
}

#[test]
fn ground_truth_is_always_consistent() {
    let (obs, dict) = flow_data(21).unwrap();
    let p = build_polytope(&obs, &dict, &[0.0, 0.5]).unwrap();
    assert!(p.contains(&flow_truth(&dict), 1e-9));
    let obs = twist_observations(8).unwrap();
    for which in [TwistUnknown::B1, TwistUnknown::B3] {
        let dict = twist_dictionary(which);
        let p = build_polytope(&obs, &dict, &[0.5]).unwrap();
        assert_eq!(p.rows(), 600);
        let r = reduce_redundant(&p).unwrap();
        check_bounded(&r).unwrap();
    }
}

#[test]
fn reduction_preserves_membership_on_samples() {
    let (obs, dict) = sir_observations(2).unwrap();
    let p = build_polytope(&obs, &dict, &[0.1]).unwrap();
    let r = reduce_redundant(&p).unwrap();
    let (lo, hi) = p.bounding_box().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut disagree = 0;
    for _ in 0..10_000 {
        let w: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| {
            let pad = 0.2 * (b - a);
            rng.random_range(a - pad..b + pad)
        }).collect();
        if p.contains(&w, 0.0) != r.contains(&w, 0.0) {
            disagree += 1;
        }
    }
    assert_eq!(disagree, 0);
}

#[test]
fn observations_roundtrip_through_csv() {
    let truth = PolynomialVector::parse(&["x2", "-x1"], &time_state_vars(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts: Vec<(f64, Vec<f64>)> = (0..5).map(|k| (k as f64, vec![k as f64 * 0.1, 1.0])).collect();
    let obs = synthesize(&truth, &pts, &[0.1, 0.2], &mut rng);
    let text = write_observations(&obs);
    let back = read_observations(text.as_bytes(), 2).unwrap();
    assert_eq!(back.len(), 5);
    for (a, b) in obs.iter().zip(&back) {
        assert_eq!(a.x, b.x);
        for (u, v) in a.y.iter().zip(&b.y) {
            assert!((u - v).abs() < 1e-12);
        }
    }
    assert!(read_observations("t,x1,x2,y1,y2\n0,1,2,3\n".as_bytes(), 2).is_err());
}
