use lie_robust::lierobust::{pointwise_max_lp, pointwise_min, robustify, LieData};
use lie_robust::sdrset::{Polytope, SdrSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bounded random polytope in `R^l` with few vertices.
fn random_polytope(rng: &mut ChaCha8Rng, l: usize) -> Polytope {
    loop {
        let m = rng.random_range(l + 1..=l + 3);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let r: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.iter().map(|v| v / n).collect()
            })
            .collect();
        let h: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let p = Polytope::from_rows(&rows, &h).unwrap();
        if p.bounding_box().is_ok() {
            if let Ok(v) = p.vertices() {
                if !v.is_empty() && v.len() <= 8 {
                    return p;
                }
            }
        }
    }
}

#[test]
fn pointwise_counterpart_matches_vertex_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..6 {
        let l = 1 + case % 3;
        let p = random_polytope(&mut rng, l);
        let verts = p.vertices().unwrap();
        let sys = robustify(l, &p.to_sdr().unwrap()).unwrap();
        for _ in 0..200 {
            let lie = LieData { base: rng.random_range(-1.0..1.0), channels: (0..l).map(|_| rng.random_range(-2.0..2.0)).collect() };
            let robust = pointwise_min(&sys, &lie).unwrap();
            let brute = lie.max_over(&verts);
            assert!((robust - brute).abs() <= 1e-7 * (1.0 + brute.abs()), "case {case}: {robust} vs {brute}");
            assert_eq!(robust <= 1e-7, brute <= 1e-7);
            let lp = pointwise_max_lp(&p, &lie).unwrap();
            assert!((lp - brute).abs() <= 1e-7 * (1.0 + brute.abs()));
        }
    }
}

#[test]
fn interval_as_box_and_as_spectahedron_agree() {
    // [−0.3, 0.5] as a box and as diag(w + 0.3, 0.5 − w) ⪰ 0.
    let boxed = SdrSet::boxed(&[-0.3], &[0.5]).unwrap();
    let spec = SdrSet::spectahedron(2, &[0.3, 0.0, 0.0, 0.5], &[vec![1.0, 0.0, 0.0, -1.0]], &[]).unwrap();
    let sb = robustify(1, &boxed).unwrap();
    let ss = robustify(1, &spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let lie = LieData { base: rng.random_range(-1.0..1.0), channels: vec![rng.random_range(-2.0..2.0)] };
        let a = pointwise_min(&sb, &lie).unwrap();
        let b = pointwise_min(&ss, &lie).unwrap();
        let exact = lie.base + lie.channels[0] * if lie.channels[0] > 0.0 { 0.5 } else { -0.3 };
        assert!((a - exact).abs() < 1e-7 && (b - exact).abs() < 1e-7, "{a} {b} {exact}");
    }
    for k in 0..=40 {
        let w = -0.5 + k as f64 * 0.025;
        assert_eq!(boxed.membership(&[w], 1e-9).unwrap(), spec.membership(&[w], 1e-9).unwrap(), "w = {w}");
    }
}

#[test]
fn ball_counterpart_is_the_support_function() {
    let ball = SdrSet::ball(&[0.1, -0.2], 0.5).unwrap();
    let sys = robustify(2, &ball).unwrap();
    let lie = LieData { base: -0.4, channels: vec![0.6, 0.8] };
    let want = -0.4 + 0.6 * 0.1 - 0.8 * 0.2 + 0.5;
    assert!((pointwise_min(&sys, &lie).unwrap() - want).abs() < 1e-7);
}

#[test]
fn channel_count_must_match() {
    let w = SdrSet::boxed(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    assert!(robustify(3, &w).is_err());
}
