use lie_robust::analysis::{Region, SystemSpec};
use lie_robust::polyalg::{time_state_vars, PolynomialVector};
use lie_robust::sdrset::{Polytope, SdrSet};
use lie_robust::simulate::{extreme_input, hit_and_run, integrate, integrate_backward, InputSampler, InputSchedule, IntegrateOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pv(s: &[&str], n: usize) -> PolynomialVector {
    PolynomialVector::parse(s, &time_state_vars(n)).unwrap()
}

fn flow(x0: Vec<f64>, horizon: f64) -> SystemSpec {
    SystemSpec {
        n: 2,
        horizon,
        f0: pv(&["x2", "-x1 - x2 + x1^3/3"], 2),
        channels: vec![pv(&["0", "1"], 2)],
        x: Region::Box { lo: vec![-3.0, -3.0], hi: vec![3.0, 3.0] },
        x0: Region::Point(x0),
        w: SdrSet::boxed(&[-0.1], &[0.1]).unwrap(),
        x_t: None,
        x_u: None,
    }
}

#[test]
fn hit_and_run_is_uniform_on_the_square() {
    let p = Polytope::boxed(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let s = hit_and_run(&p, 4000, 11).unwrap();
    assert_eq!(s.len(), 4000);
    for c in 0..2 {
        let mean = s.iter().map(|w| w[c]).sum::<f64>() / 4000.0;
        let var = s.iter().map(|w| (w[c] - mean).powi(2)).sum::<f64>() / 4000.0;
        assert!((mean - 0.5).abs() < 0.03, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.01, "var {var}");
    }
    assert!(s.iter().all(|w| p.contains(w, 1e-12)));
}

#[test]
fn hit_and_run_fills_a_triangle() {
    let p = Polytope::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]], &[0.0, 0.0, 1.0]).unwrap();
    let s = hit_and_run(&p, 3000, 5).unwrap();
    let mean: Vec<f64> = (0..2).map(|c| s.iter().map(|w| w[c]).sum::<f64>() / 3000.0).collect();
    assert!((mean[0] - 1.0 / 3.0).abs() < 0.03 && (mean[1] - 1.0 / 3.0).abs() < 0.03, "{mean:?}");
}

#[test]
fn extreme_inputs_of_box_and_elliptope() {
    let b = SdrSet::boxed(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
    let (w, v) = extreme_input(&b, &[1.0, -2.0]).unwrap();
    assert!((w[0] - 1.0).abs() < 1e-6 && (w[1] + 1.0).abs() < 1e-6);
    assert!((v - 3.0).abs() < 1e-6);
    // Largest off-diagonal sum over the 3×3 elliptope is 3 (all-ones matrix).
    let e = SdrSet::elliptope(3).unwrap();
    let (w, v) = extreme_input(&e, &[1.0, 1.0, 1.0]).unwrap();
    assert!((v - 3.0).abs() < 1e-5, "{v} at {w:?}");
}

#[test]
fn flow_settles_towards_the_origin() {
    let spec = flow(vec![1.0, 0.0], 10.0);
    let traj = integrate(&spec, &[1.0, 0.0], &InputSchedule::constant(vec![0.0]), &IntegrateOptions::default()).unwrap();
    assert!(!traj.exited);
    let end = traj.last();
    assert!(end[0].hypot(end[1]) < 0.05, "{end:?}");
    assert!((traj.t.last().unwrap() - 10.0).abs() < 1e-12);
}

#[test]
fn sir_conserves_population() {
    let spec = SystemSpec {
        n: 3,
        horizon: 40.0,
        f0: pv(&["-0.4*x1*x2", "0.4*x1*x2 - 0.1*x2", "0.1*x2"], 3),
        channels: vec![],
        x: Region::Box { lo: vec![0.0; 3], hi: vec![1.0; 3] },
        x0: Region::Point(vec![0.99, 0.01, 0.0]),
        w: SdrSet::new(0),
        x_t: None,
        x_u: None,
    };
    let traj = integrate(&spec, &[0.99, 0.01, 0.0], &InputSchedule::constant(vec![]), &IntegrateOptions::default()).unwrap();
    for x in &traj.x {
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }
    let peak = traj.x.iter().map(|x| x[1]).fold(0.0, f64::max);
    assert!(peak > 0.3 && peak < 0.5, "peak infection {peak}");
}

#[test]
fn backward_integration_undoes_forward() {
    let spec = flow(vec![0.5, 0.5], 2.0);
    let sched = InputSchedule { period: 0.5, values: vec![vec![0.1], vec![-0.1], vec![0.05], vec![0.0]] };
    let fwd = integrate(&spec, &[0.5, 0.5], &sched, &IntegrateOptions::default()).unwrap();
    let rev = InputSchedule { period: 0.5, values: sched.values.iter().rev().cloned().collect() };
    let back = integrate_backward(&spec, fwd.last(), &rev, &IntegrateOptions::default()).unwrap();
    let b = back.last();
    assert!((b[0] - 0.5).abs() < 1e-6 && (b[1] - 0.5).abs() < 1e-6, "{b:?}");
}

#[test]
fn leaving_x_stops_the_trajectory() {
    let spec = SystemSpec {
        n: 1,
        horizon: 2.0,
        f0: pv(&["1"], 1),
        channels: vec![],
        x: Region::Box { lo: vec![-1.0], hi: vec![0.5] },
        x0: Region::Point(vec![0.0]),
        w: SdrSet::new(0),
        x_t: None,
        x_u: None,
    };
    let traj = integrate(&spec, &[0.0], &InputSchedule::constant(vec![]), &IntegrateOptions::default()).unwrap();
    assert!(traj.exited);
    assert!((traj.last()[0] - 0.5).abs() < 1e-6);
    assert!((traj.t.last().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn sampled_inputs_are_admissible() {
    use rand::Rng;
    let w = Polytope::from_rows(&[vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]], &[1.0, 0.0, 0.0]).unwrap().to_sdr().unwrap();
    let s = InputSampler::new(&w, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..500 {
        let v = s.draw(&mut rng);
        assert!(s.contains(&v, 1e-9), "{v:?}");
    }
    let e = SdrSet::elliptope(3).unwrap();
    let s = InputSampler::new(&e, 2).unwrap();
    for _ in 0..50 {
        let v = s.draw(&mut rng);
        assert!(e.membership(&v, 1e-7).unwrap(), "{v:?}");
    }
    let _: f64 = rng.random();
}
