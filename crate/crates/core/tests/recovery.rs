use lie_robust::analysis::{Region, SystemSpec};
use lie_robust::polyalg::{monomials_upto, time_state_vars, MultiIndex, Polynomial, PolynomialVector};
use lie_robust::recovery::{apply_controller, recover_controller, MomentData, Sequence};
use lie_robust::sdrset::SdrSet;
use lie_robust::simulate::{integrate, InputSchedule, IntegrateOptions};

fn mono(a: &MultiIndex, pt: &[f64]) -> f64 {
    a.0.iter().zip(pt).map(|(&k, v)| v.powi(k as i32)).product()
}

#[test]
fn dirac_moments_recover_the_input_exactly() {
    let vars = time_state_vars(2);
    let pt = [0.3, -0.4, 0.9];
    let mut m = Sequence::new();
    let mut c1 = Sequence::new();
    let mut c2 = Sequence::new();
    for a in monomials_upto(3, 6) {
        let v = mono(&a, &pt);
        m.insert(a.clone(), v);
        c1.insert(a.clone(), -0.25 * v);
        c2.insert(a, 0.6 * v);
    }
    let md = MomentData::from_sequence(&vars, m, vec![c1, c2], 3);
    assert_eq!(md.rank(1e-9), 1);
    let w = recover_controller(&md).unwrap();
    assert!((w[0].eval_unchecked(&pt) + 0.25).abs() < 1e-8);
    assert!((w[1].eval_unchecked(&pt) - 0.6).abs() < 1e-8);
}

/// Occupation moments of a sampled trajectory by composite Simpson quadrature.
fn occupation_moments(samples: &[(f64, Vec<f64>)], h: f64, deg: u32, weight: impl Fn(f64, &[f64]) -> f64) -> Sequence {
    let mut out = Sequence::new();
    let k = samples.len() - 1;
    assert!(k % 2 == 0);
    for a in monomials_upto(3, deg) {
        let mut s = 0.0;
        for (i, (t, x)) in samples.iter().enumerate() {
            let c = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let mut pt = vec![*t];
            pt.extend_from_slice(x);
            s += c * weight(*t, x) * mono(&a, &pt);
        }
        out.insert(a, s * h / 3.0);
    }
    out
}

fn flow_samples(w: f64) -> (Vec<(f64, Vec<f64>)>, f64) {
    let spec = SystemSpec {
        n: 2,
        horizon: 1.0,
        f0: PolynomialVector::parse(&["x2", "-x1 - x2 + x1^3/3"], &time_state_vars(2)).unwrap(),
        channels: vec![PolynomialVector::parse(&["0", "1"], &time_state_vars(2)).unwrap()],
        x: Region::Box { lo: vec![-3.0, -3.0], hi: vec![3.0, 3.0] },
        x0: Region::Point(vec![1.0, 0.0]),
        w: SdrSet::boxed(&[-1.0], &[1.0]).unwrap(),
        x_t: None,
        x_u: None,
    };
    // Segment breaks every h place a sample on the grid.
    let h = 1.0 / 200.0;
    let sched = InputSchedule { period: h, values: vec![vec![w]; 200] };
    let traj = integrate(&spec, &[1.0, 0.0], &sched, &IntegrateOptions::default()).unwrap();
    let mut out = Vec::new();
    for (t, x) in traj.t.iter().zip(&traj.x) {
        let k = (t / h).round();
        if (t - k * h).abs() < 1e-12 && out.last().map(|(s, _): &(f64, Vec<f64>)| (s - t).abs() > 1e-12).unwrap_or(true) {
            out.push((*t, x.clone()));
        }
    }
    assert_eq!(out.len(), 201);
    (out, h)
}

#[test]
fn constant_input_is_recovered_along_the_trajectory() {
    let (samples, h) = flow_samples(0.35);
    let vars = time_state_vars(2);
    let m = occupation_moments(&samples, h, 4, |_, _| 1.0);
    let c = occupation_moments(&samples, h, 4, |_, _| 0.35);
    let md = MomentData::from_sequence(&vars, m, vec![c], 2);
    let w = recover_controller(&md).unwrap();
    for (t, x) in samples.iter().step_by(20) {
        let pt = [*t, x[0], x[1]];
        assert!((w[0].eval_unchecked(&pt) - 0.35).abs() < 1e-3, "at t = {t}");
    }
}

#[test]
fn recovered_law_is_projected_onto_w() {
    let vars = time_state_vars(1);
    let ctrl = vec![Polynomial::parse("2*x1", &vars).unwrap()];
    let w = SdrSet::boxed(&[-1.0], &[1.0]).unwrap();
    let u = apply_controller(&ctrl, &w, &[0.0, 0.9]).unwrap();
    assert!((u[0] - 1.0).abs() < 1e-6);
    let u = apply_controller(&ctrl, &w, &[0.0, 0.2]).unwrap();
    assert!((u[0] - 0.4).abs() < 1e-6);
}

#[test]
fn zero_moments_are_rejected() {
    let vars = time_state_vars(1);
    let md = MomentData::from_sequence(&vars, Sequence::new(), vec![Sequence::new()], 1);
    assert!(recover_controller(&md).is_err());
}
