use lie_robust::polyalg::{lie_terms, names, time_state_vars, MultiIndex, Polynomial, PolynomialVector};
use proptest::prelude::*;

fn vars2() -> Vec<String> {
    names("x", 2)
}

fn poly_strategy() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(((0u32..4, 0u32..4), -5i32..=5), 0..8).prop_map(|terms| {
        Polynomial::from_terms(&vars2(), terms.into_iter().map(|((a, b), c)| (MultiIndex(vec![a, b]), c as f64 / 4.0)))
    })
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(p in poly_strategy()) {
        let text = p.to_string();
        let q = Polynomial::parse(&text, &vars2()).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn lie_derivative_is_linear_in_v(a in poly_strategy(), b in poly_strategy(), s in -3.0f64..3.0) {
        let vars = time_state_vars(2);
        let embed = |p: &Polynomial| p.embed(&vars).unwrap();
        let f0 = PolynomialVector::parse(&["x2", "-x1 - x2 + x1^3/3"], &vars).unwrap();
        let ch = vec![PolynomialVector::parse(&["0", "x1*x2"], &vars).unwrap()];
        let (la, ca) = lie_terms(&embed(&a), &f0, &ch).unwrap();
        let (lb, cb) = lie_terms(&embed(&b), &f0, &ch).unwrap();
        let mix = &embed(&a) + &embed(&b).scale(s);
        let (lm, cm) = lie_terms(&mix, &f0, &ch).unwrap();
        let expect = &la + &lb.scale(s);
        prop_assert!((&lm - &expect).max_abs_coeff() < 1e-9);
        prop_assert!((&cm[0] - &(&ca[0] + &cb[0].scale(s))).max_abs_coeff() < 1e-9);
    }

    #[test]
    fn product_evaluates_pointwise(a in poly_strategy(), b in poly_strategy(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let pa = a.eval(&[x, y]).unwrap();
        let pb = b.eval(&[x, y]).unwrap();
        let prod = (&a * &b).eval(&[x, y]).unwrap();
        prop_assert!((prod - pa * pb).abs() < 1e-9 * (1.0 + (pa * pb).abs()));
    }
}

#[test]
fn flow_second_coordinate_parses() {
    let p = Polynomial::parse("-x1 - x2 + x1^3/3", &vars2()).unwrap();
    assert_eq!(p.num_terms(), 3);
    assert!((p.coeff(&MultiIndex(vec![3, 0])) - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(p.coeff(&MultiIndex(vec![1, 0])), -1.0);
    assert_eq!(p.degree(), 3);
}

#[test]
fn parenthesised_powers_expand() {
    let p = Polynomial::parse("0.25 - (x1 + 0.25)^2", &vars2()).unwrap();
    let q = Polynomial::parse("0.1875 - 0.5*x1 - x1^2", &vars2()).unwrap();
    assert!((&p - &q).max_abs_coeff() < 1e-15);
}

#[test]
fn unknown_variable_is_rejected() {
    assert!(Polynomial::parse("x3 + 1", &vars2()).is_err());
    assert!(Polynomial::parse("x1^-1", &vars2()).is_err());
}

#[test]
fn lie_derivative_of_energy_along_flow() {
    // v = x1² + x2²: L_f v = 2 x1 x2 + 2 x2 (−x1 − x2 + x1³/3).
    let vars = time_state_vars(2);
    let v = Polynomial::parse("x1^2 + x2^2", &vars).unwrap();
    let f0 = PolynomialVector::parse(&["x2", "-x1 - x2 + x1^3/3"], &vars).unwrap();
    let (base, ch) = lie_terms(&v, &f0, &[]).unwrap();
    let expect = Polynomial::parse("-2*x2^2 + 2/3*x1^3*x2", &vars).unwrap();
    assert!((&base - &expect).max_abs_coeff() < 1e-12);
    assert!(ch.is_empty());
}
