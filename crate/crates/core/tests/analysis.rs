use lie_robust::analysis::{build, is_monotone, levelset_csv, sweep, AnalysisOptions, LieMode, Objective, ProblemKind, Region, SystemSpec};
use lie_robust::cases;
use lie_robust::conic::EmbeddedSolver;
use lie_robust::polyalg::{names, time_state_vars, Polynomial, PolynomialVector};
use lie_robust::sdrset::SdrSet;
use lie_robust::sostighten::{gram_size, scalarized_gram_size};

fn pv(s: &[&str], n: usize) -> PolynomialVector {
    PolynomialVector::parse(s, &time_state_vars(n)).unwrap()
}

fn static_line(x0: Region) -> SystemSpec {
    SystemSpec {
        n: 1,
        horizon: 1.0,
        f0: pv(&["0"], 1),
        channels: vec![],
        x: Region::Box { lo: vec![-1.0], hi: vec![1.0] },
        x0,
        w: SdrSet::new(0),
        x_t: None,
        x_u: None,
    }
}

#[test]
fn static_system_peak_is_the_start() {
    let spec = static_line(Region::Point(vec![0.3]));
    let p = Polynomial::parse("x1", &names("x", 1)).unwrap();
    let r = sweep(&spec, &Objective::Peak(p), &[1, 2], &AnalysisOptions::default(), &EmbeddedSolver);
    for d in &r.degrees {
        assert!((d.bound.unwrap() - 0.3).abs() < 1e-6, "{d:?}");
    }
}

#[test]
fn integrator_peak_under_box_input() {
    // ẋ = w, |w| ≤ 1, x(0) = 0, T = 1: max x(T) = 1.
    let mut spec = static_line(Region::Point(vec![0.0]));
    spec.x = Region::Box { lo: vec![-2.0], hi: vec![2.0] };
    spec.channels = vec![pv(&["1"], 1)];
    spec.w = SdrSet::boxed(&[-1.0], &[1.0]).unwrap();
    let p = Polynomial::parse("x1", &names("x", 1)).unwrap();
    let r = sweep(&spec, &Objective::Peak(p), &[1, 2, 3], &AnalysisOptions::default(), &EmbeddedSolver);
    let b = r.bounds();
    assert!(r.monotone);
    assert!((b[2].unwrap() - 1.0).abs() < 1e-4, "{b:?}");
}

#[test]
fn distance_from_a_resting_point() {
    // Static point at 0.5; unsafe point at −0.5: distance 1.
    let mut spec = static_line(Region::Point(vec![0.5]));
    spec.x_u = Some(Region::Point(vec![-0.5]));
    let r = sweep(&spec, &Objective::euclidean_distance(1), &[1, 2], &AnalysisOptions::default(), &EmbeddedSolver);
    for d in &r.degrees {
        assert!((d.bound.unwrap() - 1.0).abs() < 1e-4, "{d:?}");
    }
}

#[test]
fn reach_and_roa_swap_on_static_dynamics() {
    let set = Region::Ball { center: vec![0.2], radius: 0.3 };
    let mut reach = static_line(set.clone());
    reach.x0 = set.clone();
    let mut roa = static_line(Region::Point(vec![0.0]));
    roa.x_t = Some(set);
    let opts = AnalysisOptions::default();
    for d in [2, 3] {
        let a = sweep(&reach, &Objective::Reach, &[d], &opts, &EmbeddedSolver).degrees[0].bound.unwrap();
        let b = sweep(&roa, &Objective::Roa, &[d], &opts, &EmbeddedSolver).degrees[0].bound.unwrap();
        assert!((a - b).abs() < 1e-6, "d={d}: {a} vs {b}");
        assert!(a >= 0.6 - 1e-6);
    }
}

#[test]
fn robust_and_vertex_programs_agree_on_a_box() {
    let spec = SystemSpec {
        n: 2,
        horizon: 2.0,
        f0: pv(&["x2", "-x1 - x2"], 2),
        channels: vec![pv(&["0", "1"], 2), pv(&["0", "x1"], 2)],
        x: Region::Box { lo: vec![-1.5, -1.5], hi: vec![1.5, 1.5] },
        x0: Region::Point(vec![1.0, 0.0]),
        w: SdrSet::boxed(&[-0.2, -0.2], &[0.2, 0.2]).unwrap(),
        x_t: None,
        x_u: None,
    };
    let p = Polynomial::parse("-x2", &names("x", 2)).unwrap();
    let verts = spec.w.as_polytope().unwrap().vertices().unwrap();
    let robust = sweep(&spec, &Objective::Peak(p.clone()), &[2], &AnalysisOptions::default(), &EmbeddedSolver);
    let opts = AnalysisOptions { lie: LieMode::Vertices(verts), ..Default::default() };
    let vert = sweep(&spec, &Objective::Peak(p), &[2], &opts, &EmbeddedSolver);
    let (a, b) = (robust.degrees[0].bound.unwrap(), vert.degrees[0].bound.unwrap());
    assert!((a - b).abs() < 1e-4, "{a} vs {b}");
}

#[test]
fn gram_size_formulas() {
    assert_eq!(gram_size(13, 5, 1), 8568);
    assert_eq!(gram_size(3, 5, 1), 56);
    assert_eq!(gram_size(13, 4, 1), 2380);
    assert_eq!(gram_size(4, 4, 1), 70);
    assert_eq!(gram_size(3, 6, 3), 252);
    assert_eq!(gram_size(6, 6, 3), 2772);
    assert_eq!(scalarized_gram_size(3, 2, 1, 0), 6);
    // Past the lowest degrees scalarizing a PSD block costs more.
    for (n, ni, d) in [(3, 3, 4), (4, 2, 3), (3, 3, 6)] {
        assert!(gram_size(n, d, ni) < scalarized_gram_size(n, ni, d, 0));
    }
}

#[test]
fn assembled_programs_have_the_expected_largest_blocks() {
    // The cubic-channel cases only reach these sizes with balanced multipliers.
    for (case, balanced, d, want) in [("flow-data-peak", true, 4, 56), ("twist-b1-unknown", true, 3, 70), ("flow-pillow-peak", false, 6, 252), ("flow-data-peak", false, 4, 35)] {
        let c = cases::find(case).pop().unwrap();
        let p = c.build().unwrap();
        let opts = AnalysisOptions { balanced_multipliers: balanced, ..p.options.clone() };
        let built = build(&p.spec, &p.objective, d, &opts).unwrap();
        assert_eq!(built.largest_gram(), want, "{case}");
    }
}

#[test]
fn level_set_grids() {
    let vars = time_state_vars(2);
    let one = Polynomial::parse("1", &vars).unwrap();
    let x = Region::Box { lo: vec![-1.0, 0.0], hi: vec![1.0, 2.0] };
    let csv = levelset_csv(&one, &x, 3).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x1,x2,phi");
    assert_eq!(lines.len(), 10);
    assert!(lines[1..].iter().all(|l| l.ends_with(",1")));
    let centre = levelset_csv(&one, &x, 1).unwrap();
    assert_eq!(centre.lines().nth(1).unwrap(), "0,1,1");
    assert!(levelset_csv(&one, &Region::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 3).is_err());
}

#[test]
fn monotonicity_respects_direction() {
    assert!(is_monotone(ProblemKind::Peak, &[Some(2.0), Some(1.5), None, Some(1.5)], 1e-5));
    assert!(!is_monotone(ProblemKind::Peak, &[Some(1.0), Some(1.1)], 1e-5));
    assert!(is_monotone(ProblemKind::Distance, &[Some(0.1), Some(0.2)], 1e-5));
    assert!(!is_monotone(ProblemKind::Distance, &[Some(0.2), Some(0.1)], 1e-5));
}
