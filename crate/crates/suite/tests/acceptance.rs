//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! `ACCEPTANCE_ONLY=2,5` restricts the run to the listed criteria.

use std::path::PathBuf;
use std::time::Instant;

use lie_robust::analysis::{build, sweep, AnalysisOptions, BoundReport, LieMode, Objective, Region, SystemSpec};
use lie_robust::cases::{self, flow_data, flow_truth, run_case, sir_observations, twist_dictionary, twist_observations, CaseOutcome, RunOptions, TwistUnknown};
use lie_robust::config::ProblemConfig;
use lie_robust::datadriven::{build_polytope, reduce_redundant};
use lie_robust::lierobust::{pointwise_max_lp, pointwise_min, robustify, LieData};
use lie_robust::polyalg::{monomials_upto, names, time_state_vars, MultiIndex, Polynomial, PolynomialVector};
use lie_robust::recovery::{recover_controller, MomentData, Sequence};
use lie_robust::sdrset::{Polytope, SdrSet};
use lie_robust::simulate::{integrate, InputSchedule, IntegrateOptions};
use lie_robust::sostighten::gram_size;
use lie_robust_conic::sdpa::{export_sdpa, import_sdpa};
use lie_robust_conic::{ConicSolver, EmbeddedSolver, SdpaBridge, SolverOptions, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "../../conic/tests/common/mod.rs"]
mod common;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Sweeps collected along the way for the soundness and monotonicity criteria.
#[derive(Default)]
struct Log {
    outcomes: Vec<CaseOutcome>,
    sweeps: Vec<(String, BoundReport)>,
}

fn fmt_bounds(r: &BoundReport) -> String {
    r.degrees
        .iter()
        .map(|d| match d.bound {
            Some(b) => format!("d={} {b:.4}", d.degree),
            None => format!("d={} -", d.degree),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn case_verdict(name: &str, log: &mut Log) -> Verdict {
    let c = cases::find(name).pop().expect("bundled case");
    let out = match run_case(&c, &EmbeddedSolver, &RunOptions::default()) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("{name}: {e}")),
    };
    let expect: Vec<_> = out.checks.iter().filter(|c| c.name.starts_with("d=")).collect();
    let misses: Vec<String> = expect.iter().filter(|c| !c.pass).map(|c| format!("{} {}", c.name, c.detail)).collect();
    let pass = !expect.is_empty() && misses.is_empty();
    let detail = if pass { fmt_bounds(&out.report) } else { format!("{}; missed: {}", fmt_bounds(&out.report), misses.join("; ")) };
    log.outcomes.push(out);
    verdict(pass, detail)
}

fn criterion1() -> Verdict {
    let formulas = [((13, 5, 1), 8568), ((3, 5, 1), 56), ((13, 4, 1), 2380), ((4, 4, 1), 70), ((3, 6, 3), 252), ((6, 6, 3), 2772)];
    let mut bad: Vec<String> = formulas
        .iter()
        .filter(|((n, d, q), want)| gram_size(*n, *d, *q) != *want)
        .map(|((n, d, q), want)| format!("gram_size({n},{d},{q}) = {} != {want}", gram_size(*n, *d, *q)))
        .collect();
    // The cubic-channel blocks appear with multipliers balanced to the channel degree.
    let assembled = [("flow-data-peak", true, 4, 56), ("twist-b1-unknown", true, 3, 70), ("flow-pillow-peak", false, 6, 252)];
    let mut seen = Vec::new();
    for (name, balanced, d, want) in assembled {
        let c = cases::find(name).pop().unwrap();
        let got = c.build().map_err(|e| e.to_string()).and_then(|p| {
            let opts = AnalysisOptions { balanced_multipliers: balanced, ..p.options.clone() };
            build(&p.spec, &p.objective, d, &opts).map(|b| b.largest_gram()).map_err(|e| e.to_string())
        });
        match got {
            Ok(g) if g == want => seen.push(format!("{name} d={d}: {g}")),
            Ok(g) => bad.push(format!("{name} d={d}: {g} != {want}")),
            Err(e) => bad.push(format!("{name}: {e}")),
        }
    }
    if bad.is_empty() {
        verdict(true, format!("8568, 56, 2380, 70, 252, 2772; assembled {}", seen.join(", ")))
    } else {
        verdict(false, bad.join("; "))
    }
}

/// Bounded random polytope with at most 8 vertices.
fn random_polytope(rng: &mut ChaCha8Rng, l: usize, scale: f64) -> Polytope {
    loop {
        let m = rng.random_range(l + 1..=l + 3);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let r: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.iter().map(|v| v / n).collect()
            })
            .collect();
        let h: Vec<f64> = (0..m).map(|_| scale * rng.random_range(0.1..1.0)).collect();
        let Ok(p) = Polytope::from_rows(&rows, &h) else { continue };
        if p.bounding_box().is_ok() {
            if let Ok(v) = p.vertices() {
                if !v.is_empty() && v.len() <= 8 {
                    return p;
                }
            }
        }
    }
}

fn random_poly(rng: &mut ChaCha8Rng, deg: u32, scale: f64, fixed: &str) -> String {
    let mut s = fixed.to_string();
    for a in monomials_upto(2, deg) {
        let c = rng.random_range(-scale..scale);
        let m: Vec<String> = a.0.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, k)| format!("x{}^{k}", i + 1)).collect();
        let m = if m.is_empty() { "1".to_string() } else { m.join("*") };
        s.push_str(&format!(" + ({c:.4})*{m}"));
    }
    s
}

fn criterion4(log: &mut Log) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let vars = time_state_vars(2);
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for k in 0..20 {
        let l = 1 + k % 3;
        let d = 1 + (k % 3) as u32;
        let poly = random_polytope(&mut rng, l, 0.3);
        let f0 = [random_poly(&mut rng, 3, 0.2, "x2"), random_poly(&mut rng, 3, 0.2, "-x1 - x2")];
        let channels: Vec<PolynomialVector> = (0..l)
            .map(|_| {
                let e = [random_poly(&mut rng, 1, 1.0, "0"), random_poly(&mut rng, 1, 1.0, "0")];
                PolynomialVector::parse(&[&e[0], &e[1]], &vars).unwrap()
            })
            .collect();
        let x0 = vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let spec = SystemSpec {
            n: 2,
            horizon: 1.0,
            f0: PolynomialVector::parse(&[&f0[0], &f0[1]], &vars).unwrap(),
            channels,
            x: Region::Box { lo: vec![-1.5, -1.5], hi: vec![1.5, 1.5] },
            x0: Region::Point(x0),
            w: poly.to_sdr().unwrap(),
            x_t: None,
            x_u: None,
        };
        let p = Polynomial::parse(if k % 2 == 0 { "x1" } else { "x2" }, &names("x", 2)).unwrap();
        // Multipliers at the degree of the vertex certificates.
        let balanced = AnalysisOptions { balanced_multipliers: true, ..Default::default() };
        let robust = sweep(&spec, &Objective::Peak(p.clone()), &[d], &balanced, &EmbeddedSolver);
        let opts = AnalysisOptions { lie: LieMode::Vertices(poly.vertices().unwrap()), ..Default::default() };
        let vert = sweep(&spec, &Objective::Peak(p), &[d], &opts, &EmbeddedSolver);
        match (robust.degrees[0].bound, vert.degrees[0].bound) {
            (Some(a), Some(b)) => {
                worst = worst.max((a - b).abs());
                if (a - b).abs() > 1e-4 {
                    bad.push(format!("case {k} (L={l}, d={d}): {a:.6} vs {b:.6}"));
                }
            }
            (a, b) => bad.push(format!("case {k}: unsolved ({a:?}, {b:?}; {} / {})", robust.degrees[0].status, vert.degrees[0].status)),
        }
        log.sweeps.push((format!("oracle {k} robust"), robust));
        log.sweeps.push((format!("oracle {k} vertices"), vert));
    }
    if bad.is_empty() {
        verdict(true, format!("20 systems, balanced multipliers, max |robust - vertices| = {worst:.2e}"))
    } else {
        verdict(false, bad.join("; "))
    }
}

fn criterion5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    let mut worst: f64 = 0.0;
    let cases = 12;
    for case in 0..cases {
        let l = 1 + case % 3;
        let p = random_polytope(&mut rng, l, 1.0);
        let verts = p.vertices().unwrap();
        let sys = robustify(l, &p.to_sdr().unwrap()).unwrap();
        for _ in 0..200 {
            let lie = LieData { base: rng.random_range(-1.0..1.0), channels: (0..l).map(|_| rng.random_range(-2.0..2.0)).collect() };
            let robust = pointwise_min(&sys, &lie).unwrap();
            let lp = pointwise_max_lp(&p, &lie).unwrap();
            let brute = lie.max_over(&verts);
            worst = worst.max((robust - brute).abs()).max((lp - brute).abs());
            if (robust <= 1e-7) != (brute <= 1e-7) || (robust - brute).abs() > 1e-7 * (1.0 + brute.abs()) {
                mismatches += 1;
            }
        }
    }
    let boxed = SdrSet::boxed(&[-0.3], &[0.5]).unwrap();
    let spec = SdrSet::spectahedron(2, &[0.3, 0.0, 0.0, 0.5], &[vec![1.0, 0.0, 0.0, -1.0]], &[]).unwrap();
    let (sb, ss) = (robustify(1, &boxed).unwrap(), robustify(1, &spec).unwrap());
    let mut interval_gap: f64 = 0.0;
    for _ in 0..200 {
        let lie = LieData { base: rng.random_range(-1.0..1.0), channels: vec![rng.random_range(-2.0..2.0)] };
        interval_gap = interval_gap.max((pointwise_min(&sb, &lie).unwrap() - pointwise_min(&ss, &lie).unwrap()).abs());
    }
    let member_diff = (0..=40)
        .map(|k| -0.5 + k as f64 * 0.025)
        .filter(|w| boxed.membership(&[*w], 1e-9).unwrap() != spec.membership(&[*w], 1e-9).unwrap())
        .count();
    let pass = mismatches == 0 && interval_gap <= 1e-7 && member_diff == 0;
    verdict(
        pass,
        format!("{cases}x200 points, {mismatches} mismatches, max gap {worst:.1e}; box vs spectahedron gap {interval_gap:.1e}, {member_diff} membership differences"),
    )
}

fn criterion6(log: &mut Log) -> Verdict {
    // Cases not already swept run at the degrees that fit a desk budget.
    let caps: [(&str, &[u32]); 8] = [
        ("sir-peak-seeded", &[1, 2, 3]),
        ("flow-data-peak", &[1, 2, 3]),
        ("flow-data-peak-disc", &[1, 2, 3]),
        ("flow-data-distance", &[1, 2, 3]),
        ("twist-b1-unknown", &[1, 2]),
        ("twist-b3-unknown", &[1, 2]),
        ("twist-full-unknown", &[1, 2]),
        ("flow-reach-box", &[1, 2, 3]),
    ];
    for (name, degrees) in caps {
        if log.outcomes.iter().any(|o| o.name == name) {
            continue;
        }
        let c = cases::find(name).pop().unwrap();
        match run_case(&c, &EmbeddedSolver, &RunOptions { degrees: Some(degrees.to_vec()), ..Default::default() }) {
            Ok(o) => log.outcomes.push(o),
            Err(e) => return verdict(false, format!("{name}: {e}")),
        }
    }
    let mut lines = Vec::new();
    let mut pass = true;
    for o in &log.outcomes {
        let sound = o.report.sound;
        pass &= sound == Some(true);
        let emp = o.report.empirical.map(|e| format!("{e:.4}")).unwrap_or_else(|| "none".into());
        lines.push(format!("{} {} (empirical {emp})", o.name, match sound {
            Some(true) => "ok",
            Some(false) => "VIOLATED",
            None => "unchecked",
        }));
    }
    verdict(pass, lines.join("; "))
}

fn criterion7(log: &Log) -> Verdict {
    let all: Vec<(&str, &BoundReport)> = log.outcomes.iter().map(|o| (o.name.as_str(), &o.report)).chain(log.sweeps.iter().map(|(n, r)| (n.as_str(), r))).collect();
    let bad: Vec<String> = all.iter().filter(|(_, r)| !r.monotone).map(|(n, r)| format!("{n}: {}", fmt_bounds(r))).collect();
    if bad.is_empty() {
        verdict(true, format!("{} sweeps monotone within 1e-5", all.len()))
    } else {
        verdict(false, bad.join("; "))
    }
}

fn criterion8() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;
    for seed in 0..5 {
        let (obs, dict) = flow_data(seed).unwrap();
        let p = build_polytope(&obs, &dict, &[0.0, 0.5]).unwrap();
        pass &= p.contains(&flow_truth(&dict), 1e-9);
        let (obs, dict) = sir_observations(seed).unwrap();
        pass &= build_polytope(&obs, &dict, &[0.1]).unwrap().contains(&[0.4, 0.1], 1e-9);
    }
    let obs = twist_observations(5).unwrap();
    for which in [TwistUnknown::B1, TwistUnknown::B3, TwistUnknown::Both] {
        let dict = twist_dictionary(which);
        let truth = cases::twist_truth(which);
        pass &= build_polytope(&obs, &dict, &[0.5]).unwrap().contains(&truth, 1e-9);
    }
    notes.push(format!("truth inside: {pass}"));
    let (obs, dict) = sir_observations(11).unwrap();
    let p = build_polytope(&obs, &dict, &[0.1]).unwrap();
    let rows = p.rows();
    notes.push(format!("SIR rows {rows}"));
    let r = reduce_redundant(&p).unwrap();
    let (lo, hi) = p.bounding_box().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut disagree = 0;
    for _ in 0..10_000 {
        let w: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(a - 0.2 * (b - a)..b + 0.2 * (b - a))).collect();
        disagree += usize::from(p.contains(&w, 0.0) != r.contains(&w, 0.0));
    }
    notes.push(format!("reduction {rows} -> {} rows, {disagree} disagreements on 10^4 samples", r.rows()));
    verdict(pass && rows == 400 && disagree == 0, notes.join("; "))
}

fn mono(a: &MultiIndex, pt: &[f64]) -> f64 {
    a.0.iter().zip(pt).map(|(&k, v)| v.powi(k as i32)).product()
}

fn criterion9() -> Verdict {
    let vars = time_state_vars(2);
    let pt = [0.3, -0.4, 0.9];
    let (mut m, mut c1, mut c2) = (Sequence::new(), Sequence::new(), Sequence::new());
    for a in monomials_upto(3, 6) {
        let v = mono(&a, &pt);
        m.insert(a.clone(), v);
        c1.insert(a.clone(), -0.25 * v);
        c2.insert(a, 0.6 * v);
    }
    let md = MomentData::from_sequence(&vars, m, vec![c1, c2], 3);
    let dirac = match recover_controller(&md) {
        Ok(w) => (w[0].eval_unchecked(&pt) + 0.25).abs().max((w[1].eval_unchecked(&pt) - 0.6).abs()),
        Err(_) => f64::INFINITY,
    };

    // Constant input along a trajectory, moments by composite Simpson.
    let spec = SystemSpec {
        n: 2,
        horizon: 1.0,
        f0: PolynomialVector::parse(&["x2", "-x1 - x2 + x1^3/3"], &vars).unwrap(),
        channels: vec![PolynomialVector::parse(&["0", "1"], &vars).unwrap()],
        x: Region::Box { lo: vec![-3.0, -3.0], hi: vec![3.0, 3.0] },
        x0: Region::Point(vec![1.0, 0.0]),
        w: SdrSet::boxed(&[-1.0], &[1.0]).unwrap(),
        x_t: None,
        x_u: None,
    };
    let h = 1.0 / 200.0;
    let u = 0.35;
    let traj = integrate(&spec, &[1.0, 0.0], &InputSchedule { period: h, values: vec![vec![u]; 200] }, &IntegrateOptions::default()).unwrap();
    let mut samples: Vec<(f64, Vec<f64>)> = Vec::new();
    for (t, x) in traj.t.iter().zip(&traj.x) {
        let on_grid = (t - (t / h).round() * h).abs() < 1e-12;
        if on_grid && samples.last().is_none_or(|(s, _)| (s - t).abs() > 1e-12) {
            samples.push((*t, x.clone()));
        }
    }
    let simpson = |weight: f64| {
        let k = samples.len() - 1;
        let mut out = Sequence::new();
        for a in monomials_upto(3, 4) {
            let s: f64 = samples
                .iter()
                .enumerate()
                .map(|(i, (t, x))| {
                    let c = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    c * weight * mono(&a, &[*t, x[0], x[1]])
                })
                .sum();
            out.insert(a, s * h / 3.0);
        }
        out
    };
    let quad = if samples.len() == 201 {
        let md = MomentData::from_sequence(&vars, simpson(1.0), vec![simpson(u)], 2);
        match recover_controller(&md) {
            Ok(w) => samples.iter().step_by(20).map(|(t, x)| (w[0].eval_unchecked(&[*t, x[0], x[1]]) - u).abs()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    } else {
        f64::INFINITY
    };
    verdict(dirac <= 1e-8 && quad <= 1e-3, format!("Dirac error {dirac:.1e}, constant-input error {quad:.1e}"))
}

fn criterion10() -> Verdict {
    let dir = std::env::temp_dir().join(format!("lie-robust-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for seed in 0..10 {
        let p = common::random_problem(seed);
        let path = dir.join(format!("p{seed}.dat-s"));
        let q = export_sdpa(&p, &path).and_then(|_| import_sdpa(&path));
        let (a, b) = match q {
            Ok(q) => (EmbeddedSolver.solve(&p, &SolverOptions::default()), EmbeddedSolver.solve(&q, &SolverOptions::default())),
            Err(e) => {
                bad.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        match (a, b) {
            (Ok(a), Ok(b)) if a.status == Status::Optimal && b.status == Status::Optimal => {
                worst = worst.max((a.primal_objective - b.primal_objective).abs());
            }
            _ => bad.push(format!("seed {seed}: not solved")),
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    let roundtrip_ok = bad.is_empty() && worst <= 1e-7;

    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let cfg_path = root.join("../core/configs/flow_box_peak.json");
    let problem = ProblemConfig::load(&cfg_path).and_then(|c| c.build(cfg_path.parent())).expect("bundled config");
    let shim = SdpaBridge::new(root.join("../../scripts/sdpa_cvxpy.py"));
    let ours = sweep(&problem.spec, &problem.objective, &[2], &problem.options, &EmbeddedSolver);
    let theirs = sweep(&problem.spec, &problem.objective, &[2], &problem.options, &shim);
    let bridge = match (ours.degrees[0].bound, theirs.degrees[0].bound) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(format!("embedded {}, external {} {}", ours.degrees[0].status, theirs.degrees[0].status, theirs.degrees[0].error.clone().unwrap_or_default())),
    };
    match bridge {
        Ok((a, b)) => verdict(
            roundtrip_ok && (a - b).abs() <= 1e-5,
            format!("round-trip max gap {worst:.1e} over 10 problems{}; d=2 peak embedded {a:.7} vs external {b:.7}", if bad.is_empty() { String::new() } else { format!(" ({})", bad.join("; ")) }),
        ),
        Err(e) => verdict(false, format!("round-trip max gap {worst:.1e}; external path failed: {e}")),
    }
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let wanted = |k: u32| only.as_ref().is_none_or(|o| o.contains(&k));
    let mut log = Log::default();
    let mut failed = 0;
    let mut report = |k: u32, title: &str, run: &mut dyn FnMut(&mut Log) -> Verdict, log: &mut Log| {
        if !wanted(k) {
            return;
        }
        let start = Instant::now();
        let v = run(log);
        if !v.pass {
            failed += 1;
        }
        println!("{} criterion {k:>2} {title} [{:.0}s]: {}", if v.pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64(), v.detail);
    };
    report(1, "gram sizes", &mut |_| criterion1(), &mut log);
    report(2, "elliptope peak", &mut |l| case_verdict("flow-pillow-peak", l), &mut log);
    report(3, "controlled ROA", &mut |l| case_verdict("roa-controlled-flow", l), &mut log);
    report(4, "vertex oracle", &mut criterion4, &mut log);
    report(5, "pointwise oracle", &mut |_| criterion5(), &mut log);
    report(6, "soundness", &mut criterion6, &mut log);
    report(7, "monotonicity", &mut |l| criterion7(l), &mut log);
    report(8, "data-driven", &mut |_| criterion8(), &mut log);
    report(9, "recovery", &mut |_| criterion9(), &mut log);
    report(10, "solver bridge", &mut |_| criterion10(), &mut log);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
