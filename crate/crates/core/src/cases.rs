//! Bundled example problems with expected values or checked properties.
//!
//! Data-driven cases regenerate their observations from a fixed seed, so they
//! assert soundness and monotonicity rather than specific numbers.

use lie_robust_conic::ConicSolver;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{apply_cross_check, sweep, AnalysisOptions, BoundReport, Objective, Region, SystemSpec};
use crate::config::{ConfigError, Problem, ProblemConfig};
use crate::datadriven::{self, DataError, Dictionary, Observation};
use crate::polyalg::{names, time_state_vars, Polynomial, PolynomialVector};
use crate::sdrset::{BsaSet, SdrError, SdrSet};
use crate::simulate::{empirical_extremum, sample_region, EmpiricalOptions, SimError};

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("unknown example {0}")]
    Unknown(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Sdr(#[from] SdrError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// What a case is checked against.
#[derive(Clone, Debug, PartialEq)]
pub enum Expectation {
    /// Per-degree values with absolute tolerances.
    Absolute { degrees: Vec<u32>, values: Vec<f64>, tol: Vec<f64> },
    /// Per-degree values with a relative tolerance, plus absolute overrides.
    Relative { degrees: Vec<u32>, values: Vec<f64>, rel: f64, abs_override: Vec<(u32, f64)> },
    /// Reference values that depend on unavailable random data: shown next to ours, not asserted.
    Reference { degrees: Vec<u32>, values: Vec<f64> },
    None,
}

pub struct ExampleCase {
    pub name: &'static str,
    pub summary: &'static str,
    pub data_dependent: bool,
    pub expected: Expectation,
    /// Degrees swept by default.
    pub degrees: Vec<u32>,
    build: fn() -> Result<Problem, CaseError>,
}

impl ExampleCase {
    pub fn build(&self) -> Result<Problem, CaseError> {
        let mut p = (self.build)()?;
        p.degrees = self.degrees.clone();
        Ok(p)
    }
}

fn pv(entries: &[&str], n: usize) -> PolynomialVector {
    let vars = time_state_vars(n);
    PolynomialVector { entries: entries.iter().map(|e| Polynomial::parse(e, &vars).expect("bundled polynomial")).collect() }
}

fn px(src: &str, n: usize) -> Polynomial {
    Polynomial::parse(src, &names("x", n)).expect("bundled polynomial")
}

fn problem(spec: SystemSpec, objective: Objective, data_rows: Option<(usize, usize)>) -> Problem {
    Problem { spec, objective, degrees: vec![], options: AnalysisOptions::default(), seed: 0, data_rows }
}

const FLOW: [&str; 2] = ["x2", "-x1 - x2 + x1^3/3"];

/// Bundled JSON configs, by file name.
pub const CONFIGS: [(&str, &str); 4] = [
    ("flow_pillow.json", include_str!("../configs/flow_pillow.json")),
    ("roa_controlled_flow.json", include_str!("../configs/roa_controlled_flow.json")),
    ("flow_reach_box.json", include_str!("../configs/flow_reach_box.json")),
    ("flow_box_peak.json", include_str!("../configs/flow_box_peak.json")),
];

fn bundled(file: &str) -> Result<Problem, CaseError> {
    let text = CONFIGS.iter().find(|(f, _)| *f == file).map(|c| c.1).ok_or_else(|| CaseError::Unknown(file.into()))?;
    Ok(ProblemConfig::from_json(text)?.build(None)?)
}

fn flow_pillow() -> Result<Problem, CaseError> {
    bundled("flow_pillow.json")
}

fn roa_controlled_flow() -> Result<Problem, CaseError> {
    bundled("roa_controlled_flow.json")
}

fn flow_reach() -> Result<Problem, CaseError> {
    bundled("flow_reach_box.json")
}

/// Uniform samples of a region (rejection inside `bbox` for semialgebraic sets).
fn sample_points(region: &Region, bbox: &(Vec<f64>, Vec<f64>), count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(f64, Vec<f64>)>, CaseError> {
    (0..count).map(|_| Ok((0.0, sample_region(region, Some(bbox), rng)?))).collect()
}

/// Observe, build, reduce and bound-check a consistency polytope.
fn data_polytope(obs: &[Observation], dict: &Dictionary, eps: &[f64]) -> Result<(SdrSet, (usize, usize)), CaseError> {
    let full = datadriven::build_polytope(obs, dict, eps)?;
    let reduced = datadriven::reduce_redundant(&full)?;
    datadriven::check_bounded(&reduced)?;
    Ok((reduced.to_sdr()?, (full.rows(), reduced.rows())))
}

/// SIR observations: 100 uniform points of the simplex, `β = 0.4`, `γ = 0.1`, `ε = 0.1`.
pub fn sir_observations(seed: u64) -> Result<(Vec<Observation>, Dictionary), CaseError> {
    let dict = Dictionary { f0: pv(&["0", "0"], 2), channels: vec![pv(&["-x1*x2", "x1*x2"], 2), pv(&["0", "-x2"], 2)] };
    let truth = pv(&["-0.4*x1*x2", "0.4*x1*x2 - 0.1*x2"], 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, Vec<f64>)> = (0..100)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            let (s, i) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            (0.0, vec![s, i])
        })
        .collect();
    Ok((datadriven::synthesize(&truth, &pts, &[0.1, 0.1], &mut rng), dict))
}

fn sir_peak() -> Result<Problem, CaseError> {
    let (obs, dict) = sir_observations(11)?;
    let (w, rows) = data_polytope(&obs, &dict, &[0.1])?;
    let vars = names("x", 2);
    let simplex = BsaSet::new(&vars).ineq(px("x1", 2))?.ineq(px("x2", 2))?.ineq(px("1 - x1 - x2", 2))?;
    let spec = SystemSpec {
        n: 2,
        horizon: 40.0,
        f0: dict.f0,
        channels: dict.channels,
        x: Region::Semialgebraic(simplex),
        x0: Region::Point(vec![0.99, 0.01]),
        w,
        x_t: None,
        x_u: None,
    };
    Ok(problem(spec, Objective::Peak(px("x2", 2)), Some(rows)))
}

/// Cubic dictionary for `ẋ₂` with `ẋ₁ = x₂` known; 40 observations in the disc
/// of radius 0.4 around `(1.5, 0)` with `ε = [0; 0.5]`.
pub fn flow_data(seed: u64) -> Result<(Vec<Observation>, Dictionary), CaseError> {
    let dict = Dictionary::monomials(pv(&["x2", "0"], 2), 1, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disc = Region::Ball { center: vec![1.5, 0.0], radius: 0.4 };
    let pts = sample_points(&disc, &disc.bounding_box().unwrap(), 40, &mut rng)?;
    Ok((datadriven::synthesize(&pv(&FLOW, 2), &pts, &[0.0, 0.5], &mut rng), dict))
}

/// Ground-truth coefficients of [`flow_data`]'s dictionary.
pub fn flow_truth(dict: &Dictionary) -> Vec<f64> {
    let target = pv(&FLOW, 2).entries[1].clone();
    dict.channels.iter().map(|c| {
        let m = c.entries[1].terms().next().map(|(m, _)| m.clone()).expect("monomial channel");
        target.coeff(&m)
    }).collect()
}

fn flow_data_spec(x: Region, x0: Region) -> Result<(SystemSpec, (usize, usize)), CaseError> {
    let (obs, dict) = flow_data(3)?;
    let (w, rows) = data_polytope(&obs, &dict, &[0.0, 0.5])?;
    Ok((SystemSpec { n: 2, horizon: 5.0, f0: dict.f0, channels: dict.channels, x, x0, w, x_t: None, x_u: None }, rows))
}

fn flow_data_peak() -> Result<Problem, CaseError> {
    let (spec, rows) = flow_data_spec(Region::Ball { center: vec![0.0, 0.0], radius: 8f64.sqrt() }, Region::Point(vec![1.5, 0.0]))?;
    Ok(problem(spec, Objective::Peak(px("-x2", 2)), Some(rows)))
}

fn flow_data_peak_disc() -> Result<Problem, CaseError> {
    let (spec, rows) = flow_data_spec(
        Region::Ball { center: vec![0.0, 0.0], radius: 8f64.sqrt() },
        Region::Ball { center: vec![1.5, 0.0], radius: 0.4 },
    )?;
    Ok(problem(spec, Objective::Peak(px("-x2", 2)), Some(rows)))
}

fn flow_data_distance() -> Result<Problem, CaseError> {
    let (mut spec, rows) = flow_data_spec(Region::Box { lo: vec![-1.0, -1.25], hi: vec![1.25, 0.7] }, Region::Point(vec![1.0, 0.0]))?;
    let vars = names("x", 2);
    let half_disc = BsaSet::new(&vars)
        .ineq(px("0.25 - (x1 + 0.25)^2 - (x2 + 0.7)^2", 2))?
        .ineq(px("(-(x1 + 0.25) + (x2 + 0.7))/1.4142135623730951", 2))?;
    spec.x_u = Some(Region::Semialgebraic(half_disc));
    Ok(problem(spec, Objective::euclidean_distance(2), Some(rows)))
}

const TWIST_B1: [[f64; 3]; 3] = [[-1.0, 1.0, 1.0], [-1.0, 0.0, -1.0], [0.0, 1.0, -2.0]];
const TWIST_B3: [[f64; 3]; 3] = [[-1.0, 0.0, -1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0]];

fn twist_field(b1: Option<&[[f64; 3]; 3]>, b3: Option<&[[f64; 3]; 3]>) -> PolynomialVector {
    let vars = time_state_vars(3);
    let entries = (0..3)
        .map(|i| {
            let mut p = Polynomial::zero(&vars);
            for j in 0..3 {
                let xj = Polynomial::var(&vars, &vars[j + 1]).unwrap();
                if let Some(b) = b1 {
                    p = &p + &xj.scale(b[i][j]);
                }
                if let Some(b) = b3 {
                    let cheb = &xj.pow(3).scale(4.0) - &xj.scale(3.0);
                    p = &p - &cheb.scale(b[i][j] / 2.0);
                }
            }
            p
        })
        .collect();
    PolynomialVector { entries }
}

/// Channels `e_i x_j` (linear) or `−e_i (4x_j³ − 3x_j)/2` (cubic).
fn twist_channels(cubic: bool) -> Vec<PolynomialVector> {
    let vars = time_state_vars(3);
    let mut out = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            let xj = Polynomial::var(&vars, &vars[j + 1]).unwrap();
            let f = if cubic { (&xj.pow(3).scale(4.0) - &xj.scale(3.0)).scale(-0.5) } else { xj };
            let mut entries = vec![Polynomial::zero(&vars); 3];
            entries[i] = f;
            out.push(PolynomialVector { entries });
        }
    }
    out
}

/// Which Twist matrices are unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwistUnknown {
    B1,
    B3,
    Both,
}

pub fn twist_dictionary(which: TwistUnknown) -> Dictionary {
    match which {
        TwistUnknown::B1 => Dictionary { f0: twist_field(None, Some(&TWIST_B3)), channels: twist_channels(false) },
        TwistUnknown::B3 => Dictionary { f0: twist_field(Some(&TWIST_B1), None), channels: twist_channels(true) },
        TwistUnknown::Both => Dictionary {
            f0: pv(&["0", "0", "0"], 3),
            channels: twist_channels(false).into_iter().chain(twist_channels(true)).collect(),
        },
    }
}

/// Ground-truth coefficients of [`twist_dictionary`], row-major per matrix.
pub fn twist_truth(which: TwistUnknown) -> Vec<f64> {
    let flat = |b: &[[f64; 3]; 3]| b.iter().flatten().copied().collect::<Vec<_>>();
    match which {
        TwistUnknown::B1 => flat(&TWIST_B1),
        TwistUnknown::B3 => flat(&TWIST_B3),
        TwistUnknown::Both => [flat(&TWIST_B1), flat(&TWIST_B3)].concat(),
    }
}

fn twist_x() -> Region {
    Region::Box { lo: vec![-1.0, -1.0, 0.0], hi: vec![1.0, 1.0, 1.0] }
}

/// 100 observations uniform in `X` with `ε = 0.5`.
pub fn twist_observations(seed: u64) -> Result<Vec<Observation>, CaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = twist_x();
    let pts = sample_points(&x, &x.bounding_box().unwrap(), 100, &mut rng)?;
    Ok(datadriven::synthesize(&twist_field(Some(&TWIST_B1), Some(&TWIST_B3)), &pts, &[0.5; 3], &mut rng))
}

fn twist(which: TwistUnknown) -> Result<Problem, CaseError> {
    let obs = twist_observations(5)?;
    let dict = twist_dictionary(which);
    let (w, rows) = data_polytope(&obs, &dict, &[0.5])?;
    let spec = SystemSpec { n: 3, horizon: 8.0, f0: dict.f0, channels: dict.channels, x: twist_x(), x0: Region::Point(vec![-1.0, 0.0, 0.0]), w, x_t: None, x_u: None };
    Ok(problem(spec, Objective::Peak(px("x3", 3)), Some(rows)))
}

/// Every bundled case.
pub fn all() -> Vec<ExampleCase> {
    vec![
        ExampleCase {
            name: "flow-pillow-peak",
            summary: "Flow peak of -x2 under elliptope-bounded inputs",
            data_dependent: false,
            expected: Expectation::Absolute {
                degrees: (1..=6).collect(),
                values: vec![1.0, 1.0, 0.8952, 0.8477, 0.8471, 0.8470],
                tol: vec![2e-2, 2e-2, 2e-2, 2e-2, 5e-3, 5e-3],
            },
            degrees: (1..=6).collect(),
            build: flow_pillow,
        },
        ExampleCase {
            name: "roa-controlled-flow",
            summary: "ROA volume of controlled Flow into a disc, 16-row input polytope",
            data_dependent: false,
            expected: Expectation::Relative {
                degrees: (2..=6).collect(),
                values: vec![9.0, 9.0, 6.717, 5.620, 5.187],
                rel: 0.05,
                abs_override: vec![(2, 1e-3)],
            },
            degrees: (2..=6).collect(),
            build: roa_controlled_flow,
        },
        ExampleCase {
            name: "sir-peak-seeded",
            summary: "SIR peak infection with (beta, gamma) from 100 noisy observations",
            data_dependent: true,
            expected: Expectation::Reference { degrees: vec![3], values: vec![0.511] },
            degrees: vec![1, 2, 3],
            build: sir_peak,
        },
        ExampleCase {
            name: "flow-data-peak",
            summary: "Flow peak with a cubic x2' dictionary learned from 40 observations",
            data_dependent: true,
            expected: Expectation::Reference { degrees: vec![1, 2, 3, 4], values: vec![2.828, 2.448, 1.018, 0.8407] },
            degrees: vec![1, 2, 3, 4],
            build: flow_data_peak,
        },
        ExampleCase {
            name: "flow-data-peak-disc",
            summary: "As flow-data-peak, starting from the sampling disc",
            data_dependent: true,
            expected: Expectation::Reference { degrees: vec![1, 2, 3, 4], values: vec![2.828, 2.557, 1.245, 0.894] },
            degrees: vec![1, 2, 3, 4],
            build: flow_data_peak_disc,
        },
        ExampleCase {
            name: "flow-data-distance",
            summary: "Flow distance to a half-disc with the learned cubic dictionary",
            data_dependent: true,
            expected: Expectation::Reference { degrees: vec![1, 2, 3, 4, 5], values: vec![1.698e-5, 0.1936, 0.2003, 0.2009, 0.2013] },
            degrees: vec![1, 2, 3, 4, 5],
            build: flow_data_distance,
        },
        ExampleCase {
            name: "twist-b1-unknown",
            summary: "Twist peak of x3 with the linear matrix learned from data",
            data_dependent: true,
            expected: Expectation::Reference { degrees: vec![1, 2, 3], values: vec![1.0, 0.9050, 0.8174] },
            degrees: vec![1, 2, 3],
            build: || twist(TwistUnknown::B1),
        },
        ExampleCase {
            name: "twist-b3-unknown",
            summary: "Twist peak of x3 with the cubic matrix learned from data",
            data_dependent: true,
            expected: Expectation::Reference { degrees: vec![1, 2, 3], values: vec![1.0, 0.9050, 0.8174] },
            degrees: vec![1, 2, 3],
            build: || twist(TwistUnknown::B3),
        },
        ExampleCase {
            name: "twist-full-unknown",
            summary: "Twist peak with both matrices learned (capped at degree 2)",
            data_dependent: true,
            expected: Expectation::None,
            degrees: vec![1, 2],
            build: || twist(TwistUnknown::Both),
        },
        ExampleCase {
            name: "flow-reach-box",
            summary: "Reachable set of Flow from a disc under a bounded x2' disturbance",
            data_dependent: false,
            expected: Expectation::None,
            degrees: vec![1, 2, 3, 4],
            build: flow_reach,
        },
    ]
}

/// `*` and `?` wildcard match.
pub fn glob_match(pattern: &str, name: &str) -> bool {
    fn rec(p: &[char], s: &[char]) -> bool {
        match (p.first(), s.first()) {
            (None, None) => true,
            (Some('*'), _) => rec(&p[1..], s) || (!s.is_empty() && rec(p, &s[1..])),
            (Some('?'), Some(_)) => rec(&p[1..], &s[1..]),
            (Some(a), Some(b)) if a == b => rec(&p[1..], &s[1..]),
            _ => false,
        }
    }
    let p: Vec<char> = pattern.chars().collect();
    let s: Vec<char> = name.chars().collect();
    rec(&p, &s)
}

pub fn find(pattern: &str) -> Vec<ExampleCase> {
    all().into_iter().filter(|c| glob_match(pattern, c.name)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub name: String,
    pub report: BoundReport,
    pub data_rows: Option<(usize, usize)>,
    pub checks: Vec<Check>,
}

impl CaseOutcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub degrees: Option<Vec<u32>>,
    pub cross_check: bool,
    pub trajectories: usize,
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { degrees: None, cross_check: true, trajectories: 100, seed: 1 }
    }
}

/// Compare a report with an expectation; one check per expected degree present.
pub fn expectation_checks(expected: &Expectation, report: &BoundReport) -> Vec<Check> {
    let lookup = |d: u32| report.degrees.iter().find(|r| r.degree == d).and_then(|r| r.bound);
    let mut out = Vec::new();
    match expected {
        Expectation::Absolute { degrees, values, tol } => {
            for ((&d, &v), &t) in degrees.iter().zip(values).zip(tol) {
                if let Some(r) = report.degrees.iter().find(|r| r.degree == d) {
                    let got = r.bound;
                    let pass = got.is_some_and(|g| (g - v).abs() <= t);
                    out.push(Check { name: format!("d={d}"), pass, detail: format!("got {got:?}, expected {v} ± {t}") });
                }
            }
        }
        Expectation::Relative { degrees, values, rel, abs_override } => {
            for (&d, &v) in degrees.iter().zip(values) {
                if report.degrees.iter().any(|r| r.degree == d) {
                    let got = lookup(d);
                    let tol = abs_override.iter().find(|(k, _)| *k == d).map(|x| x.1).unwrap_or(rel * v.abs());
                    let pass = got.is_some_and(|g| (g - v).abs() <= tol);
                    out.push(Check { name: format!("d={d}"), pass, detail: format!("got {got:?}, expected {v} ± {tol:.4}") });
                }
            }
        }
        Expectation::Reference { degrees, values } => {
            let pairs: Vec<String> = degrees.iter().zip(values).map(|(d, v)| format!("d={d}: {:?} (reference {v})", lookup(*d))).collect();
            out.push(Check { name: "reference".into(), pass: true, detail: pairs.join("; ") });
        }
        Expectation::None => {}
    }
    out
}

/// Solve a case, cross-check against simulation, and evaluate its checks.
pub fn run_case(case: &ExampleCase, solver: &dyn ConicSolver, opts: &RunOptions) -> Result<CaseOutcome, CaseError> {
    let p = case.build()?;
    let degrees = opts.degrees.clone().unwrap_or(p.degrees.clone());
    let mut report = sweep(&p.spec, &p.objective, &degrees, &p.options, solver);
    let mut checks = expectation_checks(&case.expected, &report);
    checks.push(Check {
        name: "solved".into(),
        pass: report.any_solved(),
        detail: report.degrees.iter().map(|d| format!("d={} {}", d.degree, d.status)).collect::<Vec<_>>().join(", "),
    });
    checks.push(Check { name: "monotone".into(), pass: report.monotone, detail: format!("{:?}", report.bounds()) });
    if opts.cross_check {
        let emp = empirical_extremum(&p.spec, &p.objective, &EmpiricalOptions { n_traj: opts.trajectories, seed: opts.seed, ..Default::default() })?;
        apply_cross_check(&mut report, &p.spec, &emp, 1e-6);
        checks.push(Check {
            name: "sound".into(),
            pass: report.sound.unwrap_or(true),
            detail: format!("empirical {:?} over {} trajectories ({} failed)", report.empirical, emp.trajectories, emp.failures),
        });
    }
    Ok(CaseOutcome { name: case.name.to_string(), report, data_rows: p.data_rows, checks })
}
