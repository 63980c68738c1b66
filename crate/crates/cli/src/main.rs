//! `lie-robust` command line: bound sweeps from JSON configs, consistency
//! polytopes from observation CSVs, trajectory simulation and the bundled examples.
//!
//! Exit codes: 0 success, 1 failed check (unsound bound, failing example),
//! 2 configuration or usage error, 3 solver failure at every degree.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lie_robust::analysis::{apply_cross_check, levelset_csv, sweep, BoundReport, ProblemKind};
use lie_robust::cases::{self, RunOptions};
use lie_robust::conic::{ConicSolver, EmbeddedSolver, SdpaBridge};
use lie_robust::config::{parse_degrees, Problem, ProblemConfig, UncertaintyConfig};
use lie_robust::datadriven::{self, Dictionary};
use lie_robust::polyalg::{time_state_vars, Polynomial, PolynomialVector};
use lie_robust::simulate::{empirical_extremum, integrate, sample_region, EmpiricalOptions, InputSampler, InputSchedule, IntegrateOptions};
use lie_robust::sostighten::gram_size;

/// Marks errors that map to exit code 2.
#[derive(Debug)]
struct BadInput(String);

impl fmt::Display for BadInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BadInput {}

fn bad(msg: impl fmt::Display) -> anyhow::Error {
    anyhow!(BadInput(msg.to_string()))
}

#[derive(Parser)]
#[command(name = "lie-robust", version, about = "Certified bounds for input-affine systems under SDR input uncertainty")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Upper bound on the peak of p(x) along trajectories.
    Peak(SolveArgs),
    /// Lower bound on the distance of closest approach to X_u.
    Distance(SolveArgs),
    /// Outer approximation of the reachable set at time T.
    Reach(SolveArgs),
    /// Outer approximation of the backward reachable set of X_T.
    Roa(SolveArgs),
    /// Consistency polytope of dictionary coefficients from observations.
    DataBuild(DataArgs),
    /// Simulate admissible trajectories to CSV.
    Simulate(SimArgs),
    /// Cross-check a saved report against fresh simulations.
    CertifyCheck(CheckArgs),
    /// Size of a Gram matrix: block · binom(vars + half_degree, half_degree).
    GramSize {
        #[arg(long)]
        vars: usize,
        #[arg(long)]
        half_degree: usize,
        #[arg(long, default_value_t = 1)]
        block: usize,
    },
    /// Bundled example problems.
    Examples {
        #[command(subcommand)]
        cmd: ExamplesCmd,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    /// `a..b` or a comma list; defaults to the config's degrees.
    #[arg(long)]
    degrees: Option<String>,
    /// `embedded` or `sdpa:<program>`; defaults to $LIE_ROBUST_SOLVER, then embedded.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the JSON report.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Simulate trajectories and check the bounds against them.
    #[arg(long)]
    cross_check: bool,
    #[arg(long, default_value_t = 100)]
    trajectories: usize,
    /// Override the noise bound of data-driven uncertainty (comma list).
    #[arg(long)]
    eps: Option<String>,
    /// Reach/ROA: write φ on a grid over the box X to this CSV.
    #[arg(long)]
    levelset: Option<PathBuf>,
    #[arg(long, default_value_t = 41)]
    grid: usize,
}

#[derive(Args)]
struct DataArgs {
    /// Observations with columns t, x1..xn, y1..yn.
    #[arg(long)]
    csv: PathBuf,
    /// `linear`, `quadratic`, `cubic` or `monomials:<deg>`.
    #[arg(long, default_value = "linear")]
    dict: String,
    /// 1-based coordinate the monomial dictionaries act on (default: last).
    #[arg(long)]
    coord: Option<usize>,
    /// Known drift, `;`-separated entries over t, x1..xn (default zero).
    #[arg(long)]
    f0: Option<String>,
    /// Noise bound, one value or one per coordinate.
    #[arg(long, default_value = "0")]
    eps: String,
    /// Drop redundant rows.
    #[arg(long)]
    reduce: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 10)]
    trajectories: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of input switches over the horizon.
    #[arg(long, default_value_t = 50)]
    switches: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = 100)]
    trajectories: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum ExamplesCmd {
    List,
    Run {
        /// Glob over example names (`*`, `?`).
        #[arg(long, default_value = "*")]
        name: String,
        #[arg(long)]
        degrees: Option<String>,
        #[arg(long)]
        solver: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        trajectories: usize,
        #[arg(long)]
        no_cross_check: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<BadInput>().is_some() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Peak(a) => solve(a, ProblemKind::Peak),
        Cmd::Distance(a) => solve(a, ProblemKind::Distance),
        Cmd::Reach(a) => solve(a, ProblemKind::Reach),
        Cmd::Roa(a) => solve(a, ProblemKind::Roa),
        Cmd::DataBuild(a) => data_build(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::CertifyCheck(a) => certify_check(a),
        Cmd::GramSize { vars, half_degree, block } => {
            println!("{}", gram_size(vars, half_degree, block));
            Ok(0)
        }
        Cmd::Examples { cmd: ExamplesCmd::List } => {
            for c in cases::all() {
                let data = if c.data_dependent { " [data]" } else { "" };
                println!("{:<22} d={:?}{data}  {}", c.name, c.degrees, c.summary);
            }
            Ok(0)
        }
        Cmd::Examples { cmd: ExamplesCmd::Run { name, degrees, solver, seed, trajectories, no_cross_check, output } } => {
            run_examples(&name, degrees, solver, seed, trajectories, !no_cross_check, output)
        }
    }
}

fn solver_from(arg: Option<&str>) -> Result<Box<dyn ConicSolver>> {
    let choice = arg.map(str::to_string).or_else(|| std::env::var("LIE_ROBUST_SOLVER").ok()).unwrap_or_else(|| "embedded".into());
    if choice == "embedded" {
        Ok(Box::new(EmbeddedSolver))
    } else if let Some(p) = choice.strip_prefix("sdpa:") {
        Ok(Box::new(SdpaBridge::new(p)))
    } else {
        Err(bad(format!("unknown solver {choice:?} (expected embedded or sdpa:<path>)")))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad(format!("bad number {v:?}")))).collect()
}

fn load_config(path: &Path) -> Result<ProblemConfig> {
    ProblemConfig::load(path).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn build_problem(cfg: &ProblemConfig, path: &Path) -> Result<Problem> {
    cfg.build(path.parent()).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn print_table(report: &BoundReport) {
    println!("{} bounds ({})", report.kind.name(), report.solver);
    for d in &report.degrees {
        let b = d.bound.map(|b| format!("{b:.6}")).unwrap_or_else(|| "-".into());
        println!("  d={:<2} {:>12}  {:<14} gram {:>4}  {:.1}s", d.degree, b, d.status, d.largest_gram, d.wall_time_s);
    }
    if let Some(e) = report.empirical {
        println!("  empirical {e:.6} over {} trajectories", report.trajectories.unwrap_or(0));
    }
    println!("  monotone {}", report.monotone);
    if let Some(s) = report.sound {
        println!("  sound {s}");
    }
}

fn solve(a: SolveArgs, kind: ProblemKind) -> Result<u8> {
    let mut cfg = load_config(&a.config)?;
    if let Some(eps) = &a.eps {
        match &mut cfg.uncertainty {
            UncertaintyConfig::Data { eps: e, .. } => *e = parse_list(eps)?,
            _ => return Err(bad("--eps only applies to data-driven uncertainty")),
        }
    }
    let mut p = build_problem(&cfg, &a.config)?;
    if p.objective.kind() != kind {
        return Err(bad(format!("config describes a {} problem, not {}", p.objective.kind().name(), kind.name())));
    }
    if let Some(d) = &a.degrees {
        p.degrees = parse_degrees(d).map_err(bad)?;
    }
    let seed = a.seed.unwrap_or(p.seed);
    let solver = solver_from(a.solver.as_deref())?;
    if let Some((before, after)) = p.data_rows {
        log::info!("consistency polytope: {before} rows, {after} after reduction");
    }
    let mut report = sweep(&p.spec, &p.objective, &p.degrees, &p.options, solver.as_ref());
    if a.cross_check {
        let emp = empirical_extremum(&p.spec, &p.objective, &EmpiricalOptions { n_traj: a.trajectories, seed, ..Default::default() })?;
        apply_cross_check(&mut report, &p.spec, &emp, 1e-6);
    }
    print_table(&report);
    if let Some(path) = &a.output {
        write_out(Some(path), &serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(path) = &a.levelset {
        if !matches!(kind, ProblemKind::Reach | ProblemKind::Roa) {
            return Err(bad("--levelset needs a reach or roa problem"));
        }
        let phi = report
            .degrees
            .iter()
            .rev()
            .find_map(|d| d.phi_poly(&p.spec.vars()))
            .ok_or_else(|| anyhow!("no solved degree to draw"))?;
        write_out(Some(path), &levelset_csv(&phi, &p.spec.x, a.grid).map_err(bad)?)?;
    }
    if !report.any_solved() {
        eprintln!("solver failed at every degree");
        return Ok(3);
    }
    Ok(if report.sound == Some(false) { 1 } else { 0 })
}

fn dictionary(a: &DataArgs, n: usize) -> Result<Dictionary> {
    let vars = time_state_vars(n);
    let f0 = match &a.f0 {
        Some(s) => {
            let entries: Vec<&str> = s.split(';').collect();
            if entries.len() != n {
                return Err(bad(format!("--f0 needs {n} entries")));
            }
            PolynomialVector::parse(&entries, &vars).map_err(bad)?
        }
        None => PolynomialVector { entries: vec![Polynomial::zero(&vars); n] },
    };
    let coord = a.coord.unwrap_or(n);
    if coord == 0 || coord > n {
        return Err(bad(format!("--coord must be in 1..={n}")));
    }
    let deg = match a.dict.as_str() {
        "linear" => return Ok(Dictionary::linear(f0)),
        "quadratic" => 2,
        "cubic" => 3,
        other => other
            .strip_prefix("monomials:")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| bad(format!("unknown dictionary {other:?}")))?,
    };
    Ok(Dictionary::monomials(f0, coord - 1, deg))
}

fn data_build(a: DataArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&a.csv).map_err(|e| bad(format!("{}: {e}", a.csv.display())))?;
    let cols = text.lines().next().map(|l| l.split(',').count()).unwrap_or(0);
    if cols < 3 || (cols - 1) % 2 != 0 {
        return Err(bad("observation CSV needs columns t, x1..xn, y1..yn"));
    }
    let n = (cols - 1) / 2;
    let obs = datadriven::read_observations(text.as_bytes(), n).map_err(bad)?;
    let dict = dictionary(&a, n)?;
    let eps = parse_list(&a.eps)?;
    let full = datadriven::build_polytope(&obs, &dict, &eps).map_err(bad)?;
    let poly = if a.reduce { datadriven::reduce_redundant(&full)? } else { full.clone() };
    if let Err(e) = datadriven::check_bounded(&poly) {
        log::warn!("{e}");
    }
    eprintln!("{} observations, {} coefficients: {} rows, {} after reduction", obs.len(), poly.dim(), full.rows(), poly.rows());
    let rows: Vec<Vec<f64>> = (0..poly.rows()).map(|i| poly.gamma.row(i).iter().copied().collect()).collect();
    let doc = serde_json::json!({
        "dim": poly.dim(),
        "rows_before": full.rows(),
        "rows_after": poly.rows(),
        "uncertainty": { "type": "polytope", "rows": rows, "rhs": poly.h.as_slice() },
    });
    write_out(a.output.as_deref(), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    Ok(0)
}

fn simulate(a: SimArgs) -> Result<u8> {
    let cfg = load_config(&a.config)?;
    let p = build_problem(&cfg, &a.config)?;
    let seed = a.seed.unwrap_or(p.seed);
    let sampler = InputSampler::new(&p.spec.w, seed)?;
    let bbox = p.spec.x.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for k in 0..a.trajectories {
        let x0 = sample_region(&p.spec.x0, p.spec.x0.bounding_box().as_ref().or(bbox.as_ref()), &mut rng)?;
        let values = (0..a.switches.max(1)).map(|_| sampler.draw(&mut rng)).collect();
        let sched = InputSchedule { period: p.spec.horizon / a.switches.max(1) as f64, values };
        let traj = integrate(&p.spec, &x0, &sched, &IntegrateOptions::default())?;
        for (i, line) in traj.to_csv().lines().enumerate() {
            if i == 0 {
                if k == 0 {
                    out.push_str(&format!("traj,{line}\n"));
                }
            } else {
                out.push_str(&format!("{k},{line}\n"));
            }
        }
    }
    write_out(a.output.as_deref(), &out)?;
    Ok(0)
}

fn certify_check(a: CheckArgs) -> Result<u8> {
    let cfg = load_config(&a.config)?;
    let p = build_problem(&cfg, &a.config)?;
    let text = std::fs::read_to_string(&a.report).map_err(|e| bad(format!("{}: {e}", a.report.display())))?;
    let mut report: BoundReport = serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", a.report.display())))?;
    if report.kind != p.objective.kind() {
        return Err(bad("report and config describe different problems"));
    }
    let seed = a.seed.unwrap_or(p.seed);
    let emp = empirical_extremum(&p.spec, &p.objective, &EmpiricalOptions { n_traj: a.trajectories, seed, ..Default::default() })?;
    apply_cross_check(&mut report, &p.spec, &emp, 1e-6);
    print_table(&report);
    Ok(if report.sound == Some(false) { 1 } else { 0 })
}

fn run_examples(
    pattern: &str,
    degrees: Option<String>,
    solver: Option<String>,
    seed: Option<u64>,
    trajectories: usize,
    cross_check: bool,
    output: Option<PathBuf>,
) -> Result<u8> {
    let selected = cases::find(pattern);
    if selected.is_empty() {
        return Err(bad(format!("no example matches {pattern:?}")));
    }
    let degrees = degrees.map(|d| parse_degrees(&d)).transpose().map_err(bad)?;
    let solver = solver_from(solver.as_deref())?;
    let mut outcomes = Vec::new();
    let mut all_pass = true;
    for case in &selected {
        let opts = RunOptions { degrees: degrees.clone(), cross_check, trajectories, seed: seed.unwrap_or(1) };
        let out = cases::run_case(case, solver.as_ref(), &opts)?;
        println!("{} {}", if out.pass() { "PASS" } else { "FAIL" }, out.name);
        for c in &out.checks {
            println!("    {} {:<10} {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.detail);
        }
        all_pass &= out.pass();
        outcomes.push(out);
    }
    if let Some(p) = &output {
        write_out(Some(p), &serde_json::to_string_pretty(&outcomes)?)?;
    }
    Ok(if all_pass { 0 } else { 1 })
}
