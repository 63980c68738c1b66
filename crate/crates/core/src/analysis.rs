//! Peak, distance, reachable-set and region-of-attraction programs and degree sweeps.
//!
//! Time is rescaled to `[0, 1]` internally: with `s = t/T` the dynamics become
//! `T·f(Ts, x)` and the time domain is `{s(1 − s) ≥ 0}`.

use std::time::Instant;

use lie_robust_conic::{ConicError, ConicProblem, ConicSolution, ConicSolver, SolverOptions, Status};
use serde::{Deserialize, Serialize};

use crate::lierobust::{robustify, RobustError};
use crate::polyalg::{names, time_state_vars, MultiIndex, PolyError, Polynomial, PolynomialVector};
use crate::sdrset::{BsaSet, SdrError, SdrSet};
use crate::sostighten::{lie_terms_lin, Layout, LinExpr, LinPoly, SosError, SosProgram, VarId};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("invalid system: {0}")]
    Spec(String),
    #[error("{0} requires X to be a box or a ball")]
    UnsupportedRegion(&'static str),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sdr(#[from] SdrError),
    #[error(transparent)]
    Robust(#[from] RobustError),
    #[error(transparent)]
    Sos(#[from] SosError),
    #[error("solver failure: {0}")]
    Solver(#[from] ConicError),
}

/// A state-space region.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Point(Vec<f64>),
    /// Descriptors over `x1..xn`.
    Semialgebraic(BsaSet),
}

impl Region {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Region::Box { lo, .. } => Some(lo.len()),
            Region::Ball { center, .. } => Some(center.len()),
            Region::Point(x) => Some(x.len()),
            Region::Semialgebraic(_) => None,
        }
    }

    /// Descriptors over the given coordinate names. Boxes use `(x − lo)(hi − x) ≥ 0`.
    pub fn to_bsa(&self, coords: &[String]) -> Result<BsaSet, AnalysisError> {
        let mut set = BsaSet::new(coords);
        let var = |i: usize| Polynomial::var(coords, &coords[i]);
        match self {
            Region::Box { lo, hi } => {
                for i in 0..coords.len() {
                    let x = var(i)?;
                    let a = &x - &Polynomial::constant(coords, lo[i]);
                    let b = &Polynomial::constant(coords, hi[i]) - &x;
                    set = set.ineq(&a * &b)?;
                }
            }
            Region::Ball { center, radius } => {
                let mut g = Polynomial::constant(coords, radius * radius);
                for (i, c) in center.iter().enumerate() {
                    let d = &var(i)? - &Polynomial::constant(coords, *c);
                    g = &g - &(&d * &d);
                }
                set = set.ineq(g)?;
            }
            Region::Point(a) => {
                for (i, c) in a.iter().enumerate() {
                    set = set.eq(&var(i)? - &Polynomial::constant(coords, *c))?;
                }
            }
            Region::Semialgebraic(b) => {
                // Rename x1..xn to the requested coordinates.
                let from = names("x", coords.len());
                let images: Vec<Polynomial> = (0..coords.len()).map(var).collect::<Result<_, _>>()?;
                let map = |p: &Polynomial| -> Result<Polynomial, PolyError> { p.embed(&from)?.compose(&images) };
                for g in &b.ineqs {
                    set = set.ineq(map(g)?)?;
                }
                for h in &b.eqs {
                    set = set.eq(map(h)?)?;
                }
                for m in &b.matrix_ineqs {
                    set = set.matrix_ineq(m.iter().map(map).collect::<Result<_, _>>()?)?;
                }
            }
        }
        Ok(set)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Region::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            Region::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= radius + tol
            }
            Region::Point(a) => x.iter().zip(a).all(|(u, v)| (u - v).abs() <= tol),
            Region::Semialgebraic(b) => b.contains(x, tol).unwrap_or(false),
        }
    }

    /// An upper bound on `‖x‖²` over the region, when known.
    pub fn max_norm_sq(&self) -> Option<f64> {
        match self {
            Region::Box { lo, hi } => Some(lo.iter().zip(hi).map(|(l, h)| (l * l).max(h * h)).sum()),
            Region::Ball { center, radius } => {
                let c = center.iter().map(|v| v * v).sum::<f64>().sqrt();
                Some((c + radius) * (c + radius))
            }
            Region::Point(a) => Some(a.iter().map(|v| v * v).sum()),
            Region::Semialgebraic(_) => None,
        }
    }

    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Region::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            Region::Ball { center, radius } => {
                Some((center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect()))
            }
            Region::Point(a) => Some((a.clone(), a.clone())),
            Region::Semialgebraic(_) => None,
        }
    }

    /// `∫_R x^α dx` for boxes and balls.
    pub fn lebesgue_moment(&self, alpha: &[u32]) -> Option<f64> {
        match self {
            Region::Box { lo, hi } => Some(
                alpha
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(&a, (l, h))| (h.powi(a as i32 + 1) - l.powi(a as i32 + 1)) / (a as f64 + 1.0))
                    .product(),
            ),
            Region::Ball { center, radius } => Some(ball_moment(center, *radius, alpha)),
            _ => None,
        }
    }

    pub fn volume(&self) -> Option<f64> {
        self.lebesgue_moment(&vec![0; self.dim()?])
    }
}

/// `Γ(k/2)` for a positive integer `k`.
fn gamma_half(k: u32) -> f64 {
    let mut v = if k % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut j = if k % 2 == 0 { 2 } else { 1 };
    while j < k {
        v *= j as f64 / 2.0;
        j += 2;
    }
    v
}

/// `∫_{B^n} u^β du` over the unit ball.
fn unit_ball_moment(beta: &[u32]) -> f64 {
    if beta.iter().any(|b| b % 2 == 1) {
        return 0.0;
    }
    let n = beta.len() as u32;
    let sb: u32 = beta.iter().sum();
    let num: f64 = beta.iter().map(|&b| gamma_half(b + 1)).product();
    2.0 * num / gamma_half(sb + n) / (sb + n) as f64
}

fn ball_moment(center: &[f64], r: f64, alpha: &[u32]) -> f64 {
    // x = c + r u: expand Π (c_i + r u_i)^{α_i}.
    fn rec(i: usize, c: &[f64], r: f64, alpha: &[u32], beta: &mut Vec<u32>, coef: f64, acc: &mut f64) {
        if i == alpha.len() {
            *acc += coef * unit_ball_moment(beta);
            return;
        }
        let a = alpha[i];
        for k in 0..=a {
            let binom = crate::polyalg::binom(a as usize, k as usize) as f64;
            beta.push(k);
            rec(i + 1, c, r, alpha, beta, coef * binom * c[i].powi((a - k) as i32) * r.powi(k as i32), acc);
            beta.pop();
        }
    }
    let mut acc = 0.0;
    rec(0, center, r, alpha, &mut Vec::new(), r.powi(alpha.len() as i32), &mut acc);
    acc
}

/// Input-affine system `ẋ = f₀(t,x) + Σ w_ℓ f_ℓ(t,x)`, `w ∈ W`, on `[0, T] × X`.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub n: usize,
    pub horizon: f64,
    /// Over [`time_state_vars`]`(n)`.
    pub f0: PolynomialVector,
    pub channels: Vec<PolynomialVector>,
    pub x: Region,
    pub x0: Region,
    pub w: SdrSet,
    pub x_t: Option<Region>,
    pub x_u: Option<Region>,
}

impl SystemSpec {
    pub fn vars(&self) -> Vec<String> {
        time_state_vars(self.n)
    }

    pub fn state_names(&self) -> Vec<String> {
        names("x", self.n)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        let vars = self.vars();
        if self.f0.len() != self.n || self.channels.iter().any(|c| c.len() != self.n) {
            return Err(AnalysisError::Spec("dynamics must have n entries".into()));
        }
        for f in std::iter::once(&self.f0).chain(&self.channels) {
            if f.entries.iter().any(|p| p.vars() != vars.as_slice()) {
                return Err(AnalysisError::Spec("dynamics must be over (t, x1..xn)".into()));
            }
        }
        if self.channels.len() != self.w.dim() {
            return Err(AnalysisError::Spec(format!("{} channels but W has dimension {}", self.channels.len(), self.w.dim())));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(AnalysisError::Spec("horizon must be positive and finite".into()));
        }
        for r in [Some(&self.x), Some(&self.x0), self.x_t.as_ref(), self.x_u.as_ref()].into_iter().flatten() {
            if let Some(k) = r.dim() {
                if k != self.n {
                    return Err(AnalysisError::Spec("region dimension differs from n".into()));
                }
            }
        }
        if let Region::Point(a) = &self.x0 {
            if !self.x.contains(a, 1e-9) {
                return Err(AnalysisError::Spec("X0 is not inside X".into()));
            }
        }
        Ok(())
    }

    /// Dynamics in rescaled time over `(t, x)`.
    pub fn scaled_dynamics(&self) -> (PolynomialVector, Vec<PolynomialVector>) {
        let t = self.horizon;
        let sc = |f: &PolynomialVector| PolynomialVector { entries: f.entries.iter().map(|p| p.scale_var(0, t).scale(t)).collect() };
        (sc(&self.f0), self.channels.iter().map(sc).collect())
    }

    /// Evaluate `f(t, x, w)` in physical time.
    pub fn rhs(&self, t: f64, x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut pt = Vec::with_capacity(self.n + 1);
        pt.push(t);
        pt.extend_from_slice(x);
        let mut out = self.f0.eval(&pt);
        for (l, ch) in self.channels.iter().enumerate() {
            if w[l] != 0.0 {
                for (o, v) in out.iter_mut().zip(ch.eval(&pt)) {
                    *o += w[l] * v;
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Peak,
    Distance,
    Reach,
    Roa,
}

impl ProblemKind {
    /// `+1` when bounds must not increase with the degree, `−1` when they must not decrease.
    pub fn direction(&self) -> f64 {
        match self {
            ProblemKind::Distance => -1.0,
            _ => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Peak => "peak",
            ProblemKind::Distance => "distance",
            ProblemKind::Reach => "reach",
            ProblemKind::Roa => "roa",
        }
    }
}

/// The objective data of a problem.
#[derive(Clone, Debug)]
pub enum Objective {
    /// Maximize `p(x)` along trajectories (`p` over `x1..xn`).
    Peak(Polynomial),
    /// Closest approach to `X_u` with metric `c(x, y)` over `(x1..xn, y1..yn)`;
    /// `sqrt` reports the square root of the certified value.
    Distance { metric: Polynomial, sqrt: bool },
    Reach,
    Roa,
}

impl Objective {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Objective::Peak(_) => ProblemKind::Peak,
            Objective::Distance { .. } => ProblemKind::Distance,
            Objective::Reach => ProblemKind::Reach,
            Objective::Roa => ProblemKind::Roa,
        }
    }

    /// Squared Euclidean metric over `(x, y)`, reported as a distance.
    pub fn euclidean_distance(n: usize) -> Self {
        let vars: Vec<String> = names("x", n).into_iter().chain(names("y", n)).collect();
        let mut c = Polynomial::zero(&vars);
        for i in 0..n {
            let d = &Polynomial::var(&vars, &vars[i]).unwrap() - &Polynomial::var(&vars, &vars[n + i]).unwrap();
            c = &c + &(&d * &d);
        }
        Objective::Distance { metric: c, sqrt: true }
    }
}

/// How the Lie constraint handles `w`.
#[derive(Clone, Debug, PartialEq)]
pub enum LieMode {
    /// Conic robust counterpart.
    Robust,
    /// One SOS constraint per listed input value (vertex decomposition).
    Vertices(Vec<Vec<f64>>),
}

#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    /// Strictness margin subtracted in the Lie inequality.
    pub margin: f64,
    /// Add `R² − ‖(t,x)‖² ≥ 0` to domains built from `X`.
    pub redundant_ball: bool,
    pub lie: LieMode,
    /// Raise the multiplier half-degree to the largest of `⌈deg c_ℓ / 2⌉` and
    /// `⌈deg L_{f₀}v / 2⌉` when either exceeds `d`, instead of keeping it at `d`.
    pub balanced_multipliers: bool,
    pub solver: SolverOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { margin: 0.0, redundant_ball: true, lie: LieMode::Robust, balanced_multipliers: false, solver: SolverOptions::default() }
    }
}

/// An assembled program with handles to its certificate unknowns.
pub struct BuiltProgram {
    pub kind: ProblemKind,
    pub degree: u32,
    pub sos: SosProgram,
    pub problem: ConicProblem,
    pub layout: Layout,
    pub v: LinPoly,
    pub phi: Option<LinPoly>,
    pub gamma: Option<VarId>,
    sqrt: bool,
}

impl BuiltProgram {
    pub fn largest_gram(&self) -> usize {
        self.sos.grams().iter().map(|g| g.side).max().unwrap_or(0)
    }

    /// Map a program objective value to the reported bound.
    pub fn bound_from_objective(&self, obj: f64) -> f64 {
        match self.kind {
            ProblemKind::Distance => {
                let c = -obj;
                if self.sqrt {
                    c.max(0.0).sqrt()
                } else {
                    c
                }
            }
            _ => obj,
        }
    }
}

fn add_ball(set: BsaSet, r2: f64) -> Result<BsaSet, AnalysisError> {
    let vars = set.vars.clone();
    let mut g = Polynomial::constant(&vars, r2);
    for v in &vars {
        let x = Polynomial::var(&vars, v)?;
        g = &g - &(&x * &x);
    }
    Ok(set.ineq(g)?)
}

/// `[0,1] × X` over `(t, x)` with the optional redundant ball.
pub fn time_state_domain(spec: &SystemSpec, ball: bool) -> Result<BsaSet, AnalysisError> {
    let vars = spec.vars();
    let t = Polynomial::var(&vars, "t")?;
    let time = &t * &(&Polynomial::constant(&vars, 1.0) - &t);
    let mut dom = BsaSet::new(&vars).ineq(time)?;
    let xs = spec.x.to_bsa(&spec.state_names())?;
    dom = dom.product(&xs, &vars)?;
    if ball {
        if let Some(r2) = spec.x.max_norm_sq() {
            dom = add_ball(dom, 1.0 + r2)?;
        }
    }
    Ok(dom)
}

fn state_domain(spec: &SystemSpec, region: &Region, ball: bool) -> Result<BsaSet, AnalysisError> {
    let mut dom = region.to_bsa(&spec.state_names())?;
    if ball {
        if let Some(r2) = region.max_norm_sq() {
            dom = add_ball(dom, 1.0 + r2)?;
        }
    }
    Ok(dom)
}

/// Build the degree-`d` program for an objective.
pub fn build(spec: &SystemSpec, objective: &Objective, d: u32, opts: &AnalysisOptions) -> Result<BuiltProgram, AnalysisError> {
    spec.validate()?;
    if d == 0 {
        return Err(AnalysisError::Spec("degree must be at least 1".into()));
    }
    let n = spec.n;
    let kind = objective.kind();
    let tx = spec.vars();
    // Distance programs carry y-coordinates too.
    let ys = names("y", n);
    let prog_vars: Vec<String> = if kind == ProblemKind::Distance { tx.iter().cloned().chain(ys.iter().cloned()).collect() } else { tx.clone() };
    let mut sos = SosProgram::new(&prog_vars);
    let all_tx: Vec<usize> = (0..=n).collect();
    let xs_idx: Vec<usize> = (1..=n).collect();
    let v_basis = sos.basis(&all_tx, 2 * d);
    let v = sos.new_free_poly("v", &v_basis);
    let dom_tx = time_state_domain(spec, opts.redundant_ball)?;
    let dom_x = state_domain(spec, &spec.x, opts.redundant_ball)?;
    let v0 = v.substitute(0, 0.0);
    let v1 = v.substitute(0, 1.0);
    let zero = MultiIndex::zero(prog_vars.len());
    let one = LinExpr::constant(1.0);

    let mut gamma = None;
    let mut phi = None;
    // Initial condition / target constraints and the cost.
    match objective {
        Objective::Peak(_) | Objective::Distance { .. } => {
            let g = sos.new_scalar("gamma");
            gamma = Some(g);
            let mut lhs = LinPoly::zero(&prog_vars);
            lhs.add_term(zero.clone(), &LinExpr::var(g), 1.0);
            lhs.add_scaled(&v0, -1.0);
            initial_constraint(&mut sos, spec, &lhs, d, "init")?;
            sos.minimize(&LinExpr::var(g));
        }
        Objective::Reach => {
            initial_constraint(&mut sos, spec, &v0.scaled(-1.0), d, "init")?;
        }
        Objective::Roa => {
            let xt = spec.x_t.as_ref().ok_or_else(|| AnalysisError::Spec("ROA needs X_T".into()))?;
            match xt {
                Region::Point(a) => {
                    let mut pt = vec![1.0];
                    pt.extend_from_slice(a);
                    pad(&mut pt, prog_vars.len());
                    sos.add_nonneg(&v.eval(&pt), "target");
                }
                r => {
                    let set = r.to_bsa(&spec.state_names())?;
                    sos.add_sos_on(&v1, &set, d, "target")?;
                }
            }
        }
    }
    match objective {
        Objective::Peak(p) => {
            let p = p.embed(&prog_vars)?;
            let mut lhs = v.clone();
            lhs.add_poly(&p, -1.0);
            let hd = d.max(p.degree().div_ceil(2));
            sos.add_sos_on(&lhs, &dom_tx, hd, "cost")?;
        }
        Objective::Distance { metric, .. } => {
            let ph = sos.new_free_poly("phi", &sos.basis(&xs_idx, 2 * d));
            let mut lhs = v.clone();
            lhs.add_scaled(&ph, -1.0);
            sos.add_sos_on(&lhs, &dom_tx, d, "cost")?;
            let xu = spec.x_u.as_ref().ok_or_else(|| AnalysisError::Spec("distance needs X_u".into()))?;
            let yset = xu.to_bsa(&ys)?;
            let xy_names: Vec<String> = spec.state_names().into_iter().chain(ys.iter().cloned()).collect();
            let mut xy = dom_x.product(&yset, &xy_names)?;
            if opts.redundant_ball {
                if let (Some(a), Some(b)) = (spec.x.max_norm_sq(), xu.max_norm_sq()) {
                    xy = add_ball(xy, 1.0 + a + b)?;
                }
            }
            let c = metric.embed(&prog_vars)?;
            let mut lhs = ph.clone();
            lhs.add_poly(&c, 1.0);
            let hd = d.max(c.degree().div_ceil(2));
            sos.add_sos_on(&lhs, &xy, hd, "closest")?;
            phi = Some(ph);
        }
        Objective::Reach | Objective::Roa => {
            let region_moments = |a: &MultiIndex| spec.x.lebesgue_moment(&a.0[1..=n]);
            let ph = sos.new_free_poly("phi", &sos.basis(&xs_idx, 2 * d));
            let name = if kind == ProblemKind::Reach { "reach" } else { "roa" };
            let mut obj = LinExpr::default();
            for (a, e) in ph.terms() {
                let m = region_moments(a).ok_or(AnalysisError::UnsupportedRegion(if kind == ProblemKind::Reach { "reach" } else { "roa" }))?;
                obj.add_scaled(e, m);
            }
            sos.minimize(&obj);
            // φ + v(1,·) − 1 ≥ 0 (reach) or φ − 1 − v(0,·) ≥ 0 (ROA) on X.
            let mut lhs = ph.clone();
            if kind == ProblemKind::Reach {
                lhs.add_scaled(&v1, 1.0);
            } else {
                lhs.add_scaled(&v0, -1.0);
            }
            lhs.add_term(zero.clone(), &one, -1.0);
            sos.add_sos_on(&lhs, &dom_x, d, &format!("{name}/level"))?;
            sos.add_sos_on(&ph, &dom_x, d, &format!("{name}/phi_nonneg"))?;
            phi = Some(ph);
        }
    }

    // Lie constraint.
    let (f0, chans) = spec.scaled_dynamics();
    let embed_vec = |f: &PolynomialVector| -> Result<PolynomialVector, PolyError> {
        Ok(PolynomialVector { entries: f.entries.iter().map(|p| p.embed(&prog_vars)).collect::<Result<_, _>>()? })
    };
    let f0 = embed_vec(&f0)?;
    let chans: Vec<PolynomialVector> = chans.iter().map(embed_vec).collect::<Result<_, _>>()?;
    let lie = lie_terms_lin(&v, &f0, &chans)?;
    match &opts.lie {
        LieMode::Robust => {
            let sys = robustify(spec.channels.len(), &spec.w)?.with_margin(opts.margin);
            let dz = if opts.balanced_multipliers {
                lie.channels.iter().chain([&lie.base]).map(|c| c.degree().div_ceil(2)).max().unwrap_or(0).max(d)
            } else {
                d
            };
            sos.add_robust(&sys, &lie, &dom_tx, d, dz, "lie")?;
        }
        LieMode::Vertices(points) => {
            for (k, w) in points.iter().enumerate() {
                if w.len() != spec.channels.len() {
                    return Err(AnalysisError::Spec("vertex has the wrong dimension".into()));
                }
                let mut p = lie.base.scaled(-1.0);
                for (l, c) in lie.channels.iter().enumerate() {
                    p.add_scaled(c, -w[l]);
                }
                p.add_term(zero.clone(), &LinExpr::constant(-opts.margin), 1.0);
                p.compact();
                let hd = p.degree().div_ceil(2).max(d);
                sos.add_sos_on(&p, &dom_tx, hd, &format!("lie/vertex{}", k + 1))?;
            }
        }
    }
    let (problem, layout) = sos.build();
    Ok(BuiltProgram { kind, degree: d, sos, problem, layout, v, phi, gamma, sqrt: matches!(objective, Objective::Distance { sqrt: true, .. }) })
}

fn pad(pt: &mut Vec<f64>, len: usize) {
    pt.resize(len, 0.0);
}

/// `lhs(x) ≥ 0` on `X0` (`lhs` must not depend on `t`).
fn initial_constraint(sos: &mut SosProgram, spec: &SystemSpec, lhs: &LinPoly, d: u32, label: &str) -> Result<(), AnalysisError> {
    match &spec.x0 {
        Region::Point(a) => {
            let mut pt = vec![0.0];
            pt.extend_from_slice(a);
            pad(&mut pt, sos.vars().len());
            sos.add_nonneg(&lhs.eval(&pt), label);
        }
        r => {
            let set = r.to_bsa(&spec.state_names())?;
            sos.add_sos_on(lhs, &set, d, label)?;
        }
    }
    Ok(())
}

/// Per-degree outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeResult {
    pub degree: u32,
    pub status: String,
    pub bound: Option<f64>,
    pub primal_objective: Option<f64>,
    pub dual_objective: Option<f64>,
    pub max_residual: Option<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub rows: usize,
    pub largest_gram: usize,
    /// Certificate polynomials in the text grammar (physical time is `t·T`).
    pub v: Option<String>,
    pub phi: Option<String>,
    pub error: Option<String>,
}

/// A degree sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: ProblemKind,
    pub solver: String,
    pub degrees: Vec<DegreeResult>,
    /// Empirical companion: max p (peak), min distance (distance), or min φ over
    /// sampled endpoints / successful starts (reach, ROA).
    pub empirical: Option<f64>,
    pub trajectories: Option<usize>,
    pub monotone: bool,
    pub sound: Option<bool>,
}

impl BoundReport {
    pub fn bounds(&self) -> Vec<Option<f64>> {
        self.degrees.iter().map(|d| d.bound).collect()
    }

    /// Whether any degree produced a value.
    pub fn any_solved(&self) -> bool {
        self.degrees.iter().any(|d| d.bound.is_some())
    }
}

/// Solve one degree; returns the program and raw solution alongside the summary.
pub fn solve_degree(
    spec: &SystemSpec,
    objective: &Objective,
    d: u32,
    opts: &AnalysisOptions,
    solver: &dyn ConicSolver,
) -> Result<(DegreeResult, BuiltProgram, ConicSolution), AnalysisError> {
    let start = Instant::now();
    let built = build(spec, objective, d, opts)?;
    log::info!(
        "{} d={d}: {} rows, {} columns, largest Gram {}",
        built.kind.name(),
        built.problem.num_rows(),
        built.problem.num_cols(),
        built.largest_gram()
    );
    let sol = solver.solve(&built.problem, &opts.solver)?;
    let values = built.sos.values(&built.layout, &sol);
    let has = sol.status.has_value();
    let res = DegreeResult {
        degree: d,
        status: format!("{:?}", sol.status),
        bound: has.then(|| built.bound_from_objective(sol.primal_objective)),
        primal_objective: has.then_some(sol.primal_objective),
        dual_objective: has.then_some(sol.dual_objective),
        max_residual: Some(sol.residuals.max()),
        iterations: sol.iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
        rows: built.problem.num_rows(),
        largest_gram: built.largest_gram(),
        v: has.then(|| built.v.value(&values).to_string()),
        phi: if has { built.phi.as_ref().map(|p| p.value(&values).to_string()) } else { None },
        error: None,
    };
    Ok((res, built, sol))
}

/// Numeric certificate polynomials `(v, φ)` from a solved program.
pub fn certificates(built: &BuiltProgram, sol: &ConicSolution) -> (Polynomial, Option<Polynomial>) {
    let values = built.sos.values(&built.layout, sol);
    (built.v.value(&values), built.phi.as_ref().map(|p| p.value(&values)))
}

/// Whether the bound sequence moves in the certified direction (within `tol`).
pub fn is_monotone(kind: ProblemKind, bounds: &[Option<f64>], tol: f64) -> bool {
    let vals: Vec<f64> = bounds.iter().flatten().copied().collect();
    vals.windows(2).all(|w| kind.direction() * (w[1] - w[0]) <= tol)
}

/// Solve a list of degrees without aborting on per-degree failures.
pub fn sweep(
    spec: &SystemSpec,
    objective: &Objective,
    degrees: &[u32],
    opts: &AnalysisOptions,
    solver: &dyn ConicSolver,
) -> BoundReport {
    let mut out = Vec::new();
    for &d in degrees {
        match solve_degree(spec, objective, d, opts, solver) {
            Ok((r, _, _)) => out.push(r),
            Err(e) => out.push(DegreeResult {
                degree: d,
                status: match e {
                    AnalysisError::Solver(_) => "SolverError".into(),
                    _ => "BuildError".into(),
                },
                bound: None,
                primal_objective: None,
                dual_objective: None,
                max_residual: None,
                iterations: 0,
                wall_time_s: 0.0,
                rows: 0,
                largest_gram: 0,
                v: None,
                phi: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let kind = objective.kind();
    let bounds: Vec<Option<f64>> = out.iter().map(|r| r.bound).collect();
    BoundReport {
        kind,
        solver: solver.name(),
        monotone: is_monotone(kind, &bounds, 1e-5),
        degrees: out,
        empirical: None,
        trajectories: None,
        sound: None,
    }
}

/// Whether a status counts as solved.
pub fn solved(status: Status) -> bool {
    status.has_value()
}


impl DegreeResult {
    /// The certified `φ` as a polynomial over `vars`.
    pub fn phi_poly(&self, vars: &[String]) -> Option<Polynomial> {
        self.phi.as_ref().and_then(|s| Polynomial::parse(s, vars).ok())
    }

    pub fn v_poly(&self, vars: &[String]) -> Option<Polynomial> {
        self.v.as_ref().and_then(|s| Polynomial::parse(s, vars).ok())
    }
}

/// Compare certified bounds with simulation and fill `empirical`, `trajectories`
/// and `sound`. Peak bounds must dominate the empirical maximum, distance bounds
/// must not exceed the empirical minimum (both with slack `tol·max(1, |b|)`), and
/// reach/ROA certificates must satisfy `φ ≥ 1 − 1e-3` at every sampled point.
pub fn apply_cross_check(report: &mut BoundReport, spec: &SystemSpec, emp: &crate::simulate::EmpiricalResult, tol: f64) {
    report.trajectories = Some(emp.trajectories);
    let mut sound = true;
    match report.kind {
        ProblemKind::Peak | ProblemKind::Distance => {
            report.empirical = emp.value;
            if let Some(e) = emp.value {
                for b in report.degrees.iter().filter_map(|d| d.bound) {
                    let slack = tol * b.abs().max(1.0);
                    let ok = if report.kind == ProblemKind::Peak { b >= e - slack } else { b <= e + slack };
                    sound &= ok;
                }
            }
        }
        ProblemKind::Reach | ProblemKind::Roa => {
            let vars = spec.vars();
            let mut worst = f64::INFINITY;
            for d in &report.degrees {
                if let Some(phi) = d.phi_poly(&vars) {
                    for x in &emp.points {
                        let mut pt = vec![0.0];
                        pt.extend_from_slice(x);
                        worst = worst.min(phi.eval_unchecked(&pt));
                    }
                }
            }
            if worst.is_finite() {
                report.empirical = Some(worst);
                sound = worst >= 1.0 - 1e-3;
            }
        }
    }
    report.sound = Some(sound);
}

/// Values of `φ(x)` (a polynomial over `t, x1..xn`, evaluated at `t = 0`) on a
/// `grid^n` lattice of the box `X`, as CSV with columns `x1..xn,phi`. A grid of
/// one samples the centre.
pub fn levelset_csv(phi: &Polynomial, x: &Region, grid: usize) -> Result<String, AnalysisError> {
    let Region::Box { lo, hi } = x else {
        return Err(AnalysisError::UnsupportedRegion("level sets need a box X".into()));
    };
    if grid == 0 {
        return Err(AnalysisError::Spec("grid must be positive".into()));
    }
    let n = lo.len();
    let coord = |i: usize, k: usize| {
        if grid == 1 {
            0.5 * (lo[i] + hi[i])
        } else {
            lo[i] + (hi[i] - lo[i]) * k as f64 / (grid - 1) as f64
        }
    };
    let mut out: Vec<String> = vec![(1..=n).map(|i| format!("x{i}")).chain(["phi".to_string()]).collect::<Vec<_>>().join(",")];
    let mut idx = vec![0usize; n];
    loop {
        let mut pt = vec![0.0];
        pt.extend((0..n).map(|i| coord(i, idx[i])));
        let val = phi.eval(&pt).map_err(AnalysisError::Poly)?;
        out.push(pt[1..].iter().chain([&val]).map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        let mut i = 0;
        while i < n {
            idx[i] += 1;
            if idx[i] < grid {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    out.push(String::new());
    Ok(out.join("\n"))
}
