//! Trajectory simulation under admissible inputs and empirical extrema.
//!
//! Inputs are piecewise constant; integration is adaptive Dormand–Prince 5(4)
//! with an event stop when the state leaves `X`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::analysis::{Objective, Region, SystemSpec};
use crate::polyalg::Polynomial;
use crate::sdrset::{Polytope, SdrError, SdrSet, Slater};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("degenerate polytope: {0}")]
    Degenerate(String),
    #[error("cannot sample region: {0}")]
    Region(String),
    #[error(transparent)]
    Sdr(#[from] SdrError),
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// Input active on `[t_k, t_{k+1})`.
    pub w: Vec<Vec<f64>>,
    /// Left `X` before the horizon.
    pub exited: bool,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.x.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// CSV with columns `t, x1..xn, w1..wL`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let n = self.x.first().map(Vec::len).unwrap_or(0);
        let l = self.w.first().map(Vec::len).unwrap_or(0);
        let mut head = vec!["t".to_string()];
        head.extend((1..=n).map(|i| format!("x{i}")));
        head.extend((1..=l).map(|i| format!("w{i}")));
        s.push_str(&head.join(","));
        s.push('\n');
        for k in 0..self.t.len() {
            let mut row = vec![format!("{}", self.t[k])];
            row.extend(self.x[k].iter().map(|v| format!("{v}")));
            if let Some(w) = self.w.get(k).or(self.w.last()) {
                row.extend(w.iter().map(|v| format!("{v}")));
            }
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// `w(t) = values[⌊t / period⌋]` (the last value is held).
#[derive(Clone, Debug)]
pub struct InputSchedule {
    pub period: f64,
    pub values: Vec<Vec<f64>>,
}

impl InputSchedule {
    pub fn constant(w: Vec<f64>) -> Self {
        InputSchedule { period: f64::INFINITY, values: vec![w] }
    }

    pub fn at(&self, t: f64) -> &[f64] {
        let k = if self.period.is_finite() { (t / self.period).floor().max(0.0) as usize } else { 0 };
        &self.values[k.min(self.values.len() - 1)]
    }
}

#[derive(Clone, Debug)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { rtol: 1e-8, atol: 1e-10, min_step: 1e-12, max_steps: 1_000_000 }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One step; returns the 5th-order solution and the error estimate.
fn dp_step(f: &mut dyn FnMut(f64, &[f64]) -> Vec<f64>, t: f64, x: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for s in 0..7 {
        let mut xs = x.to_vec();
        for (j, kj) in k.iter().enumerate() {
            if A[s][j] != 0.0 {
                for i in 0..n {
                    xs[i] += h * A[s][j] * kj[i];
                }
            }
        }
        k.push(f(t + C[s] * h, &xs));
    }
    let mut x5 = x.to_vec();
    let mut err = vec![0.0; n];
    for s in 0..7 {
        for i in 0..n {
            x5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    (x5, err)
}

/// Integrate `ẋ = f(t, x)` over `[t0, t1]`, recording accepted steps into `out`.
/// Stops early at the first time `inside` fails (located by bisection); returns
/// `true` on such an exit.
fn dopri(
    f: &mut dyn FnMut(f64, &[f64]) -> Vec<f64>,
    t0: f64,
    t1: f64,
    x0: &[f64],
    opts: &IntegrateOptions,
    inside: &dyn Fn(&[f64]) -> bool,
    out: &mut Vec<(f64, Vec<f64>)>,
) -> Result<bool, SimError> {
    let mut t = t0;
    let mut x = x0.to_vec();
    let mut h = ((t1 - t0) / 100.0).max(opts.min_step);
    let mut steps = 0;
    while t < t1 - 1e-14 * t1.abs().max(1.0) {
        steps += 1;
        if steps > opts.max_steps {
            return Err(SimError::StepUnderflow { t });
        }
        h = h.min(t1 - t);
        let (xn, err) = dp_step(f, t, &x, h);
        let e = err
            .iter()
            .zip(x.iter().zip(&xn))
            .map(|(e, (a, b))| (e / (opts.atol + opts.rtol * a.abs().max(b.abs()))).powi(2))
            .sum::<f64>()
            .sqrt()
            / (x.len().max(1) as f64).sqrt();
        if !e.is_finite() || xn.iter().any(|v| !v.is_finite()) {
            h *= 0.25;
            if h < opts.min_step {
                return Err(SimError::StepUnderflow { t });
            }
            continue;
        }
        if e <= 1.0 {
            if !inside(&xn) {
                // Bisect the step length for the crossing.
                let (mut lo, mut hi) = (0.0, h);
                let mut best = x.clone();
                while hi - lo > 1e-10 * h.max(1e-300) && hi - lo > 1e-13 {
                    let mid = 0.5 * (lo + hi);
                    let (xm, _) = dp_step(f, t, &x, mid);
                    if inside(&xm) {
                        lo = mid;
                        best = xm;
                    } else {
                        hi = mid;
                    }
                }
                if lo > 0.0 {
                    out.push((t + lo, best));
                }
                return Ok(true);
            }
            t += h;
            x = xn;
            out.push((t, x.clone()));
        }
        let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h < opts.min_step {
            return Err(SimError::StepUnderflow { t });
        }
    }
    Ok(false)
}

/// Forward trajectory on `[0, T]` from `x0` under a piecewise-constant schedule.
pub fn integrate(spec: &SystemSpec, x0: &[f64], schedule: &InputSchedule, opts: &IntegrateOptions) -> Result<Trajectory, SimError> {
    run(spec, x0, schedule, opts, false)
}

/// Backward trajectory: `z(s) = x(T − s)` with `ż = −f(T − s, z, w(s))`, starting from a
/// terminal state. A non-exited run ends at a start that reaches `x_end` at `T`.
pub fn integrate_backward(spec: &SystemSpec, x_end: &[f64], schedule: &InputSchedule, opts: &IntegrateOptions) -> Result<Trajectory, SimError> {
    run(spec, x_end, schedule, opts, true)
}

fn run(spec: &SystemSpec, x0: &[f64], schedule: &InputSchedule, opts: &IntegrateOptions, backward: bool) -> Result<Trajectory, SimError> {
    run_policy(spec, x0, schedule.period, opts, backward, &mut |t, _| schedule.at(t).to_vec())
}

/// Integrate with the input held constant over segments of length `period`; the
/// policy sees the segment start (running time) and state.
pub fn run_policy(
    spec: &SystemSpec,
    x0: &[f64],
    period: f64,
    opts: &IntegrateOptions,
    backward: bool,
    policy: &mut dyn FnMut(f64, &[f64]) -> Vec<f64>,
) -> Result<Trajectory, SimError> {
    let horizon = spec.horizon;
    let inside = |x: &[f64]| spec.x.contains(x, 1e-9);
    let mut traj = Trajectory { t: vec![0.0], x: vec![x0.to_vec()], w: Vec::new(), exited: false };
    if !inside(x0) {
        traj.exited = true;
        traj.w.push(policy(0.0, x0));
        return Ok(traj);
    }
    let mut t = 0.0;
    let mut x = x0.to_vec();
    while t < horizon - 1e-12 {
        let end = if period.is_finite() { (((t / period).floor() + 1.0) * period).min(horizon) } else { horizon };
        let end = if end - t < 1e-12 { (end + period).min(horizon) } else { end };
        let w = policy(t, &x);
        let mut f = |s: f64, z: &[f64]| -> Vec<f64> {
            if backward {
                spec.rhs(horizon - s, z, &w).into_iter().map(|v| -v).collect()
            } else {
                spec.rhs(s, z, &w)
            }
        };
        let mut out = Vec::new();
        let exited = dopri(&mut f, t, end, &x, opts, &inside, &mut out)?;
        for (s, z) in out {
            traj.w.push(w.clone());
            traj.t.push(s);
            traj.x.push(z);
        }
        if exited {
            traj.exited = true;
            break;
        }
        t = end;
        x = traj.x.last().unwrap().clone();
    }
    let last = traj.w.last().cloned().unwrap_or_else(|| policy(t, &x));
    traj.w.push(last);
    Ok(traj)
}

/// Sample-and-hold simulation of a state feedback `w = u(t, x)`.
pub fn integrate_feedback(
    spec: &SystemSpec,
    x0: &[f64],
    period: f64,
    opts: &IntegrateOptions,
    feedback: &mut dyn FnMut(f64, &[f64]) -> Vec<f64>,
) -> Result<Trajectory, SimError> {
    run_policy(spec, x0, period, opts, false, feedback)
}

/// Uniform samples from a bounded polytope by hit-and-run from its Chebyshev center.
pub fn hit_and_run(p: &Polytope, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, SimError> {
    let (c, r) = p.chebyshev_center()?;
    if r <= 1e-12 {
        return Err(SimError::Degenerate("no interior".into()));
    }
    let l = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DVector::from_vec(c);
    let thin = 5 * l.max(1);
    let burn = 50 * l.max(1);
    let mut out = Vec::with_capacity(count);
    let mut step = 0;
    while out.len() < count {
        let mut dir = DVector::from_fn(l, |_, _| rng.sample::<f64, _>(StandardNormal));
        let nrm = dir.norm();
        if nrm == 0.0 {
            continue;
        }
        dir /= nrm;
        // Chord {w + s·dir}: Γ(w + s dir) ≤ h.
        let gd = &p.gamma * &dir;
        let slack = &p.h - &p.gamma * &w;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..p.rows() {
            let s = slack[i].max(0.0);
            if gd[i] > 1e-14 {
                hi = hi.min(s / gd[i]);
            } else if gd[i] < -1e-14 {
                lo = lo.max(s / gd[i]);
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(SimError::Degenerate("unbounded direction".into()));
        }
        let s = rng.random_range(lo..=hi);
        w += dir * s;
        step += 1;
        if step > burn && step % thin == 0 {
            out.push(w.iter().copied().collect());
        }
    }
    Ok(out)
}

/// `argmax θᵀw` over `W` and the support value.
pub fn extreme_input(w: &SdrSet, theta: &[f64]) -> Result<(Vec<f64>, f64), SimError> {
    Ok(w.maximize(theta)?)
}

/// A pool of admissible inputs: extreme points plus interior points.
#[derive(Clone, Debug)]
pub struct InputSampler {
    pub extreme: Vec<Vec<f64>>,
    pub interior: Vec<Vec<f64>>,
    set: SdrSet,
    polytope: Option<Polytope>,
}

impl InputSampler {
    pub fn new(w: &SdrSet, seed: u64) -> Result<Self, SimError> {
        let l = w.dim();
        if l == 0 {
            return Ok(InputSampler { extreme: vec![vec![]], interior: vec![vec![]], set: w.clone(), polytope: None });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let polytope = w.as_polytope();
        let center = match w.check_slater()? {
            Slater::SlaterPoint { w, .. } => w,
            Slater::Singleton(p) => p,
            Slater::None => return Err(SimError::Degenerate("W has no admissible point".into())),
        };
        let mut extreme = Vec::new();
        if let Some(p) = &polytope {
            if let Ok(v) = p.vertices() {
                extreme = v;
            }
        }
        if extreme.is_empty() {
            for _ in 0..(16 * l).min(96) {
                let theta: Vec<f64> = (0..l).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let (x, _) = extreme_input(w, &theta)?;
                extreme.push(x);
            }
        }
        let mut interior = vec![center.clone()];
        if let Some(p) = &polytope {
            if let Ok(s) = hit_and_run(p, 64, seed ^ 0x5eed) {
                interior.extend(s);
            }
        }
        let mut me = InputSampler { extreme, interior, set: w.clone(), polytope };
        // Pull solver points inside at the audit tolerance.
        let fixed: Vec<Vec<f64>> = me.extreme.iter().map(|e| me.pull_inside(e, &center)).collect();
        me.extreme = fixed;
        Ok(me)
    }

    fn pull_inside(&self, w: &[f64], center: &[f64]) -> Vec<f64> {
        let mut lam: f64 = 1.0;
        loop {
            let p: Vec<f64> = w.iter().zip(center).map(|(a, c)| c + lam * (a - c)).collect();
            if self.contains(&p, 1e-9) || lam < 1e-6 {
                return p;
            }
            lam *= 1.0 - 1e-7_f64.max(1.0 - lam).min(1e-3);
        }
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        match &self.polytope {
            Some(p) => p.contains(w, tol),
            None => self.set.membership(w, tol).unwrap_or(false),
        }
    }

    /// An extreme point with probability ½, otherwise a random mix with an interior point.
    pub fn draw(&self, rng: &mut impl Rng) -> Vec<f64> {
        let e = &self.extreme[rng.random_range(0..self.extreme.len())];
        if rng.random::<f64>() < 0.5 {
            return e.clone();
        }
        let c = &self.interior[rng.random_range(0..self.interior.len())];
        let a: f64 = rng.random();
        e.iter().zip(c).map(|(x, y)| a * x + (1.0 - a) * y).collect()
    }

    /// The pool point maximizing `θᵀw` (extreme points only).
    pub fn best(&self, theta: &[f64]) -> Vec<f64> {
        self.extreme
            .iter()
            .max_by(|a, b| dot(a, theta).total_cmp(&dot(b, theta)))
            .cloned()
            .unwrap_or_default()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A uniform point of a box/ball, the point itself, or rejection sampling in `fallback`.
pub fn sample_region(region: &Region, fallback: Option<&(Vec<f64>, Vec<f64>)>, rng: &mut impl Rng) -> Result<Vec<f64>, SimError> {
    match region {
        Region::Point(a) => Ok(a.clone()),
        Region::Box { lo, hi } => Ok(lo.iter().zip(hi).map(|(l, h)| if h > l { rng.random_range(*l..=*h) } else { *l }).collect()),
        Region::Ball { center, radius } => {
            let n = center.len();
            let g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let nrm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
            Ok(center.iter().zip(&g).map(|(c, v)| c + r * v / nrm).collect())
        }
        Region::Semialgebraic(_) => {
            let (lo, hi) = fallback.ok_or_else(|| SimError::Region("no bounding box for rejection sampling".into()))?;
            for _ in 0..100_000 {
                let x: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| if h > l { rng.random_range(*l..=*h) } else { *l }).collect();
                if region.contains(&x, 0.0) {
                    return Ok(x);
                }
            }
            Err(SimError::Region("rejection sampling found no point".into()))
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmpiricalOptions {
    pub n_traj: usize,
    pub seed: u64,
    /// Switching period as a fraction of `T`.
    pub period_fraction: f64,
    pub integrate: IntegrateOptions,
    /// Sample count for `X_u` in distance problems.
    pub target_samples: usize,
}

impl Default for EmpiricalOptions {
    fn default() -> Self {
        EmpiricalOptions { n_traj: 100, seed: 0, period_fraction: 1.0 / 50.0, integrate: IntegrateOptions::default(), target_samples: 2000 }
    }
}

#[derive(Clone, Debug)]
pub struct EmpiricalResult {
    /// Max `p` (peak) or min distance (distance).
    pub value: Option<f64>,
    /// Endpoints (reach) or successful starts (ROA).
    pub points: Vec<Vec<f64>>,
    pub trajectories: usize,
    pub failures: usize,
    /// Largest input-membership violation seen.
    pub max_input_violation: f64,
}

fn grad(p: &Polynomial, x: &[f64]) -> Vec<f64> {
    (0..p.nvars()).map(|i| p.diff_index(i).eval_unchecked(x)).collect()
}

/// Empirical companion values over `n_traj` trajectories. Trajectory `k` uses
/// stream `k` of the master seed; strategies rotate between constant inputs,
/// random switching, and (for peak and distance) greedy steepest inputs.
pub fn empirical_extremum(spec: &SystemSpec, objective: &Objective, opts: &EmpiricalOptions) -> Result<EmpiricalResult, SimError> {
    let sampler = InputSampler::new(&spec.w, opts.seed)?;
    let bbox = spec.x.bounding_box();
    let period = spec.horizon * opts.period_fraction;
    let nseg = (1.0 / opts.period_fraction).ceil() as usize;
    let mut res = EmpiricalResult { value: None, points: Vec::new(), trajectories: 0, failures: 0, max_input_violation: 0.0 };
    let n = spec.n;
    // Target samples for distance problems.
    let mut targets: Vec<Vec<f64>> = Vec::new();
    if let (Objective::Distance { .. }, Some(xu)) = (objective, &spec.x_u) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xd157);
        let bb = xu.bounding_box().or_else(|| bbox.clone());
        for _ in 0..opts.target_samples {
            targets.push(sample_region(xu, bb.as_ref(), &mut rng)?);
        }
        if let Region::Point(a) = xu {
            targets = vec![a.clone()];
        }
    }
    let metric_at = |metric: &Polynomial, x: &[f64], y: &[f64]| -> f64 {
        let mut pt = x.to_vec();
        pt.extend_from_slice(y);
        metric.eval_unchecked(&pt)
    };
    for k in 0..opts.n_traj {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(k as u64 + 1);
        let backward = matches!(objective, Objective::Roa);
        let start = if backward {
            let xt = spec.x_t.as_ref().ok_or_else(|| SimError::Region("ROA needs X_T".into()))?;
            sample_region(xt, xt.bounding_box().as_ref().or(bbox.as_ref()), &mut rng)?
        } else {
            sample_region(&spec.x0, spec.x0.bounding_box().as_ref().or(bbox.as_ref()), &mut rng)?
        };
        let strategy = k % 4;
        let traj = if strategy == 1 && matches!(objective, Objective::Peak(_) | Objective::Distance { .. }) {
            greedy(spec, objective, &sampler, &start, period, nseg, &targets, &opts.integrate)
        } else if strategy == 1 && backward {
            // Steer the backward flow towards the middle of X to stay inside.
            let center: Vec<f64> = bbox.as_ref().map(|(lo, hi)| lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect()).unwrap_or(vec![0.0; n]);
            let horizon = spec.horizon;
            run_policy(spec, &start, period, &opts.integrate, true, &mut |s, z| {
                let mut pt = vec![horizon - s];
                pt.extend_from_slice(z);
                let dz: Vec<f64> = z.iter().zip(&center).map(|(a, b)| a - b).collect();
                let theta: Vec<f64> = spec.channels.iter().map(|ch| dot(&ch.eval(&pt), &dz)).collect();
                sampler.best(&theta)
            })
        } else {
            let values = if strategy == 0 {
                vec![sampler.draw(&mut rng)]
            } else {
                (0..nseg).map(|_| sampler.draw(&mut rng)).collect()
            };
            let sched = InputSchedule { period: if strategy == 0 { f64::INFINITY } else { period }, values };
            if backward {
                integrate_backward(spec, &start, &sched, &opts.integrate)
            } else {
                integrate(spec, &start, &sched, &opts.integrate)
            }
        };
        let traj = match traj {
            Ok(t) => t,
            Err(e) => {
                log::warn!("trajectory {k} failed: {e}");
                res.failures += 1;
                continue;
            }
        };
        res.trajectories += 1;
        for w in &traj.w {
            if !sampler.contains(w, 1e-7) {
                let v = spec.w.as_polytope().map(|p| p.violation(w)).unwrap_or(f64::INFINITY);
                res.max_input_violation = res.max_input_violation.max(v);
            }
        }
        match objective {
            Objective::Peak(p) => {
                let m = traj.x.iter().map(|x| p.eval_unchecked(x)).fold(f64::NEG_INFINITY, f64::max);
                res.value = Some(res.value.map_or(m, |v: f64| v.max(m)));
            }
            Objective::Distance { metric, sqrt } => {
                let mut best = f64::INFINITY;
                for x in &traj.x {
                    for y in &targets {
                        best = best.min(metric_at(metric, x, y));
                    }
                }
                let best = if *sqrt { best.max(0.0).sqrt() } else { best };
                res.value = Some(res.value.map_or(best, |v: f64| v.min(best)));
            }
            Objective::Reach => {
                if !traj.exited {
                    res.points.push(traj.last().to_vec());
                }
            }
            Objective::Roa => {
                if !traj.exited && traj.last().len() == n {
                    res.points.push(traj.last().to_vec());
                }
            }
        }
    }
    Ok(res)
}

/// Steepest admissible input per segment: maximize `d/dt p` (peak) or decrease the
/// metric to the nearest target (distance).
fn greedy(
    spec: &SystemSpec,
    objective: &Objective,
    sampler: &InputSampler,
    start: &[f64],
    period: f64,
    nseg: usize,
    targets: &[Vec<f64>],
    opts: &IntegrateOptions,
) -> Result<Trajectory, SimError> {
    let mut traj = Trajectory { t: vec![0.0], x: vec![start.to_vec()], w: Vec::new(), exited: false };
    let mut x = start.to_vec();
    let n = spec.n;
    for s in 0..nseg {
        let t0 = s as f64 * period;
        if t0 >= spec.horizon - 1e-12 {
            break;
        }
        let mut pt = vec![t0];
        pt.extend_from_slice(&x);
        let g: Vec<f64> = match objective {
            Objective::Peak(p) => grad(p, &x),
            Objective::Distance { metric, .. } => {
                let y = targets
                    .iter()
                    .min_by(|a, b| {
                        let fa = { let mut q = x.clone(); q.extend_from_slice(a); metric.eval_unchecked(&q) };
                        let fb = { let mut q = x.clone(); q.extend_from_slice(b); metric.eval_unchecked(&q) };
                        fa.total_cmp(&fb)
                    })
                    .cloned()
                    .unwrap_or_default();
                let mut q = x.clone();
                q.extend_from_slice(&y);
                grad(metric, &q)[..n].iter().map(|v| -v).collect()
            }
            _ => vec![0.0; n],
        };
        let theta: Vec<f64> = spec.channels.iter().map(|ch| dot(&ch.eval(&pt), &g)).collect();
        let w = sampler.best(&theta);
        let sched = InputSchedule::constant(w);
        let mut sub = spec.clone();
        sub.horizon = (t0 + period).min(spec.horizon) - t0;
        // Shift time so the segment starts at zero.
        let shift = t0;
        let seg = {
            let mut f = |tt: f64, z: &[f64]| spec.rhs(tt + shift, z, &sched.values[0]);
            let mut out = Vec::new();
            let inside = |z: &[f64]| spec.x.contains(z, 1e-9);
            let ex = dopri(&mut f, 0.0, sub.horizon, &x, opts, &inside, &mut out)?;
            (out, ex)
        };
        for (tt, z) in seg.0 {
            traj.t.push(tt + shift);
            traj.x.push(z);
            traj.w.push(sched.values[0].clone());
        }
        if seg.1 {
            traj.exited = true;
            break;
        }
        x = traj.x.last().unwrap().clone();
    }
    traj.w.push(traj.w.last().cloned().unwrap_or_else(|| vec![0.0; spec.channels.len()]));
    Ok(traj)
}
