//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
//! Mehrotra predictor-corrector steps.
//!
//! Each iteration forms the Schur complement `M = A_c H A_cᵀ` over the cone
//! columns, factors it densely, and handles free columns through a second,
//! small Schur complement `A_fᵀ M⁻¹ A_f`.

use std::time::Instant;

use crate::cone::{svec_pair, Cone};
use crate::dense::{self, chol_solve, cholesky_in_place, dot, norm};
use crate::error::ConicError;
use crate::presolve::{presolve, Presolved, Reduced};
use crate::problem::ConicProblem;
use crate::scaling::{jordan, max_step_nonneg, Scaling};
use crate::solution::{ConicSolution, Residuals, SolverOptions, Status};
use crate::ConicSolver;

/// The built-in solver.
#[derive(Clone, Copy, Debug, Default)]
pub struct EmbeddedSolver;

impl ConicSolver for EmbeddedSolver {
    fn solve(&self, problem: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution, ConicError> {
        problem.validate()?;
        solve(problem, opts)
    }

    fn name(&self) -> String {
        "embedded".into()
    }
}

/// Rows of one PSD block: `(row, [(p, q, Â_pq)])` with `Â` the symmetric matrix
/// whose trace pairing reproduces the row.
struct PsdRows {
    rows: Vec<usize>,
    entries: Vec<Vec<(u32, u32, f64)>>,
    support: Vec<Vec<u32>>,
}

fn psd_rows(r: &Reduced, blk: usize, k: usize) -> PsdRows {
    let off = r.offsets[blk];
    let len = k * (k + 1) / 2;
    let mut per_row: std::collections::BTreeMap<usize, Vec<(u32, u32, f64)>> = Default::default();
    for j in 0..len {
        let (p, q) = svec_pair(j);
        let (ri, rv) = r.ac.col(off + j);
        let f = if p == q { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
        for (row, v) in ri.iter().zip(rv) {
            per_row.entry(*row).or_default().push((p as u32, q as u32, v * f));
        }
    }
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut support = Vec::new();
    for (row, e) in per_row {
        let mut s: Vec<u32> = e.iter().flat_map(|&(p, q, _)| [p, q]).collect();
        s.sort_unstable();
        s.dedup();
        rows.push(row);
        entries.push(e);
        support.push(s);
    }
    PsdRows { rows, entries, support }
}

struct Point {
    xc: Vec<f64>,
    xf: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    xc: Vec<f64>,
    xf: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
    /// Scaled `W⁻ᵀΔx` and `WΔs` per cone block.
    xt: Vec<Vec<f64>>,
    st: Vec<Vec<f64>>,
}

struct Factor {
    m: usize,
    nf: usize,
    l: Vec<f64>,
    /// `L⁻¹ A_f`, row-major `m × nf`.
    z: Vec<f64>,
    /// Cholesky of `A_fᵀ M⁻¹ A_f`.
    ls: Vec<f64>,
}

impl Factor {
    fn solve(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (m, nf) = (self.m, self.nf);
        let mut t = r1.to_vec();
        dense::solve_lower(&self.l, m, &mut t);
        let mut xf = vec![0.0; nf];
        if nf > 0 {
            for i in 0..m {
                let ti = t[i];
                if ti != 0.0 {
                    for (a, zz) in xf.iter_mut().zip(&self.z[i * nf..(i + 1) * nf]) {
                        *a += zz * ti;
                    }
                }
            }
            for (a, b) in xf.iter_mut().zip(r2) {
                *a -= b;
            }
            chol_solve(&self.ls, nf, &mut xf);
            for i in 0..m {
                t[i] -= dot(&self.z[i * nf..(i + 1) * nf], &xf);
            }
        }
        dense::solve_lower_t(&self.l, m, &mut t);
        (t, xf)
    }
}

struct Solver<'a> {
    r: &'a Reduced,
    psd: Vec<Option<PsdRows>>,
    nu: f64,
    nc: usize,
}

impl<'a> Solver<'a> {
    fn blk(&self, b: usize) -> std::ops::Range<usize> {
        self.r.offsets[b]..self.r.offsets[b] + self.r.cones[b].dim()
    }

    fn apply_h_all(&self, sc: &[Scaling], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nc];
        for (b, s) in sc.iter().enumerate() {
            let rg = self.blk(b);
            out[rg.clone()].copy_from_slice(&s.apply_h(&v[rg]));
        }
        out
    }

    fn af_mul(&self, xf: &[f64], out: &mut [f64]) {
        let nf = self.r.nf;
        if nf == 0 {
            return;
        }
        for i in 0..self.r.m {
            out[i] += dot(&self.r.af[i * nf..(i + 1) * nf], xf);
        }
    }

    fn af_tmul(&self, y: &[f64]) -> Vec<f64> {
        let nf = self.r.nf;
        let mut out = vec![0.0; nf];
        for i in 0..self.r.m {
            if y[i] != 0.0 {
                for (o, a) in out.iter_mut().zip(&self.r.af[i * nf..(i + 1) * nf]) {
                    *o += a * y[i];
                }
            }
        }
        out
    }

    /// Dense lower triangle of `A_c H A_cᵀ`.
    fn schur(&self, sc: &[Scaling]) -> Vec<f64> {
        let m = self.r.m;
        let mut mm = vec![0.0; m * m];
        for (b, s) in sc.iter().enumerate() {
            let off = self.r.offsets[b];
            match (s, self.r.cones[b]) {
                (Scaling::Nonneg { w, .. }, Cone::Nonnegative(n)) => {
                    for j in 0..n {
                        let h = w[j] * w[j];
                        let (ri, rv) = self.r.ac.col(off + j);
                        for a in 0..ri.len() {
                            let ha = h * rv[a];
                            let row = ri[a] * m;
                            for c in 0..=a {
                                mm[row + ri[c]] += ha * rv[c];
                            }
                        }
                    }
                }
                (Scaling::Soc { beta, u, .. }, Cone::SecondOrder(n)) => {
                    let b2 = beta * beta;
                    let mut au: std::collections::BTreeMap<usize, f64> = Default::default();
                    for j in 0..n {
                        let (ri, rv) = self.r.ac.col(off + j);
                        for (r, v) in ri.iter().zip(rv) {
                            *au.entry(*r).or_default() += v * u[j];
                        }
                        let sign = if j + 1 == n { -b2 } else { b2 };
                        for a in 0..ri.len() {
                            let row = ri[a] * m;
                            for c in 0..=a {
                                mm[row + ri[c]] += sign * rv[a] * rv[c];
                            }
                        }
                    }
                    let au: Vec<(usize, f64)> = au.into_iter().collect();
                    for a in 0..au.len() {
                        for c in 0..=a {
                            mm[au[a].0 * m + au[c].0] += 2.0 * b2 * au[a].1 * au[c].1;
                        }
                    }
                }
                (Scaling::Psd { k, g, .. }, Cone::Psd(_)) => {
                    let pr = self.psd[b].as_ref().expect("psd rows");
                    self.schur_psd(pr, *k, g, &mut mm);
                }
                _ => unreachable!("scaling/cone mismatch"),
            }
        }
        mm
    }

    fn schur_psd(&self, pr: &PsdRows, k: usize, g: &nalgebra::DMatrix<f64>, mm: &mut [f64]) {
        let m = self.r.m;
        // Row-major copy of G (symmetric, so column-major storage is the same).
        let gr: Vec<f64> = g.as_slice().to_vec();
        let mut t = vec![0.0; k * k];
        let mut gp = Vec::new();
        let mut zb = Vec::new();
        let mut pos = vec![0usize; k];
        for (ii, &row_i) in pr.rows.iter().enumerate() {
            let sup = &pr.support[ii];
            let ns = sup.len();
            for (a, &p) in sup.iter().enumerate() {
                pos[p as usize] = a;
            }
            // Z = Â[P, P] G[P, :]
            zb.clear();
            zb.resize(ns * k, 0.0);
            for &(p, q, v) in &pr.entries[ii] {
                let (p, q) = (p as usize, q as usize);
                let (pp, pq) = (pos[p], pos[q]);
                for c in 0..k {
                    zb[pp * k + c] += v * gr[q * k + c];
                }
                if p != q {
                    for c in 0..k {
                        zb[pq * k + c] += v * gr[p * k + c];
                    }
                }
            }
            // G[:, P]
            gp.clear();
            gp.resize(k * ns, 0.0);
            for rr in 0..k {
                for (a, &p) in sup.iter().enumerate() {
                    gp[rr * ns + a] = gr[rr * k + p as usize];
                }
            }
            dense::gemm(k, ns, k, 1.0, &gp, ns, false, &zb, k, false, 0.0, &mut t, k);
            for jj in ii..pr.rows.len() {
                let mut acc = 0.0;
                for &(p, q, v) in &pr.entries[jj] {
                    let tv = t[p as usize * k + q as usize];
                    acc += if p == q { v * tv } else { 2.0 * v * tv };
                }
                mm[pr.rows[jj] * m + row_i] += acc;
            }
        }
    }

    fn factor(&self, sc: &[Scaling]) -> Factor {
        let m = self.r.m;
        let nf = self.r.nf;
        let mut l = self.schur(sc);
        let maxd = (0..m).map(|i| l[i * m + i]).fold(0.0, f64::max);
        let reg = 1e-15 * maxd.max(1e-300);
        for i in 0..m {
            l[i * m + i] += reg;
        }
        cholesky_in_place(&mut l, m, 1e-15);
        let mut z = self.r.af.clone();
        let mut ls = vec![0.0; nf * nf];
        if nf > 0 {
            dense::solve_lower_multi(&l, m, &mut z, nf);
            dense::gemm(nf, m, nf, 1.0, &z, nf, true, &z, nf, false, 0.0, &mut ls, nf);
            let maxs = (0..nf).map(|i| ls[i * nf + i]).fold(0.0, f64::max);
            for i in 0..nf {
                ls[i * nf + i] += 1e-14 * maxs.max(1e-300);
            }
            cholesky_in_place(&mut ls, nf, 1e-15);
        }
        Factor { m, nf, l, z, ls }
    }

    /// Apply the exact `K` operator for iterative refinement.
    fn k_apply(&self, sc: &[Scaling], y: &[f64], xf: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let aty = self.r.ac.tmul(y);
        let h = self.apply_h_all(sc, &aty);
        let mut r1 = self.r.ac.mul(&h);
        self.af_mul(xf, &mut r1);
        (r1, self.af_tmul(y))
    }

    fn k_solve(&self, f: &Factor, sc: &[Scaling], r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut y, mut xf) = f.solve(r1, r2);
        let scale = norm(r1) + norm(r2) + 1e-300;
        for _ in 0..3 {
            let (k1, k2) = self.k_apply(sc, &y, &xf);
            let e1: Vec<f64> = r1.iter().zip(&k1).map(|(a, b)| a - b).collect();
            let e2: Vec<f64> = r2.iter().zip(&k2).map(|(a, b)| a - b).collect();
            if norm(&e1) + norm(&e2) <= 1e-13 * scale {
                break;
            }
            let (dy, dxf) = f.solve(&e1, &e2);
            y.iter_mut().zip(&dy).for_each(|(a, b)| *a += b);
            xf.iter_mut().zip(&dxf).for_each(|(a, b)| *a += b);
        }
        (y, xf)
    }
}

struct Residual {
    rp: Vec<f64>,
    rd: Vec<f64>,
    rdf: Vec<f64>,
    rg: f64,
}

fn residual(sv: &Solver, pt: &Point) -> Residual {
    let r = sv.r;
    let mut rp = r.ac.mul(&pt.xc);
    sv.af_mul(&pt.xf, &mut rp);
    for i in 0..r.m {
        rp[i] -= r.b[i] * pt.tau;
    }
    let mut rd = r.ac.tmul(&pt.y);
    for j in 0..sv.nc {
        rd[j] += pt.s[j] - r.cc[j] * pt.tau;
    }
    let mut rdf = sv.af_tmul(&pt.y);
    for j in 0..r.nf {
        rdf[j] -= r.cf[j] * pt.tau;
    }
    let rg = pt.kappa + dot(&r.cc, &pt.xc) + dot(&r.cf, &pt.xf) - dot(&r.b, &pt.y);
    Residual { rp, rd, rdf, rg }
}

struct Metrics {
    pres: f64,
    dres: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

fn metrics(sv: &Solver, pt: &Point, res: &Residual) -> Metrics {
    let r = sv.r;
    let nb = norm(&r.b);
    let ncn = (dot(&r.cc, &r.cc) + dot(&r.cf, &r.cf)).sqrt();
    let pobj = (dot(&r.cc, &pt.xc) + dot(&r.cf, &pt.xf)) / pt.tau;
    let dobj = dot(&r.b, &pt.y) / pt.tau;
    let pres = norm(&res.rp) / pt.tau / (1.0 + nb);
    let dres = (dot(&res.rd, &res.rd) + dot(&res.rdf, &res.rdf)).sqrt() / pt.tau / (1.0 + ncn);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs().max(dobj.abs()));
    Metrics { pres, dres, gap, pobj, dobj }
}

pub(crate) fn solve(p: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution, ConicError> {
    let start = Instant::now();
    let red = match presolve(p) {
        Presolved::Reduced(r) => r,
        Presolved::Infeasible => return Ok(trivial(p, Status::PrimalInfeasible)),
        Presolved::Unbounded => return Ok(trivial(p, Status::DualInfeasible)),
    };
    let r = &*red;
    let nc = r.ac.ncols;
    let psd = r
        .cones
        .iter()
        .enumerate()
        .map(|(b, c)| match c {
            Cone::Psd(k) => Some(psd_rows(r, b, *k)),
            _ => None,
        })
        .collect();
    let nu = r.cones.iter().map(Cone::degree).sum::<usize>() as f64;
    let sv = Solver { r, psd, nu, nc };

    if r.m == 0 {
        return Ok(no_rows(p, r));
    }

    let mut pt = Point {
        xc: r.cones.iter().flat_map(|c| c.identity()).collect(),
        xf: vec![0.0; r.nf],
        y: vec![0.0; r.m],
        s: r.cones.iter().flat_map(|c| c.identity()).collect(),
        tau: 1.0,
        kappa: 1.0,
    };

    let mut best: Option<(f64, Point, Metrics)> = None;
    let mut status = Status::SlowProgress;
    let mut iters = 0;
    let mut small_steps = 0;
    let mut final_point: Option<(Point, Metrics)> = None;

    for it in 0..=opts.max_iter {
        iters = it;
        let res = residual(&sv, &pt);
        let mt = metrics(&sv, &pt, &res);
        let mu = (dot(&pt.xc, &pt.s) + pt.tau * pt.kappa) / (sv.nu + 1.0);
        if opts.verbose {
            eprintln!(
                "{it:3} pobj {:+.8e} dobj {:+.8e} pres {:.2e} dres {:.2e} gap {:.2e} mu {:.2e} tau {:.2e} kappa {:.2e}",
                mt.pobj, mt.dobj, mt.pres, mt.dres, mt.gap, mu, pt.tau, pt.kappa
            );
        }
        if mt.pres <= opts.tol_feas && mt.dres <= opts.tol_feas && mt.gap <= opts.tol_gap {
            status = Status::Optimal;
            final_point = Some((pt, mt));
            break;
        }
        // Infeasibility certificates.
        let by = dot(&r.b, &pt.y);
        if by > 0.0 {
            let mut aty = r.ac.tmul(&pt.y);
            aty.iter_mut().zip(&pt.s).for_each(|(a, s)| *a += s);
            let f = sv.af_tmul(&pt.y);
            let viol = (dot(&aty, &aty) + dot(&f, &f)).sqrt();
            if viol / by <= opts.tol_feas.max(1e-9) * 10.0 && pt.tau < 1e-3 * pt.kappa.max(1.0) {
                status = Status::PrimalInfeasible;
                final_point = Some((pt, mt));
                break;
            }
        }
        let cx = dot(&r.cc, &pt.xc) + dot(&r.cf, &pt.xf);
        if cx < 0.0 {
            let mut ax = r.ac.mul(&pt.xc);
            sv.af_mul(&pt.xf, &mut ax);
            if norm(&ax) / -cx <= opts.tol_feas.max(1e-9) * 10.0 && pt.tau < 1e-3 * pt.kappa.max(1.0) {
                status = Status::DualInfeasible;
                final_point = Some((pt, mt));
                break;
            }
        }
        let merit = mt.pres.max(mt.dres).max(mt.gap);
        if best.as_ref().map_or(true, |b| merit < b.0) {
            best = Some((merit, clone_point(&pt), Metrics { ..mt }));
        }
        if it == opts.max_iter || small_steps >= 5 || mu < 1e-300 {
            break;
        }

        // Scaling.
        let scalings: Option<Vec<Scaling>> = r
            .cones
            .iter()
            .enumerate()
            .map(|(b, c)| {
                let rg = sv.blk(b);
                Scaling::new(*c, &pt.xc[rg.clone()], &pt.s[rg])
            })
            .collect();
        let Some(sc) = scalings else {
            break;
        };
        let lam: Vec<Vec<f64>> = sc.iter().map(Scaling::lambda).collect();
        let fac = sv.factor(&sc);

        // Right-hand side shared by both directions.
        let hc = sv.apply_h_all(&sc, &r.cc);
        let mut h2r = r.ac.mul(&hc);
        h2r.iter_mut().zip(&r.b).for_each(|(a, b)| *a += b);
        let (y2, xf2) = sv.k_solve(&fac, &sc, &h2r, &r.cf);
        let aty2 = r.ac.tmul(&y2);
        let x2: Vec<f64> = {
            let h = sv.apply_h_all(&sc, &aty2);
            h.iter().zip(&hc).map(|(a, b)| a - b).collect()
        };
        let denom = -dot(&r.b, &y2) + dot(&r.cc, &x2) + dot(&r.cf, &xf2) - pt.kappa / pt.tau;

        let direction = |eta: f64, q: &[Vec<f64>], rtk: f64| -> Direction {
            let mut wq = vec![0.0; nc];
            for (b, s) in sc.iter().enumerate() {
                let rg = sv.blk(b);
                wq[rg].copy_from_slice(&s.unscale_x(&q[b]));
            }
            let hrd = sv.apply_h_all(&sc, &res.rd);
            let base: Vec<f64> = wq.iter().zip(&hrd).map(|(a, h)| a + eta * h).collect();
            let mut r1 = r.ac.mul(&base);
            r1.iter_mut().zip(&res.rp).for_each(|(a, p)| *a = -*a - eta * p);
            let r2: Vec<f64> = res.rdf.iter().map(|v| -eta * v).collect();
            let (y1, xf1) = sv.k_solve(&fac, &sc, &r1, &r2);
            let haty = sv.apply_h_all(&sc, &r.ac.tmul(&y1));
            let x1: Vec<f64> = base.iter().zip(&haty).map(|(a, b)| a + b).collect();
            let num = -eta * res.rg + dot(&r.b, &y1) - dot(&r.cc, &x1) - dot(&r.cf, &xf1) - rtk / pt.tau;
            let dtau = num / denom;
            let dy: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + dtau * b).collect();
            let dxf: Vec<f64> = xf1.iter().zip(&xf2).map(|(a, b)| a + dtau * b).collect();
            let dxc: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + dtau * b).collect();
            let dkappa = (rtk - pt.kappa * dtau) / pt.tau;
            let atdy = r.ac.tmul(&dy);
            let ds: Vec<f64> =
                (0..nc).map(|j| -eta * res.rd[j] + r.cc[j] * dtau - atdy[j]).collect();
            let mut xt = Vec::with_capacity(sc.len());
            let mut st = Vec::with_capacity(sc.len());
            for (b, s) in sc.iter().enumerate() {
                let rg = sv.blk(b);
                xt.push(s.scale_x(&dxc[rg.clone()]));
                st.push(s.scale_s(&ds[rg]));
            }
            Direction { xc: dxc, xf: dxf, y: dy, s: ds, tau: dtau, kappa: dkappa, xt, st }
        };
        let step = |d: &Direction| -> f64 {
            let mut a = f64::INFINITY;
            for (b, s) in sc.iter().enumerate() {
                a = a.min(s.max_step(&d.xt[b])).min(s.max_step(&d.st[b]));
            }
            a = a.min(max_step_nonneg(&[pt.tau, pt.kappa], &[d.tau, d.kappa]));
            a
        };

        // Predictor.
        let q_aff: Vec<Vec<f64>> = lam.iter().map(|l| l.iter().map(|v| -v).collect()).collect();
        let daff = direction(1.0, &q_aff, -pt.tau * pt.kappa);
        let a_aff = step(&daff).min(1.0);
        let sigma = (1.0 - a_aff).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let q: Vec<Vec<f64>> = sc
            .iter()
            .enumerate()
            .map(|(b, s)| {
                let cone = r.cones[b];
                let ll = jordan(cone, &lam[b], &lam[b]);
                let corr = jordan(cone, &daff.xt[b], &daff.st[b]);
                let e = cone.identity();
                let rc: Vec<f64> =
                    (0..ll.len()).map(|i| -ll[i] + sigma * mu * e[i] - corr[i]).collect();
                s.lambda_inv_jordan(&rc)
            })
            .collect();
        let rtk = -pt.tau * pt.kappa + sigma * mu - daff.tau * daff.kappa;
        let d = direction(1.0 - sigma, &q, rtk);
        let amax = step(&d);
        let mut alpha = (0.99 * amax).min(1.0);
        if alpha < 1e-9 {
            small_steps += 1;
        }
        // Take the step, backing off if round-off leaves the cone.
        let mut moved = false;
        for _ in 0..8 {
            let cand = advance(&pt, &d, alpha);
            let ok = r.cones.iter().enumerate().all(|(b, c)| {
                let rg = sv.blk(b);
                Scaling::new(*c, &cand.xc[rg.clone()], &cand.s[rg]).is_some()
            }) && cand.tau > 0.0
                && cand.kappa > 0.0;
            if ok {
                pt = cand;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }

    let _ = start;
    let (pt, mt, status) = match final_point {
        Some((pt, mt)) => (pt, mt, status),
        None => {
            let (merit, pt, mt) = best.expect("at least one iterate");
            let st = if merit <= 1e-5 { Status::SlowProgress } else { Status::NumericalError };
            (pt, mt, st)
        }
    };
    Ok(finish(p, r, &pt, &mt, status, iters))
}

fn clone_point(p: &Point) -> Point {
    Point { xc: p.xc.clone(), xf: p.xf.clone(), y: p.y.clone(), s: p.s.clone(), tau: p.tau, kappa: p.kappa }
}

fn advance(p: &Point, d: &Direction, a: f64) -> Point {
    let ax = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x + a * y).collect::<Vec<_>>();
    Point {
        xc: ax(&p.xc, &d.xc),
        xf: ax(&p.xf, &d.xf),
        y: ax(&p.y, &d.y),
        s: ax(&p.s, &d.s),
        tau: p.tau + a * d.tau,
        kappa: p.kappa + a * d.kappa,
    }
}

fn finish(p: &ConicProblem, r: &Reduced, pt: &Point, mt: &Metrics, status: Status, iters: usize) -> ConicSolution {
    let homogeneous = matches!(status, Status::PrimalInfeasible | Status::DualInfeasible);
    let div = if homogeneous { 1.0 } else { pt.tau };
    let sc = |v: &[f64]| v.iter().map(|x| x / div).collect::<Vec<_>>();
    let (x, y, s) = r.postsolve(p, &sc(&pt.xc), &sc(&pt.xf), &sc(&pt.y), &sc(&pt.s), homogeneous);
    let residuals = original_residuals(p, &x, &y, &s).unwrap_or(Residuals {
        primal: mt.pres,
        dual: mt.dres,
        gap: mt.gap,
    });
    let (pobj, dobj) = if homogeneous {
        (p.objective(&x), dot(&p.b, &y) + p.offset)
    } else {
        (p.objective(&x), dot(&p.b, &y) + p.offset)
    };
    ConicSolution {
        status,
        x,
        y,
        s,
        primal_objective: pobj,
        dual_objective: dobj,
        residuals: if homogeneous { Residuals { primal: mt.pres, dual: mt.dres, gap: mt.gap } } else { residuals },
        iterations: iters,
    }
}

/// Residuals measured on the original, unscaled problem.
fn original_residuals(p: &ConicProblem, x: &[f64], y: &[f64], s: &[f64]) -> Option<Residuals> {
    let ax = p.a.mul(x);
    let pr: Vec<f64> = ax.iter().zip(&p.b).map(|(a, b)| a - b).collect();
    let aty = p.a.tmul(y);
    let dr: Vec<f64> = (0..p.c.len()).map(|j| aty[j] + s[j] - p.c[j]).collect();
    let pobj = dot(&p.c, x);
    let dobj = dot(&p.b, y);
    Some(Residuals {
        primal: norm(&pr) / (1.0 + norm(&p.b)),
        dual: norm(&dr) / (1.0 + norm(&p.c)),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs().max(dobj.abs())),
    })
}

fn trivial(p: &ConicProblem, status: Status) -> ConicSolution {
    let n = p.num_cols();
    ConicSolution {
        status,
        x: vec![0.0; n],
        y: vec![0.0; p.num_rows()],
        s: vec![0.0; n],
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        residuals: Residuals::default(),
        iterations: 0,
    }
}

/// No constraint touches a cone column: the cone part decouples.
fn no_rows(p: &ConicProblem, r: &Reduced) -> ConicSolution {
    // Each cone block minimizes cᵀx over the cone alone: bounded iff c ∈ K*.
    let mut ok = true;
    for (b, c) in r.cones.iter().enumerate() {
        let rg = r.offsets[b]..r.offsets[b] + c.dim();
        if !c.contains(&r.cc[rg], 1e-12) {
            ok = false;
        }
    }
    if !ok {
        return trivial(p, Status::DualInfeasible);
    }
    let xc = vec![0.0; r.ac.ncols];
    let (x, y, _) = r.postsolve(p, &xc, &vec![0.0; r.nf], &[], &r.cc, false);
    let aty = p.a.tmul(&y);
    let s: Vec<f64> = (0..p.c.len()).map(|j| p.c[j] - aty[j]).collect();
    let residuals = original_residuals(p, &x, &y, &s).unwrap_or_default();
    ConicSolution {
        status: Status::Optimal,
        primal_objective: p.objective(&x),
        dual_objective: dot(&p.b, &y) + p.offset,
        x,
        y,
        s,
        residuals,
        iterations: 0,
    }
}
