//! Semidefinite-representable input sets and basic semialgebraic domains.
//!
//! An [`SdrSet`] is `{w | ∃λ_s: A_s w + G_s λ_s + e_s ∈ K_s ∀s, Bw = θ}`. PSD rows use
//! the scaled lower-triangular vectorization of [`lie_robust_conic::cone::svec`], so the
//! vector inner product equals the trace pairing. Second-order blocks carry the head
//! in the last row; rotated blocks are ordered `(u, v, z)` with `‖u‖² ≤ vz`.

use lie_robust_conic::cone::{svec, svec_len};
use lie_robust_conic::{Cone, ConicError, Status};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::lp::{self, Builder, LpOutcome};
use crate::polyalg::{PolyError, Polynomial};

#[derive(Debug, thiserror::Error)]
pub enum SdrError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid cone block: {0}")]
    InvalidBlock(String),
    #[error("the set is empty")]
    Empty,
    #[error("the set is unbounded along coordinate {0}")]
    Unbounded(usize),
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("solver failure: {0}")]
    Solver(#[from] ConicError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    Nonnegative,
    SecondOrder,
    RotatedSecondOrder,
    Psd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeBlock {
    pub kind: ConeKind,
    /// Vector length, or matrix side for `Psd`.
    pub dim: usize,
}

impl ConeBlock {
    pub fn new(kind: ConeKind, dim: usize) -> Result<Self, SdrError> {
        let min = if kind == ConeKind::RotatedSecondOrder { 3 } else { 1 };
        if dim < min {
            return Err(SdrError::InvalidBlock(format!("{kind:?} needs dim ≥ {min}, got {dim}")));
        }
        Ok(ConeBlock { kind, dim })
    }

    /// Number of rows the block occupies in `A`, `G`, `e`.
    pub fn rows(&self) -> usize {
        match self.kind {
            ConeKind::Psd => svec_len(self.dim),
            _ => self.dim,
        }
    }

    /// The solver cone used after mapping rotated blocks onto standard ones.
    pub fn solver_cone(&self) -> Cone {
        match self.kind {
            ConeKind::Nonnegative => Cone::Nonnegative(self.dim),
            ConeKind::SecondOrder | ConeKind::RotatedSecondOrder => Cone::SecondOrder(self.dim),
            ConeKind::Psd => Cone::Psd(self.dim),
        }
    }
}

/// Deepest unit-norm interior point of a cone.
pub fn incenter(kind: ConeBlock) -> Vec<f64> {
    let n = kind.dim;
    match kind.kind {
        ConeKind::Nonnegative => vec![1.0; n],
        ConeKind::SecondOrder => {
            let mut v = vec![0.0; n];
            v[n - 1] = 1.0;
            v
        }
        ConeKind::RotatedSecondOrder => {
            let mut v = vec![0.0; n];
            v[n - 2] = std::f64::consts::FRAC_1_SQRT_2;
            v[n - 1] = std::f64::consts::FRAC_1_SQRT_2;
            v
        }
        ConeKind::Psd => {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                m[i * n + i] = 1.0 / (n as f64).sqrt();
            }
            svec(&m, n)
        }
    }
}

/// Row map taking a rotated block `(u, v, z)` to `([2u, v − z], v + z)`.
pub fn rotated_to_standard(dim: usize) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(dim, dim);
    for i in 0..dim - 2 {
        t[(i, i)] = 2.0;
    }
    let (v, z) = (dim - 2, dim - 1);
    t[(dim - 2, v)] = 1.0;
    t[(dim - 2, z)] = -1.0;
    t[(dim - 1, v)] = 1.0;
    t[(dim - 1, z)] = 1.0;
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdrBlock {
    pub cone: ConeBlock,
    pub a: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub e: DVector<f64>,
}

impl SdrBlock {
    /// `(cone, A, G, e)` with rotated blocks mapped to standard second-order form.
    pub fn standard(&self) -> (Cone, DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        if self.cone.kind == ConeKind::RotatedSecondOrder {
            let t = rotated_to_standard(self.cone.dim);
            (self.cone.solver_cone(), &t * &self.a, &t * &self.g, &t * &self.e)
        } else {
            (self.cone.solver_cone(), self.a.clone(), self.g.clone(), self.e.clone())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdrSet {
    l: usize,
    blocks: Vec<SdrBlock>,
    equalities: Option<(DMatrix<f64>, DVector<f64>)>,
}

/// Outcome of [`SdrSet::check_slater`].
#[derive(Clone, Debug, PartialEq)]
pub enum Slater {
    SlaterPoint { w: Vec<f64>, lambda: Vec<Vec<f64>>, margin: f64 },
    Singleton(Vec<f64>),
    None,
}

const SLATER_MARGIN: f64 = 1e-7;

impl SdrSet {
    /// The whole space `ℝ^L` (no blocks).
    pub fn new(l: usize) -> Self {
        SdrSet { l, blocks: Vec::new(), equalities: None }
    }

    pub fn dim(&self) -> usize {
        self.l
    }

    pub fn blocks(&self) -> &[SdrBlock] {
        &self.blocks
    }

    pub fn equalities(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        self.equalities.as_ref().map(|(b, t)| (b, t))
    }

    pub fn with_block(mut self, cone: ConeBlock, a: DMatrix<f64>, g: DMatrix<f64>, e: DVector<f64>) -> Result<Self, SdrError> {
        let rows = cone.rows();
        if a.nrows() != rows || a.ncols() != self.l || g.nrows() != rows || e.len() != rows {
            return Err(SdrError::Dimension(format!(
                "block {cone:?} expects A {rows}×{}, G {rows}×q, e {rows}; got A {}×{}, G {}×{}, e {}",
                self.l,
                a.nrows(),
                a.ncols(),
                g.nrows(),
                g.ncols(),
                e.len()
            )));
        }
        let cone = ConeBlock::new(cone.kind, cone.dim)?;
        self.blocks.push(SdrBlock { cone, a, g, e });
        Ok(self)
    }

    pub fn with_equalities(mut self, b: DMatrix<f64>, theta: DVector<f64>) -> Result<Self, SdrError> {
        if b.ncols() != self.l || b.nrows() != theta.len() {
            return Err(SdrError::Dimension("equality matrix must be r×L with θ of length r".into()));
        }
        if b.nrows() > 0 {
            self.equalities = Some((b, theta));
        }
        Ok(self)
    }

    /// `{w | lo ≤ w ≤ hi}`.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Result<Self, SdrError> {
        Polytope::boxed(lo, hi)?.to_sdr()
    }

    /// `{w | ‖w − c‖₂ ≤ r}`.
    pub fn ball(center: &[f64], r: f64) -> Result<Self, SdrError> {
        let l = center.len();
        let mut a = DMatrix::zeros(l + 1, l);
        let mut e = DVector::zeros(l + 1);
        for i in 0..l {
            a[(i, i)] = 1.0;
            e[i] = -center[i];
        }
        e[l] = r;
        SdrSet::new(l).with_block(ConeBlock::new(ConeKind::SecondOrder, l + 1)?, a, DMatrix::zeros(l + 1, 0), e)
    }

    /// `{w | A₀ + Σ w_ℓ A_ℓ + Σ λ_k G_k ⪰ 0}` from dense symmetric `q×q` matrices (row-major).
    pub fn spectahedron(q: usize, a0: &[f64], a: &[Vec<f64>], g: &[Vec<f64>]) -> Result<Self, SdrError> {
        for m in std::iter::once(a0).chain(a.iter().map(Vec::as_slice)).chain(g.iter().map(Vec::as_slice)) {
            if m.len() != q * q {
                return Err(SdrError::Dimension(format!("spectahedron matrices must be {q}×{q}")));
            }
            for i in 0..q {
                for j in 0..i {
                    if (m[i * q + j] - m[j * q + i]).abs() > 1e-12 * (1.0 + m[i * q + j].abs()) {
                        return Err(SdrError::InvalidBlock("spectahedron matrix is not symmetric".into()));
                    }
                }
            }
        }
        let rows = svec_len(q);
        let mut am = DMatrix::zeros(rows, a.len());
        for (l, m) in a.iter().enumerate() {
            am.set_column(l, &DVector::from_vec(svec(m, q)));
        }
        let mut gm = DMatrix::zeros(rows, g.len());
        for (k, m) in g.iter().enumerate() {
            gm.set_column(k, &DVector::from_vec(svec(m, q)));
        }
        SdrSet::new(a.len()).with_block(ConeBlock::new(ConeKind::Psd, q)?, am, gm, DVector::from_vec(svec(a0, q)))
    }

    /// The `q×q` elliptope: unit diagonal, off-diagonal entries `w` in row-major upper order.
    pub fn elliptope(q: usize) -> Result<Self, SdrError> {
        let mut a0 = vec![0.0; q * q];
        for i in 0..q {
            a0[i * q + i] = 1.0;
        }
        let mut a = Vec::new();
        for i in 0..q {
            for j in i + 1..q {
                let mut m = vec![0.0; q * q];
                m[i * q + j] = 1.0;
                m[j * q + i] = 1.0;
                a.push(m);
            }
        }
        Self::spectahedron(q, &a0, &a, &[])
    }

    fn check_len(&self, w: &[f64]) -> Result<(), SdrError> {
        if w.len() != self.l {
            return Err(SdrError::Dimension(format!("point has {} entries, set has L = {}", w.len(), self.l)));
        }
        Ok(())
    }

    pub fn equality_residual(&self, w: &[f64]) -> f64 {
        match &self.equalities {
            None => 0.0,
            Some((b, t)) => (b * DVector::from_column_slice(w) - t).amax(),
        }
    }

    /// Whether `w` lies in the set up to `tol` (cone margin measured along the incenter).
    pub fn membership(&self, w: &[f64], tol: f64) -> Result<bool, SdrError> {
        self.check_len(w)?;
        if self.equality_residual(w) > tol {
            return Ok(false);
        }
        let wv = DVector::from_column_slice(w);
        if self.blocks.iter().all(|b| b.g.ncols() == 0) {
            for blk in &self.blocks {
                let (cone, a, _, e) = blk.standard();
                let z = &a * &wv + &e;
                if !cone.contains(z.as_slice(), tol) {
                    return Ok(false);
                }
            }
            return Ok(true);
        }
        // min t s.t. A w + G λ + e + t·c ∈ K, with t = u − 1 and u ≥ 0.
        let mut bld = Builder::new();
        let u = bld.block(Cone::Nonnegative(1));
        bld.cost(u, 1.0);
        for blk in &self.blocks {
            let (cone, a, g, e) = blk.standard();
            let c = incenter(ConeBlock { kind: std_kind(blk.cone.kind), dim: blk.cone.dim });
            let lam = if g.ncols() > 0 { Some(bld.block(Cone::Free(g.ncols()))) } else { None };
            let s0 = bld.block(cone);
            let z = &a * &wv + &e;
            for r in 0..a.nrows() {
                let mut ent = vec![(s0 + r, 1.0), (u, -c[r])];
                if let Some(l0) = lam {
                    ent.extend((0..g.ncols()).map(|k| (l0 + k, -g[(r, k)])));
                }
                bld.row(&ent, z[r] - c[r]);
            }
        }
        let sol = lp::solve_small(&bld.build())?;
        match sol.status {
            Status::Optimal | Status::SlowProgress => Ok(sol.x[u] - 1.0 <= tol),
            Status::PrimalInfeasible => Ok(false),
            Status::DualInfeasible => Ok(true),
            Status::NumericalError => Err(SdrError::Solver(ConicError::Backend("membership solve failed".into()))),
        }
    }

    /// Maximize the common cone margin `t ≤ 1` over the set.
    pub fn check_slater(&self) -> Result<Slater, SdrError> {
        if let Some((b, theta)) = &self.equalities {
            let svd = b.clone().svd(true, true);
            let rank = svd.rank(1e-10 * svd.singular_values.max().max(1.0));
            if rank == self.l {
                let w = svd.solve(theta, 1e-12).map_err(|e| SdrError::Dimension(e.to_string()))?;
                let w: Vec<f64> = w.iter().copied().collect();
                if self.equality_residual(&w) > 1e-8 || !self.membership(&w, 1e-8)? {
                    return Ok(Slater::None);
                }
                return Ok(Slater::Singleton(w));
            }
        }
        let mut bld = Builder::new();
        let w0 = bld.block(Cone::Free(self.l.max(1)));
        let t = bld.block(Cone::Free(1));
        let r = bld.block(Cone::Nonnegative(1));
        bld.cost(t, -1.0);
        bld.row(&[(t, 1.0), (r, 1.0)], 1.0);
        let mut lam_cols = Vec::new();
        for blk in &self.blocks {
            let (cone, a, g, e) = blk.standard();
            let c = incenter(ConeBlock { kind: std_kind(blk.cone.kind), dim: blk.cone.dim });
            let lam = bld.block(Cone::Free(g.ncols().max(1)));
            lam_cols.push((lam, g.ncols()));
            let s0 = bld.block(cone);
            for row in 0..a.nrows() {
                let mut ent = vec![(s0 + row, 1.0), (t, c[row])];
                ent.extend((0..self.l).map(|j| (w0 + j, -a[(row, j)])));
                ent.extend((0..g.ncols()).map(|k| (lam + k, -g[(row, k)])));
                bld.row(&ent, e[row]);
            }
        }
        if let Some((b, theta)) = &self.equalities {
            for k in 0..b.nrows() {
                let ent: Vec<_> = (0..self.l).map(|j| (w0 + j, b[(k, j)])).collect();
                bld.row(&ent, theta[k]);
            }
        }
        let sol = lp::solve_small(&bld.build())?;
        match sol.status {
            Status::Optimal | Status::SlowProgress => {
                let margin = sol.x[t];
                if margin > SLATER_MARGIN {
                    let w = sol.x[w0..w0 + self.l].to_vec();
                    let lambda = lam_cols.iter().map(|&(c0, q)| sol.x[c0..c0 + q].to_vec()).collect();
                    Ok(Slater::SlaterPoint { w, lambda, margin })
                } else {
                    Ok(Slater::None)
                }
            }
            Status::PrimalInfeasible => Ok(Slater::None),
            Status::DualInfeasible => Err(SdrError::Solver(ConicError::Backend("Slater program unbounded".into()))),
            Status::NumericalError => Err(SdrError::Solver(ConicError::Backend("Slater solve failed".into()))),
        }
    }

    /// `argmax θᵀw` over the set, with the support value.
    pub fn maximize(&self, theta: &[f64]) -> Result<(Vec<f64>, f64), SdrError> {
        self.check_len(theta)?;
        let mut bld = Builder::new();
        let w0 = bld.block(Cone::Free(self.l));
        for (j, &v) in theta.iter().enumerate() {
            bld.cost(w0 + j, -v);
        }
        self.add_rows(&mut bld, w0);
        let sol = lp::solve_small(&bld.build())?;
        match sol.status {
            Status::Optimal | Status::SlowProgress => {
                let w = sol.x[w0..w0 + self.l].to_vec();
                let v = w.iter().zip(theta).map(|(a, b)| a * b).sum();
                Ok((w, v))
            }
            Status::PrimalInfeasible => Err(SdrError::Empty),
            Status::DualInfeasible => {
                let j = theta.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map(|x| x.0).unwrap_or(0);
                Err(SdrError::Unbounded(j))
            }
            Status::NumericalError => Err(SdrError::Solver(ConicError::Backend("support solve failed".into()))),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, w: &[f64]) -> Result<Vec<f64>, SdrError> {
        self.check_len(w)?;
        if self.membership(w, 1e-12)? {
            return Ok(w.to_vec());
        }
        let mut bld = Builder::new();
        let w0 = bld.block(Cone::Free(self.l));
        let q0 = bld.block(Cone::SecondOrder(self.l + 1));
        bld.cost(q0 + self.l, 1.0);
        for j in 0..self.l {
            bld.row(&[(q0 + j, 1.0), (w0 + j, -1.0)], -w[j]);
        }
        self.add_rows(&mut bld, w0);
        let sol = lp::solve_small(&bld.build())?;
        if !sol.status.has_value() {
            return Err(SdrError::Empty);
        }
        Ok(sol.x[w0..w0 + self.l].to_vec())
    }

    /// Emit `s_s − A_s w − G_s λ_s = e_s`, `s_s ∈ K_s`, `Bw = θ` with `w` at columns `w0..`.
    pub(crate) fn add_rows(&self, bld: &mut Builder, w0: usize) {
        for blk in &self.blocks {
            let (cone, a, g, e) = blk.standard();
            let lam = if g.ncols() > 0 { Some(bld.block(Cone::Free(g.ncols()))) } else { None };
            let s0 = bld.block(cone);
            for row in 0..a.nrows() {
                let mut ent = vec![(s0 + row, 1.0)];
                ent.extend((0..self.l).map(|j| (w0 + j, -a[(row, j)])));
                if let Some(l0) = lam {
                    ent.extend((0..g.ncols()).map(|k| (l0 + k, -g[(row, k)])));
                }
                bld.row(&ent, e[row]);
            }
        }
        if let Some((b, theta)) = &self.equalities {
            for k in 0..b.nrows() {
                let ent: Vec<_> = (0..self.l).map(|j| (w0 + j, b[(k, j)])).collect();
                bld.row(&ent, theta[k]);
            }
        }
    }

    /// Whether the set is a polytope (nonnegative blocks only, no lifting variables).
    pub fn as_polytope(&self) -> Option<Polytope> {
        if self.equalities.is_some() || self.blocks.iter().any(|b| b.cone.kind != ConeKind::Nonnegative || b.g.ncols() > 0) {
            return None;
        }
        let m: usize = self.blocks.iter().map(|b| b.cone.dim).sum();
        let mut gamma = DMatrix::zeros(m, self.l);
        let mut h = DVector::zeros(m);
        let mut r = 0;
        for b in &self.blocks {
            for i in 0..b.cone.dim {
                for j in 0..self.l {
                    gamma[(r, j)] = -b.a[(i, j)];
                }
                h[r] = b.e[i];
                r += 1;
            }
        }
        Some(Polytope { gamma, h })
    }
}

fn std_kind(k: ConeKind) -> ConeKind {
    if k == ConeKind::RotatedSecondOrder {
        ConeKind::SecondOrder
    } else {
        k
    }
}

/// `{w | Γw ≤ h}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    pub gamma: DMatrix<f64>,
    pub h: DVector<f64>,
}

/// Guards for brute-force vertex enumeration.
pub const VERTEX_MAX_DIM: usize = 6;
pub const VERTEX_MAX_ROWS: usize = 32;

impl Polytope {
    pub fn new(gamma: DMatrix<f64>, h: DVector<f64>) -> Result<Self, SdrError> {
        if gamma.nrows() != h.len() {
            return Err(SdrError::Dimension(format!("Γ has {} rows, h has {}", gamma.nrows(), h.len())));
        }
        Ok(Polytope { gamma, h })
    }

    pub fn from_rows(rows: &[Vec<f64>], h: &[f64]) -> Result<Self, SdrError> {
        let l = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != l) {
            return Err(SdrError::Dimension("ragged Γ rows".into()));
        }
        Self::new(DMatrix::from_fn(rows.len(), l, |i, j| rows[i][j]), DVector::from_column_slice(h))
    }

    pub fn boxed(lo: &[f64], hi: &[f64]) -> Result<Self, SdrError> {
        if lo.len() != hi.len() {
            return Err(SdrError::Dimension("box bounds differ in length".into()));
        }
        let l = lo.len();
        let mut gamma = DMatrix::zeros(2 * l, l);
        let mut h = DVector::zeros(2 * l);
        for i in 0..l {
            gamma[(2 * i, i)] = 1.0;
            h[2 * i] = hi[i];
            gamma[(2 * i + 1, i)] = -1.0;
            h[2 * i + 1] = -lo[i];
        }
        Ok(Polytope { gamma, h })
    }

    pub fn dim(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn rows(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn to_sdr(&self) -> Result<SdrSet, SdrError> {
        let m = self.rows();
        let set = SdrSet::new(self.dim());
        if m == 0 {
            return Ok(set);
        }
        set.with_block(ConeBlock::new(ConeKind::Nonnegative, m)?, -&self.gamma, DMatrix::zeros(m, 0), self.h.clone())
    }

    /// Largest row violation `max_i (Γw − h)_i`, or `-∞` without rows.
    pub fn violation(&self, w: &[f64]) -> f64 {
        let r = &self.gamma * DVector::from_column_slice(w) - &self.h;
        r.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        self.violation(w) <= tol
    }

    pub fn maximize(&self, c: &[f64]) -> Result<LpOutcome, SdrError> {
        Ok(lp::maximize(c, &self.gamma, &self.h, None)?)
    }

    pub fn is_empty(&self) -> Result<bool, SdrError> {
        let c = vec![0.0; self.dim()];
        Ok(matches!(self.maximize(&c)?, LpOutcome::Infeasible))
    }

    /// Per-coordinate bounds from `2L` LPs; fails on the first unbounded coordinate.
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>), SdrError> {
        let l = self.dim();
        let (mut lo, mut hi) = (vec![0.0; l], vec![0.0; l]);
        for j in 0..l {
            for sign in [1.0, -1.0] {
                let mut c = vec![0.0; l];
                c[j] = sign;
                match self.maximize(&c)? {
                    LpOutcome::Optimal { value, .. } => {
                        if sign > 0.0 {
                            hi[j] = value;
                        } else {
                            lo[j] = -value;
                        }
                    }
                    LpOutcome::Infeasible => return Err(SdrError::Empty),
                    LpOutcome::Unbounded => return Err(SdrError::Unbounded(j)),
                }
            }
        }
        Ok((lo, hi))
    }

    /// Center and radius of the largest inscribed ball.
    pub fn chebyshev_center(&self) -> Result<(Vec<f64>, f64), SdrError> {
        let l = self.dim();
        let m = self.rows();
        let mut g = DMatrix::zeros(m + 1, l + 1);
        let mut h = DVector::zeros(m + 1);
        for i in 0..m {
            for j in 0..l {
                g[(i, j)] = self.gamma[(i, j)];
            }
            g[(i, l)] = self.gamma.row(i).norm();
            h[i] = self.h[i];
        }
        g[(m, l)] = -1.0;
        let mut c = vec![0.0; l + 1];
        c[l] = 1.0;
        match lp::maximize(&c, &g, &h, None)? {
            LpOutcome::Optimal { w, value } => Ok((w[..l].to_vec(), value)),
            LpOutcome::Infeasible => Err(SdrError::Empty),
            LpOutcome::Unbounded => Err(SdrError::Unbounded(0)),
        }
    }

    /// All extreme points by intersecting every `L`-subset of faces (small instances only).
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>, SdrError> {
        let (l, m) = (self.dim(), self.rows());
        if l > VERTEX_MAX_DIM || m > VERTEX_MAX_ROWS {
            return Err(SdrError::SizeGuard(format!("vertices needs L ≤ {VERTEX_MAX_DIM} and m ≤ {VERTEX_MAX_ROWS}; got L = {l}, m = {m}")));
        }
        self.bounding_box()?;
        let scale = 1.0 + self.h.amax();
        let mut out: Vec<Vec<f64>> = Vec::new();
        let mut idx: Vec<usize> = (0..l).collect();
        if l == 0 || m < l {
            return Ok(out);
        }
        loop {
            let a = DMatrix::from_fn(l, l, |i, j| self.gamma[(idx[i], j)]);
            let b = DVector::from_fn(l, |i, _| self.h[idx[i]]);
            let svd = a.clone().svd(true, true);
            let smax = svd.singular_values.max();
            if smax > 0.0 && svd.singular_values.min() > 1e-10 * smax {
                if let Ok(w) = svd.solve(&b, 0.0) {
                    let w: Vec<f64> = w.iter().copied().collect();
                    if self.violation(&w) <= 1e-9 * scale && !out.iter().any(|v| dist_inf(v, &w) <= 1e-9 * scale) {
                        out.push(w);
                    }
                }
            }
            // Next combination in lexicographic order.
            let mut k = l;
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                if idx[k] < m - l + k {
                    idx[k] += 1;
                    for j in k + 1..l {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Basic semialgebraic set `{g_i ≥ 0, G_i ⪰ 0, h_j = 0}` over named variables.
#[derive(Clone, Debug, PartialEq)]
pub struct BsaSet {
    pub vars: Vec<String>,
    pub ineqs: Vec<Polynomial>,
    /// Square matrix descriptors, row-major.
    pub matrix_ineqs: Vec<Vec<Polynomial>>,
    pub eqs: Vec<Polynomial>,
}

impl BsaSet {
    pub fn new(vars: &[String]) -> Self {
        BsaSet { vars: vars.to_vec(), ineqs: Vec::new(), matrix_ineqs: Vec::new(), eqs: Vec::new() }
    }

    pub fn ineq(mut self, g: Polynomial) -> Result<Self, SdrError> {
        self.ineqs.push(self.own(g)?);
        Ok(self)
    }

    pub fn eq(mut self, h: Polynomial) -> Result<Self, SdrError> {
        self.eqs.push(self.own(h)?);
        Ok(self)
    }

    pub fn matrix_ineq(mut self, g: Vec<Polynomial>) -> Result<Self, SdrError> {
        let k = (g.len() as f64).sqrt().round() as usize;
        if k * k != g.len() {
            return Err(SdrError::Dimension("matrix descriptor must be square".into()));
        }
        let g = g.into_iter().map(|p| self.own(p)).collect::<Result<Vec<_>, _>>()?;
        for i in 0..k {
            for j in 0..i {
                if g[i * k + j] != g[j * k + i] {
                    return Err(SdrError::InvalidBlock("matrix descriptor is not symmetric".into()));
                }
            }
        }
        self.matrix_ineqs.push(g);
        Ok(self)
    }

    fn own(&self, p: Polynomial) -> Result<Polynomial, SdrError> {
        if p.vars() == self.vars.as_slice() {
            Ok(p)
        } else {
            Ok(p.embed(&self.vars)?)
        }
    }

    /// Union of descriptors over a common (super) variable list.
    pub fn product(&self, other: &BsaSet, vars: &[String]) -> Result<BsaSet, SdrError> {
        let mut out = BsaSet::new(vars);
        for s in [self, other] {
            for g in &s.ineqs {
                out.ineqs.push(g.embed(vars)?);
            }
            for h in &s.eqs {
                out.eqs.push(h.embed(vars)?);
            }
            for m in &s.matrix_ineqs {
                out.matrix_ineqs.push(m.iter().map(|p| p.embed(vars)).collect::<Result<_, _>>()?);
            }
        }
        Ok(out)
    }

    pub fn embed(&self, vars: &[String]) -> Result<BsaSet, SdrError> {
        self.product(&BsaSet::new(vars), vars)
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool, SdrError> {
        if point.len() != self.vars.len() {
            return Err(SdrError::Dimension("point length differs from the variable count".into()));
        }
        if self.ineqs.iter().any(|g| g.eval_unchecked(point) < -tol) || self.eqs.iter().any(|h| h.eval_unchecked(point).abs() > tol) {
            return Ok(false);
        }
        for m in &self.matrix_ineqs {
            let k = (m.len() as f64).sqrt().round() as usize;
            let mat = DMatrix::from_fn(k, k, |i, j| m[i * k + j].eval_unchecked(point));
            if mat.symmetric_eigenvalues().min() < -tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotated_map_matches_definition() {
        let t = rotated_to_standard(3);
        let z = &t * DVector::from_vec(vec![0.0, 1.0, 1.0]);
        assert_eq!(z.as_slice(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn polytope_vertices_of_parallelogram() {
        let p = Polytope::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![1.0, 1.0], vec![-1.0, -1.0]], &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let mut v = p.vertices().unwrap();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [[-1.0, 0.0], [-1.0, 2.0], [1.0, -2.0], [1.0, 0.0]];
        assert_eq!(v.len(), 4);
        for (a, b) in v.iter().zip(want.iter()) {
            assert!(dist_inf(a, b) < 1e-9, "{a:?} vs {b:?}");
        }
    }
}
