//! Robust counterparts of the input-affine Lie constraint.
//!
//! The semi-infinite constraint `base + Σ_ℓ w_ℓ c_ℓ ≤ 0 ∀w ∈ W` with
//! `W = {w | ∃λ_s: A_s w + G_s λ_s + e_s ∈ K_s, Bw = θ}` holds iff there are
//! multipliers `ζ_s ∈ K_s` and `μ` with
//!
//! ```text
//! base + Σ_s e_sᵀζ_s − θᵀμ ≤ 0
//! c_ℓ + Σ_s (A_sᵀζ_s)_ℓ + (Bᵀμ)_ℓ = 0    ℓ = 1..L
//! G_sᵀζ_s = 0
//! ```
//!
//! (given a Slater point). The system is kept symbolic: expressions refer to the
//! Lie data and to multiplier components, and are instantiated either with
//! polynomial unknowns ([`crate::sostighten`]) or with numbers at a single point
//! ([`pointwise_min`]).

use std::collections::BTreeMap;

use lie_robust_conic::cone::{svec_len, svec_pair};
use lie_robust_conic::{Cone, ConicError, Status};
use nalgebra::DVector;

use crate::lp::{self, Builder, LpOutcome};
use crate::polyalg::{lie_terms, PolyError, Polynomial, PolynomialVector};
use crate::sdrset::{ConeKind, Polytope, SdrError, SdrSet};

#[derive(Debug, thiserror::Error)]
pub enum RobustError {
    #[error("the uncertainty set is empty")]
    EmptySet,
    #[error("inconsistent equality constraints (residual {0:.3e})")]
    InconsistentEqualities(f64),
    #[error("negative second-order radius {0}")]
    NegativeRadius(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Sdr(#[from] SdrError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("solver failure: {0}")]
    Solver(#[from] ConicError),
}

/// `base = Lie_{f₀} v` and `channels[ℓ] = f_ℓ·∇_x v`, for any coefficient type.
#[derive(Clone, Debug, PartialEq)]
pub struct LieData<T> {
    pub base: T,
    pub channels: Vec<T>,
}

impl LieData<Polynomial> {
    pub fn from_dynamics(v: &Polynomial, f0: &PolynomialVector, channels: &[PolynomialVector]) -> Result<Self, PolyError> {
        let (base, channels) = lie_terms(v, f0, channels)?;
        Ok(LieData { base, channels })
    }

    /// Evaluate at a point of the ambient variables.
    pub fn at(&self, point: &[f64]) -> LieData<f64> {
        LieData { base: self.base.eval_unchecked(point), channels: self.channels.iter().map(|c| c.eval_unchecked(point)).collect() }
    }
}

impl LieData<f64> {
    /// `max_{w ∈ V} base + Σ w_ℓ c_ℓ` over a finite point list.
    pub fn max_over(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .map(|w| self.base + w.iter().zip(&self.channels).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// How a multiplier is constrained over the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultKind {
    /// `m` scalar functions, each nonnegative on the domain.
    NonnegOnDomain(usize),
    /// A `q×q` symmetric matrix function, PSD on the domain. Components are the
    /// plain entries `Z_ij` (`i ≥ j`) in [`svec_pair`] order.
    PsdOnDomain(usize),
    /// `r` unconstrained functions.
    Free(usize),
}

impl MultKind {
    pub fn components(&self) -> usize {
        match *self {
            MultKind::NonnegOnDomain(n) | MultKind::Free(n) => n,
            MultKind::PsdOnDomain(q) => svec_len(q),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultDecl {
    pub name: String,
    pub kind: MultKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Atom {
    Base,
    Channel(usize),
    Mult { id: usize, comp: usize },
}

/// Linear combination of atoms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expr {
    pub terms: Vec<(f64, Atom)>,
}

impl Expr {
    pub fn push(&mut self, c: f64, a: Atom) {
        if c != 0.0 {
            self.terms.push((c, a));
        }
    }

    /// Merge duplicate atoms.
    pub fn compact(&mut self) {
        let mut m: BTreeMap<Atom, f64> = BTreeMap::new();
        for &(c, a) in &self.terms {
            *m.entry(a).or_insert(0.0) += c;
        }
        self.terms = m.into_iter().filter(|(_, c)| *c != 0.0).map(|(a, c)| (c, a)).collect();
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluate with numeric data and multiplier values (`mults[id][comp]`).
    pub fn eval(&self, lie: &LieData<f64>, mults: &[Vec<f64>]) -> f64 {
        self.terms
            .iter()
            .map(|&(c, a)| {
                c * match a {
                    Atom::Base => lie.base,
                    Atom::Channel(l) => lie.channels[l],
                    Atom::Mult { id, comp } => mults[id][comp],
                }
            })
            .sum()
    }
}

/// A symmetric `k×k` matrix of expressions required PSD on the domain (lower triangle).
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixConstraint {
    pub side: usize,
    /// Entries in [`svec_pair`] order.
    pub entries: Vec<Expr>,
}

/// `inequality ≤ −margin` on the domain, `identities ≡ 0`, multipliers in their cones.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustConstraintSystem {
    pub channels: usize,
    pub inequality: Expr,
    pub identities: Vec<(String, Expr)>,
    pub mults: Vec<MultDecl>,
    pub matrix_constraints: Vec<MatrixConstraint>,
    pub margin: f64,
}

impl RobustConstraintSystem {
    fn bare(channels: usize) -> Self {
        let mut inequality = Expr::default();
        inequality.push(1.0, Atom::Base);
        let identities = (0..channels)
            .map(|l| {
                let mut e = Expr::default();
                e.push(1.0, Atom::Channel(l));
                (format!("channel{}", l + 1), e)
            })
            .collect();
        RobustConstraintSystem { channels, inequality, identities, mults: Vec::new(), matrix_constraints: Vec::new(), margin: 0.0 }
    }

    fn declare(&mut self, name: String, kind: MultKind) -> usize {
        self.mults.push(MultDecl { name, kind });
        self.mults.len() - 1
    }

    pub fn with_margin(mut self, eps: f64) -> Self {
        self.margin = eps;
        self
    }

    pub fn count_matrix_constraints(&self) -> usize {
        self.matrix_constraints.len()
    }
}

/// Robust counterpart over an arbitrary mixed-cone set.
pub fn robustify(channels: usize, w: &SdrSet) -> Result<RobustConstraintSystem, RobustError> {
    if w.dim() != channels {
        return Err(RobustError::Dimension(format!("W has L = {}, Lie data has {channels} channels", w.dim())));
    }
    let mut sys = RobustConstraintSystem::bare(channels);
    for (s, blk) in w.blocks().iter().enumerate() {
        let (_, a, g, e) = blk.standard();
        // Coefficient rows: row r of the block pairs ζ_r with e_r, A_r·, G_r·.
        // `pair` returns (multiplier id, component, weight) atoms for row r.
        let rows = a.nrows();
        let mut row_atoms: Vec<Vec<(f64, Atom)>> = vec![Vec::new(); rows];
        match blk.cone.kind {
            ConeKind::Nonnegative => {
                let id = sys.declare(format!("zeta{}", s + 1), MultKind::NonnegOnDomain(rows));
                for (r, ra) in row_atoms.iter_mut().enumerate() {
                    ra.push((1.0, Atom::Mult { id, comp: r }));
                }
            }
            ConeKind::Psd => {
                let q = blk.cone.dim;
                let id = sys.declare(format!("zeta{}", s + 1), MultKind::PsdOnDomain(q));
                // svec(Z)_r = Z_ii or √2 Z_ij.
                for (r, ra) in row_atoms.iter_mut().enumerate() {
                    let (i, j) = svec_pair(r);
                    let wgt = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                    ra.push((wgt, Atom::Mult { id, comp: r }));
                }
            }
            ConeKind::SecondOrder | ConeKind::RotatedSecondOrder => {
                let m = rows - 1;
                if blk.cone.kind == ConeKind::SecondOrder && a.row(m).iter().all(|x| *x == 0.0) && g.row(m).iter().all(|x| *x == 0.0) && e[m] < 0.0 {
                    return Err(RobustError::NegativeRadius(e[m]));
                }
                if m == 0 {
                    let id = sys.declare(format!("tau{}", s + 1), MultKind::NonnegOnDomain(1));
                    row_atoms[0].push((1.0, Atom::Mult { id, comp: 0 }));
                } else {
                    // ζ = (β, τ) with ‖β‖ ≤ τ via [τ β_j; β_j ω_j] ⪰ 0 and τ = Σ ω_j.
                    let beta = sys.declare(format!("beta{}", s + 1), MultKind::Free(m));
                    let tau = sys.declare(format!("tau{}", s + 1), MultKind::Free(1));
                    let omega = sys.declare(format!("omega{}", s + 1), MultKind::Free(m));
                    for (r, ra) in row_atoms.iter_mut().enumerate().take(m) {
                        ra.push((1.0, Atom::Mult { id: beta, comp: r }));
                    }
                    row_atoms[m].push((1.0, Atom::Mult { id: tau, comp: 0 }));
                    for j in 0..m {
                        let mut e00 = Expr::default();
                        e00.push(1.0, Atom::Mult { id: tau, comp: 0 });
                        let mut e10 = Expr::default();
                        e10.push(1.0, Atom::Mult { id: beta, comp: j });
                        let mut e11 = Expr::default();
                        e11.push(1.0, Atom::Mult { id: omega, comp: j });
                        sys.matrix_constraints.push(MatrixConstraint { side: 2, entries: vec![e00, e10, e11] });
                    }
                    let mut link = Expr::default();
                    link.push(1.0, Atom::Mult { id: tau, comp: 0 });
                    for j in 0..m {
                        link.push(-1.0, Atom::Mult { id: omega, comp: j });
                    }
                    sys.identities.push((format!("soc{}_tau", s + 1), link));
                }
            }
        }
        for (r, ra) in row_atoms.iter().enumerate() {
            for &(wgt, atom) in ra {
                sys.inequality.push(wgt * e[r], atom);
                for l in 0..channels {
                    sys.identities[l].1.push(wgt * a[(r, l)], atom);
                }
            }
        }
        for k in 0..g.ncols() {
            let mut id = Expr::default();
            for (r, ra) in row_atoms.iter().enumerate() {
                for &(wgt, atom) in ra {
                    id.push(wgt * g[(r, k)], atom);
                }
            }
            sys.identities.push((format!("lift{}_{}", s + 1, k + 1), id));
        }
    }
    if let Some((b, theta)) = w.equalities() {
        let r = b.nrows();
        let id = sys.declare("mu".into(), MultKind::Free(r));
        for k in 0..r {
            let atom = Atom::Mult { id, comp: k };
            sys.inequality.push(-theta[k], atom);
            for l in 0..channels {
                sys.identities[l].1.push(b[(k, l)], atom);
            }
        }
    }
    sys.inequality.compact();
    for (_, e) in sys.identities.iter_mut() {
        e.compact();
    }
    Ok(sys)
}

fn check_channels<T>(lie: &LieData<T>, l: usize) -> Result<(), RobustError> {
    if lie.channels.len() != l {
        return Err(RobustError::Dimension(format!("{} channels for an input set of dimension {l}", lie.channels.len())));
    }
    Ok(())
}

pub fn robustify_polytope<T>(lie: &LieData<T>, p: &Polytope) -> Result<RobustConstraintSystem, RobustError> {
    check_channels(lie, p.dim())?;
    if p.rows() > 0 && p.is_empty()? {
        return Err(RobustError::EmptySet);
    }
    robustify(p.dim(), &p.to_sdr()?)
}

pub fn robustify_psd<T>(lie: &LieData<T>, w: &SdrSet) -> Result<RobustConstraintSystem, RobustError> {
    check_channels(lie, w.dim())?;
    if w.blocks().len() != 1 || w.blocks()[0].cone.kind != ConeKind::Psd {
        return Err(RobustError::Dimension("expected exactly one PSD block".into()));
    }
    robustify(w.dim(), w)
}

pub fn robustify_soc<T>(lie: &LieData<T>, w: &SdrSet) -> Result<RobustConstraintSystem, RobustError> {
    check_channels(lie, w.dim())?;
    if w.blocks().len() != 1 || !matches!(w.blocks()[0].cone.kind, ConeKind::SecondOrder | ConeKind::RotatedSecondOrder) {
        return Err(RobustError::Dimension("expected exactly one second-order block".into()));
    }
    robustify(w.dim(), w)
}

pub fn robustify_equality<T>(lie: &LieData<T>, w: &SdrSet) -> Result<RobustConstraintSystem, RobustError> {
    check_channels(lie, w.dim())?;
    if let Some((b, theta)) = w.equalities() {
        let svd = b.clone().svd(true, true);
        let x = svd.solve(theta, 1e-12).map_err(|e| RobustError::Dimension(e.to_string()))?;
        let res = (b * x - theta).amax();
        if res > 1e-9 * (1.0 + theta.amax()) {
            return Err(RobustError::InconsistentEqualities(res));
        }
    }
    robustify(w.dim(), w)
}

/// Integral cost attached to the input.
#[derive(Clone, Debug, PartialEq)]
pub enum IntegralCost {
    /// `J = ‖Cw‖_∞`.
    Linf(nalgebra::DMatrix<f64>),
    /// `J = ‖w‖₁`.
    L1,
    /// `J = wᵀRw` (state-dependent parts `P`, `N` must be zero).
    Quadratic { p: nalgebra::DMatrix<f64>, r: nalgebra::DMatrix<f64>, n: nalgebra::DMatrix<f64>, z: f64 },
}

/// Lift an integral cost into extra channels and an enlarged input set.
///
/// The lifted coordinates `w̃` enter the Lie data with coefficient `−1`, so the
/// constraint `Lie v ≤ 0` becomes `Lie v − w̃ ≤ 0`, i.e. `Lie v + J ≥ 0` written in
/// the `≤ 0` convention after negating the data.
pub fn lift_integral_cost(lie: &LieData<Polynomial>, w: &SdrSet, cost: &IntegralCost) -> Result<(LieData<Polynomial>, SdrSet), RobustError> {
    use nalgebra::DMatrix;
    let l = w.dim();
    check_channels(lie, l)?;
    let vars = lie.base.vars().to_vec();
    let (extra, rows): (usize, Vec<(DMatrix<f64>, ConeKind, usize, DVector<f64>)>) = match cost {
        IntegralCost::Linf(c) => {
            if c.ncols() != l {
                return Err(RobustError::Dimension("C must have L columns".into()));
            }
            let k = c.nrows();
            // [−C | 1] and [C | 1] ≥ 0.
            let mut a = DMatrix::zeros(2 * k, l + 1);
            for i in 0..k {
                for j in 0..l {
                    a[(i, j)] = -c[(i, j)];
                    a[(k + i, j)] = c[(i, j)];
                }
                a[(i, l)] = 1.0;
                a[(k + i, l)] = 1.0;
            }
            (1, vec![(a, ConeKind::Nonnegative, 2 * k, DVector::zeros(2 * k))])
        }
        IntegralCost::L1 => {
            let mut a = DMatrix::zeros(2 * l, 2 * l);
            for i in 0..l {
                a[(i, i)] = -1.0;
                a[(i, l + i)] = 1.0;
                a[(l + i, i)] = 1.0;
                a[(l + i, l + i)] = 1.0;
            }
            (l, vec![(a, ConeKind::Nonnegative, 2 * l, DVector::zeros(2 * l))])
        }
        IntegralCost::Quadratic { p, r, n, z } => {
            if p.iter().any(|x| *x != 0.0) || n.iter().any(|x| *x != 0.0) {
                return Err(RobustError::Unsupported("state-dependent quadratic costs (P, N ≠ 0)".into()));
            }
            if r.nrows() != l || r.ncols() != l {
                return Err(RobustError::Dimension("R must be L×L".into()));
            }
            let eig = r.clone().symmetric_eigen();
            if eig.eigenvalues.min() < -1e-10 {
                return Err(RobustError::Unsupported("R is not positive semidefinite".into()));
            }
            let half = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0).sqrt())) * eig.eigenvectors.transpose();
            // (R^{1/2} w, w̃, z) ∈ Q_r.
            let mut a = DMatrix::zeros(l + 2, l + 1);
            for i in 0..l {
                for j in 0..l {
                    a[(i, j)] = half[(i, j)];
                }
            }
            a[(l, l)] = 1.0;
            let mut e = DVector::zeros(l + 2);
            e[l + 1] = *z;
            (1, vec![(a, ConeKind::RotatedSecondOrder, l + 2, e)])
        }
    };
    let mut lifted = SdrSet::new(l + extra);
    for blk in w.blocks() {
        let mut a = DMatrix::zeros(blk.a.nrows(), l + extra);
        a.view_mut((0, 0), (blk.a.nrows(), l)).copy_from(&blk.a);
        lifted = lifted.with_block(blk.cone, a, blk.g.clone(), blk.e.clone())?;
    }
    if let Some((b, theta)) = w.equalities() {
        let mut bb = DMatrix::zeros(b.nrows(), l + extra);
        bb.view_mut((0, 0), (b.nrows(), l)).copy_from(b);
        lifted = lifted.with_equalities(bb, theta.clone())?;
    }
    for (a, kind, dim, e) in rows {
        let q = DMatrix::zeros(a.nrows(), 0);
        lifted = lifted.with_block(crate::sdrset::ConeBlock::new(kind, dim)?, a, q, e)?;
    }
    let mut channels = lie.channels.clone();
    for _ in 0..extra {
        channels.push(Polynomial::constant(&vars, -1.0));
    }
    Ok((LieData { base: lie.base.clone(), channels }, lifted))
}

/// Minimum over multipliers of the inequality's left side at one point.
///
/// The robust constraint holds at the point iff the value is `≤ 0`; by conic
/// duality it equals `max_{w ∈ W} base + Σ w_ℓ c_ℓ`. Returns `+∞` when the
/// identities cannot be met and `−∞` when the minimum is unbounded.
pub fn pointwise_min(sys: &RobustConstraintSystem, lie: &LieData<f64>) -> Result<f64, RobustError> {
    if lie.channels.len() != sys.channels {
        return Err(RobustError::Dimension("pointwise data has the wrong channel count".into()));
    }
    let mut bld = Builder::new();
    // Column of each multiplier component (PSD entries via svec scaling).
    let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
    for m in &sys.mults {
        match m.kind {
            MultKind::NonnegOnDomain(n) => {
                let c0 = bld.block(Cone::Nonnegative(n));
                cols.push((0..n).map(|i| (c0 + i, 1.0)).collect());
            }
            MultKind::Free(n) => {
                let c0 = bld.block(Cone::Free(n));
                cols.push((0..n).map(|i| (c0 + i, 1.0)).collect());
            }
            MultKind::PsdOnDomain(q) => {
                let c0 = bld.block(Cone::Psd(q));
                cols.push(
                    (0..svec_len(q))
                        .map(|r| {
                            let (i, j) = svec_pair(r);
                            (c0 + r, if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 })
                        })
                        .collect(),
                );
            }
        }
    }
    let linearize = |e: &Expr| -> (Vec<(usize, f64)>, f64) {
        let mut ent = Vec::new();
        let mut constant = 0.0;
        for &(c, a) in &e.terms {
            match a {
                Atom::Base => constant += c * lie.base,
                Atom::Channel(l) => constant += c * lie.channels[l],
                Atom::Mult { id, comp } => {
                    let (col, s) = cols[id][comp];
                    ent.push((col, c * s));
                }
            }
        }
        (ent, constant)
    };
    for (_, e) in &sys.identities {
        let (ent, k) = linearize(e);
        if ent.is_empty() {
            if k.abs() > 1e-12 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        bld.row(&ent, -k);
    }
    for mc in &sys.matrix_constraints {
        let s0 = bld.block(Cone::Psd(mc.side));
        for (r, e) in mc.entries.iter().enumerate() {
            let (i, j) = svec_pair(r);
            let scale = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
            let (mut ent, k) = linearize(e);
            ent.push((s0 + r, -scale));
            bld.row(&ent, -k);
        }
    }
    let (obj, k) = linearize(&sys.inequality);
    for (col, v) in obj {
        bld.cost(col, v);
    }
    let mut p = bld.build();
    p.offset = k;
    if p.num_cols() == 0 {
        return Ok(k);
    }
    let sol = lp::solve_small(&p)?;
    match sol.status {
        Status::Optimal | Status::SlowProgress => Ok(0.5 * (sol.primal_objective + sol.dual_objective)),
        Status::PrimalInfeasible => Ok(f64::INFINITY),
        Status::DualInfeasible => Ok(f64::NEG_INFINITY),
        Status::NumericalError => Err(RobustError::Solver(ConicError::Backend("pointwise solve failed".into()))),
    }
}

/// `max_{w ∈ P} base + Σ w_ℓ c_ℓ` by linear programming (reference for tests).
pub fn pointwise_max_lp(p: &Polytope, lie: &LieData<f64>) -> Result<f64, RobustError> {
    match p.maximize(&lie.channels)? {
        LpOutcome::Optimal { value, .. } => Ok(lie.base + value),
        LpOutcome::Infeasible => Err(RobustError::EmptySet),
        LpOutcome::Unbounded => Ok(f64::INFINITY),
    }
}
