//! Sum-of-squares tightening: polynomial unknowns, Gram blocks, and coefficient
//! matching, compiled to a standard-form cone program.
//!
//! Unknowns are scalar decision variables. A [`LinPoly`] is a polynomial whose
//! coefficients are affine in those variables. Gram matrices enter as PSD cone
//! blocks with the scaled lower-triangular vectorization; every other unknown is a
//! free column.

use std::collections::BTreeMap;
use std::ops::Range;

use lie_robust_conic::cone::{svec_len, svec_pair};
use lie_robust_conic::{Cone, ConicProblem, ConicSolution, RowGroup, SparseMatrix};
use nalgebra::DMatrix;

use crate::lierobust::{Atom, Expr, LieData, MultKind, RobustConstraintSystem};
use crate::polyalg::{binom, monomials_upto, time_and_states, MultiIndex, PolyError, Polynomial, PolynomialVector};
use crate::sdrset::BsaSet;

#[derive(Debug, thiserror::Error)]
pub enum SosError {
    #[error("degree cap too small: '{label}' has degree {degree} > 2·{half_degree}")]
    DegreeCap { label: String, degree: u32, half_degree: u32 },
    #[error("'{label}' depends on variables outside its domain")]
    OutsideDomain { label: String },
    #[error("empty monomial basis for '{0}'")]
    EmptyBasis(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Block-size formula `block · binom(n + d, d)`.
pub fn gram_size(n_vars: usize, half_degree: usize, block: usize) -> usize {
    block * binom(n_vars + half_degree, half_degree)
}

/// Gram side if a `n_i×n_i` matrix descriptor were scalarized with `n_i` extra variables.
pub fn scalarized_gram_size(n_vars: usize, n_i: usize, d: usize, d_i: usize) -> usize {
    binom(n_vars + n_i + d - d_i, d - d_i)
}

pub type VarId = usize;

/// `constant + Σ coef·var`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub constant: f64,
    pub terms: Vec<(VarId, f64)>,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr { constant: c, terms: Vec::new() }
    }

    pub fn var(id: VarId) -> Self {
        LinExpr { constant: 0.0, terms: vec![(id, 1.0)] }
    }

    pub fn add_scaled(&mut self, o: &LinExpr, s: f64) {
        self.constant += s * o.constant;
        self.terms.extend(o.terms.iter().map(|&(v, c)| (v, c * s)));
    }

    pub fn scaled(&self, s: f64) -> LinExpr {
        LinExpr { constant: self.constant * s, terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect() }
    }

    /// Merge duplicate variables and drop exact zeros.
    pub fn compact(&mut self) {
        if self.terms.len() < 2 {
            self.terms.retain(|t| t.1 != 0.0);
            return;
        }
        self.terms.sort_unstable_by_key(|t| t.0);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|t| t.1 == 0.0)
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v]).sum::<f64>()
    }
}

/// Polynomial with coefficients affine in the decision variables.
#[derive(Clone, Debug, PartialEq)]
pub struct LinPoly {
    vars: Vec<String>,
    terms: BTreeMap<MultiIndex, LinExpr>,
}

impl LinPoly {
    pub fn zero(vars: &[String]) -> Self {
        LinPoly { vars: vars.to_vec(), terms: BTreeMap::new() }
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        let mut out = LinPoly::zero(p.vars());
        for (a, c) in p.terms() {
            out.terms.insert(a.clone(), LinExpr::constant(c));
        }
        out
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &LinExpr)> {
        self.terms.iter()
    }

    pub fn coeff(&self, a: &MultiIndex) -> Option<&LinExpr> {
        self.terms.get(a)
    }

    pub fn add_term(&mut self, a: MultiIndex, e: &LinExpr, s: f64) {
        self.terms.entry(a).or_default().add_scaled(e, s);
    }

    pub fn add_scaled(&mut self, o: &LinPoly, s: f64) {
        assert_eq!(self.vars, o.vars, "LinPoly variable lists differ");
        for (a, e) in &o.terms {
            self.add_term(a.clone(), e, s);
        }
    }

    pub fn add_poly(&mut self, p: &Polynomial, s: f64) {
        assert_eq!(self.vars.as_slice(), p.vars(), "LinPoly variable lists differ");
        for (a, c) in p.terms() {
            self.terms.entry(a.clone()).or_default().constant += s * c;
        }
    }

    pub fn scaled(&self, s: f64) -> LinPoly {
        let mut out = self.clone();
        for e in out.terms.values_mut() {
            *e = e.scaled(s);
        }
        out
    }

    pub fn mul_poly(&self, p: &Polynomial) -> LinPoly {
        assert_eq!(self.vars.as_slice(), p.vars(), "LinPoly variable lists differ");
        let mut out = LinPoly::zero(&self.vars);
        for (a, e) in &self.terms {
            for (b, c) in p.terms() {
                out.add_term(a.add(b), e, c);
            }
        }
        out.compact();
        out
    }

    pub fn diff_index(&self, i: usize) -> LinPoly {
        let mut out = LinPoly::zero(&self.vars);
        for (a, e) in &self.terms {
            if a.0[i] > 0 {
                let mut b = a.clone();
                b.0[i] -= 1;
                out.add_term(b, e, a.0[i] as f64);
            }
        }
        out
    }

    /// Fix one variable to a value (the variable list is kept).
    pub fn substitute(&self, var: usize, value: f64) -> LinPoly {
        let mut out = LinPoly::zero(&self.vars);
        for (a, e) in &self.terms {
            let mut b = a.clone();
            let k = b.0[var];
            b.0[var] = 0;
            out.add_term(b, e, value.powi(k as i32));
        }
        out.compact();
        out
    }

    /// Evaluate the polynomial part at a point, leaving an affine expression.
    pub fn eval(&self, point: &[f64]) -> LinExpr {
        let mut out = LinExpr::default();
        for (a, e) in &self.terms {
            let m: f64 = a.0.iter().zip(point).map(|(&k, x)| x.powi(k as i32)).product();
            out.add_scaled(e, m);
        }
        out.compact();
        out
    }

    pub fn compact(&mut self) {
        for e in self.terms.values_mut() {
            e.compact();
        }
        self.terms.retain(|_, e| !e.is_zero());
    }

    /// Degree of the structurally nonzero part.
    pub fn degree(&self) -> u32 {
        self.terms.iter().filter(|(_, e)| !e.is_zero()).map(|(a, _)| a.degree()).max().unwrap_or(0)
    }

    /// Numeric polynomial for given variable values.
    pub fn value(&self, values: &[f64]) -> Polynomial {
        Polynomial::from_terms(&self.vars, self.terms.iter().map(|(a, e)| (a.clone(), e.eval(values))))
    }
}

/// `(base, channels)` of the Lie derivative for an unknown `v`.
pub fn lie_terms_lin(v: &LinPoly, f0: &PolynomialVector, channels: &[PolynomialVector]) -> Result<LieData<LinPoly>, PolyError> {
    let n = f0.len();
    if channels.iter().any(|c| c.len() != n) {
        return Err(PolyError::Dimension("channel dimension differs from the state dimension".into()));
    }
    let (t, xs) = time_and_states(v.vars(), n)?;
    let grad: Vec<LinPoly> = xs.iter().map(|&i| v.diff_index(i)).collect();
    let dot = |f: &PolynomialVector| -> Result<LinPoly, PolyError> {
        let mut acc = LinPoly::zero(v.vars());
        for (fi, gi) in f.entries.iter().zip(&grad) {
            if fi.vars() != v.vars() {
                return Err(PolyError::Dimension("dynamics and v use different variable lists".into()));
            }
            if !fi.is_zero() {
                acc.add_scaled(&gi.mul_poly(fi), 1.0);
            }
        }
        acc.compact();
        Ok(acc)
    };
    let mut base = dot(f0)?;
    if let Some(ti) = t {
        base.add_scaled(&v.diff_index(ti), 1.0);
        base.compact();
    }
    let channels = channels.iter().map(dot).collect::<Result<_, _>>()?;
    Ok(LieData { base, channels })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Free,
    Psd { block: usize },
}

/// One Gram matrix: label, monomial basis (over the program variables), and side.
#[derive(Clone, Debug, PartialEq)]
pub struct GramBlock {
    pub label: String,
    pub basis: Vec<MultiIndex>,
    /// Matrix-SOS factor `k` (side = k·|basis|).
    pub block: usize,
    pub side: usize,
    first_var: VarId,
}

/// Row group metadata: label and the monomial each row matches (if any).
#[derive(Clone, Debug, PartialEq)]
pub struct RowInfo {
    pub label: String,
    pub rows: Range<usize>,
    pub monomials: Vec<Option<MultiIndex>>,
}

/// Builder for a sum-of-squares program.
#[derive(Clone, Debug)]
pub struct SosProgram {
    vars: Vec<String>,
    slots: Vec<Slot>,
    names: Vec<String>,
    grams: Vec<GramBlock>,
    rows: Vec<LinExpr>,
    groups: Vec<RowInfo>,
    objective: LinExpr,
}

/// Mapping from decision variables to conic columns, produced by [`SosProgram::build`].
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub column: Vec<Option<usize>>,
    pub gram_block: Vec<usize>,
}

impl SosProgram {
    pub fn new(vars: &[String]) -> Self {
        SosProgram {
            vars: vars.to_vec(),
            slots: Vec::new(),
            names: Vec::new(),
            grams: Vec::new(),
            rows: Vec::new(),
            groups: Vec::new(),
            objective: LinExpr::default(),
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn num_vars(&self) -> usize {
        self.slots.len()
    }

    pub fn grams(&self) -> &[GramBlock] {
        &self.grams
    }

    pub fn row_groups(&self) -> &[RowInfo] {
        &self.groups
    }

    pub fn gram(&self, label: &str) -> Option<(usize, &GramBlock)> {
        self.grams.iter().enumerate().find(|(_, g)| g.label == label)
    }

    pub fn new_scalar(&mut self, name: &str) -> VarId {
        self.slots.push(Slot::Free);
        self.names.push(name.to_string());
        self.slots.len() - 1
    }

    /// A free polynomial with the given monomial support.
    pub fn new_free_poly(&mut self, name: &str, basis: &[MultiIndex]) -> LinPoly {
        let mut p = LinPoly::zero(&self.vars);
        for (i, a) in basis.iter().enumerate() {
            let id = self.new_scalar(&format!("{name}[{i}]"));
            p.terms.insert(a.clone(), LinExpr::var(id));
        }
        p
    }

    /// Monomials of degree ≤ `deg` in the variables at positions `active`.
    pub fn basis(&self, active: &[usize], deg: u32) -> Vec<MultiIndex> {
        monomials_upto(active.len(), deg)
            .into_iter()
            .map(|m| {
                let mut full = MultiIndex::zero(self.vars.len());
                for (k, &i) in active.iter().enumerate() {
                    full.0[i] = m.0[k];
                }
                full
            })
            .collect()
    }

    pub fn positions(&self, names: &[String]) -> Result<Vec<usize>, PolyError> {
        names
            .iter()
            .map(|n| self.vars.iter().position(|v| v == n).ok_or_else(|| PolyError::UnknownVariable(n.clone())))
            .collect()
    }

    /// A `k×k` SOS matrix `(I_k ⊗ b)ᵀ Q (I_k ⊗ b)` with `Q ⪰ 0` (row-major entries).
    pub fn new_gram(&mut self, label: &str, active: &[usize], half_degree: u32, k: usize) -> Vec<LinPoly> {
        let basis = self.basis(active, half_degree);
        let nb = basis.len();
        let side = k * nb;
        let block = self.grams.len();
        let first_var = self.slots.len();
        let mut label = label.to_string();
        if self.grams.iter().any(|g| g.label == label) {
            label = format!("{label}#{block}");
        }
        for r in 0..svec_len(side) {
            self.slots.push(Slot::Psd { block });
            self.names.push(format!("{label}[{r}]"));
        }
        let mut out = vec![LinPoly::zero(&self.vars); k * k];
        let s2 = std::f64::consts::SQRT_2;
        for r in 0..svec_len(side) {
            let (i, j) = svec_pair(r);
            let (a, bi) = (i / nb, i % nb);
            let (b, bj) = (j / nb, j % nb);
            let m = basis[bi].add(&basis[bj]);
            let e = LinExpr::var(first_var + r);
            if i == j {
                out[a * k + a].add_term(m, &e, 1.0);
            } else if a == b {
                out[a * k + a].add_term(m, &e, s2);
            } else {
                out[a * k + b].add_term(m.clone(), &e, 1.0 / s2);
                out[b * k + a].add_term(m, &e, 1.0 / s2);
            }
        }
        self.grams.push(GramBlock { label, basis, block: k, side, first_var });
        out
    }

    fn domain_active(&self, dom: &BsaSet) -> Result<Vec<usize>, PolyError> {
        self.positions(&dom.vars)
    }

    /// `σ₀ + Σ σ_i g_i + Σ ⟨S_i, G_i⟩ + Σ φ_j h_j`, nonnegative on the domain by construction.
    pub fn sos_on(&mut self, dom: &BsaSet, half_degree: u32, label: &str) -> Result<LinPoly, SosError> {
        let active = self.domain_active(dom)?;
        let mut p = self.new_gram(&format!("{label}/sigma0"), &active, half_degree, 1).pop().unwrap();
        for (i, g) in dom.ineqs.iter().enumerate() {
            let di = g.degree().div_ceil(2);
            if half_degree < di {
                continue;
            }
            let g = g.embed(&self.vars)?;
            let s = self.new_gram(&format!("{label}/sigma{}", i + 1), &active, half_degree - di, 1).pop().unwrap();
            p.add_scaled(&s.mul_poly(&g), 1.0);
        }
        for (i, gm) in dom.matrix_ineqs.iter().enumerate() {
            let r = (gm.len() as f64).sqrt().round() as usize;
            let di = gm.iter().map(Polynomial::degree).max().unwrap_or(0).div_ceil(2);
            if half_degree < di {
                continue;
            }
            let s = self.new_gram(&format!("{label}/S{}", i + 1), &active, half_degree - di, r);
            for a in 0..r * r {
                if !gm[a].is_zero() {
                    p.add_scaled(&s[a].mul_poly(&gm[a].embed(&self.vars)?), 1.0);
                }
            }
        }
        for (j, h) in dom.eqs.iter().enumerate() {
            let dh = h.degree();
            if 2 * half_degree < dh {
                continue;
            }
            let basis = self.basis(&active, 2 * half_degree - dh);
            let phi = self.new_free_poly(&format!("{label}/phi{}", j + 1), &basis);
            p.add_scaled(&phi.mul_poly(&h.embed(&self.vars)?), 1.0);
        }
        p.compact();
        Ok(p)
    }

    /// `k×k` matrix polynomial PSD on the domain (scalar descriptors only), row-major.
    pub fn sos_matrix_on(&mut self, dom: &BsaSet, k: usize, half_degree: u32, label: &str) -> Result<Vec<LinPoly>, SosError> {
        if k == 1 {
            return Ok(vec![self.sos_on(dom, half_degree, label)?]);
        }
        if !dom.matrix_ineqs.is_empty() {
            return Err(SosError::Unsupported("matrix-valued SOS over matrix descriptors".into()));
        }
        let active = self.domain_active(dom)?;
        let mut s = self.new_gram(&format!("{label}/S0"), &active, half_degree, k);
        for (i, g) in dom.ineqs.iter().enumerate() {
            let di = g.degree().div_ceil(2);
            if half_degree < di {
                continue;
            }
            let g = g.embed(&self.vars)?;
            let si = self.new_gram(&format!("{label}/S{}", i + 1), &active, half_degree - di, k);
            for (acc, e) in s.iter_mut().zip(&si) {
                acc.add_scaled(&e.mul_poly(&g), 1.0);
            }
        }
        for (j, h) in dom.eqs.iter().enumerate() {
            let dh = h.degree();
            if 2 * half_degree < dh {
                continue;
            }
            let h = h.embed(&self.vars)?;
            let basis = self.basis(&active, 2 * half_degree - dh);
            for a in 0..k {
                for b in 0..=a {
                    let phi = self.new_free_poly(&format!("{label}/H{}[{a},{b}]", j + 1), &basis).mul_poly(&h);
                    s[a * k + b].add_scaled(&phi, 1.0);
                    if a != b {
                        s[b * k + a].add_scaled(&phi, 1.0);
                    }
                }
            }
        }
        for e in s.iter_mut() {
            e.compact();
        }
        Ok(s)
    }

    /// Coefficient matching `p ≡ 0`.
    pub fn add_zero(&mut self, p: &LinPoly, label: &str) {
        let start = self.rows.len();
        let mut monos = Vec::new();
        let mut p = p.clone();
        p.compact();
        for (a, e) in p.terms {
            self.rows.push(e);
            monos.push(Some(a));
        }
        self.groups.push(RowInfo { label: label.to_string(), rows: start..self.rows.len(), monomials: monos });
    }

    /// Scalar equality `e = 0`.
    pub fn add_eq(&mut self, e: &LinExpr, label: &str) {
        let mut e = e.clone();
        e.compact();
        let start = self.rows.len();
        self.rows.push(e);
        self.groups.push(RowInfo { label: label.to_string(), rows: start..start + 1, monomials: vec![None] });
    }

    /// Scalar inequality `e ≥ 0` through a 1×1 Gram slack.
    pub fn add_nonneg(&mut self, e: &LinExpr, label: &str) {
        let s = self.new_gram(label, &[], 0, 1).pop().unwrap();
        let mut d = e.clone();
        d.add_scaled(&s.eval(&vec![0.0; self.vars.len()]), -1.0);
        self.add_eq(&d, &format!("{label}/eq"));
    }

    fn check_domain(&self, p: &LinPoly, dom: &BsaSet, label: &str) -> Result<(), SosError> {
        let active = self.domain_active(dom)?;
        for (a, e) in p.terms() {
            if e.is_zero() {
                continue;
            }
            if a.0.iter().enumerate().any(|(i, &k)| k > 0 && !active.contains(&i)) {
                return Err(SosError::OutsideDomain { label: label.to_string() });
            }
        }
        Ok(())
    }

    /// `p ∈ Σ[dom]` at the given half-degree (Putinar form, or Scherer with matrix descriptors).
    pub fn add_sos_on(&mut self, p: &LinPoly, dom: &BsaSet, half_degree: u32, label: &str) -> Result<(), SosError> {
        let mut p = p.clone();
        p.compact();
        let deg = p.degree();
        if deg > 2 * half_degree {
            return Err(SosError::DegreeCap { label: label.into(), degree: deg, half_degree });
        }
        self.check_domain(&p, dom, label)?;
        let s = self.sos_on(dom, half_degree, label)?;
        p.add_scaled(&s, -1.0);
        self.add_zero(&p, label);
        Ok(())
    }

    /// `P ∈ Σ^k[dom]` for a symmetric matrix of unknown polynomials (row-major).
    pub fn add_matrix_sos_on(&mut self, m: &[LinPoly], k: usize, dom: &BsaSet, half_degree: u32, label: &str) -> Result<(), SosError> {
        for (i, e) in m.iter().enumerate() {
            let deg = e.degree();
            if deg > 2 * half_degree {
                return Err(SosError::DegreeCap { label: format!("{label}[{}]", i), degree: deg, half_degree });
            }
            self.check_domain(e, dom, label)?;
        }
        let s = self.sos_matrix_on(dom, k, half_degree, label)?;
        for a in 0..k {
            for b in 0..=a {
                let mut d = m[a * k + b].clone();
                d.add_scaled(&s[a * k + b], -1.0);
                self.add_zero(&d, &format!("{label}[{a},{b}]"));
            }
        }
        Ok(())
    }

    /// Minimize `e`.
    pub fn minimize(&mut self, e: &LinExpr) {
        let mut e = e.clone();
        e.compact();
        self.objective = e;
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    /// Assemble the cone program. Unused free variables are dropped.
    pub fn build(&self) -> (ConicProblem, Layout) {
        let nv = self.slots.len();
        let mut used = vec![false; nv];
        for r in &self.rows {
            for &(v, _) in &r.terms {
                used[v] = true;
            }
        }
        for &(v, _) in &self.objective.terms {
            used[v] = true;
        }
        let mut column = vec![None; nv];
        let mut ncol = 0;
        for v in 0..nv {
            if self.slots[v] == Slot::Free && used[v] {
                column[v] = Some(ncol);
                ncol += 1;
            }
        }
        let nfree = ncol;
        let mut cones = Vec::new();
        let mut labels = Vec::new();
        if nfree > 0 {
            cones.push(Cone::Free(nfree));
            labels.push("free".to_string());
        }
        let mut gram_block = Vec::new();
        for g in &self.grams {
            gram_block.push(cones.len());
            cones.push(Cone::Psd(g.side));
            labels.push(g.label.clone());
            for r in 0..svec_len(g.side) {
                column[g.first_var + r] = Some(ncol + r);
            }
            ncol += svec_len(g.side);
        }
        let mut trips = Vec::new();
        let mut b = Vec::with_capacity(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            for &(v, c) in &r.terms {
                trips.push((i, column[v].expect("row uses a dropped variable"), c));
            }
            b.push(-r.constant);
        }
        let mut c = vec![0.0; ncol];
        for &(v, k) in &self.objective.terms {
            c[column[v].unwrap()] += k;
        }
        let a = SparseMatrix::from_triplets(self.rows.len(), ncol, &trips);
        let mut p = ConicProblem::new(cones, a, b, c);
        p.offset = self.objective.constant;
        p.block_labels = labels;
        p.row_groups = self.groups.iter().map(|g| RowGroup { label: g.label.clone(), rows: g.rows.clone() }).collect();
        (p, Layout { column, gram_block })
    }

    /// Decision-variable values from a solution (dropped variables read as 0).
    pub fn values(&self, layout: &Layout, sol: &ConicSolution) -> Vec<f64> {
        layout.column.iter().map(|c| c.map(|c| sol.x[c]).unwrap_or(0.0)).collect()
    }

    /// Gram matrix of block `id` from variable values.
    pub fn gram_value(&self, id: usize, values: &[f64]) -> DMatrix<f64> {
        let g = &self.grams[id];
        let mut m = DMatrix::zeros(g.side, g.side);
        for r in 0..svec_len(g.side) {
            let (i, j) = svec_pair(r);
            let v = values[g.first_var + r];
            if i == j {
                m[(i, i)] = v;
            } else {
                m[(i, j)] = v / std::f64::consts::SQRT_2;
                m[(j, i)] = m[(i, j)];
            }
        }
        m
    }

    /// Instantiate a robust constraint system with polynomial unknowns.
    ///
    /// Multipliers get half-degree `dz`; the scalar inequality and the LMIs use the
    /// smallest half-degree covering their actual degree (at least `d`). Returns the
    /// multiplier polynomials (`[id][comp]`).
    pub fn add_robust(
        &mut self,
        sys: &RobustConstraintSystem,
        lie: &LieData<LinPoly>,
        dom: &BsaSet,
        d: u32,
        dz: u32,
        label: &str,
    ) -> Result<Vec<Vec<LinPoly>>, SosError> {
        let active = self.domain_active(dom)?;
        let mut mults: Vec<Vec<LinPoly>> = Vec::new();
        for (id, m) in sys.mults.iter().enumerate() {
            let name = format!("{label}/{}", m.name);
            let comps = match m.kind {
                MultKind::NonnegOnDomain(n) => (0..n).map(|i| self.sos_on(dom, dz, &format!("{name}[{i}]"))).collect::<Result<Vec<_>, _>>()?,
                MultKind::PsdOnDomain(q) => {
                    let s = self.sos_matrix_on(dom, q, dz, &name)?;
                    (0..svec_len(q))
                        .map(|r| {
                            let (i, j) = svec_pair(r);
                            s[i * q + j].clone()
                        })
                        .collect()
                }
                MultKind::Free(n) => {
                    let basis = self.basis(&active, 2 * dz);
                    (0..n).map(|i| self.new_free_poly(&format!("{name}[{i}]"), &basis)).collect()
                }
            };
            debug_assert_eq!(comps.len(), m.kind.components(), "multiplier {id}");
            mults.push(comps);
        }
        let vars = self.vars.clone();
        let inst = |e: &Expr| -> LinPoly {
            let mut p = LinPoly::zero(&vars);
            for &(c, a) in &e.terms {
                let src = match a {
                    Atom::Base => &lie.base,
                    Atom::Channel(l) => &lie.channels[l],
                    Atom::Mult { id, comp } => &mults[id][comp],
                };
                p.add_scaled(src, c);
            }
            p.compact();
            p
        };
        for (k, mc) in sys.matrix_constraints.iter().enumerate() {
            let q = mc.side;
            let mut full = vec![LinPoly::zero(&vars); q * q];
            for (r, e) in mc.entries.iter().enumerate() {
                let (i, j) = svec_pair(r);
                let p = inst(e);
                full[i * q + j] = p.clone();
                full[j * q + i] = p;
            }
            let dm = full.iter().map(LinPoly::degree).max().unwrap_or(0).div_ceil(2).max(dz);
            self.add_matrix_sos_on(&full, q, dom, dm, &format!("{label}/lmi{}", k + 1))?;
        }
        for (name, e) in &sys.identities {
            let p = inst(e);
            self.add_zero(&p, &format!("{label}/{name}"));
        }
        let mut ineq = inst(&sys.inequality).scaled(-1.0);
        if sys.margin != 0.0 {
            ineq.add_term(MultiIndex::zero(self.vars.len()), &LinExpr::constant(-sys.margin), 1.0);
        }
        let dt = ineq.degree().div_ceil(2).max(d);
        self.add_sos_on(&ineq, dom, dt, &format!("{label}/lie"))?;
        Ok(mults)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_sizes() {
        assert_eq!(gram_size(13, 5, 1), 8568);
        assert_eq!(gram_size(3, 5, 1), 56);
        assert_eq!(gram_size(3, 6, 3), 252);
        assert_eq!(gram_size(6, 6, 3), 2772);
        assert_eq!(gram_size(13, 4, 1), 2380);
        assert_eq!(gram_size(4, 4, 1), 70);
    }

    #[test]
    fn gram_poly_is_quadratic_form() {
        let vars = vec!["x".to_string()];
        let mut prog = SosProgram::new(&vars);
        let s = prog.new_gram("g", &[0], 1, 1).pop().unwrap();
        // Q = [[1, 2], [2, 5]] over (1, x): 1 + 4x + 5x².
        let vals = vec![1.0, 2.0 * std::f64::consts::SQRT_2, 5.0];
        let p = s.value(&vals);
        let want = Polynomial::parse("1 + 4x + 5x^2", &vars).unwrap();
        assert!((&p - &want).max_abs_coeff() < 1e-12, "{p}");
    }
}
