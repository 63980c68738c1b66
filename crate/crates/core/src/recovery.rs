//! Pseudo-moments from dual solutions and approximate control laws.
//!
//! Coefficient-matching rows of the Lie constraint `−(L v) − σ ≡ 0` have duals
//! equal to the occupation-measure moments `m_γ`; rows of the channel identities
//! `c_ℓ + … ≡ 0` carry the negated moments of `ν_ℓ = w_ℓ μ`.

use std::collections::BTreeMap;

use lie_robust_conic::ConicSolution;
use nalgebra::{DMatrix, DVector};

use crate::analysis::BuiltProgram;
use crate::polyalg::{MultiIndex, Polynomial};
use crate::sdrset::{SdrError, SdrSet};

#[derive(Debug, thiserror::Error)]
pub enum RecoveryError {
    #[error("no row group labelled {0}")]
    MissingGroup(String),
    #[error("solution has no usable duals ({0})")]
    NoDuals(String),
    #[error("moment matrix is zero")]
    ZeroMoments,
    #[error("channel sequence {0} does not exist")]
    Channel(usize),
    #[error(transparent)]
    Sdr(#[from] SdrError),
}

pub type Sequence = BTreeMap<MultiIndex, f64>;

#[derive(Clone, Debug)]
pub struct MomentData {
    pub vars: Vec<String>,
    /// Monomial basis of degree `≤ d` indexing `matrix`.
    pub basis: Vec<MultiIndex>,
    pub moments: Sequence,
    pub matrix: DMatrix<f64>,
    pub channels: Vec<Sequence>,
}

/// Full graded basis up to degree `d` over all `nvars` variables.
fn graded_basis(nvars: usize, d: u32) -> Vec<MultiIndex> {
    crate::polyalg::monomials_upto(nvars, d)
}

impl MomentData {
    /// Assemble `M_d[m]_{αβ} = m_{α+β}`; absent moments read as zero.
    pub fn from_sequence(vars: &[String], moments: Sequence, channels: Vec<Sequence>, d: u32) -> Self {
        let basis = graded_basis(vars.len(), d);
        let nb = basis.len();
        let matrix = DMatrix::from_fn(nb, nb, |i, j| moments.get(&basis[i].add(&basis[j])).copied().unwrap_or(0.0));
        MomentData { vars: vars.to_vec(), basis, moments, matrix, channels }
    }

    pub fn degree(&self) -> u32 {
        self.basis.iter().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn mass(&self) -> f64 {
        self.moments.get(&MultiIndex::zero(self.vars.len())).copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix.clone().symmetric_eigenvalues().min()
    }

    /// Numerical rank with relative cutoff.
    pub fn rank(&self, rel: f64) -> usize {
        let ev = self.matrix.clone().symmetric_eigenvalues();
        let top = ev.amax();
        ev.iter().filter(|v| **v > rel * top).count()
    }
}

/// Moment sequence read from the duals of a labelled coefficient-matching group,
/// multiplied by `sign`.
pub fn group_sequence(built: &BuiltProgram, sol: &ConicSolution, label: &str, sign: f64) -> Result<Sequence, RecoveryError> {
    let g = built
        .sos
        .row_groups()
        .iter()
        .find(|g| g.label == label)
        .ok_or_else(|| RecoveryError::MissingGroup(label.to_string()))?;
    if sol.y.len() < g.rows.end {
        return Err(RecoveryError::NoDuals(format!("{} duals for {} rows", sol.y.len(), g.rows.end)));
    }
    let mut seq = Sequence::new();
    for (r, m) in g.rows.clone().zip(&g.monomials) {
        if let Some(m) = m {
            seq.insert(m.clone(), sign * sol.y[r]);
        }
    }
    Ok(seq)
}

/// Occupation moments of the Lie constraint and the channel sequences, with the
/// moment matrix at degree `d` (default: the program degree).
pub fn extract_moments(built: &BuiltProgram, sol: &ConicSolution, d: Option<u32>) -> Result<MomentData, RecoveryError> {
    if !sol.status.has_value() {
        return Err(RecoveryError::NoDuals(format!("{:?}", sol.status)));
    }
    let moments = group_sequence(built, sol, "lie/lie", 1.0)?;
    let l = built.sos.row_groups().iter().filter(|g| g.label.starts_with("lie/channel")).count();
    let channels = (0..l).map(|k| group_sequence(built, sol, &format!("lie/channel{}", k + 1), -1.0)).collect::<Result<Vec<_>, _>>()?;
    let d = d.unwrap_or(built.degree);
    let md = MomentData::from_sequence(built.sos.vars(), moments, channels, d);
    let asym = (&md.matrix - md.matrix.transpose()).amax();
    if asym > 0.0 {
        log::warn!("moment matrix asymmetry {asym:e}; symmetrized");
    }
    Ok(md)
}

/// Pseudo-inverse with singular values below `rel·σ_max` dropped.
pub fn pinv(m: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.amax();
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let inv = DVector::from_iterator(svd.singular_values.len(), svd.singular_values.iter().map(|&s| if s > rel * smax && s > 0.0 { 1.0 / s } else { 0.0 }));
    vt.transpose() * DMatrix::from_diagonal(&inv) * u.transpose()
}

/// `ŵ_ℓ = bᵀ M_d⁻¹ m_ℓ^{≤d}` per channel (pseudo-inverse cutoff `1e-8·σ_max`).
pub fn recover_controller(md: &MomentData) -> Result<Vec<Polynomial>, RecoveryError> {
    if md.matrix.amax() == 0.0 {
        return Err(RecoveryError::ZeroMoments);
    }
    let sym = (&md.matrix + md.matrix.transpose()) * 0.5;
    let pi = pinv(&sym, 1e-8);
    let mut out = Vec::with_capacity(md.channels.len());
    for seq in &md.channels {
        let rhs = DVector::from_iterator(md.basis.len(), md.basis.iter().map(|a| seq.get(a).copied().unwrap_or(0.0)));
        let y = &pi * rhs;
        let terms: Vec<(MultiIndex, f64)> = md.basis.iter().cloned().zip(y.iter().copied()).collect();
        out.push(Polynomial::from_terms(&md.vars, terms));
    }
    Ok(out)
}

/// Evaluate a controller at `point` and project onto `W`.
pub fn apply_controller(ctrl: &[Polynomial], w: &SdrSet, point: &[f64]) -> Result<Vec<f64>, RecoveryError> {
    let raw: Vec<f64> = ctrl.iter().map(|p| p.eval_unchecked(point)).collect();
    Ok(w.project(&raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_recovers_input() {
        // Dirac at (t, x) = (0.5, 0.2, −0.3) with constant input 0.7.
        let vars: Vec<String> = ["t", "x1", "x2"].iter().map(|s| s.to_string()).collect();
        let pt: [f64; 3] = [0.5, 0.2, -0.3];
        let mono = |a: &MultiIndex| a.0.iter().zip(&pt).map(|(&k, v): (&u32, &f64)| v.powi(k as i32)).product::<f64>();
        let mut m = Sequence::new();
        let mut c = Sequence::new();
        for a in graded_basis(3, 4) {
            m.insert(a.clone(), mono(&a));
            c.insert(a.clone(), 0.7 * mono(&a));
        }
        let md = MomentData::from_sequence(&vars, m, vec![c], 2);
        assert_eq!(md.rank(1e-9), 1);
        let w = recover_controller(&md).unwrap();
        assert!((w[0].eval_unchecked(&pt) - 0.7).abs() < 1e-8);
    }
}
