//! Presolve: eliminate rows that touch only free columns and equilibrate rows.
//!
//! Rows without any cone column would make the Schur complement singular, so
//! they are solved exactly up front: the free variables are parametrized as
//! `x_f = x_p + N z` over the null space of those rows.

use nalgebra::DMatrix;

use crate::cone::Cone;
use crate::dense;
use crate::problem::{ConicProblem, SparseMatrix};

pub(crate) enum Presolved {
    Reduced(Box<Reduced>),
    /// Free-only rows are inconsistent.
    Infeasible,
    /// A free direction with nonzero cost and no constraint.
    Unbounded,
}

pub(crate) struct Reduced {
    pub m: usize,
    pub cones: Vec<Cone>,
    pub offsets: Vec<usize>,
    pub ac: SparseMatrix,
    /// Dense `m × nf`, row-major.
    pub af: Vec<f64>,
    pub nf: usize,
    pub b: Vec<f64>,
    pub cc: Vec<f64>,
    pub cf: Vec<f64>,
    row_scale: Vec<f64>,
    kept_rows: Vec<usize>,
    elim_rows: Vec<usize>,
    cone_cols: Vec<usize>,
    free_cols: Vec<usize>,
    xp: Vec<f64>,
    /// `nfo × nf` row-major null-space basis.
    null: Vec<f64>,
    /// Pseudo-inverse of the eliminated rows' transpose, `r × nfo` row-major.
    elim_tpinv: Vec<f64>,
}

pub(crate) fn presolve(p: &ConicProblem) -> Presolved {
    let m0 = p.num_rows();
    let ranges = p.block_ranges();
    let mut cone_cols = Vec::new();
    let mut free_cols = Vec::new();
    let mut cones = Vec::new();
    let mut offsets = Vec::new();
    for (k, r) in p.cones.iter().zip(&ranges) {
        if k.is_free() {
            free_cols.extend(r.clone());
        } else if k.dim() > 0 {
            offsets.push(cone_cols.len());
            cones.push(*k);
            cone_cols.extend(r.clone());
        }
    }
    let mut touches_cone = vec![false; m0];
    for &c in &cone_cols {
        for &r in p.a.col(c).0 {
            touches_cone[r] = true;
        }
    }
    let kept_rows: Vec<usize> = (0..m0).filter(|&r| touches_cone[r]).collect();
    let elim_rows: Vec<usize> = (0..m0).filter(|&r| !touches_cone[r]).collect();
    let mut row_pos = vec![usize::MAX; m0];
    for (i, &r) in kept_rows.iter().enumerate() {
        row_pos[r] = i;
    }
    let mut elim_pos = vec![usize::MAX; m0];
    for (i, &r) in elim_rows.iter().enumerate() {
        elim_pos[r] = i;
    }
    let nfo = free_cols.len();
    let m = kept_rows.len();
    let re = elim_rows.len();

    // Dense free-column blocks of the kept and eliminated rows.
    let mut afk = vec![0.0; m * nfo];
    let mut afe = vec![0.0; re * nfo];
    for (j, &c) in free_cols.iter().enumerate() {
        let (ri, rv) = p.a.col(c);
        for (r, v) in ri.iter().zip(rv) {
            if row_pos[*r] != usize::MAX {
                afk[row_pos[*r] * nfo + j] += v;
            } else {
                afe[elim_pos[*r] * nfo + j] += v;
            }
        }
    }

    let (xp, null, nz, elim_tpinv) = if re == 0 || nfo == 0 {
        if re > 0 && elim_rows.iter().any(|&r| p.b[r].abs() > 1e-9 * (1.0 + dense::norm_inf(&p.b))) {
            return Presolved::Infeasible;
        }
        let mut id = vec![0.0; nfo * nfo];
        for i in 0..nfo {
            id[i * nfo + i] = 1.0;
        }
        (vec![0.0; nfo], id, nfo, vec![0.0; re * nfo])
    } else {
        // Pad to at least nfo rows so the SVD returns a full right basis.
        let rows = re.max(nfo);
        let mut cm = DMatrix::<f64>::zeros(rows, nfo);
        for i in 0..re {
            for j in 0..nfo {
                cm[(i, j)] = afe[i * nfo + j];
            }
        }
        let svd = cm.svd(true, true);
        let u = svd.u.expect("svd u");
        let vt = svd.v_t.expect("svd v");
        let sig = svd.singular_values;
        let smax = sig.iter().copied().fold(0.0, f64::max);
        let tol = 1e-11 * smax.max(1e-300) * (rows as f64);
        let be: Vec<f64> = elim_rows.iter().map(|&r| p.b[r]).collect();
        // x_p = V Σ⁺ Uᵀ b
        let mut xp = vec![0.0; nfo];
        let mut null_cols = Vec::new();
        for (t, &st) in sig.iter().enumerate() {
            if st > tol {
                let coef: f64 = (0..re).map(|i| u[(i, t)] * be[i]).sum::<f64>() / st;
                for j in 0..nfo {
                    xp[j] += vt[(t, j)] * coef;
                }
            } else {
                null_cols.push(t);
            }
        }
        let resid: f64 = (0..re)
            .map(|i| {
                let v: f64 = (0..nfo).map(|j| afe[i * nfo + j] * xp[j]).sum::<f64>() - be[i];
                v * v
            })
            .sum::<f64>()
            .sqrt();
        if resid > 1e-8 * (1.0 + dense::norm(&be)) {
            return Presolved::Infeasible;
        }
        let nz = null_cols.len();
        let mut null = vec![0.0; nfo * nz];
        for (c, &t) in null_cols.iter().enumerate() {
            for j in 0..nfo {
                null[j * nz + c] = vt[(t, j)];
            }
        }
        // (Cᵀ)⁺ = U Σ⁺ Vᵀ restricted to the real rows.
        let mut tp = vec![0.0; re * nfo];
        for (t, &st) in sig.iter().enumerate() {
            if st > tol {
                for i in 0..re {
                    let ui = u[(i, t)] / st;
                    for j in 0..nfo {
                        tp[i * nfo + j] += ui * vt[(t, j)];
                    }
                }
            }
        }
        (xp, null, nz, tp)
    };

    let cf0: Vec<f64> = free_cols.iter().map(|&c| p.c[c]).collect();
    let mut cf: Vec<f64> = (0..nz).map(|c| (0..nfo).map(|j| null[j * nz + c] * cf0[j]).sum()).collect();
    let mut af = vec![0.0; m * nz];
    if nz > 0 && nfo > 0 {
        dense::gemm(m, nfo, nz, 1.0, &afk, nfo, false, &null, nz, false, 0.0, &mut af, nz);
    }
    let mut b: Vec<f64> = kept_rows.iter().map(|&r| p.b[r]).collect();
    for i in 0..m {
        b[i] -= dense::dot(&afk[i * nfo..(i + 1) * nfo], &xp);
    }

    // Free directions no row sees.
    let scale_af = dense::norm_inf(&af).max(1.0);
    for c in 0..nz {
        let colmax = (0..m).fold(0.0f64, |a, i| a.max(af[i * nz + c].abs()));
        if colmax <= 1e-12 * scale_af {
            if cf[c].abs() > 1e-12 {
                return Presolved::Unbounded;
            }
            cf[c] = 0.0;
        }
    }

    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    for (j, &c) in cone_cols.iter().enumerate() {
        let (ri, rv) = p.a.col(c);
        trips.extend(ri.iter().zip(rv).map(|(r, v)| (row_pos[*r], j, *v)));
    }
    let mut ac = SparseMatrix::from_triplets(m, cone_cols.len(), &trips);
    let cc: Vec<f64> = cone_cols.iter().map(|&c| p.c[c]).collect();

    // Row equilibration.
    let mut rn = vec![0.0f64; m];
    for c in 0..ac.ncols {
        let (ri, rv) = ac.col(c);
        for (r, v) in ri.iter().zip(rv) {
            rn[*r] += v * v;
        }
    }
    for i in 0..m {
        rn[i] += af[i * nz..(i + 1) * nz].iter().map(|v| v * v).sum::<f64>();
    }
    let row_scale: Vec<f64> = rn.iter().map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }).collect();
    for k in 0..ac.nnz() {
        ac.vals[k] *= row_scale[ac.row_idx[k]];
    }
    for i in 0..m {
        b[i] *= row_scale[i];
        for v in &mut af[i * nz..(i + 1) * nz] {
            *v *= row_scale[i];
        }
    }

    Presolved::Reduced(Box::new(Reduced {
        m,
        cones,
        offsets,
        ac,
        af,
        nf: nz,
        b,
        cc,
        cf,
        row_scale,
        kept_rows,
        elim_rows,
        cone_cols,
        free_cols,
        xp,
        null,
        elim_tpinv,
    }))
}

impl Reduced {
    /// Map an internal iterate back to the original problem's `(x, y, s)`.
    ///
    /// `homogeneous` marks certificate rays, for which the particular free
    /// solution is not added.
    pub(crate) fn postsolve(
        &self,
        p: &ConicProblem,
        xc: &[f64],
        z: &[f64],
        y: &[f64],
        s: &[f64],
        homogeneous: bool,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = p.num_cols();
        let mut x = vec![0.0; n];
        let mut so = vec![0.0; n];
        for (j, &c) in self.cone_cols.iter().enumerate() {
            x[c] = xc[j];
            so[c] = s[j];
        }
        let nfo = self.free_cols.len();
        for (j, &c) in self.free_cols.iter().enumerate() {
            let base = if homogeneous { 0.0 } else { self.xp[j] };
            x[c] = base + dense::dot(&self.null[j * self.nf..(j + 1) * self.nf], z);
        }
        let mut yo = vec![0.0; p.num_rows()];
        for (i, &r) in self.kept_rows.iter().enumerate() {
            yo[r] = y[i] * self.row_scale[i];
        }
        if !self.elim_rows.is_empty() && nfo > 0 && !homogeneous {
            // Cᵀ y_e = c_f − A_keptᵀ y_kept on the free columns.
            let aty = p.a.tmul(&yo);
            let rhs: Vec<f64> = self.free_cols.iter().map(|&c| p.c[c] - aty[c]).collect();
            for (i, &r) in self.elim_rows.iter().enumerate() {
                yo[r] = dense::dot(&self.elim_tpinv[i * nfo..(i + 1) * nfo], &rhs);
            }
        }
        (x, yo, so)
    }
}
