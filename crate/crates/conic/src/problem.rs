//! Problem data: sparse constraint matrix, cone partition and provenance.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::cone::Cone;
use crate::error::ConicError;

/// Compressed sparse column matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix { nrows, ncols, col_ptr: vec![0; ncols + 1], row_idx: Vec::new(), vals: Vec::new() }
    }

    /// Build from `(row, col, value)` triplets; duplicates are summed and exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, trips: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..trips.len()).collect();
        order.sort_unstable_by_key(|&k| (trips[k].1, trips[k].0));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(trips.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = trips[k];
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of range");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                vals.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let mut m = SparseMatrix { nrows, ncols, col_ptr, row_idx, vals };
        m.prune(0.0);
        m
    }

    /// Drop entries with `|v| <= tol`.
    pub fn prune(&mut self, tol: f64) {
        let mut ptr = vec![0usize; self.ncols + 1];
        let mut w = 0;
        for c in 0..self.ncols {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                if self.vals[k].abs() > tol {
                    self.row_idx[w] = self.row_idx[k];
                    self.vals[w] = self.vals[k];
                    w += 1;
                }
            }
            ptr[c + 1] = w;
        }
        self.row_idx.truncate(w);
        self.vals.truncate(w);
        self.col_ptr = ptr;
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn col(&self, c: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[c]..self.col_ptr[c + 1];
        (&self.row_idx[r.clone()], &self.vals[r])
    }

    /// `y += A x`
    pub fn mul_add(&self, x: &[f64], y: &mut [f64]) {
        for (c, &xc) in x.iter().enumerate() {
            if xc != 0.0 {
                let (ri, rv) = self.col(c);
                for (r, v) in ri.iter().zip(rv) {
                    y[*r] += v * xc;
                }
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_add(x, &mut y);
        y
    }

    /// `Aᵀ y`
    pub fn tmul(&self, y: &[f64]) -> Vec<f64> {
        (0..self.ncols)
            .map(|c| {
                let (ri, rv) = self.col(c);
                ri.iter().zip(rv).map(|(r, v)| v * y[*r]).sum()
            })
            .collect()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for c in 0..self.ncols {
            let (ri, rv) = self.col(c);
            for (r, v) in ri.iter().zip(rv) {
                t.push((*r, c, *v));
            }
        }
        t
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        SparseMatrix::from_triplets(self.ncols, self.nrows, &t)
    }
}

/// A labelled range of equality rows (one coefficient identity family, say).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowGroup {
    pub label: String,
    pub rows: Range<usize>,
}

/// `min cᵀx + offset` s.t. `Ax = b`, `x ∈ cones[0] × cones[1] × …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub cones: Vec<Cone>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub offset: f64,
    /// One label per cone block (which constraint produced it).
    pub block_labels: Vec<String>,
    pub row_groups: Vec<RowGroup>,
}

impl ConicProblem {
    pub fn new(cones: Vec<Cone>, a: SparseMatrix, b: Vec<f64>, c: Vec<f64>) -> Self {
        let block_labels = (0..cones.len()).map(|i| format!("block{i}")).collect();
        ConicProblem { cones, a, b, c, offset: 0.0, block_labels, row_groups: Vec::new() }
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cones.iter().map(Cone::dim).sum()
    }

    /// Column range of each block.
    pub fn block_ranges(&self) -> Vec<Range<usize>> {
        let mut off = 0;
        self.cones
            .iter()
            .map(|k| {
                let r = off..off + k.dim();
                off += k.dim();
                r
            })
            .collect()
    }

    pub fn block_by_label(&self, label: &str) -> Option<usize> {
        self.block_labels.iter().position(|l| l == label)
    }

    pub fn row_group(&self, label: &str) -> Option<&RowGroup> {
        self.row_groups.iter().find(|g| g.label == label)
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.num_cols();
        if self.a.ncols != n || self.c.len() != n {
            return Err(ConicError::Dimension(format!(
                "cones cover {n} columns, A has {}, c has {}",
                self.a.ncols,
                self.c.len()
            )));
        }
        if self.a.nrows != self.b.len() {
            return Err(ConicError::Dimension(format!("A has {} rows, b has {}", self.a.nrows, self.b.len())));
        }
        if self.block_labels.len() != self.cones.len() {
            return Err(ConicError::Dimension("provenance does not cover every block".into()));
        }
        if let Some(g) = self.row_groups.iter().find(|g| g.rows.end > self.b.len()) {
            return Err(ConicError::Dimension(format!("row group {} exceeds row count", g.label)));
        }
        if self.a.vals.iter().chain(&self.b).chain(&self.c).any(|v| !v.is_finite()) {
            return Err(ConicError::Dimension("non-finite problem data".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.offset
    }
}
