//! Cone blocks and the symmetric-matrix vectorization shared across the workspace.

use serde::{Deserialize, Serialize};

/// One block of the variable cone product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    /// Unconstrained variables.
    Free(usize),
    Nonnegative(usize),
    /// `(u, h)` with `‖u‖₂ ≤ h`; the head `h` is the last entry.
    SecondOrder(usize),
    /// Symmetric PSD matrix of the given side, stored via [`svec`].
    Psd(usize),
}

impl Cone {
    /// Number of scalar columns the block occupies.
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Free(n) | Cone::Nonnegative(n) | Cone::SecondOrder(n) => n,
            Cone::Psd(k) => svec_len(k),
        }
    }

    /// Barrier parameter contribution.
    pub fn degree(&self) -> usize {
        match *self {
            Cone::Free(_) => 0,
            Cone::Nonnegative(n) => n,
            Cone::SecondOrder(n) => usize::from(n > 0),
            Cone::Psd(k) => k,
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Cone::Free(_))
    }

    /// Membership of `v` (length `dim()`) up to `tol`.
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        match *self {
            Cone::Free(_) => true,
            Cone::Nonnegative(_) => v.iter().all(|&x| x >= -tol),
            Cone::SecondOrder(n) => {
                if n == 0 {
                    return true;
                }
                let head = v[n - 1];
                let body: f64 = v[..n - 1].iter().map(|x| x * x).sum::<f64>().sqrt();
                body <= head + tol
            }
            Cone::Psd(k) => {
                if k == 0 {
                    return true;
                }
                let m = nalgebra::DMatrix::from_row_slice(k, k, &smat(v, k));
                m.symmetric_eigenvalues().iter().all(|&e| e >= -tol)
            }
        }
    }

    /// Identity element of the cone (interior point used to start the solver).
    pub fn identity(&self) -> Vec<f64> {
        match *self {
            Cone::Free(n) => vec![0.0; n],
            Cone::Nonnegative(n) => vec![1.0; n],
            Cone::SecondOrder(n) => {
                let mut v = vec![0.0; n];
                if n > 0 {
                    v[n - 1] = 1.0;
                }
                v
            }
            Cone::Psd(k) => {
                let mut v = vec![0.0; svec_len(k)];
                for i in 0..k {
                    v[svec_index(i, i)] = 1.0;
                }
                v
            }
        }
    }
}

pub fn svec_len(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Position of entry `(i, j)` (either order) in the lower-triangular row-major vectorization.
#[inline]
pub fn svec_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

/// Inverse of [`svec_index`].
pub fn svec_pair(idx: usize) -> (usize, usize) {
    let mut r = ((((8 * idx + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
    while r * (r + 1) / 2 > idx {
        r -= 1;
    }
    while (r + 1) * (r + 2) / 2 <= idx {
        r += 1;
    }
    (r, idx - r * (r + 1) / 2)
}

/// Vectorize a full row-major symmetric `k×k` matrix; off-diagonals are scaled by √2.
pub fn svec(m: &[f64], k: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(svec_len(k));
    for i in 0..k {
        for j in 0..=i {
            let x = 0.5 * (m[i * k + j] + m[j * k + i]);
            v.push(if i == j { x } else { x * std::f64::consts::SQRT_2 });
        }
    }
    v
}

/// Full row-major symmetric matrix from its vectorization.
pub fn smat(v: &[f64], k: usize) -> Vec<f64> {
    let mut m = vec![0.0; k * k];
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut idx = 0;
    for i in 0..k {
        for j in 0..=i {
            let x = if i == j { v[idx] } else { v[idx] * r };
            m[i * k + j] = x;
            m[j * k + i] = x;
            idx += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_roundtrip_and_pairing() {
        let a = [2.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.5, -1.0, 4.0];
        let b = [1.0, 0.2, 0.0, 0.2, 1.0, 0.3, 0.0, 0.3, 2.0];
        let va = svec(&a, 3);
        for (x, y) in smat(&va, 3).iter().zip(&a) {
            assert!((x - y).abs() < 1e-15);
        }
        let dot: f64 = va.iter().zip(svec(&b, 3)).map(|(x, y)| x * y).sum();
        let tr: f64 = (0..9).map(|i| a[i] * b[i]).sum();
        assert!((dot - tr).abs() < 1e-12);
    }

    #[test]
    fn svec_pair_inverts_index() {
        for i in 0..40 {
            for j in 0..=i {
                assert_eq!(svec_pair(svec_index(i, j)), (i, j));
            }
        }
    }

    #[test]
    fn membership() {
        assert!(Cone::SecondOrder(3).contains(&[0.6, 0.8, 1.0], 1e-12));
        assert!(!Cone::SecondOrder(3).contains(&[0.6, 0.8, 0.9], 1e-12));
        assert!(Cone::Psd(2).contains(&svec(&[1.0, 1.0, 1.0, 1.0], 2), 1e-12));
        assert!(!Cone::Psd(2).contains(&svec(&[1.0, 2.0, 2.0, 1.0], 2), 1e-12));
    }
}
