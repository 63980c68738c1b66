//! Dense row-major kernels: blocked Cholesky and triangular solves.
//!
//! The heavy lifting goes through `matrixmultiply` so that the Schur complement
//! factorization runs at gemm speed on a single core.

const NB: usize = 96;

/// `C ← α·A·B + β·C` on row-major slices with explicit leading dimensions.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    a_trans: bool,
    b: &[f64],
    ldb: usize,
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_trans { (1, lda) } else { (lda, 1) };
    let (rsb, csb) = if b_trans { (1, ldb) } else { (ldb, 1) };
    debug_assert!(c.len() >= (m - 1) * ldc + n);
    // SAFETY: strides and extents are checked by construction above; the
    // slices outlive the call and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

/// In-place lower Cholesky of the `n×n` row-major matrix `a` (lower triangle read).
///
/// Pivots below `tol · max diag` are replaced by a huge value, which zeroes the
/// corresponding solution component instead of failing. Returns how many
/// pivots were treated that way.
pub fn cholesky_in_place(a: &mut [f64], n: usize, tol: f64) -> usize {
    let maxd = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let thresh = tol * maxd;
    let mut modified = 0;
    let mut k0 = 0;
    while k0 < n {
        let kb = NB.min(n - k0);
        let k1 = k0 + kb;
        // Diagonal block.
        for j in k0..k1 {
            let rj = j * n;
            let mut d = a[rj + j];
            for p in k0..j {
                d -= a[rj + p] * a[rj + p];
            }
            let ljj = if d > thresh && d.is_finite() {
                d.sqrt()
            } else {
                modified += 1;
                1e64
            };
            a[rj + j] = ljj;
            for i in j + 1..k1 {
                let ri = i * n;
                let mut s = a[ri + j];
                for p in k0..j {
                    s -= a[ri + p] * a[rj + p];
                }
                a[ri + j] = s / ljj;
            }
        }
        if k1 < n {
            // Panel below the diagonal block.
            for i in k1..n {
                let ri = i * n;
                for j in k0..k1 {
                    let rj = j * n;
                    let mut s = a[ri + j];
                    for p in k0..j {
                        s -= a[ri + p] * a[rj + p];
                    }
                    a[ri + j] = s / a[rj + j];
                }
            }
            // Trailing update, one block column at a time (lower part only).
            let mut j0 = k1;
            while j0 < n {
                let jb = NB.min(n - j0);
                let rows = n - j0;
                let ptr = a.as_mut_ptr();
                // SAFETY: the panel (columns k0..k1) and the target (columns
                // j0..j0+jb, j0 ≥ k1) are disjoint regions of `a`.
                unsafe {
                    matrixmultiply::dgemm(
                        rows,
                        kb,
                        jb,
                        -1.0,
                        ptr.add(j0 * n + k0),
                        n as isize,
                        1,
                        ptr.add(j0 * n + k0),
                        1,
                        n as isize,
                        1.0,
                        ptr.add(j0 * n + j0),
                        n as isize,
                        1,
                    );
                }
                j0 += jb;
            }
        }
        k0 = k1;
    }
    modified
}

/// Solve `L z = b` in place.
pub fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let ri = i * n;
        let mut s = b[i];
        for p in 0..i {
            s -= l[ri + p] * b[p];
        }
        b[i] = s / l[ri + i];
    }
}

/// Solve `Lᵀ x = z` in place.
pub fn solve_lower_t(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let xi = b[i] / l[i * n + i];
        b[i] = xi;
        for p in 0..i {
            b[p] -= l[i * n + p] * xi;
        }
    }
}

/// Solve `L Lᵀ x = b` in place.
pub fn chol_solve(l: &[f64], n: usize, b: &mut [f64]) {
    solve_lower(l, n, b);
    solve_lower_t(l, n, b);
}

/// Solve `L Z = B` in place for `B` stored row-major `n×r`.
pub fn solve_lower_multi(l: &[f64], n: usize, b: &mut [f64], r: usize) {
    let mut i0 = 0;
    while i0 < n {
        let ib = NB.min(n - i0);
        if i0 > 0 {
            let (done, rest) = b.split_at_mut(i0 * r);
            gemm(ib, i0, r, -1.0, &l[i0 * n..], n, false, done, r, false, 1.0, rest, r);
        }
        for i in i0..i0 + ib {
            let ri = i * n;
            for p in i0..i {
                let lip = l[ri + p];
                if lip != 0.0 {
                    let (head, tail) = b.split_at_mut(i * r);
                    let src = &head[p * r..p * r + r];
                    for (t, s) in tail[..r].iter_mut().zip(src) {
                        *t -= lip * s;
                    }
                }
            }
            let d = l[ri + i];
            for t in &mut b[i * r..i * r + r] {
                *t /= d;
            }
        }
        i0 += ib;
    }
}

/// `A x` for a full row-major `n×n` matrix.
pub fn symv(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n).map(|i| a[i * n..i * n + n].iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let g: Vec<f64> = (0..n * n).map(|_| rnd()).collect();
        let mut a = vec![0.0; n * n];
        gemm(n, n, n, 1.0, &g, n, false, &g, n, true, 0.0, &mut a, n);
        for i in 0..n {
            a[i * n + i] += n as f64 * 0.1;
        }
        a
    }

    #[test]
    fn blocked_cholesky_solves() {
        for &n in &[1usize, 5, 97, 250] {
            let a = spd(n, n as u64);
            let mut l = a.clone();
            assert_eq!(cholesky_in_place(&mut l, n, 1e-14), 0);
            let xs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let mut b = symv(&a, n, &xs);
            chol_solve(&l, n, &mut b);
            let err = b.iter().zip(&xs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "n={n} err={err}");
        }
    }

    #[test]
    fn multi_rhs_forward_solve() {
        let n = 200;
        let r = 7;
        let a = spd(n, 3);
        let mut l = a.clone();
        cholesky_in_place(&mut l, n, 1e-14);
        let b: Vec<f64> = (0..n * r).map(|i| (i as f64 * 0.37).cos()).collect();
        let mut z = b.clone();
        solve_lower_multi(&l, n, &mut z, r);
        for c in 0..r {
            let mut col: Vec<f64> = (0..n).map(|i| b[i * r + c]).collect();
            solve_lower(&l, n, &mut col);
            for i in 0..n {
                assert!((col[i] - z[i * r + c]).abs() < 1e-9);
            }
        }
    }
}
