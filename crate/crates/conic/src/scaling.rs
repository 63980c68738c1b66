//! Nesterov-Todd scaling and Jordan algebra per cone block.
//!
//! For each block we hold `W` with `W s = W⁻ᵀ x = λ`. Second-order vectors keep
//! the head last, matching the public layout.

use nalgebra::DMatrix;

use crate::cone::{smat, svec, Cone};

pub(crate) enum Scaling {
    Nonneg { w: Vec<f64>, lambda: Vec<f64> },
    Soc { beta: f64, v: Vec<f64>, u: Vec<f64>, lambda: Vec<f64> },
    Psd { k: usize, r: DMatrix<f64>, rinv: DMatrix<f64>, g: DMatrix<f64>, lambda: Vec<f64> },
}

fn soc_det(z: &[f64]) -> f64 {
    let n = z.len();
    let h = z[n - 1];
    let b: f64 = z[..n - 1].iter().map(|x| x * x).sum();
    (h - b.sqrt()) * (h + b.sqrt())
}

/// `P(v) z = 2 v (vᵀz) − J z` where `J` flips the body sign.
fn soc_quad(v: &[f64], z: &[f64], out: &mut [f64]) {
    let n = v.len();
    let vz: f64 = v.iter().zip(z).map(|(a, b)| a * b).sum();
    for i in 0..n - 1 {
        out[i] = 2.0 * v[i] * vz + z[i];
    }
    out[n - 1] = 2.0 * v[n - 1] * vz - z[n - 1];
}

fn sym_from(v: &[f64], k: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(k, k, &smat(v, k))
}

fn svec_of(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    // nalgebra is column-major; transpose is harmless because svec symmetrizes.
    svec(m.as_slice(), k)
}

impl Scaling {
    pub(crate) fn new(cone: Cone, x: &[f64], s: &[f64]) -> Option<Scaling> {
        match cone {
            Cone::Free(_) => None,
            Cone::Nonnegative(_) => {
                if x.iter().chain(s).any(|&v| v <= 0.0 || !v.is_finite()) {
                    return None;
                }
                let w = x.iter().zip(s).map(|(a, b)| (a / b).sqrt()).collect();
                let lambda = x.iter().zip(s).map(|(a, b)| (a * b).sqrt()).collect();
                Some(Scaling::Nonneg { w, lambda })
            }
            Cone::SecondOrder(n) => {
                let (dx, ds) = (soc_det(x), soc_det(s));
                if dx <= 0.0 || ds <= 0.0 || x[n - 1] <= 0.0 || s[n - 1] <= 0.0 {
                    return None;
                }
                let xb: Vec<f64> = x.iter().map(|v| v / dx.sqrt()).collect();
                let sb: Vec<f64> = s.iter().map(|v| v / ds.sqrt()).collect();
                let xs: f64 = xb.iter().zip(&sb).map(|(a, b)| a * b).sum();
                let gamma = ((1.0 + xs) / 2.0).sqrt();
                let mut u: Vec<f64> = (0..n)
                    .map(|i| (if i + 1 == n { xb[i] + sb[i] } else { xb[i] - sb[i] }) / (2.0 * gamma))
                    .collect();
                // Renormalize so det(u) = 1 exactly despite round-off.
                let du = soc_det(&u);
                if du <= 0.0 {
                    return None;
                }
                u.iter_mut().for_each(|t| *t /= du.sqrt());
                let c = (2.0 * (u[n - 1] + 1.0)).sqrt();
                let v: Vec<f64> = (0..n).map(|i| (if i + 1 == n { u[i] + 1.0 } else { u[i] }) / c).collect();
                let beta = (dx / ds).powf(0.25);
                let mut lambda = vec![0.0; n];
                soc_quad(&v, s, &mut lambda);
                lambda.iter_mut().for_each(|t| *t *= beta);
                Some(Scaling::Soc { beta, v, u, lambda })
            }
            Cone::Psd(k) => {
                let lx = sym_from(x, k).cholesky()?.l();
                let ls = sym_from(s, k).cholesky()?.l();
                let prod = ls.transpose() * &lx;
                let svd = prod.svd(true, true);
                let uu = svd.u?;
                let vt = svd.v_t?;
                let sig = svd.singular_values;
                if sig.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
                    return None;
                }
                let isq = DMatrix::from_diagonal(&sig.map(|v| 1.0 / v.sqrt()));
                let r = &lx * vt.transpose() * &isq;
                let rinv = &isq * uu.transpose() * ls.transpose();
                let g = &r * r.transpose();
                Some(Scaling::Psd { k, r, rinv, g, lambda: sig.iter().copied().collect() })
            }
        }
    }

    /// The scaled point `λ` in block layout.
    pub(crate) fn lambda(&self) -> Vec<f64> {
        match self {
            Scaling::Nonneg { lambda, .. } | Scaling::Soc { lambda, .. } => lambda.clone(),
            Scaling::Psd { k, lambda, .. } => {
                let mut m = vec![0.0; k * k];
                for i in 0..*k {
                    m[i * k + i] = lambda[i];
                }
                svec(&m, *k)
            }
        }
    }

    /// `W⁻ᵀ dx`
    pub(crate) fn scale_x(&self, dx: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Nonneg { w, .. } => dx.iter().zip(w).map(|(a, b)| a / b).collect(),
            Scaling::Soc { beta, v, .. } => {
                let n = v.len();
                let jv: Vec<f64> = (0..n).map(|i| if i + 1 == n { v[i] } else { -v[i] }).collect();
                let mut out = vec![0.0; n];
                soc_quad(&jv, dx, &mut out);
                out.iter_mut().for_each(|t| *t /= beta);
                out
            }
            Scaling::Psd { k, rinv, .. } => svec_of(&(rinv * sym_from(dx, *k) * rinv.transpose())),
        }
    }

    /// `W ds`
    pub(crate) fn scale_s(&self, ds: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Nonneg { w, .. } => ds.iter().zip(w).map(|(a, b)| a * b).collect(),
            Scaling::Soc { beta, v, .. } => {
                let mut out = vec![0.0; v.len()];
                soc_quad(v, ds, &mut out);
                out.iter_mut().for_each(|t| *t *= beta);
                out
            }
            Scaling::Psd { k, r, .. } => svec_of(&(r.transpose() * sym_from(ds, *k) * r)),
        }
    }

    /// `Wᵀ q` (inverse of [`Self::scale_x`]).
    pub(crate) fn unscale_x(&self, q: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Nonneg { w, .. } => q.iter().zip(w).map(|(a, b)| a * b).collect(),
            Scaling::Soc { .. } => self.scale_s(q),
            Scaling::Psd { k, r, .. } => svec_of(&(r * sym_from(q, *k) * r.transpose())),
        }
    }

    /// `WᵀW z`
    pub(crate) fn apply_h(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Nonneg { w, .. } => z.iter().zip(w).map(|(a, b)| a * b * b).collect(),
            Scaling::Soc { beta, u, .. } => {
                let mut out = vec![0.0; u.len()];
                soc_quad(u, z, &mut out);
                out.iter_mut().for_each(|t| *t *= beta * beta);
                out
            }
            Scaling::Psd { k, g, .. } => svec_of(&(g * sym_from(z, *k) * g)),
        }
    }

    /// Solve `λ ∘ z = r`.
    pub(crate) fn lambda_inv_jordan(&self, r: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Nonneg { lambda, .. } => r.iter().zip(lambda).map(|(a, b)| a / b).collect(),
            Scaling::Soc { lambda, .. } => {
                let n = lambda.len();
                let (l0, r0) = (lambda[n - 1], r[n - 1]);
                let det = soc_det(lambda);
                let lr: f64 = lambda[..n - 1].iter().zip(&r[..n - 1]).map(|(a, b)| a * b).sum();
                let z0 = (l0 * r0 - lr) / det;
                let mut z: Vec<f64> = (0..n - 1).map(|i| (r[i] - z0 * lambda[i]) / l0).collect();
                z.push(z0);
                z
            }
            Scaling::Psd { k, lambda, .. } => {
                let mut z = r.to_vec();
                let mut idx = 0;
                for i in 0..*k {
                    for j in 0..=i {
                        z[idx] *= 2.0 / (lambda[i] + lambda[j]);
                        idx += 1;
                    }
                }
                z
            }
        }
    }

    /// Largest `α` with `λ + α d` in the cone (`f64::INFINITY` when unbounded).
    pub(crate) fn max_step(&self, d: &[f64]) -> f64 {
        match self {
            Scaling::Nonneg { lambda, .. } => max_step_nonneg(lambda, d),
            Scaling::Soc { lambda, .. } => max_step_soc(lambda, d),
            Scaling::Psd { k, lambda, .. } => {
                let mut m = DMatrix::from_row_slice(*k, *k, &smat(d, *k));
                for i in 0..*k {
                    for j in 0..*k {
                        m[(i, j)] /= (lambda[i] * lambda[j]).sqrt();
                    }
                }
                let emin = m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
                if emin >= 0.0 {
                    f64::INFINITY
                } else {
                    -1.0 / emin
                }
            }
        }
    }
}

pub(crate) fn max_step_nonneg(u: &[f64], d: &[f64]) -> f64 {
    u.iter().zip(d).filter(|(_, &b)| b < 0.0).map(|(a, b)| -a / b).fold(f64::INFINITY, f64::min)
}

/// Largest step keeping `u + α d` in the second-order cone, `u` interior.
pub(crate) fn max_step_soc(u: &[f64], d: &[f64]) -> f64 {
    let n = u.len();
    let a = soc_det(d);
    let bd: f64 = u[..n - 1].iter().zip(&d[..n - 1]).map(|(p, q)| p * q).sum();
    let b = 2.0 * (u[n - 1] * d[n - 1] - bd);
    let c = soc_det(u);
    // Smallest positive root of a α² + b α + c (c > 0).
    let mut best = f64::INFINITY;
    if a.abs() < 1e-300 {
        if b < 0.0 {
            best = -c / b;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (b + b.signum() * sq);
            for r in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
                if r > 0.0 && r < best {
                    best = r;
                }
            }
        }
    }
    // Guard the head sign in the degenerate direction.
    if d[n - 1] < 0.0 {
        best = best.min(-u[n - 1] / d[n - 1]);
    }
    best
}

/// Jordan product in block layout.
pub(crate) fn jordan(cone: Cone, a: &[f64], b: &[f64]) -> Vec<f64> {
    match cone {
        Cone::Free(_) => vec![0.0; a.len()],
        Cone::Nonnegative(_) => a.iter().zip(b).map(|(x, y)| x * y).collect(),
        Cone::SecondOrder(n) => {
            let (ah, bh) = (a[n - 1], b[n - 1]);
            let mut out: Vec<f64> = (0..n - 1).map(|i| ah * b[i] + bh * a[i]).collect();
            out.push(a.iter().zip(b).map(|(x, y)| x * y).sum());
            out
        }
        Cone::Psd(k) => {
            let am = sym_from(a, k);
            let bm = sym_from(b, k);
            let p = &am * &bm;
            svec_of(&((&p + p.transpose()) * 0.5))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    fn check(cone: Cone, x: &[f64], s: &[f64]) {
        let sc = Scaling::new(cone, x, s).expect("interior");
        let lam = sc.lambda();
        close(&sc.scale_s(s), &lam, 1e-10);
        close(&sc.scale_x(x), &lam, 1e-10);
        close(&sc.apply_h(s), x, 1e-9);
        let d: Vec<f64> = (0..x.len()).map(|i| (i as f64 * 0.7).sin()).collect();
        close(&sc.unscale_x(&sc.scale_x(&d)), &d, 1e-10);
        let r = jordan(cone, &lam, &d);
        close(&sc.lambda_inv_jordan(&r), &d, 1e-9);
    }

    #[test]
    fn nt_identities() {
        check(Cone::Nonnegative(3), &[1.0, 2.0, 0.5], &[0.3, 1.0, 4.0]);
        check(Cone::SecondOrder(3), &[0.3, -0.2, 1.0], &[0.5, 0.4, 2.0]);
        check(Cone::SecondOrder(4), &[0.1, 0.9, -0.2, 1.5], &[-0.5, 0.1, 0.2, 0.8]);
        let x = svec(&[2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 0.7], 3);
        let s = svec(&[1.0, -0.3, 0.0, -0.3, 0.5, 0.1, 0.0, 0.1, 3.0], 3);
        check(Cone::Psd(3), &x, &s);
    }

    #[test]
    fn soc_step_length() {
        let u = [0.0, 1.0];
        let d = [1.0, -1.0];
        assert!((max_step_soc(&u, &d) - 0.5).abs() < 1e-12);
        assert_eq!(max_step_soc(&u, &[0.0, 1.0]), f64::INFINITY);
    }
}
