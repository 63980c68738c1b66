use lie_robust_conic::cone::{svec, svec_len};
use lie_robust_conic::{Cone, ConicProblem, ConicSolver, EmbeddedSolver, SolverOptions, SparseMatrix, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solve(p: &ConicProblem) -> lie_robust_conic::ConicSolution {
    EmbeddedSolver.solve(p, &SolverOptions::default()).unwrap()
}

#[test]
fn shifted_nonnegative_minimum() {
    // min x s.t. x - s = 1, s >= 0, x free  =>  1
    let a = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, -1.0)]);
    let p = ConicProblem::new(vec![Cone::Free(1), Cone::Nonnegative(1)], a, vec![1.0], vec![1.0, 0.0]);
    let sol = solve(&p);
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.primal_objective - 1.0).abs() < 1e-7);
}

#[test]
fn min_trace_above_identity() {
    // X = I + S, S ⪰ 0, minimize tr X  =>  2
    let mut t = Vec::new();
    let mut b = Vec::new();
    for j in 0..3 {
        t.push((j, j, 1.0));
        t.push((j, 3 + j, -1.0));
        b.push(if j == 1 { 0.0 } else { 1.0 });
    }
    let a = SparseMatrix::from_triplets(3, 6, &t);
    let mut c = vec![0.0; 6];
    c[0] = 1.0;
    c[2] = 1.0;
    let p = ConicProblem::new(vec![Cone::Psd(2), Cone::Psd(2)], a, b, c);
    let sol = solve(&p);
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.primal_objective - 2.0).abs() < 1e-7, "{}", sol.primal_objective);
}

#[test]
fn infeasible_lp_detected() {
    // x >= 0 and x + s = -1 with s >= 0
    let a = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]);
    let p = ConicProblem::new(vec![Cone::Nonnegative(2)], a, vec![-1.0], vec![0.0, 0.0]);
    assert_eq!(solve(&p).status, Status::PrimalInfeasible);
}

#[test]
fn unbounded_lp_detected() {
    // min -x s.t. x - s = 0, x, s >= 0
    let a = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, -1.0)]);
    let p = ConicProblem::new(vec![Cone::Nonnegative(2)], a, vec![0.0], vec![-1.0, 0.0]);
    assert_eq!(solve(&p).status, Status::DualInfeasible);
}

#[test]
fn free_only_rows_are_presolved() {
    // f1 + f2 = 3 (free only), f1 - x = 0, x >= 0, min f2 + x => unbounded? no: f2 = 3 - x, cost 3
    let a = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 2, -1.0)]);
    let p = ConicProblem::new(vec![Cone::Free(2), Cone::Nonnegative(1)], a, vec![3.0, 0.0], vec![0.0, 1.0, 2.0]);
    let sol = solve(&p);
    assert_eq!(sol.status, Status::Optimal);
    // f2 + 2x = 3 - x + 2x = 3 + x, minimized at x = 0
    assert!((sol.primal_objective - 3.0).abs() < 1e-7);
    assert!(sol.residuals.max() < 1e-7);
}

fn random_psd(rng: &mut ChaCha8Rng, k: usize, rank: usize) -> Vec<f64> {
    let mut m = vec![0.0; k * k];
    for _ in 0..rank {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        for i in 0..k {
            for j in 0..k {
                m[i * k + j] += v[i] * v[j];
            }
        }
    }
    m
}

/// Random problem with a planted strictly complementary primal-dual pair.
fn planted(seed: u64) -> (ConicProblem, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cones = vec![Cone::Free(2), Cone::Nonnegative(4), Cone::SecondOrder(3), Cone::Psd(3), Cone::Psd(2)];
    let n: usize = cones.iter().map(|c| c.dim()).sum();
    let mut x = Vec::new();
    let mut s = Vec::new();
    for c in &cones {
        match *c {
            Cone::Free(k) => {
                x.extend((0..k).map(|_| rng.random_range(-1.0..1.0)));
                s.extend(vec![0.0; k]);
            }
            Cone::Nonnegative(k) => {
                for i in 0..k {
                    let v = rng.random_range(0.5..1.5);
                    if i % 2 == 0 {
                        x.push(v);
                        s.push(0.0);
                    } else {
                        x.push(0.0);
                        s.push(v);
                    }
                }
            }
            Cone::SecondOrder(_) => {
                x.extend([0.6, 0.8, 1.0]);
                s.extend([-0.6, -0.8, 1.0]);
            }
            Cone::Psd(k) => {
                // Complementary pair from an orthonormal split.
                let q = random_psd(&mut rng, k, k);
                let eig = nalgebra::DMatrix::from_row_slice(k, k, &q).symmetric_eigen();
                let mut xm = vec![0.0; k * k];
                let mut sm = vec![0.0; k * k];
                for e in 0..k {
                    let v = eig.eigenvectors.column(e);
                    let target = if e == 0 { &mut sm } else { &mut xm };
                    for i in 0..k {
                        for j in 0..k {
                            target[i * k + j] += (1.0 + e as f64) * v[i] * v[j];
                        }
                    }
                }
                x.extend(svec(&xm, k));
                s.extend(svec(&sm, k));
            }
        }
    }
    let m = 8;
    let mut t = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.random_bool(0.6) {
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    let a = SparseMatrix::from_triplets(m, n, &t);
    let b = a.mul(&x);
    let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let aty = a.tmul(&y);
    let c: Vec<f64> = (0..n).map(|j| aty[j] + s[j]).collect();
    let opt = c.iter().zip(&x).map(|(p, q)| p * q).sum();
    assert_eq!(svec_len(3), 6);
    (ConicProblem::new(cones, a, b, c), opt)
}

#[test]
fn planted_mixed_cone_problems() {
    for seed in 0..10 {
        let (p, opt) = planted(seed);
        let sol = solve(&p);
        assert_eq!(sol.status, Status::Optimal, "seed {seed}");
        assert!((sol.primal_objective - opt).abs() < 1e-6 * (1.0 + opt.abs()), "seed {seed}: {} vs {opt}", sol.primal_objective);
        // Weak duality audit.
        assert!(sol.primal_objective >= sol.dual_objective - 1e-6);
        for (k, r) in p.cones.iter().zip(p.block_ranges()) {
            assert!(k.contains(&sol.x[r.clone()], 1e-7));
            assert!(k.is_free() || k.contains(&sol.s[r], 1e-7));
        }
    }
}
