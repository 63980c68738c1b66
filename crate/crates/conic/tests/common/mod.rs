//! Random feasible conic problems shared by the bridge tests.

use lie_robust_conic::cone::svec;
use lie_robust_conic::{Cone, ConicProblem, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Feasible, bounded random problem: b from an interior x, c from an interior s.
pub fn random_problem(seed: u64) -> ConicProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cones = vec![
        Cone::Free(rng.random_range(0..3)),
        Cone::Nonnegative(rng.random_range(1..4)),
        Cone::SecondOrder(rng.random_range(2..5)),
        Cone::Psd(rng.random_range(1..4)),
    ];
    let n: usize = cones.iter().map(|c| c.dim()).sum();
    let mut x = Vec::new();
    let mut s = Vec::new();
    for c in &cones {
        let id = c.identity();
        match c {
            Cone::Free(k) => {
                x.extend((0..*k).map(|_| rng.random_range(-1.0..1.0)));
                s.extend(vec![0.0; *k]);
            }
            Cone::Psd(k) => {
                let mut m = vec![0.0; k * k];
                for i in 0..*k {
                    m[i * k + i] = 2.0;
                    for j in 0..i {
                        let v = rng.random_range(-0.3..0.3);
                        m[i * k + j] = v;
                        m[j * k + i] = v;
                    }
                }
                x.extend(svec(&m, *k));
                s.extend(id);
            }
            _ => {
                x.extend(id.iter().map(|v| 2.0 * v));
                s.extend(id);
            }
        }
    }
    let m = rng.random_range(2..6);
    let mut t = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.random_bool(0.5) {
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    let a = SparseMatrix::from_triplets(m, n, &t);
    let b = a.mul(&x);
    let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let aty = a.tmul(&y);
    let c = (0..n).map(|j| aty[j] + s[j]).collect();
    ConicProblem::new(cones, a, b, c)
}
