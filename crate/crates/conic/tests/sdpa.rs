use std::path::PathBuf;

mod common;

use common::random_problem;

use lie_robust_conic::sdpa::{export_sdpa, import_sdpa, SdpaData};
use lie_robust_conic::{Cone, ConicProblem, ConicSolver, EmbeddedSolver, SdpaBridge, SolverOptions, SparseMatrix, Status};

fn min_trace() -> ConicProblem {
    let a = SparseMatrix::from_triplets(
        3,
        6,
        &[(0, 0, 1.0), (0, 3, -1.0), (1, 1, 1.0), (1, 4, -1.0), (2, 2, 1.0), (2, 5, -1.0)],
    );
    ConicProblem::new(vec![Cone::Psd(2), Cone::Psd(2)], a, vec![1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0])
}

#[test]
fn roundtrip_preserves_optimum() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..10 {
        let p = random_problem(seed);
        let path = dir.path().join(format!("p{seed}.dat-s"));
        export_sdpa(&p, &path).unwrap();
        let q = import_sdpa(&path).unwrap();
        let a = EmbeddedSolver.solve(&p, &SolverOptions::default()).unwrap();
        let b = EmbeddedSolver.solve(&q, &SolverOptions::default()).unwrap();
        assert_eq!(a.status, Status::Optimal, "seed {seed}");
        assert_eq!(b.status, Status::Optimal, "seed {seed}");
        assert!((a.primal_objective - b.primal_objective).abs() < 1e-7, "seed {seed}: {} vs {}", a.primal_objective, b.primal_objective);
    }
}

#[test]
fn min_trace_roundtrip_keeps_block_structure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.dat-s");
    let p = min_trace();
    export_sdpa(&p, &path).unwrap();
    let q = import_sdpa(&path).unwrap();
    assert_eq!(q.cones, p.cones);
    assert_eq!(q.b, p.b);
    for (u, v) in q.c.iter().zip(&p.c) {
        assert!((u - v).abs() < 1e-15);
    }
    let text = std::fs::read_to_string(&path).unwrap();
    let again = SdpaData::parse(&text).unwrap();
    assert_eq!(again.to_text(), text);
}

#[test]
fn empty_problem_file() {
    let p = ConicProblem::new(vec![], SparseMatrix::zeros(0, 0), vec![], vec![]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.dat-s");
    export_sdpa(&p, &path).unwrap();
    let q = import_sdpa(&path).unwrap();
    assert_eq!(q.cones.len(), 0);
    assert_eq!(q.num_rows(), 0);
}

#[test]
fn malformed_file_is_rejected() {
    assert!(SdpaData::parse("2\n1\n2\n1.0\n").is_err());
    assert!(SdpaData::parse("1\n1\n2\n1.0\n1 1 3 1 1.0\n").is_err());
}

fn shim() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scripts/sdpa_cvxpy.py")
}

#[test]
fn external_bridge_matches_embedded() {
    let bridge = SdpaBridge::new(shim());
    for seed in 0..3 {
        let p = random_problem(100 + seed);
        let a = EmbeddedSolver.solve(&p, &SolverOptions::default()).unwrap();
        let b = bridge.solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(b.status, Status::Optimal);
        assert!((a.primal_objective - b.primal_objective).abs() < 1e-6, "{} vs {}", a.primal_objective, b.primal_objective);
        assert!((a.dual_objective - b.dual_objective).abs() < 1e-6);
    }
}
