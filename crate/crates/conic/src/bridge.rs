//! External-process backend speaking the SDPA sparse format.
//!
//! The program is invoked as `<program> [args…] in.dat-s out.sol` and must write
//! a CSDP-style solution file. Exit codes follow CSDP: 0 solved, 1 primal
//! infeasible, 2 dual infeasible, 3 or 4 partial progress, anything else failure.

use std::path::PathBuf;
use std::process::Command;

use crate::error::ConicError;
use crate::problem::ConicProblem;
use crate::sdpa::{parse_solution, recover_primal_dual, to_sdpa};
use crate::solution::{ConicSolution, Residuals, SolverOptions, Status};
use crate::ConicSolver;

#[derive(Clone, Debug)]
pub struct SdpaBridge {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl SdpaBridge {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        SdpaBridge { program: program.into(), args: Vec::new() }
    }
}

impl ConicSolver for SdpaBridge {
    fn solve(&self, p: &ConicProblem, _opts: &SolverOptions) -> Result<ConicSolution, ConicError> {
        let (data, layout) = to_sdpa(p)?;
        let dir = tempfile::tempdir().map_err(|e| ConicError::Io { path: std::env::temp_dir(), source: e })?;
        let input = dir.path().join("problem.dat-s");
        let output = dir.path().join("problem.sol");
        std::fs::write(&input, data.to_text()).map_err(|e| ConicError::Io { path: input.clone(), source: e })?;
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(&input)
            .arg(&output)
            .output()
            .map_err(|e| ConicError::Backend(format!("cannot run {}: {e}", self.program.display())))?;
        let code = out.status.code().unwrap_or(-1);
        log::debug!("{} exited with {code}", self.program.display());
        let status = match code {
            0 => Status::Optimal,
            1 => Status::PrimalInfeasible,
            2 => Status::DualInfeasible,
            3 | 4 => Status::SlowProgress,
            _ => Status::NumericalError,
        };
        let text = match std::fs::read_to_string(&output) {
            Ok(t) => t,
            Err(e) if status == Status::NumericalError => {
                return Err(ConicError::Backend(format!(
                    "{} failed (exit {code}): {}; {e}",
                    self.program.display(),
                    String::from_utf8_lossy(&out.stderr).trim()
                )))
            }
            Err(e) => return Err(ConicError::Io { path: output, source: e }),
        };
        let sol = parse_solution(&text, &data)?;
        let (x, y) = recover_primal_dual(p, &layout, &sol);
        let aty = p.a.tmul(&y);
        let s: Vec<f64> = (0..p.c.len()).map(|j| p.c[j] - aty[j]).collect();
        let ax = p.a.mul(&x);
        let pr: f64 = ax.iter().zip(&p.b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let nb = p.b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pobj = p.objective(&x);
        let dobj = p.b.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() + p.offset;
        let mut dviol = 0.0f64;
        for (k, r) in p.cones.iter().zip(p.block_ranges()) {
            if k.is_free() {
                dviol = dviol.max(s[r].iter().fold(0.0, |m, v| m.max(v.abs())));
            }
        }
        let nc = p.c.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(ConicSolution {
            status,
            primal_objective: pobj,
            dual_objective: dobj,
            residuals: Residuals {
                primal: pr / (1.0 + nb),
                dual: dviol / (1.0 + nc),
                gap: (pobj - dobj).abs() / (1.0 + pobj.abs().max(dobj.abs())),
            },
            x,
            y,
            s,
            iterations: 0,
        })
    }

    fn name(&self) -> String {
        format!("sdpa:{}", self.program.display())
    }
}
