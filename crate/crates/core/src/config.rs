//! JSON problem descriptions.
//!
//! ```json
//! {
//!   "n": 2, "horizon": 5.0,
//!   "dynamics": { "f0": ["x2", "-x1 - x2 + x1^3/3"], "channels": [["0", "x1"]] },
//!   "sets": { "X": { "box": { "lo": [-1, -1], "hi": [1, 1] } }, "X0": { "point": [0.5, 0] } },
//!   "uncertainty": { "type": "box", "lo": [-0.1], "hi": [0.1] },
//!   "problem": { "kind": "peak", "objective": "-x2" },
//!   "degrees": [1, 2, 3]
//! }
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisOptions, Objective, Region, SystemSpec};
use crate::datadriven::{self, DataError, Dictionary};
use crate::polyalg::{names, time_state_vars, PolyError, Polynomial, PolynomialVector};
use crate::sdrset::{BsaSet, Polytope, SdrError, SdrSet};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{field}: {source}")]
    Poly { field: String, source: PolyError },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sdr(#[from] SdrError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionConfig {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Point(Vec<f64>),
    /// Inequalities `g ≥ 0` and equalities `h = 0` over `x1..xn`.
    Semialgebraic {
        #[serde(default)]
        ineqs: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        eqs: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub f0: Vec<String>,
    #[serde(default)]
    pub channels: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetsConfig {
    #[serde(rename = "X")]
    pub x: RegionConfig,
    #[serde(rename = "X0")]
    pub x0: RegionConfig,
    #[serde(rename = "X_T", default, skip_serializing_if = "Option::is_none")]
    pub x_t: Option<RegionConfig>,
    #[serde(rename = "X_u", default, skip_serializing_if = "Option::is_none")]
    pub x_u: Option<RegionConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum UncertaintyConfig {
    None,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `Γ w ≤ h`.
    Polytope { rows: Vec<Vec<f64>>, rhs: Vec<f64> },
    /// `A0 + Σ w_ℓ A_ℓ + Σ λ_k G_k ⪰ 0` (full row-major `q×q` matrices).
    Psd {
        q: usize,
        a0: Vec<f64>,
        a: Vec<Vec<f64>>,
        #[serde(default)]
        g: Vec<Vec<f64>>,
    },
    Elliptope { q: usize },
    /// Consistency polytope from derivative observations; the dynamics are the dictionary.
    Data {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<PathBuf>,
        /// Inline rows `[t, x1..xn, y1..yn]`.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        observations: Vec<Vec<f64>>,
        eps: Vec<f64>,
        #[serde(default = "yes")]
        reduce: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualityConfig {
    pub b: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfigKind {
    Peak { objective: String },
    Distance {
        /// Over `x1..xn, y1..yn`; defaults to the squared Euclidean distance.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metric: Option<String>,
        #[serde(default = "yes")]
        sqrt: bool,
    },
    Reach,
    Roa,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsConfig {
    #[serde(default)]
    pub margin: f64,
    #[serde(default = "yes")]
    pub redundant_ball: bool,
    #[serde(default)]
    pub balanced_multipliers: bool,
}

impl Default for OptionsConfig {
    fn default() -> Self {
        OptionsConfig { margin: 0.0, redundant_ball: true, balanced_multipliers: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_feas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub horizon: f64,
    pub dynamics: DynamicsConfig,
    pub sets: SetsConfig,
    pub uncertainty: UncertaintyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equalities: Option<EqualityConfig>,
    pub problem: ProblemConfigKind,
    #[serde(default = "default_degrees")]
    pub degrees: Vec<u32>,
    #[serde(default)]
    pub options: OptionsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub seed: u64,
}

fn default_degrees() -> Vec<u32> {
    vec![1, 2, 3]
}

/// A validated problem ready for analysis.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: SystemSpec,
    pub objective: Objective,
    pub degrees: Vec<u32>,
    pub options: AnalysisOptions,
    pub seed: u64,
    /// Row counts before and after reduction for data-driven uncertainty.
    pub data_rows: Option<(usize, usize)>,
}

fn parse_poly(src: &str, vars: &[String], field: &str) -> Result<Polynomial, ConfigError> {
    Polynomial::parse(src, vars).map_err(|source| ConfigError::Poly { field: field.to_string(), source })
}

impl RegionConfig {
    pub fn to_region(&self, n: usize, field: &str) -> Result<Region, ConfigError> {
        let check = |k: usize| {
            if k == n {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{field}: expected {n} coordinates, got {k}")))
            }
        };
        Ok(match self {
            RegionConfig::Box { lo, hi } => {
                check(lo.len())?;
                check(hi.len())?;
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(ConfigError::Invalid(format!("{field}: lo exceeds hi")));
                }
                Region::Box { lo: lo.clone(), hi: hi.clone() }
            }
            RegionConfig::Ball { center, radius } => {
                check(center.len())?;
                if !(*radius >= 0.0) {
                    return Err(ConfigError::Invalid(format!("{field}: negative radius")));
                }
                Region::Ball { center: center.clone(), radius: *radius }
            }
            RegionConfig::Point(p) => {
                check(p.len())?;
                Region::Point(p.clone())
            }
            RegionConfig::Semialgebraic { ineqs, eqs } => {
                let vars = names("x", n);
                let mut set = BsaSet::new(&vars);
                for (i, g) in ineqs.iter().enumerate() {
                    set = set.ineq(parse_poly(g, &vars, &format!("{field}.ineqs[{i}]"))?)?;
                }
                for (i, h) in eqs.iter().enumerate() {
                    set = set.eq(parse_poly(h, &vars, &format!("{field}.eqs[{i}]"))?)?;
                }
                Region::Semialgebraic(set)
            }
        })
    }
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validate and build the problem; relative CSV paths resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<Problem, ConfigError> {
        let n = self.n;
        if n == 0 {
            return Err(ConfigError::Invalid("n must be positive".into()));
        }
        let vars = time_state_vars(n);
        let vec_of = |v: &[String], field: &str| -> Result<PolynomialVector, ConfigError> {
            if v.len() != n {
                return Err(ConfigError::Invalid(format!("{field}: expected {n} entries, got {}", v.len())));
            }
            Ok(PolynomialVector {
                entries: v.iter().enumerate().map(|(i, s)| parse_poly(s, &vars, &format!("{field}[{i}]"))).collect::<Result<_, _>>()?,
            })
        };
        let f0 = vec_of(&self.dynamics.f0, "dynamics.f0")?;
        let channels: Vec<PolynomialVector> = self
            .dynamics
            .channels
            .iter()
            .enumerate()
            .map(|(l, c)| vec_of(c, &format!("dynamics.channels[{l}]")))
            .collect::<Result<_, _>>()?;
        let l = channels.len();
        let mut data_rows = None;
        let mut w = match &self.uncertainty {
            UncertaintyConfig::None => SdrSet::new(0),
            UncertaintyConfig::Box { lo, hi } => SdrSet::boxed(lo, hi)?,
            UncertaintyConfig::Ball { center, radius } => SdrSet::ball(center, *radius)?,
            UncertaintyConfig::Polytope { rows, rhs } => Polytope::from_rows(rows, rhs)?.to_sdr()?,
            UncertaintyConfig::Psd { q, a0, a, g } => SdrSet::spectahedron(*q, a0, a, g)?,
            UncertaintyConfig::Elliptope { q } => SdrSet::elliptope(*q)?,
            UncertaintyConfig::Data { csv, observations, eps, reduce } => {
                let mut obs = Vec::new();
                if let Some(p) = csv {
                    let p = match base {
                        Some(b) if p.is_relative() => b.join(p),
                        _ => p.clone(),
                    };
                    let f = std::fs::File::open(&p).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
                    obs.extend(datadriven::read_observations(f, n)?);
                }
                for (k, row) in observations.iter().enumerate() {
                    if row.len() != 1 + 2 * n {
                        return Err(ConfigError::Invalid(format!("uncertainty.observations[{k}]: expected {} numbers", 1 + 2 * n)));
                    }
                    obs.push(datadriven::Observation { t: row[0], x: row[1..=n].to_vec(), y: row[n + 1..].to_vec() });
                }
                let dict = Dictionary { f0: f0.clone(), channels: channels.clone() };
                let full = datadriven::build_polytope(&obs, &dict, eps)?;
                let p = if *reduce { datadriven::reduce_redundant(&full)? } else { full.clone() };
                datadriven::check_bounded(&p)?;
                data_rows = Some((full.rows(), p.rows()));
                p.to_sdr()?
            }
        };
        if let Some(eq) = &self.equalities {
            if eq.b.iter().any(|r| r.len() != l) || eq.b.len() != eq.theta.len() {
                return Err(ConfigError::Invalid("equalities: shape mismatch".into()));
            }
            let b = DMatrix::from_fn(eq.b.len(), l, |i, j| eq.b[i][j]);
            w = w.with_equalities(b, DVector::from_vec(eq.theta.clone()))?;
        }
        if w.dim() != l {
            return Err(ConfigError::Invalid(format!("{l} channels but the uncertainty set has dimension {}", w.dim())));
        }
        let spec = SystemSpec {
            n,
            horizon: self.horizon,
            f0,
            channels,
            x: self.sets.x.to_region(n, "sets.X")?,
            x0: self.sets.x0.to_region(n, "sets.X0")?,
            w,
            x_t: self.sets.x_t.as_ref().map(|r| r.to_region(n, "sets.X_T")).transpose()?,
            x_u: self.sets.x_u.as_ref().map(|r| r.to_region(n, "sets.X_u")).transpose()?,
        };
        let xs = names("x", n);
        let objective = match &self.problem {
            ProblemConfigKind::Peak { objective } => Objective::Peak(parse_poly(objective, &xs, "problem.objective")?),
            ProblemConfigKind::Distance { metric, sqrt } => {
                if spec.x_u.is_none() {
                    return Err(ConfigError::Invalid("distance problems need sets.X_u".into()));
                }
                match metric {
                    None => match Objective::euclidean_distance(n) {
                        Objective::Distance { metric, .. } => Objective::Distance { metric, sqrt: *sqrt },
                        _ => unreachable!(),
                    },
                    Some(m) => {
                        let xy: Vec<String> = xs.iter().cloned().chain(names("y", n)).collect();
                        Objective::Distance { metric: parse_poly(m, &xy, "problem.metric")?, sqrt: *sqrt }
                    }
                }
            }
            ProblemConfigKind::Reach => Objective::Reach,
            ProblemConfigKind::Roa => {
                if spec.x_t.is_none() {
                    return Err(ConfigError::Invalid("roa problems need sets.X_T".into()));
                }
                Objective::Roa
            }
        };
        if matches!(self.problem, ProblemConfigKind::Reach | ProblemConfigKind::Roa) && spec.x.volume().is_none() {
            return Err(ConfigError::Invalid("reach and roa problems need X to be a box or a ball".into()));
        }
        if self.degrees.is_empty() || self.degrees.contains(&0) || self.degrees.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::Invalid("degrees must be positive and strictly ascending".into()));
        }
        spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut options = AnalysisOptions {
            margin: self.options.margin,
            redundant_ball: self.options.redundant_ball,
            balanced_multipliers: self.options.balanced_multipliers,
            ..Default::default()
        };
        if let Some(s) = &self.solver {
            if let Some(v) = s.tol_gap {
                options.solver.tol_gap = v;
            }
            if let Some(v) = s.tol_feas {
                options.solver.tol_feas = v;
            }
            if let Some(v) = s.max_iter {
                options.solver.max_iter = v;
            }
        }
        Ok(Problem { spec, objective, degrees: self.degrees.clone(), options, seed: self.seed, data_rows })
    }
}

/// Parse `a..b` (inclusive) or a comma list.
pub fn parse_degrees(s: &str) -> Result<Vec<u32>, ConfigError> {
    let bad = || ConfigError::Invalid(format!("bad degree list {s:?}"));
    let out: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if out.is_empty() || out.contains(&0) || out.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad());
    }
    Ok(out)
}
