//! Consistency polytopes from noisy derivative observations.
//!
//! Each observation `(t_k, x_k, y_k)` and coordinate `i` contributes the two rows
//! `±(Σ_ℓ w_ℓ f_ℓ,i(t_k, x_k)) ≤ ε_i ± (y_k,i − f_0,i(t_k, x_k))`.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::lp::LpOutcome;
use crate::polyalg::{monomials_upto, time_state_vars, MultiIndex, Polynomial, PolynomialVector};
use crate::sdrset::{Polytope, SdrError};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("noise bound must be nonnegative")]
    NegativeNoise,
    #[error("no observations")]
    NoData,
    #[error("the consistency polytope is empty")]
    Empty,
    #[error("the consistency polytope is unbounded along coordinate {0}; add observations")]
    Unbounded(usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv row {row}: {msg}")]
    CsvRow { row: usize, msg: String },
    #[error(transparent)]
    Sdr(#[from] SdrError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Prior `f0` plus one vector field per unknown coefficient, over `(t, x1..xn)`.
#[derive(Clone, Debug)]
pub struct Dictionary {
    pub f0: PolynomialVector,
    pub channels: Vec<PolynomialVector>,
}

impl Dictionary {
    pub fn n(&self) -> usize {
        self.f0.len()
    }

    /// One channel per monomial of degree `≤ deg` in `x`, acting on coordinate `coord`.
    pub fn monomials(f0: PolynomialVector, coord: usize, deg: u32) -> Self {
        let n = f0.len();
        let vars = time_state_vars(n);
        let channels = monomials_upto(n, deg)
            .into_iter()
            .map(|m| {
                let mut full = MultiIndex::zero(n + 1);
                full.0[1..].copy_from_slice(&m.0);
                let mut entries = vec![Polynomial::zero(&vars); n];
                entries[coord] = Polynomial::monomial(&vars, full, 1.0);
                PolynomialVector { entries }
            })
            .collect();
        Dictionary { f0, channels }
    }

    /// Channel `e_i x_j` for every pair: an unknown linear part `B` in `ẋ = Bx + f0`.
    pub fn linear(f0: PolynomialVector) -> Self {
        let n = f0.len();
        let vars = time_state_vars(n);
        let mut channels = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut entries = vec![Polynomial::zero(&vars); n];
                entries[i] = Polynomial::var(&vars, &vars[j + 1]).expect("state variable");
                channels.push(PolynomialVector { entries });
            }
        }
        Dictionary { f0, channels }
    }

    /// `f0 + Σ w_ℓ f_ℓ` at `(t, x)`.
    pub fn eval(&self, t: f64, x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut pt = vec![t];
        pt.extend_from_slice(x);
        let mut out = self.f0.eval(&pt);
        for (l, ch) in self.channels.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(ch.eval(&pt)) {
                *o += w[l] * v;
            }
        }
        out
    }
}

/// Per-coordinate noise bounds; a scalar applies to every coordinate.
pub fn noise_vector(eps: &[f64], n: usize) -> Result<Vec<f64>, DataError> {
    let v = match eps.len() {
        1 => vec![eps[0]; n],
        k if k == n => eps.to_vec(),
        k => return Err(DataError::Dimension(format!("{k} noise bounds for {n} coordinates"))),
    };
    if v.iter().any(|e| !(*e >= 0.0)) {
        return Err(DataError::NegativeNoise);
    }
    Ok(v)
}

/// The `2·N·n`-row consistency polytope, rows ordered by observation then coordinate (+ before −).
pub fn build_polytope(obs: &[Observation], dict: &Dictionary, eps: &[f64]) -> Result<Polytope, DataError> {
    let n = dict.n();
    let l = dict.channels.len();
    let eps = noise_vector(eps, n)?;
    if obs.is_empty() {
        return Err(DataError::NoData);
    }
    let m = 2 * obs.len() * n;
    let mut gamma = DMatrix::zeros(m, l);
    let mut h = DVector::zeros(m);
    for (k, o) in obs.iter().enumerate() {
        if o.x.len() != n || o.y.len() != n {
            return Err(DataError::Dimension(format!("observation {k} does not have {n} states and derivatives")));
        }
        let mut pt = vec![o.t];
        pt.extend_from_slice(&o.x);
        let base = dict.f0.eval(&pt);
        let cols: Vec<Vec<f64>> = dict.channels.iter().map(|c| c.eval(&pt)).collect();
        for i in 0..n {
            let r = 2 * (k * n + i);
            let resid = o.y[i] - base[i];
            for (j, c) in cols.iter().enumerate() {
                gamma[(r, j)] = c[i];
                gamma[(r + 1, j)] = -c[i];
            }
            h[r] = eps[i] + resid;
            h[r + 1] = eps[i] - resid;
        }
    }
    Ok(Polytope::new(gamma, h)?)
}

/// Drop redundant rows in input order (`max Γ_i w` over the other retained rows
/// `≤ h_i + 1e-9`). Rows with `Γ_i = 0` are dropped when `h_i ≥ −1e-9`.
pub fn reduce_redundant(p: &Polytope) -> Result<Polytope, DataError> {
    if p.is_empty()? {
        return Err(DataError::Empty);
    }
    let m = p.rows();
    let mut keep: Vec<bool> = (0..m).map(|i| p.gamma.row(i).amax() > 0.0 || p.h[i] < -1e-9).collect();
    for i in 0..m {
        if !keep[i] {
            continue;
        }
        let others: Vec<usize> = (0..m).filter(|&j| j != i && keep[j]).collect();
        let sub = Polytope::new(p.gamma.select_rows(&others), DVector::from_iterator(others.len(), others.iter().map(|&j| p.h[j])))?;
        let c: Vec<f64> = p.gamma.row(i).iter().copied().collect();
        match sub.maximize(&c)? {
            LpOutcome::Optimal { value, .. } if value <= p.h[i] + 1e-9 => keep[i] = false,
            _ => {}
        }
    }
    let rows: Vec<usize> = (0..m).filter(|&i| keep[i]).collect();
    Ok(Polytope::new(p.gamma.select_rows(&rows), DVector::from_iterator(rows.len(), rows.iter().map(|&j| p.h[j])))?)
}

/// Ensure every coordinate is bounded in both directions.
pub fn check_bounded(p: &Polytope) -> Result<(), DataError> {
    for j in 0..p.dim() {
        for s in [1.0, -1.0] {
            let mut c = vec![0.0; p.dim()];
            c[j] = s;
            match p.maximize(&c)? {
                LpOutcome::Optimal { .. } => {}
                LpOutcome::Unbounded => return Err(DataError::Unbounded(j)),
                LpOutcome::Infeasible => return Err(DataError::Empty),
            }
        }
    }
    Ok(())
}

/// Observations from CSV with header `t, x1..xn, y1..yn`.
pub fn read_observations(reader: impl Read, n: usize) -> Result<Vec<Observation>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let want: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .chain((1..=n).map(|i| format!("y{i}")))
        .collect();
    let cols: Vec<usize> = want
        .iter()
        .map(|w| header.iter().position(|h| h == w).ok_or_else(|| DataError::Dimension(format!("missing column {w}"))))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = cols
            .iter()
            .map(|&c| {
                rec.get(c)
                    .ok_or_else(|| DataError::CsvRow { row: row + 1, msg: "short row".into() })?
                    .parse::<f64>()
                    .map_err(|e| DataError::CsvRow { row: row + 1, msg: e.to_string() })
            })
            .collect::<Result<_, _>>()?;
        out.push(Observation { t: vals[0], x: vals[1..=n].to_vec(), y: vals[n + 1..].to_vec() });
    }
    Ok(out)
}

/// CSV text for observations (same header as [`read_observations`]).
pub fn write_observations(obs: &[Observation]) -> String {
    let n = obs.first().map(|o| o.x.len()).unwrap_or(0);
    let mut s = String::from("t");
    for i in 1..=n {
        s.push_str(&format!(",x{i}"));
    }
    for i in 1..=n {
        s.push_str(&format!(",y{i}"));
    }
    s.push('\n');
    for o in obs {
        s.push_str(&format!("{:?}", o.t));
        for v in o.x.iter().chain(&o.y) {
            s.push_str(&format!(",{v:?}"));
        }
        s.push('\n');
    }
    s
}

/// Observe `truth` at the given points with uniform noise in `[−ε_i, ε_i]`.
pub fn synthesize(truth: &PolynomialVector, points: &[(f64, Vec<f64>)], eps: &[f64], rng: &mut impl Rng) -> Vec<Observation> {
    points
        .iter()
        .map(|(t, x)| {
            let mut pt = vec![*t];
            pt.extend_from_slice(x);
            let y = truth
                .eval(&pt)
                .into_iter()
                .zip(eps)
                .map(|(v, e)| if *e > 0.0 { v + rng.random_range(-*e..=*e) } else { v })
                .collect();
            Observation { t: *t, x: x.clone(), y }
        })
        .collect()
}
