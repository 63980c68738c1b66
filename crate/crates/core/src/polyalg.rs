//! Sparse multivariate polynomials over named indeterminates.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Exponent vector, one entry per indeterminate of the owning polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, o: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    /// Graded reverse lexicographic comparison (`Greater` = larger monomial).
    pub fn grevlex_cmp(&self, o: &MultiIndex) -> Ordering {
        match self.degree().cmp(&o.degree()) {
            Ordering::Equal => {}
            c => return c,
        }
        for (a, b) in self.0.iter().zip(&o.0).rev() {
            if a != b {
                return b.cmp(a);
            }
        }
        Ordering::Equal
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolyError {
    #[error("syntax error at byte {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Real polynomial: an ordered variable list and a sparse term map.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    vars: Vec<String>,
    terms: BTreeMap<MultiIndex, f64>,
}

/// Relative pruning threshold applied after arithmetic.
const PRUNE: f64 = 1e-14;

impl Polynomial {
    pub fn zero(vars: &[String]) -> Self {
        Polynomial { vars: vars.to_vec(), terms: BTreeMap::new() }
    }

    pub fn constant(vars: &[String], c: f64) -> Self {
        Self::monomial(vars, MultiIndex::zero(vars.len()), c)
    }

    pub fn monomial(vars: &[String], alpha: MultiIndex, c: f64) -> Self {
        assert_eq!(alpha.len(), vars.len(), "multi-index length");
        let mut p = Self::zero(vars);
        if c != 0.0 {
            p.terms.insert(alpha, c);
        }
        p
    }

    pub fn var(vars: &[String], name: &str) -> Result<Self, PolyError> {
        let i = index_of(vars, name)?;
        Ok(Self::monomial(vars, MultiIndex::unit(vars.len(), i), 1.0))
    }

    pub fn from_terms(vars: &[String], terms: impl IntoIterator<Item = (MultiIndex, f64)>) -> Self {
        let mut p = Self::zero(vars);
        for (a, c) in terms {
            assert_eq!(a.len(), vars.len(), "multi-index length");
            *p.terms.entry(a).or_insert(0.0) += c;
        }
        p.normalize();
        p
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(a, c)| (a, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// Degree in a single variable.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|a| a.0[var]).max().unwrap_or(0)
    }

    fn normalize(&mut self) {
        let maxc = self.terms.values().fold(0.0f64, |m, c| m.max(c.abs()));
        let thr = PRUNE * maxc;
        self.terms.retain(|_, c| *c != 0.0 && c.abs() >= thr);
    }

    fn check_vars(&self, o: &Polynomial) {
        assert_eq!(self.vars, o.vars, "polynomials over different variable lists");
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut p = self.clone();
        p.terms.values_mut().for_each(|c| *c *= s);
        p.normalize();
        p
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut r = Polynomial::constant(&self.vars, 1.0);
        for _ in 0..k {
            r = &r * self;
        }
        r
    }

    pub fn differentiate(&self, var: &str) -> Result<Polynomial, PolyError> {
        let i = index_of(&self.vars, var)?;
        Ok(self.diff_index(i))
    }

    pub fn diff_index(&self, i: usize) -> Polynomial {
        let mut p = Polynomial::zero(&self.vars);
        for (a, c) in &self.terms {
            if a.0[i] > 0 {
                let mut b = a.clone();
                b.0[i] -= 1;
                *p.terms.entry(b).or_insert(0.0) += c * a.0[i] as f64;
            }
        }
        p.normalize();
        p
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.vars.len() {
            return Err(PolyError::Dimension(format!(
                "point has {} entries, polynomial has {} variables",
                point.len(),
                self.vars.len()
            )));
        }
        Ok(self.eval_unchecked(point))
    }

    /// Evaluate without the length check (panics on short input).
    pub fn eval_unchecked(&self, point: &[f64]) -> f64 {
        // Nested Horner over the lexicographically sorted term map: terms sharing
        // a prefix of exponents are accumulated before multiplying out.
        fn rec(terms: &[(&MultiIndex, f64)], var: usize, point: &[f64]) -> f64 {
            if var == point.len() {
                return terms.iter().map(|t| t.1).sum();
            }
            // Group by exponent of `var` (terms are sorted lexicographically).
            let mut acc = 0.0;
            let mut last_exp = None::<u32>;
            let mut i = terms.len();
            // Walk groups from the highest exponent down for Horner.
            while i > 0 {
                let e = terms[i - 1].0 .0[var];
                let mut j = i - 1;
                while j > 0 && terms[j - 1].0 .0[var] == e {
                    j -= 1;
                }
                let inner = rec(&terms[j..i], var + 1, point);
                acc = match last_exp {
                    None => inner,
                    Some(le) => acc * point[var].powi((le - e) as i32) + inner,
                };
                last_exp = Some(e);
                i = j;
            }
            match last_exp {
                Some(e) => acc * point[var].powi(e as i32),
                None => 0.0,
            }
        }
        let terms: Vec<(&MultiIndex, f64)> = self.terms.iter().map(|(a, c)| (a, *c)).collect();
        if terms.is_empty() {
            return 0.0;
        }
        rec(&terms, 0, point)
    }

    /// Fix one variable to a value, keeping the variable list.
    pub fn substitute(&self, var: usize, value: f64) -> Polynomial {
        let mut p = Polynomial::zero(&self.vars);
        for (a, c) in &self.terms {
            let mut b = a.clone();
            let e = b.0[var];
            b.0[var] = 0;
            *p.terms.entry(b).or_insert(0.0) += c * value.powi(e as i32);
        }
        p.normalize();
        p
    }

    /// Replace variable `var` by `factor · var`.
    pub fn scale_var(&self, var: usize, factor: f64) -> Polynomial {
        let mut p = self.clone();
        for (a, c) in p.terms.iter_mut() {
            *c *= factor.powi(a.0[var] as i32);
        }
        p.normalize();
        p
    }

    /// Re-express over another variable list; every used variable must appear there.
    pub fn embed(&self, vars: &[String]) -> Result<Polynomial, PolyError> {
        let map: Vec<usize> = self
            .vars
            .iter()
            .map(|v| index_of(vars, v))
            .collect::<Result<_, _>>()
            .or_else(|e| {
                // Unused variables may be dropped.
                let mut m = Vec::new();
                for (i, v) in self.vars.iter().enumerate() {
                    match index_of(vars, v) {
                        Ok(j) => m.push(j),
                        Err(_) if self.degree_in(i) == 0 => m.push(usize::MAX),
                        Err(_) => return Err(e.clone()),
                    }
                }
                Ok(m)
            })?;
        let mut p = Polynomial::zero(vars);
        for (a, c) in &self.terms {
            let mut b = MultiIndex::zero(vars.len());
            for (i, &e) in a.0.iter().enumerate() {
                if e > 0 {
                    b.0[map[i]] += e;
                }
            }
            *p.terms.entry(b).or_insert(0.0) += c;
        }
        p.normalize();
        Ok(p)
    }

    /// Substitute `var_i ↦ images[i]` for every variable (images share a variable list).
    pub fn compose(&self, images: &[Polynomial]) -> Result<Polynomial, PolyError> {
        if images.len() != self.vars.len() {
            return Err(PolyError::Dimension("compose needs one image per variable".into()));
        }
        let target = images.first().map(|p| p.vars.clone()).unwrap_or_default();
        let mut out = Polynomial::zero(&target);
        for (a, c) in &self.terms {
            let mut t = Polynomial::constant(&target, *c);
            for (i, &e) in a.0.iter().enumerate() {
                if e > 0 {
                    t = &t * &images[i].pow(e);
                }
            }
            out = &out + &t;
        }
        Ok(out)
    }

    pub fn parse(text: &str, vars: &[String]) -> Result<Polynomial, PolyError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0, vars };
        let r = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(r)
    }

    /// Terms sorted from the largest monomial down (grevlex).
    pub fn sorted_terms(&self) -> Vec<(&MultiIndex, f64)> {
        let mut t: Vec<_> = self.terms().collect();
        t.sort_by(|a, b| b.0.grevlex_cmp(a.0));
        t
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn index_of(vars: &[String], name: &str) -> Result<usize, PolyError> {
    vars.iter().position(|v| v == name).ok_or_else(|| PolyError::UnknownVariable(name.to_string()))
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, o: &Polynomial) -> Polynomial {
        self.check_vars(o);
        let mut p = self.clone();
        for (a, c) in &o.terms {
            *p.terms.entry(a.clone()).or_insert(0.0) += c;
        }
        p.normalize();
        p
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, o: &Polynomial) -> Polynomial {
        self + &(-o)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        let mut p = self.clone();
        p.terms.values_mut().for_each(|c| *c = -*c);
        p
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, o: &Polynomial) -> Polynomial {
        self.check_vars(o);
        let mut p = Polynomial::zero(&self.vars);
        for (a, c) in &self.terms {
            for (b, d) in &o.terms {
                *p.terms.entry(a.add(b)).or_insert(0.0) += c * d;
            }
        }
        p.normalize();
        p
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.sorted_terms();
        if terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (a, c)) in terms.iter().enumerate() {
            let neg = *c < 0.0;
            let mag = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            let mono: Vec<String> = a
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| if e == 1 { self.vars[i].clone() } else { format!("{}^{e}", self.vars[i]) })
                .collect();
            if mono.is_empty() {
                write!(f, "{}", fmt_coeff(mag))?;
            } else if mag == 1.0 {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{}*{}", fmt_coeff(mag), mono.join("*"))?;
            }
        }
        Ok(())
    }
}

fn fmt_coeff(c: f64) -> String {
    // `{:?}` is the shortest representation that round-trips.
    let s = format!("{c:?}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> PolyError {
        PolyError::Syntax { offset: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                b'-' => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = &acc * &self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let d = self.unary()?;
                    if d.degree() > 0 {
                        self.pos = at;
                        return Err(self.err("division by a non-constant"));
                    }
                    let c = d.coeff(&MultiIndex::zero(self.vars.len()));
                    if c == 0.0 {
                        self.pos = at;
                        return Err(self.err("division by zero"));
                    }
                    acc = acc.scale(1.0 / c);
                }
                // Implicit multiplication: `3x1`, `2(x+1)`, `x1 x2`.
                Some(c) if c == b'(' || c.is_ascii_alphanumeric() || c == b'_' || c == b'.' => {
                    acc = &acc * &self.power()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Polynomial, PolyError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-&self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial, PolyError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected a nonnegative integer exponent"));
            }
            let k: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| self.err("exponent too large"))?;
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial, PolyError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
                    self.pos += 1;
                }
                // Exponent part only when followed by digits, so `2e` stays ambiguous-free.
                if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
                    let mut q = self.pos + 1;
                    if q < self.src.len() && (self.src[q] == b'+' || self.src[q] == b'-') {
                        q += 1;
                    }
                    if q < self.src.len() && self.src[q].is_ascii_digit() {
                        while q < self.src.len() && self.src[q].is_ascii_digit() {
                            q += 1;
                        }
                        self.pos = q;
                    }
                }
                let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let v: f64 = s.parse().map_err(|_| PolyError::Syntax { offset: start, msg: format!("bad number '{s}'") })?;
                Ok(Polynomial::constant(self.vars, v))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                Polynomial::var(self.vars, name)
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// A vector of polynomials over one variable list.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialVector {
    pub entries: Vec<Polynomial>,
}

impl PolynomialVector {
    pub fn new(entries: Vec<Polynomial>) -> Result<Self, PolyError> {
        if let Some(f) = entries.first() {
            if entries.iter().any(|p| p.vars != f.vars) {
                return Err(PolyError::Dimension("entries use different variable lists".into()));
            }
        }
        Ok(PolynomialVector { entries })
    }

    pub fn parse(texts: &[impl AsRef<str>], vars: &[String]) -> Result<Self, PolyError> {
        let entries = texts.iter().map(|t| Polynomial::parse(t.as_ref(), vars)).collect::<Result<_, _>>()?;
        Ok(PolynomialVector { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn eval(&self, point: &[f64]) -> Vec<f64> {
        self.entries.iter().map(|p| p.eval_unchecked(point)).collect()
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(Polynomial::degree).max().unwrap_or(0)
    }
}

/// Positions of the time variable (`"t"`, if present) and the first `n` other variables.
pub fn time_and_states(vars: &[String], n: usize) -> Result<(Option<usize>, Vec<usize>), PolyError> {
    let t = vars.iter().position(|v| v == "t");
    let xs: Vec<usize> = (0..vars.len()).filter(|&i| Some(i) != t).take(n).collect();
    if xs.len() < n {
        return Err(PolyError::Dimension(format!("need {n} state variables, have {}", xs.len())));
    }
    Ok((t, xs))
}

/// `base = ∂_t v + f₀·∇_x v` and `per_channel[ℓ] = f_ℓ·∇_x v`.
pub fn lie_terms(
    v: &Polynomial,
    f0: &PolynomialVector,
    channels: &[PolynomialVector],
) -> Result<(Polynomial, Vec<Polynomial>), PolyError> {
    let n = f0.len();
    if channels.iter().any(|c| c.len() != n) {
        return Err(PolyError::Dimension("channel dimension differs from the state dimension".into()));
    }
    for f in f0.entries.iter().chain(channels.iter().flat_map(|c| c.entries.iter())) {
        if f.vars() != v.vars() {
            return Err(PolyError::Dimension("dynamics and v use different variable lists".into()));
        }
    }
    let (t, xs) = time_and_states(v.vars(), n)?;
    let grad: Vec<Polynomial> = xs.iter().map(|&i| v.diff_index(i)).collect();
    let dot = |f: &PolynomialVector| {
        f.entries.iter().zip(&grad).fold(Polynomial::zero(v.vars()), |acc, (fi, gi)| &acc + &(fi * gi))
    };
    let mut base = dot(f0);
    if let Some(ti) = t {
        base = &base + &v.diff_index(ti);
    }
    Ok((base, channels.iter().map(dot).collect()))
}

pub fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

/// All monomials in `n` variables of degree ≤ `d`, graded, grevlex-descending within a degree.
pub fn monomials_upto(n: usize, d: u32) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(binom(n + d as usize, d as usize));
    for deg in 0..=d {
        let mut level = Vec::new();
        let mut cur = vec![0u32; n];
        gen(n, deg, 0, &mut cur, &mut level);
        level.sort_by(|a: &MultiIndex, b| b.grevlex_cmp(a));
        out.extend(level);
    }
    out
}

fn gen(n: usize, left: u32, i: usize, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if n == 0 {
        if left == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return;
    }
    if i == n - 1 {
        cur[i] = left;
        out.push(MultiIndex(cur.clone()));
        cur[i] = 0;
        return;
    }
    for e in (0..=left).rev() {
        cur[i] = e;
        gen(n, left - e, i + 1, cur, out);
    }
    cur[i] = 0;
}

/// Variable names `prefix1..prefixN`.
pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// `["t", x1, …, xn]`.
pub fn time_state_vars(n: usize) -> Vec<String> {
    std::iter::once("t".to_string()).chain(names("x", n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn grevlex_basis_order() {
        let b = monomials_upto(2, 2);
        let e: Vec<Vec<u32>> = b.into_iter().map(|m| m.0).collect();
        assert_eq!(e, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(monomials_upto(3, 6).len(), 84);
    }

    #[test]
    fn horner_matches_naive() {
        let vars = v(&["t", "x1", "x2"]);
        let p = Polynomial::parse("3*t^2*x1 - x1^3*x2 + 0.5*x2^4 - 7 + t*x2", &vars).unwrap();
        let pt = [0.3f64, -1.7, 2.2];
        let naive: f64 = p.terms().map(|(a, c)| c * a.0.iter().zip(&pt).map(|(&e, x): (&u32, &f64)| x.powi(e as i32)).product::<f64>()).sum();
        assert!((p.eval(&pt).unwrap() - naive).abs() < 1e-12);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let vars = v(&["x"]);
        match Polynomial::parse("x + * 2", &vars) {
            Err(PolyError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            e => panic!("{e:?}"),
        }
        assert_eq!(Polynomial::parse("y", &vars), Err(PolyError::UnknownVariable("y".into())));
        assert!(Polynomial::parse("1/x", &vars).is_err());
    }

    #[test]
    fn implicit_products_and_scientific() {
        let vars = v(&["x1", "x2"]);
        let p = Polynomial::parse("2x1 x2 + 1.5e-1(x1+1)", &vars).unwrap();
        let q = Polynomial::parse("2*x1*x2 + 0.15*x1 + 0.15", &vars).unwrap();
        assert_eq!(p, q);
    }
}
