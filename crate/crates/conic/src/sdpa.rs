//! SDPA sparse format (`.dat-s`) reader and writer, plus CSDP-style solution files.
//!
//! Our cone variable `x` plays the role of the SDPA dual matrix `Y`:
//! `max tr(F₀Y)` s.t. `tr(FᵢY) = cᵢ`, with `F₀ = −C` and `cᵢ = bᵢ`.
//! Free blocks are split into a nonnegative pair; second-order blocks become
//! arrow matrices with structural equalities appended after the original rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::cone::{svec, svec_pair, Cone};
use crate::error::ConicError;
use crate::problem::{ConicProblem, SparseMatrix};

/// Parsed SDPA data: `m`, block structure (negative = diagonal) and summed
/// upper-triangular entries keyed by `(matno, block, i, j)` (all 1-based except matno).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdpaData {
    pub m: usize,
    pub blocks: Vec<i64>,
    pub c: Vec<f64>,
    pub entries: BTreeMap<(usize, usize, usize, usize), f64>,
}

impl SdpaData {
    fn add(&mut self, mat: usize, blk: usize, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        *self.entries.entry((mat, blk, i, j)).or_insert(0.0) += v;
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "\"lie-robust sdpa export");
        let _ = writeln!(s, "{}", self.m);
        let _ = writeln!(s, "{}", self.blocks.len());
        let bs: Vec<String> = self.blocks.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "{}", bs.join(" "));
        let cs: Vec<String> = self.c.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{}", cs.join(" "));
        for (&(mat, blk, i, j), &v) in &self.entries {
            if v != 0.0 {
                let _ = writeln!(s, "{mat} {blk} {i} {j} {v:e}");
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<SdpaData, ConicError> {
        let mut data = SdpaData::default();
        let mut stage = 0;
        let mut need_blocks = 0usize;
        let mut bs_tokens: Vec<String> = Vec::new();
        let mut c_tokens: Vec<String> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('"') || line.starts_with('*') {
                continue;
            }
            let cleaned: String =
                line.chars().map(|ch| if "{}(),".contains(ch) { ' ' } else { ch }).collect();
            let toks: Vec<String> = cleaned.split_whitespace().map(str::to_string).collect();
            if toks.is_empty() {
                continue;
            }
            let perr = |msg: String| ConicError::Parse { line: ln + 1, msg };
            match stage {
                0 => {
                    data.m = toks[0].parse().map_err(|_| perr(format!("bad m '{}'", toks[0])))?;
                    stage = 1;
                }
                1 => {
                    need_blocks = toks[0].parse().map_err(|_| perr(format!("bad nblocks '{}'", toks[0])))?;
                    stage = 2;
                    if need_blocks == 0 {
                        stage = 3;
                    }
                }
                2 => {
                    bs_tokens.extend(toks);
                    if bs_tokens.len() >= need_blocks {
                        stage = 3;
                    }
                }
                3 => {
                    c_tokens.extend(toks);
                    if c_tokens.len() >= data.m {
                        stage = 4;
                    }
                }
                _ => {
                    if toks.len() < 5 {
                        return Err(perr("entry needs 5 fields".into()));
                    }
                    let ints: Result<Vec<usize>, _> = toks[..4].iter().map(|t| t.parse::<usize>()).collect();
                    let ints = ints.map_err(|_| perr("bad entry index".into()))?;
                    let v: f64 = parse_f64(&toks[4]).ok_or_else(|| perr(format!("bad value '{}'", toks[4])))?;
                    let (mat, blk, i, j) = (ints[0], ints[1], ints[2], ints[3]);
                    if mat > data.m || blk == 0 || blk > need_blocks || i == 0 || j == 0 {
                        return Err(perr("entry index out of range".into()));
                    }
                    data.add(mat, blk, i, j, v);
                }
            }
        }
        if data.m == 0 && stage == 3 {
            stage = 4;
        }
        if stage < 4 && !(stage == 3 && data.m == 0) {
            return Err(ConicError::Parse { line: 0, msg: "truncated header".into() });
        }
        data.blocks = bs_tokens[..need_blocks]
            .iter()
            .map(|t| t.parse::<i64>().map_err(|_| ConicError::Parse { line: 0, msg: format!("bad block size '{t}'") }))
            .collect::<Result<_, _>>()?;
        data.c = c_tokens[..data.m]
            .iter()
            .map(|t| parse_f64(t).ok_or_else(|| ConicError::Parse { line: 0, msg: format!("bad objective '{t}'") }))
            .collect::<Result<_, _>>()?;
        for (&(_, blk, i, j), _) in &data.entries {
            let side = data.blocks[blk - 1].unsigned_abs() as usize;
            if i > side || j > side || (data.blocks[blk - 1] < 0 && i != j) {
                return Err(ConicError::Parse { line: 0, msg: format!("entry ({i},{j}) outside block {blk}") });
            }
        }
        Ok(data)
    }
}

fn parse_f64(t: &str) -> Option<f64> {
    t.replace(['d', 'D'], "e").parse().ok()
}

/// How each of our blocks sits inside the SDPA block list.
#[derive(Clone, Debug)]
pub struct SdpaLayout {
    /// SDPA block number (1-based) per original block; `None` for empty blocks.
    pub block_of: Vec<Option<usize>>,
    pub m: usize,
}

fn side(cone: Cone) -> i64 {
    match cone {
        Cone::Free(n) => -(2 * n as i64),
        Cone::Nonnegative(n) => -(n as i64),
        Cone::SecondOrder(n) => n as i64,
        Cone::Psd(k) => k as i64,
    }
}

/// Scatter `a · x[t]` (column `t` of a block) as matrix entries.
fn emit(data: &mut SdpaData, mat: usize, blk: usize, cone: Cone, t: usize, a: f64) {
    match cone {
        Cone::Free(n) => {
            data.add(mat, blk, t + 1, t + 1, a);
            data.add(mat, blk, n + t + 1, n + t + 1, -a);
        }
        Cone::Nonnegative(_) => data.add(mat, blk, t + 1, t + 1, a),
        Cone::SecondOrder(n) => {
            if t + 1 == n {
                data.add(mat, blk, 1, 1, a);
            } else {
                data.add(mat, blk, 1, t + 2, a / 2.0);
            }
        }
        Cone::Psd(_) => {
            let (p, q) = svec_pair(t);
            let v = if p == q { a } else { a * std::f64::consts::FRAC_1_SQRT_2 };
            data.add(mat, blk, q + 1, p + 1, v);
        }
    }
}

pub fn to_sdpa(p: &ConicProblem) -> Result<(SdpaData, SdpaLayout), ConicError> {
    p.validate()?;
    let mut data = SdpaData::default();
    let mut block_of = Vec::new();
    let ranges = p.block_ranges();
    for c in &p.cones {
        if c.dim() == 0 {
            block_of.push(None);
        } else {
            data.blocks.push(side(*c));
            block_of.push(Some(data.blocks.len()));
        }
    }
    let m = p.num_rows();
    data.c = p.b.clone();
    for (b, cone) in p.cones.iter().enumerate() {
        let Some(blk) = block_of[b] else { continue };
        for (t, col) in ranges[b].clone().enumerate() {
            emit(&mut data, 0, blk, *cone, t, -p.c[col]);
            let (ri, rv) = p.a.col(col);
            for (r, v) in ri.iter().zip(rv) {
                emit(&mut data, r + 1, blk, *cone, t, *v);
            }
        }
    }
    // Arrow structure for second-order blocks.
    let mut extra = 0;
    for (b, cone) in p.cones.iter().enumerate() {
        if let (Cone::SecondOrder(n), Some(blk)) = (*cone, block_of[b]) {
            for j in 2..=n {
                extra += 1;
                data.c.push(0.0);
                data.add(m + extra, blk, j, j, 1.0);
                data.add(m + extra, blk, 1, 1, -1.0);
            }
            for j in 2..=n {
                for k in j + 1..=n {
                    extra += 1;
                    data.c.push(0.0);
                    data.add(m + extra, blk, j, k, 0.5);
                }
            }
        }
    }
    data.m = m + extra;
    Ok((data, SdpaLayout { block_of, m }))
}

pub fn export_sdpa(p: &ConicProblem, path: &Path) -> Result<SdpaLayout, ConicError> {
    let (data, layout) = to_sdpa(p)?;
    std::fs::write(path, data.to_text()).map_err(|e| ConicError::Io { path: path.into(), source: e })?;
    Ok(layout)
}

/// Interpret SDPA data as a [`ConicProblem`] over PSD and nonnegative blocks.
pub fn from_sdpa(data: &SdpaData) -> ConicProblem {
    let cones: Vec<Cone> = data
        .blocks
        .iter()
        .map(|&b| if b < 0 { Cone::Nonnegative(b.unsigned_abs() as usize) } else { Cone::Psd(b as usize) })
        .collect();
    let mut offs = Vec::new();
    let mut n = 0;
    for c in &cones {
        offs.push(n);
        n += c.dim();
    }
    let col = |blk: usize, i: usize, j: usize| -> (usize, f64) {
        match cones[blk - 1] {
            Cone::Psd(_) => {
                let idx = crate::cone::svec_index(i - 1, j - 1);
                (offs[blk - 1] + idx, if i == j { 1.0 } else { std::f64::consts::SQRT_2 })
            }
            _ => (offs[blk - 1] + i - 1, 1.0),
        }
    };
    let mut c = vec![0.0; n];
    let mut trips = Vec::new();
    for (&(mat, blk, i, j), &v) in &data.entries {
        let (cidx, f) = col(blk, i, j);
        if mat == 0 {
            c[cidx] -= v * f;
        } else {
            trips.push((mat - 1, cidx, v * f));
        }
    }
    let a = SparseMatrix::from_triplets(data.m, n, &trips);
    let mut p = ConicProblem::new(cones, a, data.c.clone(), c);
    p.block_labels = (0..p.cones.len()).map(|i| format!("sdpa-block{}", i + 1)).collect();
    p
}

pub fn import_sdpa(path: &Path) -> Result<ConicProblem, ConicError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConicError::Io { path: path.into(), source: e })?;
    Ok(from_sdpa(&SdpaData::parse(&text)?))
}

/// Solution matrices in CSDP's solution-file layout.
#[derive(Clone, Debug)]
pub struct SdpaSolution {
    pub y: Vec<f64>,
    /// Per SDPA block, full row-major matrices (diagonal blocks as diagonal matrices).
    pub z: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
}

/// Parse a CSDP-style solution file: the `y` vector, then `matno blk i j value`
/// lines with matno 1 for `Z` and 2 for `X`.
pub fn parse_solution(text: &str, data: &SdpaData) -> Result<SdpaSolution, ConicError> {
    let sides: Vec<usize> = data.blocks.iter().map(|b| b.unsigned_abs() as usize).collect();
    let mut z: Vec<Vec<f64>> = sides.iter().map(|&k| vec![0.0; k * k]).collect();
    let mut x = z.clone();
    let mut y: Vec<f64> = Vec::new();
    let mut have_y = false;
    for (ln, raw) in text.lines().enumerate() {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let perr = |msg: &str| ConicError::Parse { line: ln + 1, msg: msg.to_string() };
        if !have_y {
            y = toks.iter().map(|t| parse_f64(t).ok_or_else(|| perr("bad y"))).collect::<Result<_, _>>()?;
            if y.len() != data.m {
                return Err(perr("y length differs from m"));
            }
            have_y = true;
            continue;
        }
        if toks.len() != 5 {
            return Err(perr("expected 5 fields"));
        }
        let mat: usize = toks[0].parse().map_err(|_| perr("bad matno"))?;
        let blk: usize = toks[1].parse().map_err(|_| perr("bad block"))?;
        let i: usize = toks[2].parse().map_err(|_| perr("bad i"))?;
        let j: usize = toks[3].parse().map_err(|_| perr("bad j"))?;
        let v = parse_f64(toks[4]).ok_or_else(|| perr("bad value"))?;
        if blk == 0 || blk > sides.len() || i == 0 || j == 0 || i > sides[blk - 1] || j > sides[blk - 1] {
            return Err(perr("index out of range"));
        }
        let k = sides[blk - 1];
        let target = match mat {
            1 => &mut z[blk - 1],
            2 => &mut x[blk - 1],
            _ => return Err(perr("matno must be 1 or 2")),
        };
        target[(i - 1) * k + (j - 1)] = v;
        target[(j - 1) * k + (i - 1)] = v;
    }
    if !have_y && data.m > 0 {
        return Err(ConicError::Parse { line: 0, msg: "empty solution file".into() });
    }
    Ok(SdpaSolution { y, z, x })
}

/// Write a solution in the layout read by [`parse_solution`].
pub fn format_solution(sol: &SdpaSolution, data: &SdpaData) -> String {
    let mut s = String::new();
    let ys: Vec<String> = sol.y.iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(s, "{}", ys.join(" "));
    for (mat, mats) in [(1, &sol.z), (2, &sol.x)] {
        for (b, mm) in mats.iter().enumerate() {
            let k = data.blocks[b].unsigned_abs() as usize;
            for i in 0..k {
                for j in i..k {
                    let v = mm[i * k + j];
                    if v != 0.0 && (data.blocks[b] > 0 || i == j) {
                        let _ = writeln!(s, "{mat} {} {} {} {v:e}", b + 1, i + 1, j + 1);
                    }
                }
            }
        }
    }
    s
}

/// Map the SDPA `X` matrices and `y` back to our `(x, y)`; `y` flips sign.
pub fn recover_primal_dual(p: &ConicProblem, layout: &SdpaLayout, sol: &SdpaSolution) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(p.num_cols());
    for (b, cone) in p.cones.iter().enumerate() {
        let Some(blk) = layout.block_of[b] else { continue };
        let mm = &sol.x[blk - 1];
        match *cone {
            Cone::Free(n) => {
                let k = 2 * n;
                x.extend((0..n).map(|t| mm[t * k + t] - mm[(n + t) * k + n + t]));
            }
            Cone::Nonnegative(n) => x.extend((0..n).map(|t| mm[t * n + t])),
            Cone::SecondOrder(n) => {
                x.extend((1..n).map(|t| mm[t]));
                x.push(mm[0]);
            }
            Cone::Psd(k) => x.extend(svec(mm, k)),
        }
    }
    let y = sol.y[..layout.m].iter().map(|v| -v).collect();
    (x, y)
}
