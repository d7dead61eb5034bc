//! Generators for binary computing matrices and the closed-form loads of the
//! design-based schemes.
//!
//! Subset-indexed matrices list their columns in colexicographic order of the
//! sorted subsets, so output is deterministic.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::matrix::{parse_numbers, BinaryComputingMatrix};
use crate::rational::{binomial, Rational};

/// The seven lines of the Fano plane, in the column order used throughout.
pub const FANO_BLOCKS: [[usize; 3]; 7] = [
    [1, 2, 7],
    [1, 4, 5],
    [1, 3, 6],
    [4, 6, 7],
    [2, 5, 6],
    [3, 5, 7],
    [2, 3, 4],
];

/// Label for a subset of `1..=K`: digits run together when all are single
/// digits (`"127"`), dot-separated otherwise (`"1.10.12"`).
pub fn subset_label(elems: &[usize]) -> String {
    if elems.iter().all(|&e| e < 10) {
        elems.iter().map(ToString::to_string).collect()
    } else {
        elems.iter().join(".")
    }
}

/// All `size`-subsets of `1..=n` (1-based, each sorted), in colex order.
pub fn colex_subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (1..=n).combinations(size).collect();
    subsets.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    subsets
}

fn server_labels(k: usize) -> Vec<String> {
    (1..=k).map(|i| i.to_string()).collect()
}

/// The subset-indexed matrix with `N = C(K, r)` columns, where column `A` has
/// its zeros exactly on the rows in `A`.
pub fn man_matrix(k: usize, r: usize) -> Result<BinaryComputingMatrix> {
    if r == 0 || r >= k {
        return Err(Error::InvalidParameters(format!(
            "subset scheme needs 1 <= r < K, got K={k}, r={r}"
        )));
    }
    let subsets = colex_subsets(k, r);
    let cols = subsets.iter().map(|a| subset_label(a)).collect();
    BinaryComputingMatrix::from_fn(server_labels(k), cols, r, |row, col| {
        !subsets[col].contains(&(row + 1))
    })
}

/// The `t`-subset matrix: column `A` (a `t`-subset of `1..=v`) has ones exactly
/// on the rows in `A`, so `r = v - t`.
pub fn t_subset_matrix(v: usize, t: usize) -> Result<BinaryComputingMatrix> {
    if t == 0 || t >= v {
        return Err(Error::InvalidParameters(format!(
            "t-subset scheme needs 1 <= t < v, got v={v}, t={t}"
        )));
    }
    let subsets = colex_subsets(v, t);
    let cols = subsets.iter().map(|a| subset_label(a)).collect();
    BinaryComputingMatrix::from_fn(server_labels(v), cols, v - t, |row, col| {
        subsets[col].contains(&(row + 1))
    })
}

/// The 7x7 incidence matrix of the Fano plane (a (7,3,1)-BIBD), columns
/// `127 145 136 467 256 357 234`.
pub fn fano_matrix() -> BinaryComputingMatrix {
    bibd_matrix(&fano_design()).expect("the Fano plane is a (7,3,1)-BIBD")
}

pub fn fano_design() -> BlockDesign {
    BlockDesign {
        points: server_labels(7),
        blocks: FANO_BLOCKS
            .iter()
            .map(|b| b.iter().map(|p| p - 1).collect())
            .collect(),
        block_size: 3,
    }
}

// ---------------------------------------------------------------------------
// Block designs
// ---------------------------------------------------------------------------

/// A set system: `v` labelled points and `b` blocks of `k` points each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDesign {
    points: Vec<String>,
    /// Point indices per block, sorted.
    blocks: Vec<Vec<usize>>,
    block_size: usize,
}

impl BlockDesign {
    pub fn new(points: Vec<String>, blocks: Vec<Vec<usize>>, block_size: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, block) in blocks.iter().enumerate() {
            if block.len() != block_size {
                return Err(Error::InvalidDesign(format!(
                    "block {} has {} points, expected {block_size}",
                    i + 1,
                    block.len()
                )));
            }
            if let Some(&p) = block.iter().find(|&&p| p >= points.len()) {
                return Err(Error::InvalidDesign(format!(
                    "block {} references point index {p} outside the {} points",
                    i + 1,
                    points.len()
                )));
            }
            let mut sorted = block.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidDesign(format!(
                    "block {} repeats a point",
                    i + 1
                )));
            }
            if !seen.insert(sorted) {
                return Err(Error::InvalidDesign(format!(
                    "block {} is a duplicate",
                    i + 1
                )));
            }
        }
        let blocks = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        Ok(BlockDesign {
            points,
            blocks,
            block_size,
        })
    }

    pub fn v(&self) -> usize {
        self.points.len()
    }

    pub fn b(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Number of blocks through each point.
    pub fn replication(&self) -> Vec<usize> {
        let mut counts = vec![0; self.v()];
        for block in &self.blocks {
            for &p in block {
                counts[p] += 1;
            }
        }
        counts
    }

    pub fn block_label(&self, block: usize) -> String {
        let labels: Vec<&str> = self.blocks[block]
            .iter()
            .map(|&p| self.points[p].as_str())
            .collect();
        if self.points.iter().all(|l| l.chars().count() == 1) {
            labels.concat()
        } else {
            labels.join(".")
        }
    }

    /// Checks the `(v, k, 1)`-BIBD axioms: every pair of distinct points lies
    /// in exactly one block, `b = v(v-1)/(k(k-1))` and replication is uniform.
    pub fn validate_bibd(&self) -> Result<()> {
        let (v, k) = (self.v(), self.block_size);
        if k < 2 || k >= v {
            return Err(Error::InvalidDesign(format!(
                "need v > k >= 2, got v={v}, k={k}"
            )));
        }
        let mut pair_count = vec![0usize; v * v];
        for block in &self.blocks {
            for (&a, &b) in block.iter().tuple_combinations() {
                pair_count[a * v + b] += 1;
            }
        }
        for (a, b) in (0..v).tuple_combinations() {
            let count = pair_count[a * v + b];
            if count != 1 {
                return Err(Error::InvalidDesign(format!(
                    "points {} and {} occur together in {count} blocks, expected 1",
                    self.points[a], self.points[b]
                )));
            }
        }
        if self.b() * k * (k - 1) != v * (v - 1) {
            return Err(Error::InvalidDesign(format!(
                "b={} but a (v,k,1)-BIBD needs v(v-1)/(k(k-1))",
                self.b()
            )));
        }
        let replication = self.replication();
        if replication.iter().any(|&x| x != replication[0]) {
            return Err(Error::InvalidDesign("non-uniform replication".into()));
        }
        Ok(())
    }

    /// Design file format: `v b k`, then the point labels, then one block per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.v(), self.b(), self.block_size);
        let _ = writeln!(out, "{}", self.points.join(" "));
        for block in &self.blocks {
            let labels: Vec<&str> = block.iter().map(|&p| self.points[p].as_str()).collect();
            let _ = writeln!(out, "{}", labels.join(" "));
        }
        out
    }
}

/// Parses the design file format. BIBD validation is left to [`bibd_matrix`]
/// or the caller.
pub fn ingest_design(text: &str) -> Result<BlockDesign> {
    let all: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.starts_with('#'))
        .collect();
    let mut lines = all.iter().copied().skip_while(|(_, l)| l.is_empty());
    let (line_no, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "missing header `v b k`".into(),
    })?;
    let [v, b, k] = parse_numbers(header, line_no)?[..] else {
        return Err(Error::Parse {
            line: line_no,
            message: "header must be `v b k`".into(),
        });
    };
    let (line_no, point_line) = lines.next().ok_or(Error::Parse {
        line: line_no,
        message: "missing point labels".into(),
    })?;
    let points: Vec<String> = point_line.split_whitespace().map(str::to_owned).collect();
    if points.len() != v {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected {v} point labels, found {}", points.len()),
        });
    }
    if points.iter().collect::<HashSet<_>>().len() != v {
        return Err(Error::Parse {
            line: line_no,
            message: "duplicate point label".into(),
        });
    }
    let mut blocks = Vec::with_capacity(b);
    let mut seen = HashSet::new();
    for i in 0..b {
        let (line_no, line) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: format!("expected {b} blocks, found {i}"),
        })?;
        if line.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty block line".into(),
            });
        }
        let mut block = Vec::with_capacity(k);
        for tok in line.split_whitespace() {
            let p = points.iter().position(|p| p == tok).ok_or(Error::Parse {
                line: line_no,
                message: format!("point {tok} is not one of the {v} declared points"),
            })?;
            block.push(p);
        }
        if block.len() != k {
            return Err(Error::Parse {
                line: line_no,
                message: format!("block has {} points, expected {k}", block.len()),
            });
        }
        block.sort_unstable();
        if block.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parse {
                line: line_no,
                message: "block repeats a point".into(),
            });
        }
        if !seen.insert(block.clone()) {
            return Err(Error::Parse {
                line: line_no,
                message: "duplicate block".into(),
            });
        }
        blocks.push(block);
    }
    if let Some((line_no, _)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(Error::Parse {
            line: line_no,
            message: format!("more than the declared {b} blocks"),
        });
    }
    BlockDesign::new(points, blocks, k)
}

/// Point-by-block incidence matrix of a `(v, k, 1)`-BIBD; `r = v - k`.
pub fn bibd_matrix(d: &BlockDesign) -> Result<BinaryComputingMatrix> {
    d.validate_bibd()?;
    let cols = (0..d.b()).map(|i| d.block_label(i)).collect();
    BinaryComputingMatrix::from_fn(
        d.points().to_vec(),
        cols,
        d.v() - d.block_size(),
        |point, block| d.blocks()[block].contains(&point),
    )
}

pub fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

/// Block `B_{a,b}` of the transversal design: group `i` (0-based) holds the
/// point `a*i + b mod n`.
pub fn transversal_point(a: usize, b: usize, group: usize, n: usize) -> usize {
    (a * group + b) % n
}

/// Transversal design TD(k, n) over `Z_n` for prime `n`: rows are the `n^2`
/// blocks `B_{a,b}` (row index `a*n + b`), columns the `k*n` points `(i, x)`
/// (column index `i*n + x`), with `r = n(n-1)`.
pub fn transversal_matrix(k: usize, n: usize) -> Result<BinaryComputingMatrix> {
    if !is_prime(n) {
        return Err(Error::Unsupported(format!(
            "transversal designs are generated only for prime n (n={n}); composite n needs \
             mutually orthogonal Latin squares"
        )));
    }
    if k < 2 || k > n {
        return Err(Error::InvalidParameters(format!(
            "transversal design needs 2 <= k <= n, got k={k}, n={n}"
        )));
    }
    let rows = (0..n * n)
        .map(|row| format!("L{}.{}", row / n, row % n))
        .collect();
    let cols = (0..k * n)
        .map(|col| format!("g{}x{}", col / n + 1, col % n))
        .collect();
    BinaryComputingMatrix::from_fn(rows, cols, n * (n - 1), |row, col| {
        let (a, b) = (row / n, row % n);
        let (group, x) = (col / n, col % n);
        transversal_point(a, b, group, n) == x
    })
}

// ---------------------------------------------------------------------------
// Construction catalogue
// ---------------------------------------------------------------------------

/// A named generator together with its parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Construction {
    Man { k: usize, r: usize },
    Fano,
    TSubset { v: usize, t: usize },
    Transversal { k: usize, n: usize },
    Bibd(BlockDesign),
}

impl Construction {
    pub fn build(&self) -> Result<BinaryComputingMatrix> {
        match self {
            Construction::Man { k, r } => man_matrix(*k, *r),
            Construction::Fano => Ok(fano_matrix()),
            Construction::TSubset { v, t } => t_subset_matrix(*v, *t),
            Construction::Transversal { k, n } => transversal_matrix(*k, *n),
            Construction::Bibd(d) => bibd_matrix(d),
        }
    }

    /// Identity size of the natural cover, when known in closed form.
    pub fn natural_g(&self) -> Option<usize> {
        match self {
            Construction::Man { r, .. } => Some(r + 1),
            Construction::Fano => Some(3),
            Construction::TSubset { v, t } => Some(v - t + 1),
            Construction::Transversal { n, .. } => Some(*n),
            Construction::Bibd(d) => {
                let (v, k) = (d.v(), d.block_size());
                ((v - 1) % (k - 1) == 0).then(|| (v - 1) / (k - 1))
            }
        }
    }

    /// The construction suite exercised by the property tests: subset
    /// matrices with `K <= 8`, the Fano plane, `t`-subset matrices with
    /// `v <= 8` and transversal designs with `n` in {2, 3, 5}.
    pub fn suite() -> Vec<Construction> {
        let mut out = Vec::new();
        for k in 2..=8 {
            for r in 1..k {
                out.push(Construction::Man { k, r });
            }
        }
        out.push(Construction::Fano);
        for v in 2..=8 {
            for t in 1..v {
                out.push(Construction::TSubset { v, t });
            }
        }
        for n in [2, 3, 5] {
            for k in 2..=n {
                out.push(Construction::Transversal { k, n });
            }
        }
        out
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Construction::Man { k, r } => write!(f, "man(K={k},r={r})"),
            Construction::Fano => write!(f, "fano"),
            Construction::TSubset { v, t } => write!(f, "t-subset(v={v},t={t})"),
            Construction::Transversal { k, n } => write!(f, "transversal(k={k},n={n})"),
            Construction::Bibd(d) => write!(f, "bibd(v={},k={})", d.v(), d.block_size()),
        }
    }
}

// ---------------------------------------------------------------------------
// Design-based schemes and their closed-form loads
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table1Scheme {
    /// Row I: `(v, k, 1)`-BIBD.
    Bibd { v: usize, k: usize },
    /// Row II: symmetric BIBD with `lambda = 2`.
    SymmetricBibd { v: usize, k: usize },
    /// Row III: `t`-design, scheme 1.
    TDesignScheme1 { v: usize, k: usize, t: usize },
    /// Row IV: `t`-design, scheme 2 (the `t`-subset matrix).
    TDesignScheme2 { v: usize, t: usize },
    /// Row V: transversal design TD(k, n).
    Transversal { k: usize, n: usize },
}

impl Table1Scheme {
    pub fn row(&self) -> &'static str {
        match self {
            Table1Scheme::Bibd { .. } => "I",
            Table1Scheme::SymmetricBibd { .. } => "II",
            Table1Scheme::TDesignScheme1 { .. } => "III",
            Table1Scheme::TDesignScheme2 { .. } => "IV",
            Table1Scheme::Transversal { .. } => "V",
        }
    }

    pub fn describe_params(&self) -> String {
        match *self {
            Table1Scheme::Bibd { v, k } | Table1Scheme::SymmetricBibd { v, k } => {
                format!("v={v} k={k}")
            }
            Table1Scheme::TDesignScheme1 { v, k, t } => format!("v={v} k={k} t={t}"),
            Table1Scheme::TDesignScheme2 { v, t } => format!("v={v} t={t}"),
            Table1Scheme::Transversal { k, n } => format!("k={k} n={n}"),
        }
    }

    /// The closed-form expressions as printed: `(non-straggler, straggler)`.
    pub fn formula_text(&self) -> (&'static str, &'static str) {
        match self {
            Table1Scheme::Bibd { .. } => ("2k(k-1)/(v(v-1))", "2k(k-1)/(kappa(v-1))"),
            Table1Scheme::SymmetricBibd { .. } => ("2/v", "2/kappa"),
            Table1Scheme::TDesignScheme1 { .. } => (
                "2(v-t+1)C(k-1,t-1)^2/(v C(v-1,t-1)^2)",
                "2C(k-1,t-1)^2/(kappa C(v-1,t-1))",
            ),
            Table1Scheme::TDesignScheme2 { .. } => ("2t/(v(v-t+1))", "2t/(kappa(v-t+1))"),
            Table1Scheme::Transversal { .. } => ("2/n^2", "2/kappa"),
        }
    }
}

/// A Table 1 row with its derived `K`, `N`, `r` and the identity size `g`
/// implied by equating the row's load with `2/g (1 - r/K)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeParameters {
    pub scheme: Table1Scheme,
    pub k: usize,
    pub n: usize,
    pub r: usize,
    pub g: Rational,
}

fn bad(scheme: &Table1Scheme, why: impl fmt::Display) -> Error {
    Error::InvalidParameters(format!(
        "row {} ({}): {why}",
        scheme.row(),
        scheme.describe_params()
    ))
}

impl SchemeParameters {
    pub fn new(scheme: Table1Scheme) -> Result<Self> {
        let (k, n, r) = match scheme {
            Table1Scheme::Bibd { v, k } => {
                if k < 2 || v <= k {
                    return Err(bad(&scheme, "need v > k >= 2"));
                }
                if (v * (v - 1)) % (k * (k - 1)) != 0 {
                    return Err(bad(&scheme, "k(k-1) must divide v(v-1)"));
                }
                (v, v * (v - 1) / (k * (k - 1)), v - k)
            }
            Table1Scheme::SymmetricBibd { v, k } => {
                if k < 2 || v <= k {
                    return Err(bad(&scheme, "need v > k >= 2"));
                }
                (v, k * v, v - k + 1)
            }
            Table1Scheme::TDesignScheme1 { v, k, t } => {
                if t < 2 || k < t || v <= k {
                    return Err(bad(&scheme, "need v > k >= t >= 2"));
                }
                let (v64, k64, t64) = (v as u64, k as u64, t as u64);
                let servers = binomial(v64, t64 - 1);
                let numer = binomial(v64, t64) * k64;
                let denom = binomial(k64, t64);
                if numer % denom != 0 {
                    return Err(bad(&scheme, "C(k,t) must divide C(v,t)k"));
                }
                let ones = binomial(k64 - 1, t64 - 1);
                if ones >= servers {
                    return Err(bad(&scheme, "computation load would be zero"));
                }
                (
                    servers as usize,
                    (numer / denom) as usize,
                    (servers - ones) as usize,
                )
            }
            Table1Scheme::TDesignScheme2 { v, t } => {
                if t == 0 || t >= v {
                    return Err(bad(&scheme, "need 1 <= t < v"));
                }
                (v, binomial(v as u64, t as u64) as usize, v - t)
            }
            Table1Scheme::Transversal { k, n } => {
                if n < 2 || k < 2 || k > n {
                    return Err(bad(&scheme, "need 2 <= k <= n"));
                }
                (n * n, k * n, n * (n - 1))
            }
        };
        let load = closed_form_load(&scheme);
        // 2/g (1 - r/K) = L  =>  g = 2(K - r) / (K L)
        let g =
            Rational::from_integer(2 * (k - r) as u64) / (Rational::from_integer(k as u64) * load);
        Ok(SchemeParameters { scheme, k, n, r, g })
    }

    /// Largest admissible straggler count `g - 2` (using `floor(g)`).
    pub fn straggler_tolerance(&self) -> usize {
        (self.g.to_integer() as usize).saturating_sub(2)
    }
}

fn closed_form_load(scheme: &Table1Scheme) -> Rational {
    let q = |n: u64, d: u64| Rational::new(n, d);
    match *scheme {
        Table1Scheme::Bibd { v, k } => {
            let (v, k) = (v as u64, k as u64);
            q(2 * k * (k - 1), v * (v - 1))
        }
        Table1Scheme::SymmetricBibd { v, .. } => q(2, v as u64),
        Table1Scheme::TDesignScheme1 { v, k, t } => {
            let (v, k, t) = (v as u64, k as u64, t as u64);
            let a = binomial(k - 1, t - 1);
            let b = binomial(v - 1, t - 1);
            q(2 * (v - t + 1) * a * a, v * b * b)
        }
        Table1Scheme::TDesignScheme2 { v, t } => {
            let (v, t) = (v as u64, t as u64);
            q(2 * t, v * (v - t + 1))
        }
        Table1Scheme::Transversal { n, .. } => q(2, (n * n) as u64),
    }
}

fn straggler_form_load(scheme: &Table1Scheme, kappa: u64) -> Rational {
    let q = |n: u64, d: u64| Rational::new(n, d);
    match *scheme {
        Table1Scheme::Bibd { v, k } => {
            let (v, k) = (v as u64, k as u64);
            q(2 * k * (k - 1), kappa * (v - 1))
        }
        Table1Scheme::SymmetricBibd { .. } | Table1Scheme::Transversal { .. } => q(2, kappa),
        Table1Scheme::TDesignScheme1 { v, k, t } => {
            let (v, k, t) = (v as u64, k as u64, t as u64);
            let a = binomial(k - 1, t - 1);
            q(2 * a * a, kappa * binomial(v - 1, t - 1))
        }
        Table1Scheme::TDesignScheme2 { v, t } => {
            let (v, t) = (v as u64, t as u64);
            q(2 * t, kappa * (v - t + 1))
        }
    }
}

/// Closed-form communication load of a Table 1 row, optionally with only
/// `kappa` surviving servers.
pub fn table1_load(params: &SchemeParameters, survivors: Option<usize>) -> Result<Rational> {
    match survivors {
        None => Ok(closed_form_load(&params.scheme)),
        Some(kappa) => {
            if kappa == 0 || kappa > params.k {
                return Err(bad(
                    &params.scheme,
                    format!("kappa={kappa} outside 1..={}", params.k),
                ));
            }
            let tolerance = params.straggler_tolerance();
            if params.k - kappa > tolerance {
                return Err(bad(
                    &params.scheme,
                    format!(
                        "{} stragglers exceed the g-2 = {tolerance} tolerance",
                        params.k - kappa
                    ),
                ));
            }
            Ok(straggler_form_load(&params.scheme, kappa as u64))
        }
    }
}
