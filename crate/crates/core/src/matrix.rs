//! Binary computing matrices, identity submatrices and identity submatrix covers.
//!
//! A `K x N` binary computing matrix assigns subfiles to servers: a `0` at
//! `(k, f)` means server `k` maps subfile `f`. Every column carries exactly `r`
//! zeros, where `r` is the computation load. Rows and columns carry opaque
//! string labels which are mapped to dense indices internally.
//!
//! An identity submatrix picks `l` rows and `l` columns such that row `k_i`
//! has a one in column `f_i` and zeros in every other selected column. A
//! non-overlapping cover is a family of identity submatrices whose matched
//! `(k_i, f_i)` pairs partition the one-entries of the matrix.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryComputingMatrix {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    bits: Vec<u8>,
    r: usize,
}

impl BinaryComputingMatrix {
    /// Builds a matrix from labelled rows of 0/1 entries and a declared
    /// computation load `r`.
    ///
    /// Only structural properties are checked here (rectangular, binary,
    /// unique labels). Column regularity is checked by [`validate_matrix`].
    pub fn new(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        rows: Vec<Vec<u8>>,
        r: usize,
    ) -> Result<Self> {
        if rows.len() != row_labels.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} row labels but {} rows",
                row_labels.len(),
                rows.len()
            )));
        }
        let n = col_labels.len();
        let mut bits = Vec::with_capacity(rows.len() * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {} has {} entries, expected {n}",
                    row_labels[i],
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|&&b| b > 1) {
                return Err(Error::InvalidMatrix(format!(
                    "row {} contains non-binary entry {bad}",
                    row_labels[i]
                )));
            }
            bits.extend_from_slice(row);
        }
        check_unique(&row_labels, "row")?;
        check_unique(&col_labels, "column")?;
        Ok(BinaryComputingMatrix {
            row_labels,
            col_labels,
            bits,
            r,
        })
    }

    /// Builds a matrix from a predicate, labelling rows and columns from the
    /// given label lists.
    pub fn from_fn(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        r: usize,
        one: impl Fn(usize, usize) -> bool,
    ) -> Result<Self> {
        let rows = (0..row_labels.len())
            .map(|k| (0..col_labels.len()).map(|f| u8::from(one(k, f))).collect())
            .collect();
        Self::new(row_labels, col_labels, rows, r)
    }

    /// Number of servers `K`.
    pub fn k(&self) -> usize {
        self.row_labels.len()
    }

    /// Number of subfiles `N`.
    pub fn n(&self) -> usize {
        self.col_labels.len()
    }

    /// Declared computation load `r`.
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn get(&self, k: usize, f: usize) -> u8 {
        self.bits[k * self.n() + f]
    }

    pub fn is_one(&self, k: usize, f: usize) -> bool {
        self.get(k, f) == 1
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn row_label(&self, k: usize) -> &str {
        &self.row_labels[k]
    }

    pub fn col_label(&self, f: usize) -> &str {
        &self.col_labels[f]
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.row_labels.iter().position(|l| l == label)
    }

    pub fn col_index(&self, label: &str) -> Option<usize> {
        self.col_labels.iter().position(|l| l == label)
    }

    pub fn row(&self, k: usize) -> &[u8] {
        let n = self.n();
        &self.bits[k * n..(k + 1) * n]
    }

    /// Subfiles mapped by server `k` (the zero positions of its row).
    pub fn mapped_by(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&f| !self.is_one(k, f)).collect()
    }

    pub fn column_zero_count(&self, f: usize) -> usize {
        (0..self.k()).filter(|&k| !self.is_one(k, f)).count()
    }

    /// Total number of one-entries.
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// One-entries in row-major scan order.
    pub fn one_entries(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        (0..self.k())
            .flat_map(|k| (0..n).map(move |f| (k, f)))
            .filter(|&(k, f)| self.is_one(k, f))
            .collect()
    }

    /// Transpose, with row and column labels swapped. The computation load of
    /// the result is recomputed from its first column (zero when empty); it
    /// need not be a valid computing matrix.
    pub fn transpose(&self) -> BinaryComputingMatrix {
        let r = if self.k() == 0 {
            0
        } else {
            (0..self.n()).filter(|&f| !self.is_one(0, f)).count()
        };
        Self::from_fn(
            self.col_labels.clone(),
            self.row_labels.clone(),
            r,
            |a, b| self.is_one(b, a),
        )
        .expect("transpose of a well-formed matrix is well-formed")
    }

    /// Renders the matrix text format: header `K N r`, the column labels, the
    /// row labels, then `K` lines of `N` space-separated digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.k(), self.n(), self.r);
        let _ = writeln!(out, "{}", self.col_labels.join(" "));
        let _ = writeln!(out, "{}", self.row_labels.join(" "));
        for k in 0..self.k() {
            let line: Vec<String> = self.row(k).iter().map(u8::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Parses the matrix text format. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "missing header `K N r`".into(),
        })?;
        let header = parse_numbers(header, line_no)?;
        let [k, n, r] = header[..] else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("header must be `K N r`, found {} fields", header.len()),
            });
        };
        let cols = expect_tokens(lines.next(), n, "column labels")?;
        let rows = expect_tokens(lines.next(), k, "row labels")?;
        let mut bits = Vec::with_capacity(k);
        for i in 0..k {
            let (line_no, line) = lines.next().ok_or(Error::Parse {
                line: 0,
                message: format!("expected {k} matrix rows, found {i}"),
            })?;
            let row = parse_numbers(line, line_no)?;
            if row.len() != n || row.iter().any(|&b| b > 1) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {n} binary digits"),
                });
            }
            bits.push(row.into_iter().map(|b| b as u8).collect());
        }
        if let Some((line_no, _)) = lines.next() {
            return Err(Error::Parse {
                line: line_no,
                message: "trailing content after matrix rows".into(),
            });
        }
        Self::new(rows, cols, bits, r)
    }
}

impl fmt::Display for BinaryComputingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.col_labels.iter().map(String::len).max().unwrap_or(1);
        let row_width = self.row_labels.iter().map(String::len).max().unwrap_or(1);
        write!(f, "{:row_width$}", "")?;
        for label in &self.col_labels {
            write!(f, " {label:>width$}")?;
        }
        writeln!(f)?;
        for k in 0..self.k() {
            write!(f, "{:>row_width$}", self.row_labels[k])?;
            for &b in self.row(k) {
                write!(f, " {b:>width$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for label in labels {
        if label.is_empty() || label.contains(char::is_whitespace) {
            return Err(Error::InvalidMatrix(format!(
                "{what} label {label:?} must be a non-empty token"
            )));
        }
        if !seen.insert(label) {
            return Err(Error::InvalidMatrix(format!(
                "duplicate {what} label {label}"
            )));
        }
    }
    Ok(())
}

pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn parse_numbers(line: &str, line_no: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("expected a non-negative integer, found {tok:?}"),
            })
        })
        .collect()
}

fn expect_tokens(line: Option<(usize, &str)>, count: usize, what: &str) -> Result<Vec<String>> {
    let (line_no, line) = line.ok_or(Error::Parse {
        line: 0,
        message: format!("missing {what} line"),
    })?;
    let tokens: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
    if tokens.len() != count {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected {count} {what}, found {}", tokens.len()),
        });
    }
    Ok(tokens)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixViolation {
    /// Declared `r` is outside `1..=K-1`.
    LoadOutOfRange { r: usize, k: usize },
    /// Column has a zero count different from the declared `r`.
    ZeroCountMismatch {
        column: String,
        zeros: usize,
        expected: usize,
    },
    /// Column has no zero: nobody maps the subfile.
    Unmapped { column: String },
    /// Column is all zeros: every server maps the subfile, leaving nothing to shuffle.
    FullyMapped { column: String },
}

impl fmt::Display for MatrixViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixViolation::LoadOutOfRange { r, k } => {
                write!(
                    f,
                    "computation load r={r} outside 1..={}",
                    k.saturating_sub(1)
                )
            }
            MatrixViolation::ZeroCountMismatch {
                column,
                zeros,
                expected,
            } => {
                write!(
                    f,
                    "column {column} has {zeros} zeros, expected r={expected}"
                )
            }
            MatrixViolation::Unmapped { column } => {
                write!(f, "column {column} has r=0: no server maps it")
            }
            MatrixViolation::FullyMapped { column } => write!(
                f,
                "column {column} is mapped by every server (r=K); it has no ones to cover"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub k: usize,
    pub n: usize,
    pub r: usize,
    pub violations: Vec<MatrixViolation>,
    /// Non-fatal observations, e.g. `N < K`.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
            Err(Error::InvalidMatrix(msgs.join("; ")))
        }
    }
}

/// Checks the column-regularity invariant of a binary computing matrix.
pub fn validate_matrix(m: &BinaryComputingMatrix) -> ValidationReport {
    let (k, n, r) = (m.k(), m.n(), m.r());
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    if r == 0 || r >= k {
        violations.push(MatrixViolation::LoadOutOfRange { r, k });
    }
    for f in 0..n {
        let zeros = m.column_zero_count(f);
        let column = m.col_label(f).to_owned();
        if zeros == 0 {
            violations.push(MatrixViolation::Unmapped { column });
        } else if zeros == k {
            violations.push(MatrixViolation::FullyMapped { column });
        } else if zeros != r {
            violations.push(MatrixViolation::ZeroCountMismatch {
                column,
                zeros,
                expected: r,
            });
        }
    }
    if n < k {
        warnings.push(format!("N={n} is smaller than K={k}"));
    }
    ValidationReport {
        k,
        n,
        r,
        violations,
        warnings,
    }
}

// ---------------------------------------------------------------------------
// Identity submatrices and covers
// ---------------------------------------------------------------------------

/// `l` rows and `l` columns where position `i` of the row list is paired with
/// position `i` of the column list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IdentitySubmatrix {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl IdentitySubmatrix {
    /// Pairs `rows[i]` with `cols[i]`. Lengths must agree; everything else is
    /// checked against a matrix by [`IdentitySubmatrix::defects`].
    pub fn new(rows: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        if rows.len() != cols.len() {
            return Err(Error::InvalidCover(format!(
                "identity submatrix has {} rows but {} columns",
                rows.len(),
                cols.len()
            )));
        }
        Ok(IdentitySubmatrix { rows, cols })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (rows, cols) = pairs.into_iter().unzip();
        IdentitySubmatrix { rows, cols }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    /// Matched `(row, column)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().copied().zip(self.cols.iter().copied())
    }

    pub fn contains_row(&self, k: usize) -> bool {
        self.rows.contains(&k)
    }

    /// Every way this member fails the identity condition against `m`.
    pub fn defects(&self, m: &BinaryComputingMatrix) -> Vec<MemberDefect> {
        let mut out = Vec::new();
        if self.size() < 2 {
            out.push(MemberDefect::TooSmall { size: self.size() });
        }
        if let Some(&k) = self.rows.iter().find(|&&k| k >= m.k()) {
            out.push(MemberDefect::RowOutOfRange { index: k });
        }
        if let Some(&f) = self.cols.iter().find(|&&f| f >= m.n()) {
            out.push(MemberDefect::ColumnOutOfRange { index: f });
        }
        if !out
            .iter()
            .all(|d| matches!(d, MemberDefect::TooSmall { .. }))
        {
            return out;
        }
        if has_duplicates(&self.rows) {
            out.push(MemberDefect::RepeatedRow);
        }
        if has_duplicates(&self.cols) {
            out.push(MemberDefect::RepeatedColumn);
        }
        for (i, &k) in self.rows.iter().enumerate() {
            for (j, &f) in self.cols.iter().enumerate() {
                let bit = m.get(k, f);
                if i == j && bit != 1 {
                    out.push(MemberDefect::ZeroOnDiagonal {
                        row: m.row_label(k).to_owned(),
                        column: m.col_label(f).to_owned(),
                    });
                } else if i != j && bit != 0 {
                    out.push(MemberDefect::OneOffDiagonal {
                        row: m.row_label(k).to_owned(),
                        column: m.col_label(f).to_owned(),
                    });
                }
            }
        }
        out
    }
}

fn has_duplicates(xs: &[usize]) -> bool {
    let mut seen = HashSet::with_capacity(xs.len());
    !xs.iter().all(|x| seen.insert(x))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemberDefect {
    TooSmall { size: usize },
    RowOutOfRange { index: usize },
    ColumnOutOfRange { index: usize },
    RepeatedRow,
    RepeatedColumn,
    ZeroOnDiagonal { row: String, column: String },
    OneOffDiagonal { row: String, column: String },
}

impl fmt::Display for MemberDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemberDefect::TooSmall { size } => write!(f, "size {size} < 2"),
            MemberDefect::RowOutOfRange { index } => write!(f, "row index {index} out of range"),
            MemberDefect::ColumnOutOfRange { index } => {
                write!(f, "column index {index} out of range")
            }
            MemberDefect::RepeatedRow => write!(f, "repeated row"),
            MemberDefect::RepeatedColumn => write!(f, "repeated column"),
            MemberDefect::ZeroOnDiagonal { row, column } => {
                write!(f, "C({row},{column}) = 0 on a matched pair")
            }
            MemberDefect::OneOffDiagonal { row, column } => {
                write!(f, "C({row},{column}) = 1 off the matched pairs")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdentityCover {
    members: Vec<IdentitySubmatrix>,
}

impl IdentityCover {
    pub fn new(members: Vec<IdentitySubmatrix>) -> Self {
        IdentityCover { members }
    }

    pub fn members(&self) -> &[IdentitySubmatrix] {
        &self.members
    }

    /// Number of members `S`.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Common member size `g`, if all members share one.
    pub fn uniform_size(&self) -> Option<usize> {
        let first = self.members.first()?.size();
        self.members
            .iter()
            .all(|m| m.size() == first)
            .then_some(first)
    }

    pub fn without_member(&self, index: usize) -> IdentityCover {
        let mut members = self.members.clone();
        members.remove(index);
        IdentityCover { members }
    }

    /// Renders the cover text format: header `S`, then one line per member
    /// `l  k1..kl  f1..fl` using the matrix labels.
    pub fn to_text(&self, m: &BinaryComputingMatrix) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.len());
        for member in &self.members {
            let rows: Vec<&str> = member.rows.iter().map(|&k| m.row_label(k)).collect();
            let cols: Vec<&str> = member.cols.iter().map(|&f| m.col_label(f)).collect();
            let _ = writeln!(
                out,
                "{}  {}  {}",
                member.size(),
                rows.join(" "),
                cols.join(" ")
            );
        }
        out
    }

    /// Parses the cover text format, resolving labels against `m`.
    pub fn parse(text: &str, m: &BinaryComputingMatrix) -> Result<Self> {
        let mut lines = content_lines(text);
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "missing header `S`".into(),
        })?;
        let s = header.parse::<usize>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("header must be the member count S, found {header:?}"),
        })?;
        let mut members = Vec::with_capacity(s);
        for i in 0..s {
            let (line_no, line) = lines.next().ok_or(Error::Parse {
                line: 0,
                message: format!("expected {s} members, found {i}"),
            })?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let l = tokens
                .first()
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or(Error::Parse {
                    line: line_no,
                    message: "member line must start with its size l".into(),
                })?;
            if tokens.len() != 1 + 2 * l {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("member of size {l} needs {} labels", 2 * l),
                });
            }
            let resolve = |label: &str, row: bool| {
                let idx = if row {
                    m.row_index(label)
                } else {
                    m.col_index(label)
                };
                idx.ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!(
                        "unknown {} label {label}",
                        if row { "row" } else { "column" }
                    ),
                })
            };
            let rows = tokens[1..=l]
                .iter()
                .map(|t| resolve(t, true))
                .collect::<Result<Vec<_>>>()?;
            let cols = tokens[l + 1..]
                .iter()
                .map(|t| resolve(t, false))
                .collect::<Result<Vec<_>>>()?;
            members.push(IdentitySubmatrix { rows, cols });
        }
        if let Some((line_no, _)) = lines.next() {
            return Err(Error::Parse {
                line: line_no,
                message: "trailing content after cover members".into(),
            });
        }
        Ok(IdentityCover { members })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoveredEntry {
    pub row: String,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverlapEntry {
    pub row: String,
    pub column: String,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MalformedMember {
    pub member: usize,
    pub defects: Vec<MemberDefect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverReport {
    pub members: usize,
    pub uniform_size: Option<usize>,
    pub malformed: Vec<MalformedMember>,
    pub missing: Vec<CoveredEntry>,
    pub overlapping: Vec<OverlapEntry>,
}

impl CoverReport {
    pub fn is_ok(&self) -> bool {
        self.malformed.is_empty() && self.missing.is_empty() && self.overlapping.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        Err(Error::InvalidCover(format!(
            "{} malformed members, {} uncovered ones, {} overlapping ones",
            self.malformed.len(),
            self.missing.len(),
            self.overlapping.len()
        )))
    }
}

/// Checks that `c` is a non-overlapping identity submatrix cover of `m`,
/// enumerating every violation.
pub fn verify_cover(m: &BinaryComputingMatrix, c: &IdentityCover) -> CoverReport {
    let mut malformed = Vec::new();
    let mut hits: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (idx, member) in c.members().iter().enumerate() {
        let defects = member.defects(m);
        let in_range = !defects.iter().any(|d| {
            matches!(
                d,
                MemberDefect::RowOutOfRange { .. } | MemberDefect::ColumnOutOfRange { .. }
            )
        });
        if !defects.is_empty() {
            malformed.push(MalformedMember {
                member: idx,
                defects,
            });
        }
        if in_range {
            for (k, f) in member.pairs() {
                if m.is_one(k, f) {
                    hits.entry((k, f)).or_default().push(idx);
                }
            }
        }
    }
    let mut missing = Vec::new();
    let mut overlapping = Vec::new();
    for (k, f) in m.one_entries() {
        match hits.get(&(k, f)) {
            None => missing.push(CoveredEntry {
                row: m.row_label(k).to_owned(),
                column: m.col_label(f).to_owned(),
            }),
            Some(ms) if ms.len() > 1 => overlapping.push(OverlapEntry {
                row: m.row_label(k).to_owned(),
                column: m.col_label(f).to_owned(),
                members: ms.clone(),
            }),
            Some(_) => {}
        }
    }
    CoverReport {
        members: c.len(),
        uniform_size: c.uniform_size(),
        malformed,
        missing,
        overlapping,
    }
}

/// `S * g == N * (K - r)` for a uniform cover.
pub fn count_identity_check(c: &IdentityCover, m: &BinaryComputingMatrix) -> Result<bool> {
    let g = c.uniform_size().ok_or(Error::NonUniformCover)?;
    Ok(c.len() * g == m.n() * (m.k() - m.r().min(m.k())))
}

/// Shuffle load `2/g * (1 - r/K)` of the two-transmissions-per-member scheme.
pub fn load_formula(k: usize, r: usize, g: usize) -> Result<Rational> {
    if g < 2 {
        return Err(Error::InvalidParameters(format!(
            "identity size g={g} < 2 admits no exchange round"
        )));
    }
    if g > k {
        return Err(Error::InvalidParameters(format!("g={g} exceeds K={k}")));
    }
    if r == 0 || r >= k {
        return Err(Error::InvalidParameters(format!(
            "computation load r={r} outside 1..{k}"
        )));
    }
    Ok(Rational::new(2 * (k - r) as u64, (g * k) as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{fano_matrix, man_matrix};

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn fano_validates_with_r4() {
        let report = validate_matrix(&fano_matrix());
        assert!(report.is_ok(), "{report:?}");
        assert_eq!(report.r, 4);
    }

    #[test]
    fn all_ones_has_no_mapping_server() {
        let m = BinaryComputingMatrix::new(
            labels("k", 2),
            labels("f", 2),
            vec![vec![1, 1], vec![1, 1]],
            0,
        )
        .unwrap();
        let report = validate_matrix(&m);
        assert!(!report.is_ok());
        assert!(report
            .violations
            .contains(&MatrixViolation::LoadOutOfRange { r: 0, k: 2 }));
        let unmapped = report
            .violations
            .iter()
            .filter(|v| matches!(v, MatrixViolation::Unmapped { .. }))
            .count();
        assert_eq!(unmapped, 2);
    }

    #[test]
    fn fully_mapped_column_has_distinct_message() {
        let m = BinaryComputingMatrix::new(
            labels("k", 3),
            labels("f", 2),
            vec![vec![0, 1], vec![0, 0], vec![0, 0]],
            2,
        )
        .unwrap();
        let report = validate_matrix(&m);
        assert_eq!(
            report.violations,
            vec![MatrixViolation::FullyMapped {
                column: "f1".into()
            }]
        );
        assert!(report.violations[0].to_string().contains("r=K"));
    }

    #[test]
    fn mismatched_column_is_named() {
        let m = BinaryComputingMatrix::new(
            labels("k", 3),
            labels("f", 2),
            vec![vec![0, 1], vec![0, 0], vec![1, 1]],
            2,
        )
        .unwrap();
        let report = validate_matrix(&m);
        assert_eq!(
            report.violations,
            vec![MatrixViolation::ZeroCountMismatch {
                column: "f2".into(),
                zeros: 1,
                expected: 2
            }]
        );
    }

    #[test]
    fn man_5_2_validates_by_column_scan() {
        let m = man_matrix(5, 2).unwrap();
        assert_eq!((m.k(), m.n()), (5, 10));
        for f in 0..m.n() {
            let zeros = (0..5).filter(|&k| m.get(k, f) == 0).count();
            assert_eq!(zeros, 2);
        }
        assert!(validate_matrix(&m).is_ok());
    }

    #[test]
    fn rejects_ragged_and_nonbinary() {
        assert!(BinaryComputingMatrix::new(
            labels("k", 2),
            labels("f", 2),
            vec![vec![0], vec![0, 1]],
            1
        )
        .is_err());
        assert!(
            BinaryComputingMatrix::new(labels("k", 1), labels("f", 1), vec![vec![2]], 1).is_err()
        );
        assert!(BinaryComputingMatrix::new(
            vec!["a".into(), "a".into()],
            labels("f", 1),
            vec![vec![0], vec![1]],
            1
        )
        .is_err());
    }

    #[test]
    fn empty_cover_misses_every_one() {
        let m = fano_matrix();
        let report = verify_cover(&m, &IdentityCover::default());
        assert_eq!(report.missing.len(), 21);
        assert!(report.overlapping.is_empty());
    }

    #[test]
    fn duplicated_member_overlaps() {
        let m = fano_matrix();
        let cover =
            crate::cover::search_cover(&m, 3, crate::cover::SearchMode::Exact, &Default::default())
                .unwrap();
        let mut members = cover.members().to_vec();
        members.push(members[0].clone());
        let report = verify_cover(&m, &IdentityCover::new(members));
        assert!(report.missing.is_empty());
        assert!(report.malformed.is_empty());
        assert_eq!(report.overlapping.len(), 3);
        for o in &report.overlapping {
            assert_eq!(o.members, vec![0, 7]);
        }
    }

    #[test]
    fn member_defects_are_reported() {
        let m = fano_matrix();
        // rows 1,2 ; columns 127,145: C(2,145)=0 on the diagonal, C(1,145)=1 off it.
        let member = IdentitySubmatrix::new(vec![0, 1], vec![0, 1]).unwrap();
        let defects = member.defects(&m);
        assert!(defects
            .iter()
            .any(|d| matches!(d, MemberDefect::ZeroOnDiagonal { .. })));
        assert!(defects
            .iter()
            .any(|d| matches!(d, MemberDefect::OneOffDiagonal { .. })));
        let single = IdentitySubmatrix::new(vec![0], vec![0]).unwrap();
        assert_eq!(single.defects(&m), vec![MemberDefect::TooSmall { size: 1 }]);
        let oob = IdentitySubmatrix::new(vec![0, 9], vec![0, 1]).unwrap();
        assert_eq!(
            oob.defects(&m),
            vec![MemberDefect::RowOutOfRange { index: 9 }]
        );
    }

    #[test]
    fn column_reuse_with_disjoint_pairings_is_allowed() {
        // Two members share column f1 but cover different one-entries of it.
        let m = BinaryComputingMatrix::new(
            labels("k", 4),
            labels("f", 2),
            vec![vec![1, 0], vec![0, 1], vec![1, 0], vec![0, 1]],
            2,
        )
        .unwrap();
        let cover = IdentityCover::new(vec![
            IdentitySubmatrix::new(vec![0, 1], vec![0, 1]).unwrap(),
            IdentitySubmatrix::new(vec![2, 3], vec![0, 1]).unwrap(),
        ]);
        assert!(verify_cover(&m, &cover).is_ok());
        assert!(count_identity_check(&cover, &m).unwrap());
    }

    #[test]
    fn counting_identity() {
        let m = fano_matrix();
        let cover =
            crate::cover::search_cover(&m, 3, crate::cover::SearchMode::Exact, &Default::default())
                .unwrap();
        assert!(count_identity_check(&cover, &m).unwrap());
        assert!(!count_identity_check(&cover.without_member(0), &m).unwrap());

        let man = man_matrix(5, 2).unwrap();
        let man_cover = crate::cover::man_cover(&man).unwrap();
        assert_eq!(man_cover.len(), 10);
        assert!(count_identity_check(&man_cover, &man).unwrap());

        let mixed = IdentityCover::new(vec![
            IdentitySubmatrix::from_pairs([(0, 0), (1, 4)]),
            IdentitySubmatrix::from_pairs([(0, 1), (3, 3), (4, 2)]),
        ]);
        assert_eq!(
            count_identity_check(&mixed, &m),
            Err(Error::NonUniformCover)
        );
    }

    #[test]
    fn load_formula_values() {
        assert_eq!(load_formula(7, 4, 3).unwrap(), Rational::new(2, 7));
        assert_eq!(load_formula(5, 2, 3).unwrap(), Rational::new(2, 5));
        for k in 2..12 {
            assert_eq!(
                load_formula(k, k - 1, k).unwrap(),
                Rational::new(2, (k * k) as u64)
            );
        }
        assert!(load_formula(7, 4, 1).is_err());
        assert!(load_formula(7, 7, 3).is_err());
    }

    #[test]
    fn text_formats_round_trip() {
        let m = fano_matrix();
        let parsed = BinaryComputingMatrix::parse(&m.to_text()).unwrap();
        assert_eq!(parsed, m);
        assert_eq!(parsed.col_labels()[0], "127");

        let cover =
            crate::cover::search_cover(&m, 3, crate::cover::SearchMode::Exact, &Default::default())
                .unwrap();
        let text = cover.to_text(&m);
        assert!(text.starts_with("7\n"));
        assert_eq!(IdentityCover::parse(&text, &m).unwrap(), cover);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = BinaryComputingMatrix::parse("2 2 1\na b\nx y\n0 1\n1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err:?}");
        let m = fano_matrix();
        let err = IdentityCover::parse("1\n2 1 2 127 999\n", &m).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn transpose_is_not_necessarily_valid() {
        // A valid 3x2 matrix whose transpose has unequal column weights.
        let m = BinaryComputingMatrix::new(
            labels("k", 3),
            labels("f", 2),
            vec![vec![0, 0], vec![0, 1], vec![1, 0]],
            2,
        )
        .unwrap();
        assert!(validate_matrix(&m).is_ok());
        assert!(!validate_matrix(&m.transpose()).is_ok());
    }
}
