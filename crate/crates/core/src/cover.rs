//! Non-overlapping identity submatrix covers.
//!
//! Closed-form covers exist for the subset, `t`-subset and transversal
//! constructions. Anything else goes through [`search_cover`], which works on
//! the one-entries of the matrix: a size-`g` identity submatrix is a set of
//! `g` one-entries that pairwise share no row and no column and whose cross
//! entries are all zero.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constructions::{
    colex_subsets, man_matrix, t_subset_matrix, transversal_matrix, transversal_point, Construction,
};
use crate::error::{Error, Result};
use crate::matrix::{
    validate_matrix, verify_cover, BinaryComputingMatrix, IdentityCover, IdentitySubmatrix,
};

fn subset_columns(m: &BinaryComputingMatrix, size: usize) -> HashMap<Vec<usize>, usize> {
    colex_subsets(m.k(), size)
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect()
}

/// One member per `(r+1)`-subset `B`: rows `B`, with row `k` paired to the
/// column indexed by `B \ {k}`.
pub fn man_cover(m: &BinaryComputingMatrix) -> Result<IdentityCover> {
    let (k, r) = (m.k(), m.r());
    let expected = man_matrix(k, r).map_err(|e| Error::NotConstructionShaped {
        expected: "subset-scheme",
        reason: e.to_string(),
    })?;
    if *m != expected {
        return Err(Error::NotConstructionShaped {
            expected: "subset-scheme",
            reason: format!("differs from the K={k}, r={r} subset matrix"),
        });
    }
    let columns = subset_columns(m, r);
    let members = colex_subsets(k, r + 1)
        .into_iter()
        .map(|b| {
            IdentitySubmatrix::from_pairs(b.iter().map(|&row| {
                let rest: Vec<usize> = b.iter().copied().filter(|&x| x != row).collect();
                (row - 1, columns[&rest])
            }))
        })
        .collect();
    Ok(IdentityCover::new(members))
}

/// One member per `(t-1)`-subset `D`: rows `[v] \ D`, with row `k` paired to
/// the column indexed by `D + {k}`.
pub fn t_subset_cover(m: &BinaryComputingMatrix) -> Result<IdentityCover> {
    let v = m.k();
    let t = v.saturating_sub(m.r());
    let expected = t_subset_matrix(v, t).map_err(|e| Error::NotConstructionShaped {
        expected: "t-subset",
        reason: e.to_string(),
    })?;
    if *m != expected {
        return Err(Error::NotConstructionShaped {
            expected: "t-subset",
            reason: format!("differs from the v={v}, t={t} t-subset matrix"),
        });
    }
    let columns = subset_columns(m, t);
    let members = colex_subsets(v, t - 1)
        .into_iter()
        .map(|d| {
            IdentitySubmatrix::from_pairs((1..=v).filter(|x| !d.contains(x)).map(|row| {
                let mut col = d.clone();
                col.push(row);
                col.sort_unstable();
                (row - 1, columns[&col])
            }))
        })
        .collect();
    Ok(IdentityCover::new(members))
}

/// One member per `(group i, slope a)`: rows `B_{a,b}` for every `b`, with
/// `B_{a,b}` paired to its point in group `i`.
pub fn transversal_cover(m: &BinaryComputingMatrix) -> Result<IdentityCover> {
    let n = (1..=m.k()).find(|x| x * x >= m.k()).unwrap_or(0);
    let shape_err = |reason: String| Error::NotConstructionShaped {
        expected: "transversal-design",
        reason,
    };
    if n == 0 || n * n != m.k() || m.n() % n != 0 {
        return Err(shape_err(format!("K={} is not n^2 with n | N", m.k())));
    }
    let k = m.n() / n;
    let expected = transversal_matrix(k, n).map_err(|e| shape_err(e.to_string()))?;
    if *m != expected {
        return Err(shape_err(format!("differs from TD({k},{n})")));
    }
    let mut members = Vec::with_capacity(k * n);
    for group in 0..k {
        for a in 0..n {
            members.push(IdentitySubmatrix::from_pairs(
                (0..n).map(|b| (a * n + b, group * n + transversal_point(a, b, group, n))),
            ));
        }
    }
    Ok(IdentityCover::new(members))
}

/// The closed-form cover for constructions that have one.
pub fn analytic_cover(
    construction: &Construction,
    m: &BinaryComputingMatrix,
) -> Option<Result<IdentityCover>> {
    match construction {
        Construction::Man { .. } => Some(man_cover(m)),
        Construction::TSubset { .. } => Some(t_subset_cover(m)),
        Construction::Transversal { .. } => Some(transversal_cover(m)),
        Construction::Fano | Construction::Bibd(_) => None,
    }
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Complete backtracking; fails only when no cover exists or the budget runs out.
    Exact,
    /// Seeded greedy growth with restarts; may miss covers that exist.
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    pub seed: u64,
    pub greedy_restarts: usize,
    /// Maximum number of backtracking nodes in exact mode.
    pub node_budget: u64,
    /// Maximum number of candidate identity submatrices enumerated in exact mode.
    pub candidate_budget: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 0,
            greedy_restarts: 64,
            node_budget: 20_000_000,
            candidate_budget: 2_000_000,
        }
    }
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn disjoint(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == 0)
    }
    fn union_with(&mut self, other: &Bits) {
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a |= b);
    }
    fn remove(&mut self, other: &Bits) {
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a &= !b);
    }
}

struct OnesGraph {
    entries: Vec<(usize, usize)>,
    compatible: Vec<Bits>,
}

impl OnesGraph {
    fn new(m: &BinaryComputingMatrix) -> Self {
        let entries = m.one_entries();
        let compatible = entries
            .iter()
            .map(|&(k1, f1)| {
                let mut bits = Bits::new(entries.len());
                for (j, &(k2, f2)) in entries.iter().enumerate() {
                    if k1 != k2 && f1 != f2 && !m.is_one(k1, f2) && !m.is_one(k2, f1) {
                        bits.set(j);
                    }
                }
                bits
            })
            .collect();
        OnesGraph {
            entries,
            compatible,
        }
    }

    fn fits(&self, member: &[usize], x: usize) -> bool {
        member.iter().all(|&y| self.compatible[y].get(x))
    }

    fn to_member(&self, member: &[usize]) -> IdentitySubmatrix {
        IdentitySubmatrix::from_pairs(member.iter().map(|&e| self.entries[e]))
    }
}

fn check_preconditions(m: &BinaryComputingMatrix, g: usize) -> Result<()> {
    validate_matrix(m).into_result()?;
    if g < 2 {
        return Err(Error::Infeasible(format!("identity size g={g} < 2")));
    }
    if g > m.k() || g > m.n() {
        return Err(Error::Infeasible(format!(
            "g={g} exceeds the matrix dimensions {}x{}",
            m.k(),
            m.n()
        )));
    }
    let ones = m.n() * (m.k() - m.r());
    if ones % g != 0 {
        return Err(Error::Infeasible(format!(
            "N(K-r) = {ones} is not divisible by g={g}"
        )));
    }
    Ok(())
}

/// Finds a non-overlapping cover of `m` by identity submatrices of size `g`.
///
/// Deterministic for a given `(m, g, mode, config)`.
pub fn search_cover(
    m: &BinaryComputingMatrix,
    g: usize,
    mode: SearchMode,
    config: &SearchConfig,
) -> Result<IdentityCover> {
    check_preconditions(m, g)?;
    let graph = OnesGraph::new(m);
    let cover = match mode {
        SearchMode::Exact => ExactSearch::new(&graph, g, config)?.run()?,
        SearchMode::Greedy => greedy(&graph, g, config)?,
    };
    let report = verify_cover(m, &cover);
    if !report.is_ok() {
        return Err(Error::Internal(format!(
            "search produced an invalid cover: {report:?}"
        )));
    }
    Ok(cover)
}

struct ExactSearch<'a> {
    graph: &'a OnesGraph,
    candidates: Vec<Bits>,
    members: Vec<Vec<usize>>,
    by_first: Vec<Vec<usize>>,
    by_entry: Vec<Vec<usize>>,
    nodes: u64,
    node_budget: u64,
}

impl<'a> ExactSearch<'a> {
    fn new(graph: &'a OnesGraph, g: usize, config: &SearchConfig) -> Result<Self> {
        let e = graph.entries.len();
        let mut search = ExactSearch {
            graph,
            candidates: Vec::new(),
            members: Vec::new(),
            by_first: vec![Vec::new(); e],
            by_entry: vec![Vec::new(); e],
            nodes: 0,
            node_budget: config.node_budget,
        };
        let mut current = Vec::with_capacity(g);
        for first in 0..e {
            current.push(first);
            search.enumerate(&mut current, g, config.candidate_budget)?;
            current.pop();
        }
        Ok(search)
    }

    /// Extends `current` with later entries only, so each candidate is
    /// produced once, anchored at its smallest entry.
    fn enumerate(&mut self, current: &mut Vec<usize>, g: usize, budget: usize) -> Result<()> {
        if current.len() == g {
            if self.members.len() >= budget {
                return Err(Error::BudgetExhausted(format!(
                    "{budget} candidate submatrices"
                )));
            }
            let idx = self.members.len();
            let mut bits = Bits::new(self.graph.entries.len());
            for &x in current.iter() {
                bits.set(x);
                self.by_entry[x].push(idx);
            }
            self.by_first[current[0]].push(idx);
            self.candidates.push(bits);
            self.members.push(current.clone());
            return Ok(());
        }
        let last = *current.last().expect("non-empty");
        for x in last + 1..self.graph.entries.len() {
            if self.graph.fits(current, x) {
                current.push(x);
                self.enumerate(current, g, budget)?;
                current.pop();
            }
        }
        Ok(())
    }

    fn run(mut self) -> Result<IdentityCover> {
        let g = self.members.first().map_or(0, Vec::len);
        let mut covered = Bits::new(self.graph.entries.len());
        let mut chosen = Vec::new();
        if self.solve(&mut covered, &mut chosen)? {
            Ok(IdentityCover::new(
                chosen
                    .iter()
                    .map(|&c| self.graph.to_member(&self.members[c]))
                    .collect(),
            ))
        } else {
            Err(Error::NoCoverExists { g: g.max(2) })
        }
    }

    fn solve(&mut self, covered: &mut Bits, chosen: &mut Vec<usize>) -> Result<bool> {
        self.nodes += 1;
        if self.nodes > self.node_budget {
            return Err(Error::BudgetExhausted(format!(
                "{} search nodes",
                self.node_budget
            )));
        }
        let Some(first) = (0..self.graph.entries.len()).find(|&x| !covered.get(x)) else {
            return Ok(true);
        };
        for i in 0..self.by_first[first].len() {
            let c = self.by_first[first][i];
            if !self.candidates[c].disjoint(covered) {
                continue;
            }
            covered.union_with(&self.candidates[c]);
            chosen.push(c);
            if self.every_entry_coverable(covered) && self.solve(covered, chosen)? {
                return Ok(true);
            }
            chosen.pop();
            covered.remove(&self.candidates[c]);
        }
        Ok(false)
    }

    fn every_entry_coverable(&self, covered: &Bits) -> bool {
        (0..self.graph.entries.len()).all(|x| {
            covered.get(x)
                || self.by_entry[x]
                    .iter()
                    .any(|&c| self.candidates[c].disjoint(covered))
        })
    }
}

fn greedy(graph: &OnesGraph, g: usize, config: &SearchConfig) -> Result<IdentityCover> {
    let e = graph.entries.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..e).collect();
    for attempt in 0..config.greedy_restarts.max(1) {
        if attempt > 0 {
            order.shuffle(&mut rng);
        }
        let mut covered = vec![false; e];
        let mut members = Vec::new();
        let complete = loop {
            let Some(first) = covered.iter().position(|c| !c) else {
                break true;
            };
            let mut member = vec![first];
            for &x in &order {
                if member.len() == g {
                    break;
                }
                if !covered[x] && x != first && graph.fits(&member, x) {
                    member.push(x);
                }
            }
            if member.len() < g {
                break false;
            }
            for &x in &member {
                covered[x] = true;
            }
            members.push(graph.to_member(&member));
        };
        if complete {
            return Ok(IdentityCover::new(members));
        }
    }
    Err(Error::BudgetExhausted(format!(
        "{} greedy restarts",
        config.greedy_restarts.max(1)
    )))
}

// ---------------------------------------------------------------------------
// Row regularity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowRegularity {
    /// Per server, the number of members whose rows contain it.
    pub counts: Vec<usize>,
    pub regular: bool,
}

/// Counts how many members each of the `k` servers appears in; regular when
/// every count equals `S g / K`.
pub fn row_regularity(c: &IdentityCover, k: usize) -> RowRegularity {
    let mut counts = vec![0; k];
    for member in c.members() {
        for &row in member.rows() {
            if row < k {
                counts[row] += 1;
            }
        }
    }
    let regular = match c.uniform_size() {
        Some(g) if k > 0 && (c.len() * g) % k == 0 => {
            let expected = c.len() * g / k;
            counts.iter().all(|&x| x == expected)
        }
        _ => false,
    };
    RowRegularity { counts, regular }
}
