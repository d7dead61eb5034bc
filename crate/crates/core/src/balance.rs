//! Sender plans and transmission-load balancing.
//!
//! Each cover member needs one coded and one uncoded sender, two distinct
//! servers among its rows. The balanced plan replicates every server
//! `gamma = S/K` times on the left of a bipartite graph whose right side is the
//! cover members. A first perfect matching assigns coded duties. All copies of
//! a coded sender are then disconnected from the members it serves, which
//! leaves a `gamma(g-1)`-regular graph, and a second perfect matching assigns
//! the uncoded duties.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cover::row_regularity;
use crate::error::{Error, Result};
use crate::matrix::{BinaryComputingMatrix, IdentityCover};
use crate::shuffle::{ShuffleTranscript, TransmissionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemberSenders {
    pub coded: usize,
    pub uncoded: usize,
}

/// Per cover member, the servers sending its coded and uncoded transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenderPlan {
    senders: Vec<MemberSenders>,
}

#[derive(Serialize, Deserialize)]
struct PlanEntry {
    coded: String,
    uncoded: String,
}

impl SenderPlan {
    pub fn new(senders: Vec<MemberSenders>) -> Self {
        SenderPlan { senders }
    }

    pub fn len(&self) -> usize {
        self.senders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.senders.is_empty()
    }

    pub fn senders(&self) -> &[MemberSenders] {
        &self.senders
    }

    pub fn for_member(&self, member: usize) -> MemberSenders {
        self.senders[member]
    }

    /// Members whose coded transmission `server` sends.
    pub fn coded_duties(&self, server: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.senders[i].coded == server)
            .collect()
    }

    /// Members whose uncoded transmission `server` sends.
    pub fn uncoded_duties(&self, server: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.senders[i].uncoded == server)
            .collect()
    }

    /// Checks that every member gets two distinct senders taken from its rows.
    pub fn check_against(&self, cover: &IdentityCover) -> Result<()> {
        if self.len() != cover.len() {
            return Err(Error::InvalidPlan(format!(
                "plan covers {} members, cover has {}",
                self.len(),
                cover.len()
            )));
        }
        for (i, (s, member)) in self.senders.iter().zip(cover.members()).enumerate() {
            if s.coded == s.uncoded {
                return Err(Error::InvalidPlan(format!(
                    "member {i}: coded and uncoded sender coincide"
                )));
            }
            if !member.contains_row(s.coded) || !member.contains_row(s.uncoded) {
                return Err(Error::InvalidPlan(format!(
                    "member {i}: senders must be rows of the member"
                )));
            }
        }
        Ok(())
    }

    /// JSON object `member index -> {coded, uncoded}` with server labels.
    pub fn to_json(&self, m: &BinaryComputingMatrix) -> serde_json::Value {
        let map: BTreeMap<usize, PlanEntry> = self
            .senders
            .iter()
            .enumerate()
            .map(|(i, s)| {
                (
                    i,
                    PlanEntry {
                        coded: m.row_label(s.coded).to_owned(),
                        uncoded: m.row_label(s.uncoded).to_owned(),
                    },
                )
            })
            .collect();
        serde_json::to_value(map).expect("plan serializes")
    }

    pub fn from_json(value: &serde_json::Value, m: &BinaryComputingMatrix) -> Result<Self> {
        let map: BTreeMap<usize, PlanEntry> =
            serde_json::from_value(value.clone()).map_err(|e| Error::InvalidPlan(e.to_string()))?;
        let resolve = |label: &str| {
            m.row_index(label)
                .ok_or_else(|| Error::InvalidPlan(format!("unknown server {label}")))
        };
        let mut senders = Vec::with_capacity(map.len());
        for (expected, (i, entry)) in map.iter().enumerate() {
            if *i != expected {
                return Err(Error::InvalidPlan(format!(
                    "member {expected} missing from plan"
                )));
            }
            senders.push(MemberSenders {
                coded: resolve(&entry.coded)?,
                uncoded: resolve(&entry.uncoded)?,
            });
        }
        Ok(SenderPlan { senders })
    }
}

/// The unbalanced plan: the two lowest-indexed eligible rows of each member
/// send, the first coded and the second uncoded.
pub fn default_plan(cover: &IdentityCover, eligible: impl Fn(usize) -> bool) -> Result<SenderPlan> {
    let senders = cover
        .members()
        .iter()
        .enumerate()
        .map(|(i, member)| {
            let mut rows: Vec<usize> = member
                .rows()
                .iter()
                .copied()
                .filter(|&k| eligible(k))
                .collect();
            rows.sort_unstable();
            match rows[..] {
                [coded, uncoded, ..] => Ok(MemberSenders { coded, uncoded }),
                _ => Err(Error::InvalidPlan(format!(
                    "member {i} has fewer than two eligible senders"
                ))),
            }
        })
        .collect::<Result<_>>()?;
    Ok(SenderPlan { senders })
}

// ---------------------------------------------------------------------------
// Preconditions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BalancePreconditions {
    pub s: usize,
    pub k: usize,
    /// `S / K` when integral.
    pub gamma: Option<usize>,
    /// Every server appears in the rows of the same number of members.
    pub row_regular: bool,
    pub counts: Vec<usize>,
}

impl BalancePreconditions {
    pub fn hold(&self) -> bool {
        self.gamma.is_some() && self.row_regular
    }
}

pub fn balance_preconditions(m: &BinaryComputingMatrix, c: &IdentityCover) -> BalancePreconditions {
    let regularity = row_regularity(c, m.k());
    let (s, k) = (c.len(), m.k());
    BalancePreconditions {
        s,
        k,
        gamma: (k > 0 && s % k == 0).then(|| s / k),
        row_regular: regularity.regular,
        counts: regularity.counts,
    }
}

// ---------------------------------------------------------------------------
// Bipartite graph and matching
// ---------------------------------------------------------------------------

/// Left vertices are `(server, copy)` pairs in server order then copy order;
/// right vertices are cover members in cover order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalanceGraph {
    servers: Vec<usize>,
    gamma: usize,
    members: usize,
    adj: Vec<Vec<usize>>,
}

impl BalanceGraph {
    /// Builds the graph over the given servers with `gamma = S / |servers|`.
    pub fn new(cover: &IdentityCover, servers: &[usize]) -> Result<Self> {
        if servers.is_empty() || cover.len() % servers.len() != 0 {
            return Err(Error::BalanceUnavailable(format!(
                "gamma = S/K = {}/{} is not an integer",
                cover.len(),
                servers.len()
            )));
        }
        let gamma = cover.len() / servers.len();
        let mut adj = Vec::with_capacity(cover.len());
        for &server in servers {
            let row: Vec<usize> = (0..cover.len())
                .filter(|&i| cover.members()[i].contains_row(server))
                .collect();
            for _ in 0..gamma {
                adj.push(row.clone());
            }
        }
        Ok(BalanceGraph {
            servers: servers.to_vec(),
            gamma,
            members: cover.len(),
            adj,
        })
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn left_len(&self) -> usize {
        self.adj.len()
    }

    pub fn right_len(&self) -> usize {
        self.members
    }

    pub fn server_of(&self, left: usize) -> usize {
        self.servers[left / self.gamma]
    }

    pub fn left_degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn right_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.members];
        for row in &self.adj {
            for &j in row {
                deg[j] += 1;
            }
        }
        deg
    }

    /// Common degree of every vertex, if the graph is regular.
    pub fn regular_degree(&self) -> Option<usize> {
        let left = self.left_degrees();
        let right = self.right_degrees();
        let d = *left.first()?;
        (left.iter().chain(&right).all(|&x| x == d)).then_some(d)
    }

    /// Drops, for every matched `(k^p, C_i)`, all edges `(k^j, C_i)`.
    pub fn without_matched_servers(&self, matching: &[usize]) -> BalanceGraph {
        let mut out = self.clone();
        for (left, &member) in matching.iter().enumerate() {
            let server_block = left / self.gamma;
            for copy in 0..self.gamma {
                out.adj[server_block * self.gamma + copy].retain(|&j| j != member);
            }
        }
        out
    }
}

/// Perfect matching of a regular bipartite graph by repeated augmenting
/// paths. Returns, per left vertex, its matched right vertex.
pub fn perfect_matching(graph: &BalanceGraph) -> Result<Vec<usize>> {
    if graph.left_len() != graph.right_len() {
        return Err(Error::MatchingPrecondition(format!(
            "sides differ: {} left, {} right",
            graph.left_len(),
            graph.right_len()
        )));
    }
    match graph.regular_degree() {
        Some(d) if d >= 1 => {}
        _ => {
            return Err(Error::MatchingPrecondition(
                "graph is not regular with positive degree".into(),
            ))
        }
    }
    let n = graph.right_len();
    let mut match_right = vec![usize::MAX; n];
    let mut visited = vec![false; n];
    for left in 0..graph.left_len() {
        visited.iter_mut().for_each(|v| *v = false);
        if !augment(graph, left, &mut match_right, &mut visited) {
            return Err(Error::Internal(format!(
                "no augmenting path for left vertex {left} in a regular graph"
            )));
        }
    }
    let mut match_left = vec![usize::MAX; graph.left_len()];
    for (right, &left) in match_right.iter().enumerate() {
        match_left[left] = right;
    }
    Ok(match_left)
}

fn augment(
    graph: &BalanceGraph,
    left: usize,
    match_right: &mut [usize],
    visited: &mut [bool],
) -> bool {
    for &right in &graph.adj[left] {
        if visited[right] {
            continue;
        }
        visited[right] = true;
        if match_right[right] == usize::MAX
            || augment(graph, match_right[right], match_right, visited)
        {
            match_right[right] = left;
            return true;
        }
    }
    false
}

/// Two-matching construction over an arbitrary server subset. Fails when the
/// graph or its residual is not regular.
pub fn plan_over_servers(cover: &IdentityCover, servers: &[usize]) -> Result<SenderPlan> {
    let graph = BalanceGraph::new(cover, servers)?;
    let degree = graph.regular_degree().ok_or_else(|| {
        Error::BalanceUnavailable("servers do not appear in equally many members".into())
    })?;
    let first = perfect_matching(&graph)?;
    let residual = graph.without_matched_servers(&first);
    let expected = degree - graph.gamma();
    if residual.regular_degree() != Some(expected) || expected == 0 {
        return Err(Error::Internal(format!(
            "residual graph is not {expected}-regular after removing the first matching"
        )));
    }
    let second = perfect_matching(&residual)?;
    let mut coded = vec![usize::MAX; cover.len()];
    let mut uncoded = vec![usize::MAX; cover.len()];
    for left in 0..graph.left_len() {
        coded[first[left]] = graph.server_of(left);
        uncoded[second[left]] = graph.server_of(left);
    }
    let senders: Vec<MemberSenders> = coded
        .into_iter()
        .zip(uncoded)
        .map(|(coded, uncoded)| MemberSenders { coded, uncoded })
        .collect();
    if let Some(i) = senders.iter().position(|s| s.coded == s.uncoded) {
        return Err(Error::Internal(format!(
            "member {i} got the same server twice"
        )));
    }
    Ok(SenderPlan { senders })
}

/// Balanced plan in which every server sends exactly `gamma` coded and
/// `gamma` uncoded transmissions.
pub fn build_sender_plan(m: &BinaryComputingMatrix, c: &IdentityCover) -> Result<SenderPlan> {
    let pre = balance_preconditions(m, c);
    if pre.gamma.is_none() {
        return Err(Error::BalanceUnavailable(format!(
            "gamma = S/K = {}/{} is not an integer",
            pre.s, pre.k
        )));
    }
    if !pre.row_regular {
        return Err(Error::BalanceUnavailable(
            "servers do not appear in equally many members".into(),
        ));
    }
    match c.uniform_size() {
        Some(g) if g >= 2 => {}
        Some(_) => return Err(Error::BalanceUnavailable("identity size g < 2".into())),
        None => return Err(Error::NonUniformCover),
    }
    let servers: Vec<usize> = (0..m.k()).collect();
    plan_over_servers(c, &servers)
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditRow {
    pub server: String,
    pub coded_bytes: u64,
    pub uncoded_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    /// `S beta T / K` bytes, when integral.
    pub expected_per_kind: Option<u64>,
    pub follows_plan: bool,
    pub balanced: bool,
}

impl AuditReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("server,coded_bytes,uncoded_bytes,total_bytes\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.server,
                row.coded_bytes,
                row.uncoded_bytes,
                row.coded_bytes + row.uncoded_bytes
            );
        }
        out
    }
}

/// Tallies the bytes each server sent in `transcript` and checks that every
/// server sent exactly `S beta T / K` coded and as many uncoded bytes, where
/// `payload_bytes = beta T`.
pub fn audit_plan(
    plan: &SenderPlan,
    transcript: &ShuffleTranscript,
    m: &BinaryComputingMatrix,
    payload_bytes: usize,
) -> AuditReport {
    let k = m.k();
    let mut coded = vec![0u64; k];
    let mut uncoded = vec![0u64; k];
    let mut follows_plan = transcript.transmissions().len() == 2 * plan.len();
    for tx in transcript.transmissions() {
        let bytes = tx.payload.len() as u64;
        match tx.kind {
            TransmissionKind::Coded => coded[tx.sender] += bytes,
            TransmissionKind::Uncoded => uncoded[tx.sender] += bytes,
        }
        let expected = (tx.member < plan.len()).then(|| plan.for_member(tx.member));
        let planned = expected.map(|s| match tx.kind {
            TransmissionKind::Coded => s.coded,
            TransmissionKind::Uncoded => s.uncoded,
        });
        if planned != Some(tx.sender) || tx.payload.len() != payload_bytes {
            follows_plan = false;
        }
    }
    let total = (plan.len() * payload_bytes) as u64;
    let expected_per_kind = (k > 0 && total % k as u64 == 0).then(|| total / k as u64);
    let balanced = follows_plan
        && expected_per_kind
            .is_some_and(|e| coded.iter().all(|&c| c == e) && uncoded.iter().all(|&u| u == e));
    AuditReport {
        rows: (0..k)
            .map(|s| AuditRow {
                server: m.row_label(s).to_owned(),
                coded_bytes: coded[s],
                uncoded_bytes: uncoded[s],
            })
            .collect(),
        expected_per_kind,
        follows_plan,
        balanced,
    }
}
