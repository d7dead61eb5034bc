//! Map, coded shuffle and reduce over a verified identity submatrix cover.
//!
//! Reduce functions and their indices are 0-based internally; reports and
//! error messages number functions from 1.

use std::sync::OnceLock;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::balance::{MemberSenders, SenderPlan};
use crate::error::{Error, Result};
use crate::matrix::{validate_matrix, verify_cover, BinaryComputingMatrix, IdentityCover};
use crate::rational::Rational;

pub const DEFAULT_SUBFILE_LEN: usize = 64;

/// A fully specified job: matrix, verified uniform cover, `Q` reduce
/// functions producing `T`-byte intermediate values, and the seed for the
/// synthetic subfile contents.
#[derive(Debug)]
pub struct JobSpec {
    matrix: BinaryComputingMatrix,
    cover: IdentityCover,
    g: usize,
    q: usize,
    t: usize,
    file_seed: u64,
    subfile_len: usize,
    table: OnceLock<Vec<u8>>,
    outputs: OnceLock<Vec<[u8; 32]>>,
}

impl JobSpec {
    /// Requires a valid matrix, a cover passing verification with a single
    /// size `g >= 2`, `Q >= K` with `K | Q`, and `T >= 1`.
    pub fn new(
        matrix: BinaryComputingMatrix,
        cover: IdentityCover,
        q: usize,
        t: usize,
        file_seed: u64,
    ) -> Result<Self> {
        validate_matrix(&matrix).into_result()?;
        verify_cover(&matrix, &cover).into_result()?;
        let g = cover.uniform_size().ok_or(Error::NonUniformCover)?;
        if g < 2 {
            return Err(Error::InvalidParameters(format!(
                "identity size g = {g} < 2"
            )));
        }
        if t == 0 {
            return Err(Error::InvalidParameters("T must be at least 1".into()));
        }
        if q < matrix.k() || q % matrix.k() != 0 {
            return Err(Error::InvalidParameters(format!(
                "Q = {q} must be a positive multiple of K = {}",
                matrix.k()
            )));
        }
        Ok(JobSpec {
            matrix,
            cover,
            g,
            q,
            t,
            file_seed,
            subfile_len: DEFAULT_SUBFILE_LEN,
            table: OnceLock::new(),
            outputs: OnceLock::new(),
        })
    }

    pub fn with_subfile_len(mut self, len: usize) -> Self {
        self.subfile_len = len;
        self.table = OnceLock::new();
        self.outputs = OnceLock::new();
        self
    }

    pub fn matrix(&self) -> &BinaryComputingMatrix {
        &self.matrix
    }

    pub fn cover(&self) -> &IdentityCover {
        &self.cover
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn file_seed(&self) -> u64 {
        self.file_seed
    }

    pub fn subfile_len(&self) -> usize {
        self.subfile_len
    }

    /// Contiguous `W_k` blocks of size `Q/K` in server order.
    pub fn standard_assignment(&self) -> ReduceAssignment {
        let servers: Vec<usize> = (0..self.matrix.k()).collect();
        ReduceAssignment::contiguous(self.q, self.matrix.k(), &servers)
            .expect("Q is a multiple of K by construction")
    }

    /// Pseudorandom contents of subfile `f`.
    pub fn subfile(&self, f: usize) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.file_seed);
        rng.set_stream(f as u64);
        let mut bytes = vec![0u8; self.subfile_len];
        rng.fill_bytes(&mut bytes);
        bytes
    }

    fn table(&self) -> &[u8] {
        self.table.get_or_init(|| {
            let (n, t) = (self.matrix.n(), self.t);
            let mut data = vec![0u8; self.q * n * t];
            for f in 0..n {
                let bytes = self.subfile(f);
                let label = self.matrix.col_label(f);
                for q in 0..self.q {
                    let at = (q * n + f) * t;
                    data[at..at + t].copy_from_slice(&synth_map(q, label, &bytes, t));
                }
            }
            data
        })
    }

    /// The value `v_{q,f}` as a server that maps everything would compute it.
    pub fn oracle_iva(&self, q: usize, f: usize) -> &[u8] {
        let at = (q * self.matrix.n() + f) * self.t;
        &self.table()[at..at + self.t]
    }

    /// `u_q` computed centrally from all `N` values.
    pub fn oracle_output(&self, q: usize) -> [u8; 32] {
        self.outputs.get_or_init(|| {
            (0..self.q)
                .map(|q| reduce_digest(q, (0..self.matrix.n()).map(|f| self.oracle_iva(q, f))))
                .collect()
        })[q]
    }

    /// SHA-256 over the textual matrix, cover and numeric parameters.
    pub fn spec_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.matrix.to_text().as_bytes());
        h.update(self.cover.to_text(&self.matrix).as_bytes());
        h.update(
            format!(
                "Q={} T={} seed={} len={}\n",
                self.q, self.t, self.file_seed, self.subfile_len
            )
            .as_bytes(),
        );
        h.finalize().into()
    }
}

/// Synthetic map function: SHA-256 in counter mode over
/// `(q, label, subfile bytes, counter)`, truncated to `t` bytes.
pub fn synth_map(q: usize, label: &str, subfile: &[u8], t: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(t + 32);
    let mut counter = 0u64;
    while out.len() < t {
        let mut h = Sha256::new();
        h.update(b"cmr/map");
        h.update((q as u64).to_le_bytes());
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h.update((subfile.len() as u64).to_le_bytes());
        h.update(subfile);
        h.update(counter.to_le_bytes());
        out.extend_from_slice(&h.finalize());
        counter += 1;
    }
    out.truncate(t);
    out
}

/// Synthetic reduce function over the `N` values of function `q` in column order.
pub fn reduce_digest<'a>(q: usize, ivas: impl IntoIterator<Item = &'a [u8]>) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"cmr/reduce");
    h.update((q as u64).to_le_bytes());
    for v in ivas {
        h.update(v);
    }
    h.finalize().into()
}

// ---------------------------------------------------------------------------
// Reduce assignment
// ---------------------------------------------------------------------------

/// `W_k` for every server; inactive servers have empty sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReduceAssignment {
    q: usize,
    sets: Vec<Vec<usize>>,
    beta: usize,
}

impl ReduceAssignment {
    /// Blocks of `Q / |active|` consecutive functions, handed out in the
    /// order the active servers are listed.
    pub fn contiguous(q: usize, k: usize, active: &[usize]) -> Result<Self> {
        if active.is_empty() || q % active.len() != 0 || q == 0 {
            return Err(Error::InvalidParameters(format!(
                "Q = {q} is not a positive multiple of {} active servers",
                active.len()
            )));
        }
        let beta = q / active.len();
        let mut sets = vec![Vec::new(); k];
        for (i, &server) in active.iter().enumerate() {
            if server >= k || !sets[server].is_empty() {
                return Err(Error::InvalidParameters(format!(
                    "bad active server {server}"
                )));
            }
            sets[server] = (i * beta..(i + 1) * beta).collect();
        }
        Ok(ReduceAssignment { q, sets, beta })
    }

    /// Explicit `W_k` per server (0-based function indices). Non-empty sets
    /// must share one size and partition `0..q`.
    pub fn from_sets(q: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; q];
        let mut beta = None;
        let mut sorted = Vec::with_capacity(sets.len());
        for (k, mut set) in sets.into_iter().enumerate() {
            set.sort_unstable();
            if !set.is_empty() {
                if *beta.get_or_insert(set.len()) != set.len() {
                    return Err(Error::InvalidParameters(format!(
                        "server {k} has {} functions, others differ",
                        set.len()
                    )));
                }
            }
            for &x in &set {
                if x >= q || std::mem::replace(&mut seen[x], true) {
                    return Err(Error::InvalidParameters(format!(
                        "function {} assigned twice or out of range",
                        x + 1
                    )));
                }
            }
            sorted.push(set);
        }
        if let Some(x) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameters(format!(
                "function {} unassigned",
                x + 1
            )));
        }
        let beta = beta.ok_or_else(|| Error::InvalidParameters("no active servers".into()))?;
        Ok(ReduceAssignment {
            q,
            sets: sorted,
            beta,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn k(&self) -> usize {
        self.sets.len()
    }

    /// Functions per active server.
    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn functions(&self, k: usize) -> &[usize] {
        &self.sets[k]
    }

    pub fn is_active(&self, k: usize) -> bool {
        !self.sets[k].is_empty()
    }

    pub fn active_servers(&self) -> Vec<usize> {
        (0..self.k()).filter(|&k| self.is_active(k)).collect()
    }
}

// ---------------------------------------------------------------------------
// Per-server stores
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Absent,
    Mapped,
    Decoded,
}

/// Intermediate values held by one server, tagged by how they were obtained.
#[derive(Debug, Clone)]
pub struct IvaStore {
    n: usize,
    t: usize,
    data: Vec<u8>,
    origin: Vec<Origin>,
}

impl IvaStore {
    pub fn new(q: usize, n: usize, t: usize) -> Self {
        IvaStore {
            n,
            t,
            data: vec![0; q * n * t],
            origin: vec![Origin::Absent; q * n],
        }
    }

    pub fn origin(&self, q: usize, f: usize) -> Origin {
        self.origin[q * self.n + f]
    }

    pub fn get(&self, q: usize, f: usize) -> Option<&[u8]> {
        let i = q * self.n + f;
        (self.origin[i] != Origin::Absent).then(|| &self.data[i * self.t..(i + 1) * self.t])
    }

    /// Only values this server computed itself.
    pub fn mapped(&self, q: usize, f: usize) -> Option<&[u8]> {
        let i = q * self.n + f;
        (self.origin[i] == Origin::Mapped).then(|| &self.data[i * self.t..(i + 1) * self.t])
    }

    fn put(&mut self, q: usize, f: usize, value: &[u8], origin: Origin) {
        let i = q * self.n + f;
        self.data[i * self.t..(i + 1) * self.t].copy_from_slice(value);
        self.origin[i] = origin;
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.origin.iter().filter(|&&o| o == origin).count()
    }
}

/// How much map work a server does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapRole {
    /// Maps every subfile with a 0 in its row, for every function.
    Full,
    /// Maps only the values it needs to cancel interference and to reduce;
    /// never transmits.
    Partial,
    /// Maps nothing, never transmits and has no reduce duty.
    Absent,
}

/// Every server maps all of its subfiles.
pub fn run_map_phase(spec: &JobSpec) -> Vec<IvaStore> {
    let roles = vec![MapRole::Full; spec.matrix.k()];
    map_with_roles(spec, &roles, |_| Vec::new())
}

fn map_with_roles(
    spec: &JobSpec,
    roles: &[MapRole],
    partial_needs: impl Fn(usize) -> Vec<(usize, usize)>,
) -> Vec<IvaStore> {
    let m = &spec.matrix;
    (0..m.k())
        .map(|k| {
            let mut store = IvaStore::new(spec.q, m.n(), spec.t);
            match roles[k] {
                MapRole::Full => {
                    for f in m.mapped_by(k) {
                        for q in 0..spec.q {
                            store.put(q, f, spec.oracle_iva(q, f), Origin::Mapped);
                        }
                    }
                }
                MapRole::Partial => {
                    for (q, f) in partial_needs(k) {
                        debug_assert_eq!(m.get(k, f), 0);
                        store.put(q, f, spec.oracle_iva(q, f), Origin::Mapped);
                    }
                }
                MapRole::Absent => {}
            }
            store
        })
        .collect()
}

/// The `(q, f)` values a partial straggler must map: its own reduce inputs
/// from the subfiles it holds, plus every interference term it cancels as a
/// receiver of a coded transmission.
pub fn partial_straggler_needs(
    spec: &JobSpec,
    assignment: &ReduceAssignment,
    plan: &SenderPlan,
    k: usize,
) -> Vec<(usize, usize)> {
    let m = &spec.matrix;
    let mut needs = Vec::new();
    for &f in &m.mapped_by(k) {
        for &q in assignment.functions(k) {
            needs.push((q, f));
        }
    }
    for (i, member) in spec.cover.members().iter().enumerate() {
        if !member.contains_row(k) {
            continue;
        }
        let p = plan.for_member(i).coded;
        for (row, col) in member.pairs() {
            if row == p || row == k || !assignment.is_active(row) {
                continue;
            }
            for &q in assignment.functions(row) {
                needs.push((q, col));
            }
        }
    }
    needs.sort_unstable();
    needs.dedup();
    needs
}

// ---------------------------------------------------------------------------
// Transmissions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionKind {
    Coded,
    Uncoded,
}

impl TransmissionKind {
    pub fn code(self) -> u8 {
        match self {
            TransmissionKind::Coded => 0,
            TransmissionKind::Uncoded => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TransmissionKind::Coded),
            1 => Some(TransmissionKind::Uncoded),
            _ => None,
        }
    }
}

/// One broadcast. `described_ivas[b]` lists the `(q, f)` values XORed (or,
/// for uncoded sends, carried) in the `b`-th `T`-byte block of `payload`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub sender: usize,
    pub member: usize,
    pub kind: TransmissionKind,
    pub payload: Vec<u8>,
    pub described_ivas: Vec<Vec<(usize, usize)>>,
}

fn active_rows(
    spec: &JobSpec,
    member: usize,
    assignment: &ReduceAssignment,
) -> Vec<(usize, usize)> {
    spec.cover.members()[member]
        .pairs()
        .filter(|&(row, _)| assignment.is_active(row))
        .collect()
}

fn fetch_mapped<'a>(
    spec: &JobSpec,
    store: &'a IvaStore,
    server: usize,
    q: usize,
    f: usize,
) -> Result<&'a [u8]> {
    store.mapped(q, f).ok_or_else(|| Error::MissingIva {
        server: spec.matrix.row_label(server).to_owned(),
        q: q + 1,
        f: spec.matrix.col_label(f).to_owned(),
    })
}

/// Builds the coded and uncoded transmissions for one cover member.
pub fn encode_round(
    spec: &JobSpec,
    member: usize,
    assignment: &ReduceAssignment,
    stores: &[IvaStore],
    senders: MemberSenders,
) -> Result<(Transmission, Transmission)> {
    let MemberSenders {
        coded: p,
        uncoded: u,
    } = senders;
    let rows = active_rows(spec, member, assignment);
    let holds = |s: usize| rows.iter().any(|&(row, _)| row == s);
    if p == u || !holds(p) || !holds(u) {
        return Err(Error::InvalidPlan(format!(
            "member {member}: senders must be two distinct active rows"
        )));
    }
    let (t, beta) = (spec.t, assignment.beta());

    let mut coded = Vec::with_capacity(beta * t);
    let mut coded_desc = Vec::with_capacity(beta);
    for b in 0..beta {
        let mut block = vec![0u8; t];
        let mut desc = Vec::new();
        for &(row, col) in rows.iter().filter(|&&(row, _)| row != p) {
            let q = assignment.functions(row)[b];
            xor_into(&mut block, fetch_mapped(spec, &stores[p], p, q, col)?);
            desc.push((q, col));
        }
        coded.extend_from_slice(&block);
        coded_desc.push(desc);
    }

    let f_p = rows.iter().find(|&&(row, _)| row == p).expect("checked").1;
    let mut uncoded = Vec::with_capacity(beta * t);
    let mut uncoded_desc = Vec::with_capacity(beta);
    for &q in assignment.functions(p) {
        uncoded.extend_from_slice(fetch_mapped(spec, &stores[u], u, q, f_p)?);
        uncoded_desc.push(vec![(q, f_p)]);
    }

    Ok((
        Transmission {
            sender: p,
            member,
            kind: TransmissionKind::Coded,
            payload: coded,
            described_ivas: coded_desc,
        },
        Transmission {
            sender: u,
            member,
            kind: TransmissionKind::Uncoded,
            payload: uncoded,
            described_ivas: uncoded_desc,
        },
    ))
}

/// A value a server obtained during the shuffle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoded {
    pub server: usize,
    pub q: usize,
    pub f: usize,
}

/// Lets every active row of the member decode its missing values. Receivers
/// cancel interference only with values they mapped themselves.
pub fn apply_round(
    spec: &JobSpec,
    member: usize,
    assignment: &ReduceAssignment,
    stores: &mut [IvaStore],
    coded: &Transmission,
    uncoded: &Transmission,
) -> Result<Vec<Decoded>> {
    let rows = active_rows(spec, member, assignment);
    let (t, beta) = (spec.t, assignment.beta());
    let p = coded.sender;
    let mut decoded = Vec::new();
    for &(receiver, f_j) in rows.iter().filter(|&&(row, _)| row != p) {
        for b in 0..beta {
            let mut block = coded.payload[b * t..(b + 1) * t].to_vec();
            for &(row, col) in rows.iter().filter(|&&(row, _)| row != p && row != receiver) {
                let q = assignment.functions(row)[b];
                xor_into(
                    &mut block,
                    fetch_mapped(spec, &stores[receiver], receiver, q, col)?,
                );
            }
            let q = assignment.functions(receiver)[b];
            stores[receiver].put(q, f_j, &block, Origin::Decoded);
            decoded.push(Decoded {
                server: receiver,
                q,
                f: f_j,
            });
        }
    }
    let f_p = rows
        .iter()
        .find(|&&(row, _)| row == p)
        .ok_or_else(|| {
            Error::InvalidPlan(format!("member {member}: coded sender not an active row"))
        })?
        .1;
    for b in 0..beta {
        let q = assignment.functions(p)[b];
        stores[p].put(
            q,
            f_p,
            &uncoded.payload[b * t..(b + 1) * t],
            Origin::Decoded,
        );
        decoded.push(Decoded {
            server: p,
            q,
            f: f_p,
        });
    }
    Ok(decoded)
}

/// One exchange round: encode both transmissions, then decode.
pub fn round_for_member(
    spec: &JobSpec,
    member: usize,
    assignment: &ReduceAssignment,
    stores: &mut [IvaStore],
    senders: MemberSenders,
) -> Result<(Transmission, Transmission, Vec<Decoded>)> {
    let (coded, uncoded) = encode_round(spec, member, assignment, stores, senders)?;
    let decoded = apply_round(spec, member, assignment, stores, &coded, &uncoded)?;
    Ok((coded, uncoded, decoded))
}

fn xor_into(acc: &mut [u8], value: &[u8]) {
    for (a, v) in acc.iter_mut().zip(value) {
        *a ^= v;
    }
}

// ---------------------------------------------------------------------------
// Shuffle and reduce
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShuffleTranscript {
    transmissions: Vec<Transmission>,
    sent_bits: Vec<u64>,
    received_bits: Vec<u64>,
}

impl ShuffleTranscript {
    pub fn empty(k: usize) -> Self {
        ShuffleTranscript {
            transmissions: Vec::new(),
            sent_bits: vec![0; k],
            received_bits: vec![0; k],
        }
    }

    pub fn transmissions(&self) -> &[Transmission] {
        &self.transmissions
    }

    pub fn sent_bits(&self) -> &[u64] {
        &self.sent_bits
    }

    pub fn received_bits(&self) -> &[u64] {
        &self.received_bits
    }

    pub fn total_bits(&self) -> u64 {
        self.transmissions
            .iter()
            .map(|t| t.payload.len() as u64 * 8)
            .sum()
    }

    fn record(&mut self, tx: Transmission, receivers: impl IntoIterator<Item = usize>) {
        let bits = tx.payload.len() as u64 * 8;
        self.sent_bits[tx.sender] += bits;
        for r in receivers {
            self.received_bits[r] += bits;
        }
        self.transmissions.push(tx);
    }
}

pub fn run_shuffle(
    spec: &JobSpec,
    assignment: &ReduceAssignment,
    plan: &SenderPlan,
    stores: &mut [IvaStore],
) -> Result<ShuffleTranscript> {
    run_shuffle_with(spec, assignment, plan, stores, |_| {})
}

/// As [`run_shuffle`], with a hook that may alter each transmission between
/// encoding and delivery.
pub fn run_shuffle_with(
    spec: &JobSpec,
    assignment: &ReduceAssignment,
    plan: &SenderPlan,
    stores: &mut [IvaStore],
    mut channel: impl FnMut(&mut Transmission),
) -> Result<ShuffleTranscript> {
    plan.check_against(&spec.cover)?;
    if assignment.q() != spec.q || assignment.k() != spec.matrix.k() {
        return Err(Error::InvalidParameters(
            "assignment does not fit the job".into(),
        ));
    }
    let mut transcript = ShuffleTranscript::empty(spec.matrix.k());
    for member in 0..spec.cover.len() {
        let senders = plan.for_member(member);
        let (mut coded, mut uncoded) = encode_round(spec, member, assignment, stores, senders)?;
        channel(&mut coded);
        channel(&mut uncoded);
        apply_round(spec, member, assignment, stores, &coded, &uncoded)?;
        let rows = active_rows(spec, member, assignment);
        let p = coded.sender;
        transcript.record(
            coded,
            rows.iter()
                .map(|&(row, _)| row)
                .filter(move |&row| row != p),
        );
        transcript.record(uncoded, [p]);
    }
    Ok(transcript)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Missing,
    Mismatch,
    OutputMismatch,
}

/// A reduce input or output that disagrees with the oracle. `q` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeFailure {
    pub server: String,
    pub q: usize,
    pub f: Option<String>,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReduceOutput {
    pub server: usize,
    pub q: usize,
    pub digest: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReduceReport {
    pub outputs: Vec<ReduceOutput>,
    pub failures: Vec<DecodeFailure>,
}

impl ReduceReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Each active server reduces its functions and is checked against the oracle.
pub fn run_reduce(
    spec: &JobSpec,
    assignment: &ReduceAssignment,
    stores: &[IvaStore],
) -> ReduceReport {
    let m = &spec.matrix;
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    for k in assignment.active_servers() {
        for &q in assignment.functions(k) {
            let mut inputs = Vec::with_capacity(m.n());
            let mut complete = true;
            for f in 0..m.n() {
                let failure = |kind| DecodeFailure {
                    server: m.row_label(k).to_owned(),
                    q: q + 1,
                    f: Some(m.col_label(f).to_owned()),
                    kind,
                };
                match stores[k].get(q, f) {
                    None => {
                        failures.push(failure(FailureKind::Missing));
                        complete = false;
                    }
                    Some(v) => {
                        if v != spec.oracle_iva(q, f) {
                            failures.push(failure(FailureKind::Mismatch));
                        }
                        inputs.push(v);
                    }
                }
            }
            if !complete {
                continue;
            }
            let digest = reduce_digest(q, inputs);
            if digest != spec.oracle_output(q) {
                failures.push(DecodeFailure {
                    server: m.row_label(k).to_owned(),
                    q: q + 1,
                    f: None,
                    kind: FailureKind::OutputMismatch,
                });
            }
            outputs.push(ReduceOutput {
                server: k,
                q,
                digest,
            });
        }
    }
    ReduceReport { outputs, failures }
}

/// Transmitted bits over `Q N T` bits.
pub fn measured_load(transcript: &ShuffleTranscript, spec: &JobSpec) -> Rational {
    let denom = (spec.q * spec.matrix.n() * spec.t * 8) as u64;
    Rational::new(transcript.total_bits(), denom)
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub transcript: ShuffleTranscript,
    pub reduce: ReduceReport,
    pub load: Rational,
}

/// Map, shuffle and reduce with per-server roles. Only `Full` servers may
/// appear in the plan; `Absent` servers must have no reduce duty.
pub fn run_pipeline(
    spec: &JobSpec,
    assignment: &ReduceAssignment,
    plan: &SenderPlan,
    roles: &[MapRole],
) -> Result<PipelineOutcome> {
    if roles.len() != spec.matrix.k() {
        return Err(Error::InvalidParameters(
            "one map role per server required".into(),
        ));
    }
    for (k, role) in roles.iter().enumerate() {
        if *role == MapRole::Absent && assignment.is_active(k) {
            return Err(Error::InvalidParameters(format!(
                "server {} is absent but has reduce duties",
                spec.matrix.row_label(k)
            )));
        }
    }
    for (i, s) in plan.senders().iter().enumerate() {
        if roles.get(s.coded) != Some(&MapRole::Full)
            || roles.get(s.uncoded) != Some(&MapRole::Full)
        {
            return Err(Error::InvalidPlan(format!(
                "member {i}: senders must be servers that map fully"
            )));
        }
    }
    plan.check_against(&spec.cover)?;
    let mut stores = map_with_roles(spec, roles, |k| {
        partial_straggler_needs(spec, assignment, plan, k)
    });
    let transcript = run_shuffle(spec, assignment, plan, &mut stores)?;
    let reduce = run_reduce(spec, assignment, &stores);
    let load = measured_load(&transcript, spec);
    Ok(PipelineOutcome {
        transcript,
        reduce,
        load,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::default_plan;
    use crate::constructions::{fano_matrix, man_matrix};
    use crate::cover::{man_cover, search_cover, SearchConfig, SearchMode};
    use crate::matrix::{load_formula, IdentitySubmatrix};

    fn fano_spec(q: usize, t: usize) -> JobSpec {
        let m = fano_matrix();
        let c = search_cover(&m, 3, SearchMode::Exact, &SearchConfig::default()).unwrap();
        JobSpec::new(m, c, q, t, 7).unwrap()
    }

    fn full_run(spec: &JobSpec) -> PipelineOutcome {
        let plan = default_plan(spec.cover(), |_| true).unwrap();
        let roles = vec![MapRole::Full; spec.matrix().k()];
        run_pipeline(spec, &spec.standard_assignment(), &plan, &roles).unwrap()
    }

    #[test]
    fn synth_map_contract() {
        let a = synth_map(3, "127", b"abc", 16);
        assert_eq!(a, synth_map(3, "127", b"abc", 16));
        assert_ne!(a, synth_map(4, "127", b"abc", 16));
        assert_ne!(a, synth_map(3, "128", b"abc", 16));
        assert_eq!(synth_map(0, "x", b"", 1).len(), 1);
        assert_eq!(synth_map(0, "x", b"", 100).len(), 100);
        assert_eq!(
            &synth_map(0, "x", b"", 100)[..16],
            &synth_map(0, "x", b"", 16)[..]
        );
    }

    #[test]
    fn distinct_functions_give_distinct_values() {
        let spec = fano_spec(14, 8);
        for f in 0..7 {
            for q in 0..14 {
                for q2 in q + 1..14 {
                    assert_ne!(spec.oracle_iva(q, f), spec.oracle_iva(q2, f));
                }
            }
        }
    }

    #[test]
    fn map_phase_holds_exactly_the_zero_entries() {
        let spec = fano_spec(14, 4);
        let stores = run_map_phase(&spec);
        assert_eq!(stores[0].count(Origin::Mapped), 56);
        for (k, store) in stores.iter().enumerate() {
            for f in 0..7 {
                for q in 0..14 {
                    assert_eq!(store.mapped(q, f).is_some(), spec.matrix().get(k, f) == 0);
                }
            }
        }

        let m = man_matrix(5, 2).unwrap();
        let c = man_cover(&m).unwrap();
        let spec = JobSpec::new(m, c, 5, 8, 1).unwrap();
        for store in run_map_phase(&spec) {
            assert_eq!(store.count(Origin::Mapped), 20);
        }
    }

    #[test]
    fn spec_rejects_bad_parameters() {
        let m = fano_matrix();
        let c = search_cover(&m, 3, SearchMode::Exact, &SearchConfig::default()).unwrap();
        assert!(JobSpec::new(m.clone(), c.clone(), 10, 4, 0).is_err());
        assert!(JobSpec::new(m.clone(), c.clone(), 7, 0, 0).is_err());
        assert!(JobSpec::new(m.clone(), c.without_member(0), 7, 4, 0).is_err());
    }

    #[test]
    fn interleaved_assignment_round() {
        let spec = fano_spec(14, 8);
        let m = spec.matrix();
        let sets: Vec<Vec<usize>> = (0..7).map(|k| vec![k, k + 7]).collect();
        let assignment = ReduceAssignment::from_sets(14, sets).unwrap();
        let col = |l: &str| m.col_index(l).unwrap();
        let member =
            IdentitySubmatrix::new(vec![2, 4, 6], vec![col("234"), col("256"), col("127")])
                .unwrap();
        let cover = IdentityCover::new(vec![member]);
        let spec1 = JobSpec {
            cover,
            ..fano_spec(14, 8)
        };
        let mut stores = run_map_phase(&spec1);
        let (coded, uncoded, _) = round_for_member(
            &spec1,
            0,
            &assignment,
            &mut stores,
            MemberSenders {
                coded: 2,
                uncoded: 4,
            },
        )
        .unwrap();
        let xor = |a: &[u8], b: &[u8]| a.iter().zip(b).map(|(x, y)| x ^ y).collect::<Vec<u8>>();
        let mut expected = xor(
            spec.oracle_iva(6, col("127")),
            spec.oracle_iva(4, col("256")),
        );
        expected.extend(xor(
            spec.oracle_iva(13, col("127")),
            spec.oracle_iva(11, col("256")),
        ));
        assert_eq!(coded.payload, expected);
        let mut expected = spec.oracle_iva(2, col("234")).to_vec();
        expected.extend_from_slice(spec.oracle_iva(9, col("234")));
        assert_eq!(uncoded.payload, expected);
        assert_eq!(
            stores[6].get(6, col("127")),
            Some(spec.oracle_iva(6, col("127")))
        );
        assert_eq!(
            stores[6].get(13, col("127")),
            Some(spec.oracle_iva(13, col("127")))
        );
        assert_eq!(stores[6].origin(6, col("127")), Origin::Decoded);
    }

    #[test]
    fn size_two_member_degenerates() {
        let m = man_matrix(3, 1).unwrap();
        let c = man_cover(&m).unwrap();
        assert_eq!(c.uniform_size(), Some(2));
        let spec = JobSpec::new(m, c, 3, 4, 0).unwrap();
        let assignment = spec.standard_assignment();
        let mut stores = run_map_phase(&spec);
        let member = &spec.cover().members()[0];
        let (p, u) = (member.rows()[0], member.rows()[1]);
        let (coded, _, _) = round_for_member(
            &spec,
            0,
            &assignment,
            &mut stores,
            MemberSenders {
                coded: p,
                uncoded: u,
            },
        )
        .unwrap();
        let (_, f_u) = member.pairs().find(|&(row, _)| row == u).unwrap();
        assert_eq!(
            coded.payload,
            spec.oracle_iva(assignment.functions(u)[0], f_u)
        );
    }

    #[test]
    fn fano_load_and_decoding() {
        let spec = fano_spec(7, 16);
        let out = full_run(&spec);
        assert_eq!(out.transcript.transmissions().len(), 14);
        assert_eq!(out.transcript.total_bits(), 1792);
        assert_eq!(out.load, Rational::new(2, 7));
        assert_eq!(out.load, load_formula(7, 4, 3).unwrap());
        assert!(out.reduce.ok(), "{:?}", out.reduce.failures);
        assert_eq!(out.reduce.outputs.len(), 7);
    }

    #[test]
    fn man_loads() {
        for (k, r, q, t, expected) in [
            (5, 2, 5, 8, Rational::new(2, 5)),
            (7, 4, 7, 4, Rational::new(6, 35)),
        ] {
            let m = man_matrix(k, r).unwrap();
            let c = man_cover(&m).unwrap();
            let spec = JobSpec::new(m, c, q, t, 3).unwrap();
            let out = full_run(&spec);
            assert_eq!(out.transcript.transmissions().len(), 2 * spec.cover().len());
            assert_eq!(out.load, expected);
            assert!(out.reduce.ok());
        }
    }

    #[test]
    fn empty_transcript_has_zero_load() {
        let spec = fano_spec(7, 4);
        assert_eq!(
            measured_load(&ShuffleTranscript::empty(7), &spec),
            Rational::new(0, 1)
        );
    }

    #[test]
    fn corrupted_payload_is_detected() {
        let spec = fano_spec(14, 8);
        let assignment = spec.standard_assignment();
        let plan = default_plan(spec.cover(), |_| true).unwrap();
        let mut stores = run_map_phase(&spec);
        let mut first = true;
        run_shuffle_with(&spec, &assignment, &plan, &mut stores, |tx| {
            if first && tx.kind == TransmissionKind::Coded {
                tx.payload[0] ^= 0x01;
                first = false;
            }
        })
        .unwrap();
        let report = run_reduce(&spec, &assignment, &stores);
        assert!(!report.ok());
        assert!(report
            .failures
            .iter()
            .any(|f| f.kind == FailureKind::Mismatch && f.f.is_some()));
        assert!(report
            .failures
            .iter()
            .any(|f| f.kind == FailureKind::OutputMismatch));
    }

    #[test]
    fn receivers_cancel_only_mapped_values() {
        let spec = fano_spec(7, 4);
        let assignment = spec.standard_assignment();
        let plan = default_plan(spec.cover(), |_| true).unwrap();
        let mut stores = run_map_phase(&spec);
        // Pretend server 2 received a value instead of mapping it.
        let member = &spec.cover().members()[0];
        let victim = member
            .pairs()
            .map(|(row, _)| row)
            .find(|&row| row != plan.for_member(0).coded)
            .unwrap();
        let (_, interferer_col) = member
            .pairs()
            .find(|&(row, _)| row != victim && row != plan.for_member(0).coded)
            .unwrap();
        let q = assignment.functions(
            member
                .pairs()
                .find(|&(_, c)| c == interferer_col)
                .unwrap()
                .0,
        )[0];
        let value = stores[victim].get(q, interferer_col).unwrap().to_vec();
        stores[victim].put(q, interferer_col, &value, Origin::Decoded);
        let err = run_shuffle(&spec, &assignment, &plan, &mut stores).unwrap_err();
        assert!(matches!(err, Error::MissingIva { .. }));
    }

    #[test]
    fn partial_stragglers_keep_the_load() {
        let m = man_matrix(5, 2).unwrap();
        let c = man_cover(&m).unwrap();
        let spec = JobSpec::new(m, c, 10, 4, 9).unwrap();
        let assignment = spec.standard_assignment();
        let mut roles = vec![MapRole::Full; 5];
        roles[0] = MapRole::Partial;
        let plan = default_plan(spec.cover(), |k| k != 0).unwrap();
        let out = run_pipeline(&spec, &assignment, &plan, &roles).unwrap();
        assert!(out.reduce.ok(), "{:?}", out.reduce.failures);
        assert_eq!(out.load, load_formula(5, 2, 3).unwrap());

        let needs = partial_straggler_needs(&spec, &assignment, &plan, 0);
        assert!(needs.len() < 10 * spec.matrix().mapped_by(0).len());

        let plan = default_plan(spec.cover(), |_| true).unwrap();
        assert!(run_pipeline(&spec, &assignment, &plan, &roles).is_err());
    }

    #[test]
    fn assignments() {
        let a = ReduceAssignment::contiguous(6, 4, &[3, 0, 1]).unwrap();
        assert_eq!(a.functions(3), &[0, 1]);
        assert_eq!(a.functions(0), &[2, 3]);
        assert!(!a.is_active(2));
        assert_eq!(a.active_servers(), vec![0, 1, 3]);
        assert!(ReduceAssignment::contiguous(7, 4, &[0, 1]).is_err());
        assert!(ReduceAssignment::from_sets(4, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(ReduceAssignment::from_sets(4, vec![vec![0, 1], vec![2]]).is_err());
        assert!(ReduceAssignment::from_sets(4, vec![vec![0, 1], vec![2, 3], vec![]]).is_ok());
    }
}
