//! Full stragglers: servers that map nothing, send nothing and reduce nothing.
//!
//! With `kappa` survivors every cover member still has at least two
//! surviving rows as long as `K - kappa <= g - 2`, so each round goes through
//! with the reduce functions spread over the survivors only.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use itertools::Itertools;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::balance::{default_plan, plan_over_servers, SenderPlan};
use crate::constructions::man_matrix;
use crate::cover::man_cover;
use crate::error::{Error, Result};
use crate::rational::{
    binomial, decimal_half_even, decimal_truncated, fraction_string, printed_places, Rational,
};
use crate::shuffle::{
    run_pipeline, JobSpec, MapRole, ReduceAssignment, ReduceReport, ShuffleTranscript,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StragglerScenario {
    stragglers: Vec<usize>,
    survivors: Vec<usize>,
    assignment: ReduceAssignment,
}

impl StragglerScenario {
    /// Requires at most `g - 2` distinct stragglers and `kappa | Q`. Survivors
    /// get contiguous blocks of `Q / kappa` functions in server order.
    pub fn new(spec: &JobSpec, stragglers: &[usize]) -> Result<Self> {
        let k = spec.matrix().k();
        let set: BTreeSet<usize> = stragglers.iter().copied().collect();
        if set.len() != stragglers.len() || set.iter().any(|&s| s >= k) {
            return Err(Error::InvalidParameters(
                "stragglers must be distinct servers".into(),
            ));
        }
        let limit = spec.g() - 2;
        if set.len() > limit {
            return Err(Error::TooManyStragglers {
                stragglers: set.len(),
                limit,
            });
        }
        let survivors: Vec<usize> = (0..k).filter(|s| !set.contains(s)).collect();
        let assignment = ReduceAssignment::contiguous(spec.q(), k, &survivors)?;
        Ok(StragglerScenario {
            stragglers: set.into_iter().collect(),
            survivors,
            assignment,
        })
    }

    pub fn stragglers(&self) -> &[usize] {
        &self.stragglers
    }

    pub fn survivors(&self) -> &[usize] {
        &self.survivors
    }

    pub fn kappa(&self) -> usize {
        self.survivors.len()
    }

    pub fn assignment(&self) -> &ReduceAssignment {
        &self.assignment
    }

    fn is_survivor(&self, k: usize) -> bool {
        self.stragglers.binary_search(&k).is_err()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanHint {
    /// Try the two-matching construction over the survivors first.
    Balanced,
    /// First two surviving rows of every member.
    FirstRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanUsed {
    Balanced,
    FirstRows,
    /// Balancing was requested but unavailable over the survivors.
    FirstRowsFallback,
}

#[derive(Debug, Clone)]
pub struct StragglerOutcome {
    pub transcript: ShuffleTranscript,
    pub reduce: ReduceReport,
    pub load: Rational,
    pub plan: SenderPlan,
    pub plan_used: PlanUsed,
}

pub fn straggler_run(
    spec: &JobSpec,
    scenario: &StragglerScenario,
    hint: PlanHint,
) -> Result<StragglerOutcome> {
    let (plan, plan_used) = match hint {
        PlanHint::Balanced => match plan_over_servers(spec.cover(), scenario.survivors()) {
            Ok(plan) => (plan, PlanUsed::Balanced),
            Err(_) => (
                default_plan(spec.cover(), |k| scenario.is_survivor(k))?,
                PlanUsed::FirstRowsFallback,
            ),
        },
        PlanHint::FirstRows => (
            default_plan(spec.cover(), |k| scenario.is_survivor(k))?,
            PlanUsed::FirstRows,
        ),
    };
    let roles: Vec<MapRole> = (0..spec.matrix().k())
        .map(|k| {
            if scenario.is_survivor(k) {
                MapRole::Full
            } else {
                MapRole::Absent
            }
        })
        .collect();
    let out = run_pipeline(spec, scenario.assignment(), &plan, &roles)?;
    if out
        .transcript
        .transmissions()
        .iter()
        .any(|t| !scenario.is_survivor(t.sender))
    {
        return Err(Error::Internal("a straggler transmitted".into()));
    }
    Ok(StragglerOutcome {
        transcript: out.transcript,
        reduce: out.reduce,
        load: out.load,
        plan,
        plan_used,
    })
}

/// `(2/g)(K - r)/kappa`.
pub fn straggler_load_formula(k: usize, r: usize, g: usize, kappa: usize) -> Result<Rational> {
    if g == 0 || kappa == 0 || r >= k {
        return Err(Error::InvalidParameters(format!(
            "need g >= 1, kappa >= 1, r < K (got g={g}, kappa={kappa}, r={r}, K={k})"
        )));
    }
    Ok(Rational::new(2 * (k - r) as u64, (g * kappa) as u64))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub stragglers: Vec<String>,
    pub load: String,
    pub decoded: bool,
    pub plan_used: PlanUsed,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub kappa: usize,
    pub total_subsets: u64,
    pub sampled: bool,
    pub entries: Vec<SweepEntry>,
    pub loads: Vec<Rational>,
    pub max: Rational,
    pub min: Rational,
}

impl SweepReport {
    pub fn all_equal(&self) -> bool {
        self.max == self.min
    }

    pub fn all_decoded(&self) -> bool {
        self.entries.iter().all(|e| e.decoded)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Largest number of subsets enumerated exhaustively; beyond it this
    /// many subsets are sampled.
    pub cap: usize,
    pub seed: u64,
    pub hint: PlanHint,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            cap: 2000,
            seed: 0,
            hint: PlanHint::FirstRows,
        }
    }
}

/// Runs every `(K - kappa)`-subset of stragglers, or a seeded sample of
/// `cap` distinct subsets when there are more than `cap`.
pub fn worst_case_sweep(spec: &JobSpec, kappa: usize, opts: &SweepOptions) -> Result<SweepReport> {
    let k = spec.matrix().k();
    if kappa == 0 || kappa > k {
        return Err(Error::InvalidParameters(format!(
            "kappa = {kappa} outside 1..={k}"
        )));
    }
    let drop = k - kappa;
    let total = binomial(k as u64, drop as u64);
    let sampled = total > opts.cap as u64;
    let subsets: Vec<Vec<usize>> = if sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut seen = BTreeSet::new();
        while seen.len() < opts.cap {
            let mut s = sample(&mut rng, k, drop).into_vec();
            s.sort_unstable();
            seen.insert(s);
        }
        seen.into_iter().collect()
    } else {
        (0..k).combinations(drop).collect()
    };
    let runs: Vec<Result<(Vec<usize>, StragglerOutcome)>> = subsets
        .into_par_iter()
        .map(|s| {
            let scenario = StragglerScenario::new(spec, &s)?;
            straggler_run(spec, &scenario, opts.hint).map(|o| (s, o))
        })
        .collect();
    let mut entries = Vec::with_capacity(runs.len());
    let mut loads = Vec::with_capacity(runs.len());
    for run in runs {
        let (s, out) = run?;
        entries.push(SweepEntry {
            stragglers: s
                .iter()
                .map(|&i| spec.matrix().row_label(i).to_owned())
                .collect(),
            load: fraction_string(out.load),
            decoded: out.reduce.ok(),
            plan_used: out.plan_used,
        });
        loads.push(out.load);
    }
    let max = *loads.iter().max().expect("at least one subset");
    let min = *loads.iter().min().expect("at least one subset");
    Ok(SweepReport {
        kappa,
        total_subsets: total,
        sampled,
        entries,
        loads,
        max,
        min,
    })
}

/// Optimal load with `kappa` surviving servers for computation load `r`:
/// `(1 - r/K) sum_i (1/i) C(r,i) C(K-r-1, kappa-i-1) / C(K-1, kappa-1)`
/// with `i` from `max(1, r+kappa-K)` to `min(r, kappa-1)`.
pub fn optimal_straggler_load(k: usize, r: usize, kappa: usize) -> Result<Rational> {
    if r == 0 || r >= k || kappa < 2 || kappa > k || k - kappa > r - 1 {
        return Err(Error::InvalidParameters(format!(
            "need 1 <= r < K, 2 <= kappa <= K and K - kappa <= r - 1 (got K={k}, r={r}, kappa={kappa})"
        )));
    }
    let lo = (r + kappa).saturating_sub(k).max(1);
    let hi = r.min(kappa - 1);
    let denom = binomial((k - 1) as u64, (kappa - 1) as u64);
    let mut sum = Rational::new(0, 1);
    for i in lo..=hi {
        let numer =
            binomial(r as u64, i as u64) * binomial((k - r - 1) as u64, (kappa - i - 1) as u64);
        sum += Rational::new(numer, i as u64 * denom);
    }
    Ok(sum * Rational::new((k - r) as u64, k as u64))
}

// ---------------------------------------------------------------------------
// Comparison table
// ---------------------------------------------------------------------------

/// One golden comparison row, with values as printed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table2Row {
    pub k: usize,
    pub r: usize,
    pub n: usize,
    pub g: usize,
    pub kappa: usize,
    pub printed_optimal: Option<String>,
    pub printed_ours: Option<String>,
}

impl Table2Row {
    fn golden(
        k: usize,
        r: usize,
        n: usize,
        g: usize,
        kappa: usize,
        optimal: &str,
        ours: &str,
    ) -> Self {
        Table2Row {
            k,
            r,
            n,
            g,
            kappa,
            printed_optimal: Some(optimal.into()),
            printed_ours: Some(ours.into()),
        }
    }

    pub fn is_golden(&self) -> bool {
        self.printed_optimal.is_some() || self.printed_ours.is_some()
    }
}

pub fn table2_rows() -> Vec<Table2Row> {
    vec![
        Table2Row::golden(5, 2, 10, 3, 4, "0.45", "0.5"),
        Table2Row::golden(7, 4, 35, 5, 5, "0.169", "0.24"),
        Table2Row::golden(7, 4, 35, 5, 4, "0.2428", "0.3"),
        Table2Row::golden(10, 3, 120, 4, 8, "0.3305", "0.4375"),
    ]
}

/// Subset-scheme rows beyond the golden ones: `4 <= K <= 8`, every `r`
/// with `g = r + 1 >= 3` and every admissible `kappa < K`.
pub fn extended_rows() -> Vec<Table2Row> {
    let mut rows = Vec::new();
    for k in 4..=8usize {
        for r in 2..k {
            for kappa in (k + 1 - r).max(2)..k {
                rows.push(Table2Row {
                    k,
                    r,
                    n: binomial(k as u64, r as u64) as usize,
                    g: r + 1,
                    kappa,
                    printed_optimal: None,
                    printed_ours: None,
                });
            }
        }
    }
    rows
}

#[derive(Debug, Clone, Serialize)]
pub struct Table2Result {
    pub k: usize,
    pub r: usize,
    pub n: usize,
    pub g: usize,
    pub kappa: usize,
    pub golden: bool,
    /// Worst load over all straggler subsets, measured from transcripts.
    pub ours: String,
    pub ours_decimal: String,
    /// `(2/g)(K - r)/kappa` with the row's `g`.
    pub ours_formula: String,
    pub optimal: String,
    pub optimal_decimal: String,
    pub printed_ours: Option<String>,
    pub printed_optimal: Option<String>,
    /// Half-even rounding to the printed digits agrees with the printed value.
    pub ours_matches_print: Option<bool>,
    pub optimal_matches_print: Option<bool>,
    /// Diagnostic only: truncation to the printed digits agrees.
    pub optimal_truncation_matches: Option<bool>,
    pub decoded: bool,
    pub pass: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table2Report {
    pub rows: Vec<Table2Result>,
}

impl Table2Report {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failing_rows(&self) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| !self.rows[i].pass)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "K,r,N,g,kappa,load_ours,load_optimal,load_ours_exact,load_optimal_exact,printed_ours,printed_optimal,golden,status\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.k,
                r.r,
                r.n,
                r.g,
                r.kappa,
                r.ours_decimal,
                r.optimal_decimal,
                r.ours,
                r.optimal,
                r.printed_ours.as_deref().unwrap_or(""),
                r.printed_optimal.as_deref().unwrap_or(""),
                r.golden,
                if r.pass { "pass" } else { "FAIL" },
            );
        }
        out
    }
}

fn lcm(a: usize, b: usize) -> usize {
    num_integer::lcm(a, b)
}

fn matches_print(value: Rational, printed: &Option<String>) -> Option<bool> {
    printed
        .as_ref()
        .map(|p| decimal_half_even(value, printed_places(p)) == *p)
}

/// Simulates every row on the subset matrix with its analytic cover (worst
/// case over all straggler subsets), evaluates the optimal-load formula, and
/// compares both with the printed values at printed precision.
pub fn table2_report(rows: &[Table2Row], t: usize, seed: u64) -> Result<Table2Report> {
    let results = rows
        .par_iter()
        .map(|row| table2_row(row, t, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(Table2Report { rows: results })
}

fn table2_row(row: &Table2Row, t: usize, seed: u64) -> Result<Table2Result> {
    let mut notes = Vec::new();
    let m = man_matrix(row.k, row.r)?;
    if m.n() != row.n {
        notes.push(format!(
            "N = {} but the subset matrix has {} columns",
            row.n,
            m.n()
        ));
    }
    let cover = man_cover(&m)?;
    let g_actual = cover.uniform_size().ok_or(Error::NonUniformCover)?;
    if g_actual != row.g {
        notes.push(format!(
            "g = {} but the cover has identity size {g_actual}",
            row.g
        ));
    }
    let spec = JobSpec::new(m, cover, lcm(row.k, row.kappa), t, seed)?;
    let sweep = worst_case_sweep(
        &spec,
        row.kappa,
        &SweepOptions {
            cap: usize::MAX,
            seed,
            hint: PlanHint::FirstRows,
        },
    )?;
    let ours = sweep.max;
    let formula = straggler_load_formula(row.k, row.r, row.g, row.kappa)?;
    if ours != formula {
        notes.push(format!(
            "measured {} differs from (2/g)(K-r)/kappa = {}",
            fraction_string(ours),
            fraction_string(formula)
        ));
    }
    if !sweep.all_equal() {
        notes.push("load depends on which servers straggle".into());
    }
    let optimal = optimal_straggler_load(row.k, row.r, row.kappa)?;
    let ours_matches_print = matches_print(ours, &row.printed_ours);
    let optimal_matches_print = matches_print(optimal, &row.printed_optimal);
    let optimal_truncation_matches = row
        .printed_optimal
        .as_ref()
        .map(|p| decimal_truncated(optimal, printed_places(p)) == *p);
    if ours_matches_print == Some(false) {
        notes.push(format!(
            "ours {} rounds to {} not {}",
            fraction_string(ours),
            decimal_half_even(
                ours,
                printed_places(row.printed_ours.as_deref().unwrap_or(""))
            ),
            row.printed_ours.as_deref().unwrap_or("")
        ));
    }
    if optimal_matches_print == Some(false) {
        let printed = row.printed_optimal.as_deref().unwrap_or("");
        notes.push(format!(
            "optimal {} rounds half-even to {} not {}{}",
            fraction_string(optimal),
            decimal_half_even(optimal, printed_places(printed)),
            printed,
            if optimal_truncation_matches == Some(true) {
                " (the printed value is the truncation)"
            } else {
                ""
            }
        ));
    }
    let decoded = sweep.all_decoded();
    if !decoded {
        notes.push("decode failure in at least one straggler subset".into());
    }
    let pass = notes.is_empty();
    Ok(Table2Result {
        k: row.k,
        r: row.r,
        n: row.n,
        g: row.g,
        kappa: row.kappa,
        golden: row.is_golden(),
        ours: fraction_string(ours),
        ours_decimal: decimal_half_even(ours, 4),
        ours_formula: fraction_string(formula),
        optimal: fraction_string(optimal),
        optimal_decimal: decimal_half_even(optimal, 4),
        printed_ours: row.printed_ours.clone(),
        printed_optimal: row.printed_optimal.clone(),
        ours_matches_print,
        optimal_matches_print,
        optimal_truncation_matches,
        decoded,
        pass,
        notes,
    })
}
