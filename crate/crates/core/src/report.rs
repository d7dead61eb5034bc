//! Job assembly and the design-scheme comparison used by the command line.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::balance::default_plan;
use crate::constructions::{table1_load, Construction, SchemeParameters, Table1Scheme};
use crate::cover::{analytic_cover, search_cover, SearchConfig, SearchMode};
use crate::error::{Error, Result};
use crate::matrix::{BinaryComputingMatrix, IdentityCover};
use crate::rational::{decimal_half_even, fraction_string, Rational};
use crate::shuffle::JobSpec;
use crate::shuffle::{run_pipeline, MapRole};
use crate::straggler::{worst_case_sweep, PlanHint, SweepOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverChoice {
    Analytic,
    Exact,
    Greedy,
}

impl FromStr for CoverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(CoverChoice::Analytic),
            "exact" => Ok(CoverChoice::Exact),
            "greedy" => Ok(CoverChoice::Greedy),
            other => Err(Error::InvalidParameters(format!(
                "unknown cover method {other:?} (expected analytic, exact or greedy)"
            ))),
        }
    }
}

/// Finds a cover of `m`. `g` defaults to the construction's natural size.
pub fn build_cover(
    construction: &Construction,
    m: &BinaryComputingMatrix,
    choice: CoverChoice,
    g: Option<usize>,
    config: &SearchConfig,
) -> Result<IdentityCover> {
    let g = match g.or_else(|| construction.natural_g()) {
        Some(g) => g,
        None => {
            return Err(Error::InvalidParameters(format!(
                "no natural identity size for {construction}; pass g explicitly"
            )))
        }
    };
    match choice {
        CoverChoice::Analytic => {
            if construction.natural_g() != Some(g) {
                return Err(Error::Unsupported(format!(
                    "analytic cover of {construction} has size {:?}, not {g}",
                    construction.natural_g()
                )));
            }
            analytic_cover(construction, m).unwrap_or_else(|| {
                Err(Error::Unsupported(format!(
                    "no analytic cover for {construction}"
                )))
            })
        }
        CoverChoice::Exact => search_cover(m, g, SearchMode::Exact, config),
        CoverChoice::Greedy => search_cover(m, g, SearchMode::Greedy, config),
    }
}

/// Analytic cover when one exists, otherwise exact search.
pub fn preferred_cover(
    construction: &Construction,
    m: &BinaryComputingMatrix,
) -> Result<IdentityCover> {
    match analytic_cover(construction, m) {
        Some(cover) => cover,
        None => build_cover(
            construction,
            m,
            CoverChoice::Exact,
            None,
            &SearchConfig::default(),
        ),
    }
}

// ---------------------------------------------------------------------------
// Design-scheme table
// ---------------------------------------------------------------------------

/// One requested row: scheme parameters plus an optional survivor count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table1Request {
    pub scheme: Table1Scheme,
    pub kappa: Option<usize>,
}

/// Parses lines `ROW key=value ...`, e.g. `IV v=7 t=3 kappa=5`. Blank lines
/// and `#` comments are skipped.
pub fn parse_table1_params(text: &str) -> Result<Vec<Table1Request>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut words = line.split_whitespace();
        let row = words.next().expect("non-empty line");
        let mut v = None;
        let mut k = None;
        let mut t = None;
        let mut n = None;
        let mut kappa = None;
        for word in words {
            let (key, value) = word
                .split_once('=')
                .ok_or_else(|| perr(format!("expected key=value, found {word:?}")))?;
            let value: usize = value
                .parse()
                .map_err(|_| perr(format!("{key}: {value:?} is not a non-negative integer")))?;
            let slot = match key {
                "v" => &mut v,
                "k" => &mut k,
                "t" => &mut t,
                "n" => &mut n,
                "kappa" => &mut kappa,
                other => return Err(perr(format!("unknown key {other:?}"))),
            };
            *slot = Some(value);
        }
        let need =
            |x: Option<usize>, name: &str| x.ok_or_else(|| perr(format!("row {row} needs {name}")));
        let scheme = match row {
            "I" => Table1Scheme::Bibd {
                v: need(v, "v")?,
                k: need(k, "k")?,
            },
            "II" => Table1Scheme::SymmetricBibd {
                v: need(v, "v")?,
                k: need(k, "k")?,
            },
            "III" => Table1Scheme::TDesignScheme1 {
                v: need(v, "v")?,
                k: need(k, "k")?,
                t: need(t, "t")?,
            },
            "IV" => Table1Scheme::TDesignScheme2 {
                v: need(v, "v")?,
                t: need(t, "t")?,
            },
            "V" => Table1Scheme::Transversal {
                k: need(k, "k")?,
                n: need(n, "n")?,
            },
            other => return Err(perr(format!("unknown row {other:?} (expected I..V)"))),
        };
        out.push(Table1Request { scheme, kappa });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Entry {
    pub row: &'static str,
    pub params: String,
    pub k: usize,
    pub n: usize,
    pub r: usize,
    pub g: String,
    pub kappa: Option<usize>,
    pub formula: &'static str,
    pub formula_kappa: &'static str,
    pub load: String,
    pub load_decimal: String,
    pub load_kappa: Option<String>,
    pub load_kappa_decimal: Option<String>,
    pub simulated: Option<String>,
    pub simulated_kappa: Option<String>,
    pub note: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Report {
    pub rows: Vec<Table1Entry>,
}

impl Table1Report {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "row,params,K,N,r,kappa,load,load_decimal,load_kappa,load_kappa_decimal,simulated,simulated_kappa,note\n",
        );
        let opt = |x: &Option<String>| x.clone().unwrap_or_default();
        for e in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                e.row,
                e.params,
                e.k,
                e.n,
                e.r,
                e.kappa.map(|k| k.to_string()).unwrap_or_default(),
                e.load,
                e.load_decimal,
                opt(&e.load_kappa),
                opt(&e.load_kappa_decimal),
                opt(&e.simulated),
                opt(&e.simulated_kappa),
                e.note,
            );
        }
        out
    }
}

/// The generator behind a scheme row, when there is one.
pub fn scheme_generator(scheme: &Table1Scheme) -> Option<Construction> {
    match *scheme {
        Table1Scheme::Bibd { v: 7, k: 3 } => Some(Construction::Fano),
        Table1Scheme::TDesignScheme2 { v, t } => Some(Construction::TSubset { v, t }),
        Table1Scheme::Transversal { k, n } if crate::constructions::is_prime(n) => {
            Some(Construction::Transversal { k, n })
        }
        _ => None,
    }
}

fn simulate(
    construction: &Construction,
    kappa: Option<usize>,
    seed: u64,
) -> Result<(Rational, Option<Rational>)> {
    let m = construction.build()?;
    let cover = preferred_cover(construction, &m)?;
    let k = m.k();
    let q = num_integer::lcm(k, kappa.unwrap_or(k));
    let spec = JobSpec::new(m, cover, q, 2, seed)?;
    let plan = default_plan(spec.cover(), |_| true)?;
    let roles = vec![MapRole::Full; k];
    let out = run_pipeline(&spec, &spec.standard_assignment(), &plan, &roles)?;
    if !out.reduce.ok() {
        return Err(Error::Internal(format!("{construction}: decode failure")));
    }
    let straggler = match kappa {
        Some(kappa) => {
            let opts = SweepOptions {
                cap: 64,
                seed,
                hint: PlanHint::FirstRows,
            };
            let sweep = worst_case_sweep(&spec, kappa, &opts)?;
            if !sweep.all_decoded() {
                return Err(Error::Internal(format!(
                    "{construction}: decode failure with stragglers"
                )));
            }
            Some(sweep.max)
        }
        None => None,
    };
    Ok((out.load, straggler))
}

/// Evaluates every requested row; rows with a generator are simulated and
/// must agree with their closed form exactly.
pub fn table1_report(requests: &[Table1Request], seed: u64) -> Result<Table1Report> {
    let mut rows = Vec::with_capacity(requests.len());
    for req in requests {
        let params = SchemeParameters::new(req.scheme)?;
        let load = table1_load(&params, None)?;
        let load_kappa = req
            .kappa
            .map(|kappa| table1_load(&params, Some(kappa)))
            .transpose()?;
        let (formula, formula_kappa) = req.scheme.formula_text();
        let (simulated, simulated_kappa, note, pass) = match scheme_generator(&req.scheme) {
            Some(construction) => {
                let (sim, sim_kappa) = simulate(&construction, req.kappa, seed)?;
                let agree = sim == load && sim_kappa == load_kappa;
                let note = if agree {
                    format!("simulated on {construction}")
                } else {
                    format!("simulation on {construction} disagrees with the formula")
                };
                (Some(sim), sim_kappa, note, agree)
            }
            None => (None, None, "formula only (no generator)".to_owned(), true),
        };
        rows.push(Table1Entry {
            row: req.scheme.row(),
            params: req.scheme.describe_params(),
            k: params.k,
            n: params.n,
            r: params.r,
            g: fraction_string(params.g),
            kappa: req.kappa,
            formula,
            formula_kappa,
            load: fraction_string(load),
            load_decimal: decimal_half_even(load, 4),
            load_kappa: load_kappa.map(fraction_string),
            load_kappa_decimal: load_kappa.map(|l| decimal_half_even(l, 4)),
            simulated: simulated.map(fraction_string),
            simulated_kappa: simulated_kappa.map(fraction_string),
            note,
            pass,
        });
    }
    Ok(Table1Report { rows })
}
