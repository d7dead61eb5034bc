use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use coded_mapreduce::balance::{audit_plan, build_sender_plan, default_plan, AuditReport};
use coded_mapreduce::constructions::{ingest_design, Construction};
use coded_mapreduce::cover::{row_regularity, SearchConfig};
use coded_mapreduce::rational::{decimal_half_even, fraction_string};
use coded_mapreduce::report::{build_cover, parse_table1_params, table1_report, CoverChoice};
use coded_mapreduce::shuffle::{run_pipeline, JobSpec, MapRole};
use coded_mapreduce::straggler::{
    extended_rows, straggler_load_formula, straggler_run, table2_report, table2_rows,
    worst_case_sweep, PlanHint, StragglerScenario, SweepOptions,
};
use coded_mapreduce::transcript::{hex, write_log, LogHeader, RunSummary};
use coded_mapreduce::{
    count_identity_check, validate_matrix, verify_cover, BinaryComputingMatrix, IdentityCover,
};

#[derive(Parser)]
#[command(
    name = "cmr",
    version,
    about = "Coded MapReduce simulator over binary computing matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map, shuffle and reduce one job and check its load against the formula
    Run(RunArgs),
    /// Closed-form loads of the design-based schemes, simulated where possible
    Table1(Table1Args),
    /// Straggler loads of the subset scheme against the optimal load
    Table2(Table2Args),
    /// Check a matrix file and a cover file
    Verify(VerifyArgs),
    /// Run every straggler subset of a given size
    Sweep(SweepArgs),
}

#[derive(Args, Clone, Default)]
struct JobArgs {
    /// Flat `key=value` file; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// man | fano | tsubset | transversal | bibd
    #[arg(long)]
    construction: Option<String>,
    #[arg(long = "K")]
    big_k: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    v: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Block design file for `--construction bibd`
    #[arg(long)]
    design: Option<PathBuf>,
    /// Identity submatrix size (defaults to the construction's natural size)
    #[arg(long)]
    g: Option<usize>,
    /// Number of reduce functions
    #[arg(long = "Q")]
    big_q: Option<usize>,
    /// Intermediate value length in bytes
    #[arg(long = "T")]
    big_t: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// analytic | exact | greedy
    #[arg(long)]
    cover: Option<String>,
    /// default | balanced
    #[arg(long)]
    plan: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    job: JobArgs,
    /// Full stragglers: a count (the lowest-indexed servers) or a comma-separated
    /// label list; a single label needs a trailing comma, e.g. `5,`
    #[arg(long)]
    stragglers: Option<String>,
    /// Partial stragglers (comma-separated labels): map only what they need, never send
    #[arg(long)]
    partial: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    job: JobArgs,
    /// Number of surviving servers
    #[arg(long)]
    kappa: Option<usize>,
    /// Largest number of subsets run exhaustively; beyond it this many are sampled
    #[arg(long, default_value_t = 2000)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct Table1Args {
    /// Rows as `ROW key=value ...`, e.g. `IV v=7 t=3 kappa=5`
    #[arg(long)]
    params: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct Table2Args {
    /// Add subset-scheme rows beyond the golden ones
    #[arg(long)]
    extended: bool,
    #[arg(long = "T", default_value_t = 1)]
    big_t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    cover: PathBuf,
    #[arg(long)]
    json: bool,
}

/// Distinguishes bad input (exit 2) from a failed check (exit 1).
#[derive(Debug)]
struct Usage(anyhow::Error);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(err: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(Usage(err.into()))
}

fn is_usage(err: &anyhow::Error) -> bool {
    use coded_mapreduce::Error as E;
    if err.downcast_ref::<Usage>().is_some() {
        return true;
    }
    matches!(
        err.downcast_ref::<E>(),
        Some(
            E::InvalidParameters(_)
                | E::InvalidMatrix(_)
                | E::InvalidDesign(_)
                | E::Unsupported(_)
                | E::Parse { .. }
                | E::Infeasible(_)
                | E::TooManyStragglers { .. }
                | E::NotConstructionShaped { .. }
                | E::Io(_)
        )
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Table1(args) => cmd_table1(args),
        Command::Table2(args) => cmd_table2(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_usage(&err) { 2 } else { 1 })
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

const CONFIG_KEYS: &[&str] = &[
    "construction",
    "K",
    "r",
    "v",
    "k",
    "t",
    "n",
    "design",
    "g",
    "Q",
    "T",
    "seed",
    "cover",
    "plan",
];

fn read_config(path: &Path) -> anyhow::Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(anyhow!("{}:{}: expected key=value", path.display(), i + 1)))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(usage(anyhow!(
                "{}:{}: unknown key {key:?}",
                path.display(),
                i + 1
            )));
        }
        map.insert(key.to_owned(), value.trim().to_owned());
    }
    Ok(map)
}

fn fill<T: FromStr>(
    slot: &mut Option<T>,
    map: &HashMap<String, String>,
    key: &str,
) -> anyhow::Result<()>
where
    T::Err: std::fmt::Display,
{
    if slot.is_none() {
        if let Some(raw) = map.get(key) {
            *slot = Some(
                raw.parse()
                    .map_err(|e| usage(anyhow!("config {key}={raw}: {e}")))?,
            );
        }
    }
    Ok(())
}

impl JobArgs {
    fn resolved(mut self) -> anyhow::Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let map = read_config(&path)?;
        fill(&mut self.construction, &map, "construction")?;
        fill(&mut self.big_k, &map, "K")?;
        fill(&mut self.r, &map, "r")?;
        fill(&mut self.v, &map, "v")?;
        fill(&mut self.k, &map, "k")?;
        fill(&mut self.t, &map, "t")?;
        fill(&mut self.n, &map, "n")?;
        fill(&mut self.design, &map, "design")?;
        fill(&mut self.g, &map, "g")?;
        fill(&mut self.big_q, &map, "Q")?;
        fill(&mut self.big_t, &map, "T")?;
        fill(&mut self.seed, &map, "seed")?;
        fill(&mut self.cover, &map, "cover")?;
        fill(&mut self.plan, &map, "plan")?;
        Ok(self)
    }

    fn construction(&self) -> anyhow::Result<Construction> {
        let need =
            |x: Option<usize>, flag: &str| x.ok_or_else(|| usage(anyhow!("--{flag} is required")));
        let name = self
            .construction
            .as_deref()
            .ok_or_else(|| usage(anyhow!("--construction is required")))?;
        Ok(match name {
            "man" => Construction::Man {
                k: need(self.big_k, "K")?,
                r: need(self.r, "r")?,
            },
            "fano" => Construction::Fano,
            "tsubset" => Construction::TSubset {
                v: need(self.v, "v")?,
                t: need(self.t, "t")?,
            },
            "transversal" => Construction::Transversal {
                k: need(self.k, "k")?,
                n: need(self.n, "n")?,
            },
            "bibd" => {
                let path = self
                    .design
                    .as_ref()
                    .ok_or_else(|| usage(anyhow!("--design is required for bibd")))?;
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))
                    .map_err(usage)?;
                Construction::Bibd(ingest_design(&text)?)
            }
            other => return Err(usage(anyhow!(
                "unknown construction {other:?} (expected man, fano, tsubset, transversal or bibd)"
            ))),
        })
    }

    fn balanced(&self) -> anyhow::Result<bool> {
        match self.plan.as_deref().unwrap_or("default") {
            "default" => Ok(false),
            "balanced" => Ok(true),
            other => Err(usage(anyhow!(
                "unknown plan {other:?} (expected default or balanced)"
            ))),
        }
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn build(
        &self,
        kappa_hint: impl FnOnce(usize) -> usize,
    ) -> anyhow::Result<(Construction, JobSpec)> {
        let construction = self.construction()?;
        let m = construction.build()?;
        let config = SearchConfig {
            seed: self.seed(),
            ..SearchConfig::default()
        };
        let choice = match self.cover.as_deref() {
            Some(name) => name.parse::<CoverChoice>()?,
            None if coded_mapreduce::cover::analytic_cover(&construction, &m).is_some() => {
                CoverChoice::Analytic
            }
            None => CoverChoice::Exact,
        };
        let cover = build_cover(&construction, &m, choice, self.g, &config)?;
        let k = m.k();
        let q = self
            .big_q
            .unwrap_or_else(|| num_integer::lcm(k, kappa_hint(k).max(1)));
        let spec = JobSpec::new(m, cover, q, self.big_t.unwrap_or(16), self.seed())?;
        Ok((construction, spec))
    }
}

/// A bare integer is a count of stragglers (the lowest-indexed servers);
/// anything containing a comma is a list of labels, so `5,` names server 5.
fn parse_servers(
    m: &BinaryComputingMatrix,
    spec: &str,
    allow_count: bool,
) -> anyhow::Result<Vec<usize>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    if allow_count && !spec.contains(',') {
        let count: usize = spec.parse().map_err(|_| {
            usage(anyhow!(
                "--stragglers {spec:?}: expected a count or a comma-separated list"
            ))
        })?;
        if count > m.k() {
            return Err(usage(anyhow!(
                "{count} stragglers but only {} servers",
                m.k()
            )));
        }
        return Ok((0..count).collect());
    }
    let mut servers: Vec<usize> = spec
        .split(',')
        .map(str::trim)
        .filter(|label| !label.is_empty())
        .map(|label| {
            m.row_index(label)
                .ok_or_else(|| usage(anyhow!("unknown server {label:?}")))
        })
        .collect::<anyhow::Result<_>>()?;
    servers.sort_unstable();
    servers.dedup();
    Ok(servers)
}

fn straggler_count(raw: Option<&str>) -> usize {
    match raw.map(str::trim) {
        Some(s) if s.contains(',') => s.split(',').filter(|l| !l.trim().is_empty()).count(),
        Some(s) => s.parse().unwrap_or(0),
        None => 0,
    }
}

fn write_artifact(dir: &Path, name: &str, contents: &[u8]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn cmd_run(args: RunArgs) -> anyhow::Result<bool> {
    let job = args.job.resolved()?;
    let balanced = job.balanced()?;
    let (construction, spec) =
        job.build(|k| k.saturating_sub(straggler_count(args.stragglers.as_deref())))?;
    let m = spec.matrix();
    let stragglers = parse_servers(m, args.stragglers.as_deref().unwrap_or(""), true)?;
    let partial = parse_servers(m, args.partial.as_deref().unwrap_or(""), false)?;
    if stragglers.iter().any(|s| partial.contains(s)) {
        return Err(usage(anyhow!(
            "a server cannot be both a full and a partial straggler"
        )));
    }

    let kappa = m.k() - stragglers.len();
    let (plan, transcript, reduce, load, audit): (_, _, _, _, Option<AuditReport>) =
        if stragglers.is_empty() {
            let plan = if balanced {
                if !partial.is_empty() {
                    return Err(usage(anyhow!(
                        "balanced plans cannot avoid partial stragglers"
                    )));
                }
                build_sender_plan(m, spec.cover())?
            } else {
                default_plan(spec.cover(), |k| !partial.contains(&k))?
            };
            let roles: Vec<MapRole> = (0..m.k())
                .map(|k| {
                    if partial.contains(&k) {
                        MapRole::Partial
                    } else {
                        MapRole::Full
                    }
                })
                .collect();
            let out = run_pipeline(&spec, &spec.standard_assignment(), &plan, &roles)?;
            let audit = balanced
                .then(|| audit_plan(&plan, &out.transcript, m, spec.q() / m.k() * spec.t()));
            (plan, out.transcript, out.reduce, out.load, audit)
        } else {
            if !partial.is_empty() {
                return Err(usage(anyhow!(
                    "full and partial stragglers cannot be combined"
                )));
            }
            let scenario = StragglerScenario::new(&spec, &stragglers)?;
            let hint = if balanced {
                PlanHint::Balanced
            } else {
                PlanHint::FirstRows
            };
            let out = straggler_run(&spec, &scenario, hint)?;
            (out.plan, out.transcript, out.reduce, out.load, None)
        };

    let formula = straggler_load_formula(m.k(), m.r(), spec.g(), kappa)?;
    let summary = RunSummary {
        construction: construction.to_string(),
        k: m.k(),
        n: m.n(),
        r: m.r(),
        g: spec.g(),
        s: spec.cover().len(),
        q: spec.q(),
        t: spec.t(),
        seed: spec.file_seed(),
        spec_hash: hex(&spec.spec_hash()),
        plan: if balanced { "balanced" } else { "default" }.into(),
        stragglers: stragglers
            .iter()
            .map(|&s| m.row_label(s).to_owned())
            .collect(),
        kappa,
        transmissions: transcript.transmissions().len(),
        total_bits: transcript.total_bits(),
        measured_load: load.into(),
        formula_load: formula.into(),
        loads_match: load == formula,
        decode_ok: reduce.ok(),
        decode_failures: reduce.failures.len(),
        audit_balanced: audit.as_ref().map(|a| a.balanced),
    };

    if let Some(dir) = &args.out {
        let mut log = Vec::new();
        write_log(&mut log, &LogHeader::for_spec(&spec), &transcript)?;
        write_artifact(dir, "transcript.bin", &log)?;
        write_artifact(
            dir,
            "summary.json",
            serde_json::to_string_pretty(&summary)?.as_bytes(),
        )?;
        write_artifact(
            dir,
            "plan.json",
            serde_json::to_string_pretty(&plan.to_json(m))?.as_bytes(),
        )?;
        let audit_csv = audit
            .clone()
            .unwrap_or_else(|| audit_plan(&plan, &transcript, m, spec.q() / kappa * spec.t()))
            .to_csv();
        write_artifact(dir, "audit.csv", audit_csv.as_bytes())?;
        write_artifact(dir, "matrix.txt", m.to_text().as_bytes())?;
        write_artifact(dir, "cover.txt", spec.cover().to_text(m).as_bytes())?;
    }

    if args.json {
        print_json(&summary)?;
    } else {
        println!("construction   {}", summary.construction);
        println!(
            "K N r g S      {} {} {} {} {}",
            summary.k, summary.n, summary.r, summary.g, summary.s
        );
        println!(
            "Q T seed       {} {} {}",
            summary.q, summary.t, summary.seed
        );
        if !summary.stragglers.is_empty() {
            println!(
                "stragglers     {} (kappa = {})",
                summary.stragglers.join(","),
                kappa
            );
        }
        println!("transmissions  {}", summary.transmissions);
        println!("total bits     {}", summary.total_bits);
        println!(
            "load           {} = {} (formula {} = {})",
            summary.measured_load.fraction,
            summary.measured_load.decimal,
            summary.formula_load.fraction,
            summary.formula_load.decimal
        );
        println!("loads match    {}", summary.loads_match);
        println!("decode ok      {}", summary.decode_ok);
        if let Some(a) = &audit {
            println!("audit balanced {}", a.balanced);
            print!("{}", a.to_csv());
        }
    }
    for f in reduce.failures.iter().take(10) {
        eprintln!(
            "decode failure: server {} q={} f={} ({:?})",
            f.server,
            f.q,
            f.f.as_deref().unwrap_or("-"),
            f.kind
        );
    }
    Ok(summary.ok())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SweepSummary {
    construction: String,
    kappa: usize,
    total_subsets: u64,
    sampled: bool,
    max: String,
    min: String,
    formula: String,
    all_equal: bool,
    all_decoded: bool,
    entries: Vec<coded_mapreduce::straggler::SweepEntry>,
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<bool> {
    let job = args.job.resolved()?;
    let balanced = job.balanced()?;
    let kappa_arg = args.kappa;
    let (construction, spec) = job.build(|k| kappa_arg.unwrap_or(k))?;
    let m = spec.matrix();
    let kappa = args.kappa.unwrap_or(m.k());
    let opts = SweepOptions {
        cap: args.cap,
        seed: job.seed(),
        hint: if balanced {
            PlanHint::Balanced
        } else {
            PlanHint::FirstRows
        },
    };
    let report = worst_case_sweep(&spec, kappa, &opts)?;
    let formula = straggler_load_formula(m.k(), m.r(), spec.g(), kappa)?;
    let summary = SweepSummary {
        construction: construction.to_string(),
        kappa,
        total_subsets: report.total_subsets,
        sampled: report.sampled,
        max: fraction_string(report.max),
        min: fraction_string(report.min),
        formula: fraction_string(formula),
        all_equal: report.all_equal(),
        all_decoded: report.all_decoded(),
        entries: report.entries.clone(),
    };
    let ok = summary.all_equal && summary.all_decoded && report.max == formula;
    let mut csv = String::from("stragglers,load,load_decimal,decoded\n");
    for (e, l) in report.entries.iter().zip(&report.loads) {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            e.stragglers.join(" "),
            e.load,
            decimal_half_even(*l, 4),
            e.decoded
        ));
    }
    if let Some(dir) = &args.out {
        write_artifact(dir, "sweep.csv", csv.as_bytes())?;
        write_artifact(
            dir,
            "sweep.json",
            serde_json::to_string_pretty(&summary)?.as_bytes(),
        )?;
    }
    if args.json {
        print_json(&summary)?;
    } else {
        print!("{csv}");
        println!(
            "# {} subsets of {}{}; worst {} = {}; formula {}; all equal {}; all decoded {}",
            report.entries.len(),
            report.total_subsets,
            if report.sampled { " (sampled)" } else { "" },
            summary.max,
            decimal_half_even(report.max, 4),
            summary.formula,
            summary.all_equal,
            summary.all_decoded
        );
    }
    Ok(ok)
}

// ---------------------------------------------------------------------------
// tables
// ---------------------------------------------------------------------------

fn cmd_table1(args: Table1Args) -> anyhow::Result<bool> {
    let text = fs::read_to_string(&args.params)
        .with_context(|| format!("reading {}", args.params.display()))
        .map_err(usage)?;
    let requests = parse_table1_params(&text)?;
    let report = table1_report(&requests, args.seed)?;
    let csv = report.to_csv();
    if let Some(dir) = &args.out {
        write_artifact(dir, "table1.csv", csv.as_bytes())?;
    }
    if args.json {
        print_json(&report)?;
    } else {
        print!("{csv}");
    }
    Ok(report.pass())
}

fn cmd_table2(args: Table2Args) -> anyhow::Result<bool> {
    if args.big_t == 0 {
        return Err(usage(anyhow!("--T must be at least 1")));
    }
    let mut rows = table2_rows();
    if args.extended {
        rows.extend(extended_rows());
    }
    let report = table2_report(&rows, args.big_t, args.seed)?;
    let csv = report.to_csv();
    if let Some(dir) = &args.out {
        write_artifact(dir, "table2.csv", csv.as_bytes())?;
    }
    if args.json {
        print_json(&report)?;
    } else {
        print!("{csv}");
    }
    for i in report.failing_rows() {
        let row = &report.rows[i];
        eprintln!(
            "row {} (K={} r={} kappa={}) failed: {}",
            i + 1,
            row.k,
            row.r,
            row.kappa,
            row.notes.join("; ")
        );
    }
    Ok(report.pass())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct VerifyReport {
    matrix: coded_mapreduce::matrix::ValidationReport,
    cover: coded_mapreduce::matrix::CoverReport,
    /// `S g = N (K - r)`; absent when sizes differ
    counting_identity: Option<bool>,
    row_regularity: coded_mapreduce::cover::RowRegularity,
    ok: bool,
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<bool> {
    let read = |p: &PathBuf| {
        fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(usage)
    };
    let m = BinaryComputingMatrix::parse(&read(&args.matrix)?)
        .with_context(|| format!("parsing {}", args.matrix.display()))
        .map_err(usage)?;
    let c = IdentityCover::parse(&read(&args.cover)?, &m)
        .with_context(|| format!("parsing {}", args.cover.display()))
        .map_err(usage)?;
    let matrix = validate_matrix(&m);
    let cover = verify_cover(&m, &c);
    let counting_identity = count_identity_check(&c, &m).ok();
    let regularity = row_regularity(&c, m.k());
    let ok = matrix.is_ok() && cover.is_ok() && counting_identity == Some(true);
    let report = VerifyReport {
        matrix,
        cover,
        counting_identity,
        row_regularity: regularity,
        ok,
    };
    if args.json {
        print_json(&report)?;
    } else {
        println!(
            "matrix K={} N={} r={}: {}",
            m.k(),
            m.n(),
            m.r(),
            verdict(report.matrix.is_ok())
        );
        for v in &report.matrix.violations {
            println!("  violation: {v}");
        }
        for w in &report.matrix.warnings {
            println!("  warning: {w}");
        }
        println!(
            "cover S={} g={}: {}",
            report.cover.members,
            report
                .cover
                .uniform_size
                .map_or("mixed".into(), |g| g.to_string()),
            verdict(report.cover.is_ok())
        );
        for mm in &report.cover.malformed {
            println!("  malformed member {}: {:?}", mm.member, mm.defects);
        }
        for e in &report.cover.missing {
            println!("  missing ({}, {})", e.row, e.column);
        }
        for e in &report.cover.overlapping {
            println!(
                "  overlap ({}, {}) in members {:?}",
                e.row, e.column, e.members
            );
        }
        println!(
            "counting identity S*g = N(K-r): {}",
            match report.counting_identity {
                Some(b) => verdict(b).to_owned(),
                None => "not applicable (mixed sizes)".into(),
            }
        );
        println!(
            "row regularity: {} (counts {:?})",
            report.row_regularity.regular, report.row_regularity.counts
        );
    }
    Ok(ok)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}
