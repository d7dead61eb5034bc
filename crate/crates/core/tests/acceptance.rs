//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use coded_mapreduce::balance::{
    audit_plan, balance_preconditions, build_sender_plan, default_plan, perfect_matching,
    BalanceGraph,
};
use coded_mapreduce::constructions::{
    fano_matrix, man_matrix, Construction, SchemeParameters, Table1Scheme,
};
use coded_mapreduce::cover::{analytic_cover, search_cover, SearchConfig, SearchMode};
use coded_mapreduce::rational::{decimal_half_even, fraction_string, printed_places};
use coded_mapreduce::report::{parse_table1_params, preferred_cover, table1_report};
use coded_mapreduce::shuffle::{
    run_map_phase, run_pipeline, run_reduce, run_shuffle, JobSpec, MapRole,
};
use coded_mapreduce::straggler::{
    optimal_straggler_load, straggler_load_formula, table2_report, table2_rows, worst_case_sweep,
    PlanHint, SweepOptions,
};
use coded_mapreduce::{
    count_identity_check, load_formula, verify_cover, BinaryComputingMatrix, IdentityCover,
    Rational,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn suite() -> Vec<(Construction, BinaryComputingMatrix, IdentityCover)> {
    Construction::suite()
        .into_iter()
        .map(|c| {
            let m = c.build().unwrap_or_else(|e| panic!("{c}: {e}"));
            let cover = preferred_cover(&c, &m).unwrap_or_else(|e| panic!("{c}: {e}"));
            (c, m, cover)
        })
        .collect()
}

fn spec(m: &BinaryComputingMatrix, c: &IdentityCover, q: usize, t: usize, seed: u64) -> JobSpec {
    JobSpec::new(m.clone(), c.clone(), q, t, seed).expect("valid job")
}

fn full_roles(k: usize) -> Vec<MapRole> {
    vec![MapRole::Full; k]
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let report = table2_report(&table2_rows(), 1, 0).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let ours = ["1/2", "6/25", "3/10", "7/16"];
    let mut problems = Vec::new();
    for (i, row) in report.rows.iter().enumerate() {
        if row.ours != ours[i] {
            problems.push(format!("row {}: ours {} != {}", i + 1, row.ours, ours[i]));
        }
        if !row.pass {
            problems.push(format!("row {}: {}", i + 1, row.notes.join("; ")));
        }
    }
    if elapsed >= Duration::from_secs(10) {
        problems.push(format!("runtime {elapsed:?} >= 10 s"));
    }
    let values: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            let places = printed_places(r.printed_optimal.as_deref().unwrap_or(""));
            let optimal = r
                .optimal
                .split_once('/')
                .map_or(Rational::from_integer(0), |(p, q)| {
                    Rational::new(p.parse().unwrap(), q.parse().unwrap())
                });
            format!("{}|{}", r.ours, decimal_half_even(optimal, places))
        })
        .collect();
    if problems.is_empty() {
        Ok(format!(
            "ours|optimal = {} in {elapsed:.2?}",
            values.join(", ")
        ))
    } else {
        Err(problems.join("; "))
    }
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut count = 0;
    for (c, m, cover) in suite() {
        let g = cover.uniform_size().ok_or(format!("{c}: mixed sizes"))?;
        let job = spec(&m, &cover, m.k(), 2, 1);
        let plan = default_plan(job.cover(), |_| true).map_err(|e| e.to_string())?;
        let out = run_pipeline(&job, &job.standard_assignment(), &plan, &full_roles(m.k()))
            .map_err(|e| format!("{c}: {e}"))?;
        let formula = load_formula(m.k(), m.r(), g).map_err(|e| e.to_string())?;
        ensure(out.load == formula, || {
            format!(
                "{c}: measured {} != {}",
                fraction_string(out.load),
                fraction_string(formula)
            )
        })?;
        count += 1;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || {
        format!("runtime {elapsed:?} >= 60 s")
    })?;
    Ok(format!(
        "{count} constructions, measured = 2/g(1-r/K) in {elapsed:.2?}"
    ))
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let settings: Vec<(usize, usize, u64)> = (0..20)
        .map(|_| (rng.gen_range(1..=3), rng.gen_range(1..=24), rng.gen()))
        .collect();
    let mut runs = 0;
    for (c, m, cover) in suite() {
        for &(beta, t, seed) in &settings {
            let job = spec(&m, &cover, beta * m.k(), t, seed);
            let plan = default_plan(job.cover(), |_| true).map_err(|e| e.to_string())?;
            let out = run_pipeline(&job, &job.standard_assignment(), &plan, &full_roles(m.k()))
                .map_err(|e| format!("{c}: {e}"))?;
            ensure(out.reduce.ok(), || {
                format!(
                    "{c} Q={} T={t}: {:?}",
                    beta * m.k(),
                    out.reduce.failures.first()
                )
            })?;
            runs += 1;
        }
        if balance_preconditions(&m, &cover).hold() && cover.uniform_size().unwrap_or(0) >= 2 {
            if let Ok(plan) = build_sender_plan(&m, &cover) {
                let job = spec(&m, &cover, m.k(), 3, 5);
                let out = run_pipeline(&job, &job.standard_assignment(), &plan, &full_roles(m.k()))
                    .map_err(|e| format!("{c} balanced: {e}"))?;
                ensure(out.reduce.ok(), || {
                    format!("{c} balanced plan: decode failure")
                })?;
                runs += 1;
            }
        }
    }
    let mut straggler_runs = 0;
    let man = man_matrix(5, 2).unwrap();
    let man_cover = preferred_cover(&Construction::Man { k: 5, r: 2 }, &man).unwrap();
    let fano = fano_matrix();
    let fano_cover = search_cover(&fano, 3, SearchMode::Exact, &SearchConfig::default()).unwrap();
    for (name, m, cover) in [("man(5,2)", man, man_cover), ("fano", fano, fano_cover)] {
        let g = cover.uniform_size().unwrap();
        for kappa in (m.k() - (g - 2))..=m.k() {
            for hint in [PlanHint::FirstRows, PlanHint::Balanced] {
                let job = spec(&m, &cover, num_integer::lcm(m.k(), kappa), 4, 17);
                let opts = SweepOptions {
                    cap: usize::MAX,
                    seed: 0,
                    hint,
                };
                let sweep =
                    worst_case_sweep(&job, kappa, &opts).map_err(|e| format!("{name}: {e}"))?;
                ensure(!sweep.sampled && sweep.all_decoded(), || {
                    format!("{name} kappa={kappa}: decode failure or sampled sweep")
                })?;
                straggler_runs += sweep.entries.len();
            }
        }
    }
    Ok(format!(
        "{runs} pipeline runs and {straggler_runs} straggler runs match the oracle"
    ))
}

fn criterion_4() -> Verdict {
    let mut checked = 0;
    let check = |name: &str, m: &BinaryComputingMatrix, c: &IdentityCover| -> Result<(), String> {
        let report = verify_cover(m, c);
        ensure(report.is_ok(), || format!("{name}: {report:?}"))?;
        ensure(report.overlapping.is_empty(), || {
            format!("{name}: overlaps")
        })?;
        ensure(count_identity_check(c, m) == Ok(true), || {
            format!("{name}: S*g != N(K-r)")
        })
    };
    for (c, m, _) in suite() {
        if let Some(cover) = analytic_cover(&c, &m) {
            check(
                &format!("{c} analytic"),
                &m,
                &cover.map_err(|e| e.to_string())?,
            )?;
            checked += 1;
        }
        if m.k() * m.n() <= 64 {
            if let Some(g) = c.natural_g() {
                let found = search_cover(&m, g, SearchMode::Exact, &SearchConfig::default())
                    .map_err(|e| format!("{c} exact: {e}"))?;
                check(&format!("{c} exact"), &m, &found)?;
                checked += 1;
                if let Ok(found) = search_cover(&m, g, SearchMode::Greedy, &SearchConfig::default())
                {
                    check(&format!("{c} greedy"), &m, &found)?;
                    checked += 1;
                }
            }
        }
    }
    let fano = fano_matrix();
    let c = search_cover(&fano, 3, SearchMode::Exact, &SearchConfig::default())
        .map_err(|e| e.to_string())?;
    check("fano exact", &fano, &c)?;
    ensure(c.len() == 7 && c.uniform_size() == Some(3), || {
        format!("fano: S={} g={:?}", c.len(), c.uniform_size())
    })?;
    Ok(format!(
        "{} covers verified; fano exact search S=7 g=3",
        checked + 1
    ))
}

fn criterion_5() -> Verdict {
    let mut pairs = 0;
    for k in 2..=10usize {
        for r in 1..k {
            let ours = load_formula(k, r, r + 1).map_err(|e| e.to_string())?;
            let single = Rational::new(2, r as u64) * Rational::new((k - r) as u64, k as u64);
            ensure(ours < single, || format!("K={k} r={r}: {ours} !< {single}"))?;
            let optimal = optimal_straggler_load(k, r, k).map_err(|e| e.to_string())?;
            let scaled = Rational::new(2 * r as u64, (r + 1) as u64) * optimal;
            ensure(ours == scaled, || {
                format!("K={k} r={r}: {ours} != 2r/(r+1) L* = {scaled}")
            })?;
            if k <= 8 {
                let m = man_matrix(k, r).map_err(|e| e.to_string())?;
                let cover =
                    preferred_cover(&Construction::Man { k, r }, &m).map_err(|e| e.to_string())?;
                let job = spec(&m, &cover, k, 1, 0);
                let plan = default_plan(job.cover(), |_| true).map_err(|e| e.to_string())?;
                let out = run_pipeline(&job, &job.standard_assignment(), &plan, &full_roles(k))
                    .map_err(|e| e.to_string())?;
                ensure(out.load == ours, || {
                    format!("K={k} r={r}: simulated {} != {ours}", out.load)
                })?;
            }
            pairs += 1;
        }
    }
    Ok(format!(
        "{pairs} (K,r) pairs: 2/(r+1)(1-r/K) < 2/r(1-r/K) and = 2r/(r+1) L*"
    ))
}

fn criterion_6() -> Verdict {
    let fano = fano_matrix();
    let fano_cover = search_cover(&fano, 3, SearchMode::Exact, &SearchConfig::default()).unwrap();
    let man = man_matrix(5, 2).unwrap();
    let man_cover = preferred_cover(&Construction::Man { k: 5, r: 2 }, &man).unwrap();
    let mut lines = Vec::new();
    for (name, m, cover, gamma) in [
        ("fano", fano, fano_cover, 1usize),
        ("man(5,2)", man, man_cover, 2),
    ] {
        let g = cover.uniform_size().unwrap();
        let graph = BalanceGraph::new(&cover, &(0..m.k()).collect::<Vec<_>>())
            .map_err(|e| e.to_string())?;
        ensure(graph.gamma() == gamma, || {
            format!("{name}: gamma {}", graph.gamma())
        })?;
        let first = perfect_matching(&graph).map_err(|e| e.to_string())?;
        let residual = graph.without_matched_servers(&first);
        ensure(residual.regular_degree() == Some(gamma * (g - 1)), || {
            format!(
                "{name}: residual degree {:?} != {}",
                residual.regular_degree(),
                gamma * (g - 1)
            )
        })?;

        let plan = build_sender_plan(&m, &cover).map_err(|e| format!("{name}: {e}"))?;
        for beta in [1usize, 2] {
            let t = 16;
            let job = spec(&m, &cover, beta * m.k(), t, 3);
            let mut stores = run_map_phase(&job);
            let transcript = run_shuffle(&job, &job.standard_assignment(), &plan, &mut stores)
                .map_err(|e| e.to_string())?;
            ensure(
                run_reduce(&job, &job.standard_assignment(), &stores).ok(),
                || format!("{name}: decode"),
            )?;
            let audit = audit_plan(&plan, &transcript, &m, beta * t);
            let each = (cover.len() * beta * t / m.k()) as u64;
            ensure(audit.balanced, || format!("{name}: audit not balanced"))?;
            ensure(
                audit
                    .rows
                    .iter()
                    .all(|r| r.coded_bytes == each && r.uncoded_bytes == each),
                || format!("{name}: per-server bytes differ from S beta T / K = {each}"),
            )?;
            if beta == 2 {
                lines.push(format!("{name} gamma={gamma} {each}+{each} bytes/server"));
            }
        }
    }
    Ok(lines.join("; "))
}

fn criterion_7() -> Verdict {
    let mut scenarios = 0;
    for (c, m, cover) in suite() {
        let g = cover.uniform_size().unwrap();
        let k = m.k();
        let plain = {
            let job = spec(&m, &cover, k, 1, 0);
            let plan = default_plan(job.cover(), |_| true).map_err(|e| e.to_string())?;
            run_pipeline(&job, &job.standard_assignment(), &plan, &full_roles(k))
                .map_err(|e| e.to_string())?
                .load
        };
        for kappa in (k - (g - 2))..=k {
            let job = spec(&m, &cover, num_integer::lcm(k, kappa), 1, 0);
            let opts = SweepOptions {
                cap: usize::MAX,
                seed: 0,
                hint: PlanHint::FirstRows,
            };
            let sweep = worst_case_sweep(&job, kappa, &opts)
                .map_err(|e| format!("{c} kappa={kappa}: {e}"))?;
            let expected = plain * Rational::new(k as u64, kappa as u64);
            ensure(sweep.all_equal() && sweep.max == expected, || {
                format!(
                    "{c} kappa={kappa}: loads {}..{} vs K/kappa L(K) = {}",
                    sweep.min, sweep.max, expected
                )
            })?;
            ensure(sweep.all_decoded(), || {
                format!("{c} kappa={kappa}: decode failure")
            })?;
            let formula = straggler_load_formula(k, m.r(), g, kappa).map_err(|e| e.to_string())?;
            ensure(sweep.max == formula, || {
                format!("{c} kappa={kappa}: formula mismatch")
            })?;
            scenarios += sweep.entries.len();
        }
    }
    Ok(format!(
        "{scenarios} straggler subsets: L(kappa) = K/kappa L(K), identical per size"
    ))
}

fn criterion_8() -> Verdict {
    let requests = parse_table1_params(
        "I v=7 k=3\nII v=7 k=3\nIII v=8 k=4 t=3\nIV v=7 t=3 kappa=5\nV k=3 n=3\n",
    )
    .map_err(|e| e.to_string())?;
    let report = table1_report(&requests, 0).map_err(|e| e.to_string())?;
    ensure(report.pass(), || {
        "a simulated row disagrees with its formula".into()
    })?;
    let row = |i: usize| &report.rows[i];
    ensure(
        row(0).simulated.as_deref() == Some("2/7") && row(0).load == "2/7",
        || "row I".into(),
    )?;
    ensure(
        row(2).simulated.is_none() && row(1).simulated.is_none(),
        || "rows II/III simulated".into(),
    )?;
    ensure(
        row(1).note.contains("formula only") && row(2).note.contains("formula only"),
        || "rows II/III not marked formula-only".into(),
    )?;
    ensure(
        row(3).simulated.as_deref() == Some("6/35")
            && row(3).simulated_kappa.as_deref() == Some("6/25"),
        || "row IV".into(),
    )?;
    ensure(row(4).simulated.as_deref() == Some("2/9"), || {
        "row V".into()
    })?;
    ensure(
        row(1).formula == "2/v" && row(2).formula == "2(v-t+1)C(k-1,t-1)^2/(v C(v-1,t-1)^2)",
        || "printed expressions".into(),
    )?;
    let iii = SchemeParameters::new(Table1Scheme::TDesignScheme1 { v: 8, k: 4, t: 3 })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "I 2/7=2/7, IV 6/35 and kappa=5 6/25, V 2/9 simulated; II {} and III {} (K={}) formula only",
        row(1).load,
        row(2).load,
        iii.k
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("1 comparison table reproduction", criterion_1),
        ("2 load formula equals simulation", criterion_2),
        ("3 end-to-end decode correctness", criterion_3),
        ("4 cover validity and counting identity", criterion_4),
        ("5 subset-scheme bound", criterion_5),
        ("6 two-matching load balance", criterion_6),
        ("7 straggler scaling law", criterion_7),
        ("8 design-scheme cross-checks", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of 8 criteria failed");
        ExitCode::FAILURE
    }
}
