//! Acceptance suite. One line per criterion; exits nonzero if any fails.
//!
//! Run with `cargo test -p silentdfs-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;

use silentdfs_core::experiments::bench::{run_bench, BenchConfig, InitKind};
use silentdfs_core::experiments::corpus::{
    default_corpus, exhaustive_corpus, oracle_corpus, CorpusEntry,
};
use silentdfs_core::experiments::fuzz::{run_fuzz, FuzzConfig};
use silentdfs_core::graph::PortGraph;
use silentdfs_core::oracle::{first_dfs_mark, lex_smallest_paths, tree_from_paths};
use silentdfs_core::registers::Configuration;
use silentdfs_core::stabilizer::{
    audit_register_width, legal_configuration, ActivationMode, DaemonSchedule, Simulator,
};
use silentdfs_core::token::{
    run_circulation, CirculationOptions, CirculationTrace, Fault, ScheduledFault, TreeStart,
};
use silentdfs_core::verifier::{verify_all, Predicate, VerifyMode};

/// Random graphs checked against the brute-force path oracle.
const ORACLE_RANDOM: usize = 200;
/// Corrupted configurations that must be evaluated (shift-equivalents excluded).
const FUZZ_MIN_EVALUATED: usize = 10_000;
const FUZZ_TRIALS: usize = 12_000;
const FIT_MIN_R2: f64 = 0.95;
const TIME_FACTOR: usize = 10;
const CLOSURE_FACTOR: usize = 10;
const TOKEN_GRAPHS: usize = 50;
const TOKEN_RECOVERY_FACTOR: usize = 10;
const WIDTH_CONSTANT: u32 = 12;
const BENCH_SIZES: [usize; 5] = [16, 32, 64, 128, 256];
const BENCH_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn oracle_equivalence() -> Outcome {
    let mut entries = exhaustive_corpus(6);
    let exhaustive = entries.len();
    entries.extend(oracle_corpus(ORACLE_RANDOM, 17));
    let mismatches: Vec<String> = entries
        .par_iter()
        .filter_map(|e| {
            let marked = first_dfs_mark(&e.graph).parent_nodes(&e.graph);
            let from_paths =
                lex_smallest_paths(&e.graph).and_then(|p| tree_from_paths(&p, &e.graph));
            match from_paths {
                Ok(t) if t == marked => None,
                Ok(_) => Some(e.describe()),
                Err(err) => Some(format!("{}: {err}", e.describe())),
            }
        })
        .collect();
    outcome(
        mismatches.is_empty(),
        format!(
            "{exhaustive} exhaustive + {ORACLE_RANDOM} random graphs, {} mismatches {:?}",
            mismatches.len(),
            first(&mismatches)
        ),
    )
}

fn first(v: &[String]) -> Vec<&String> {
    v.iter().take(3).collect()
}

fn verifier_completeness(corpus: &[CorpusEntry]) -> Outcome {
    let rejected: Vec<String> = corpus
        .par_iter()
        .filter(|e| {
            !verify_all(
                &e.graph,
                &legal_configuration(&e.graph),
                VerifyMode::FirstDfs,
            )
            .accepted()
        })
        .map(|e| e.describe())
        .collect();
    let max_n = corpus.iter().map(|e| e.n).max().unwrap_or(0);
    outcome(
        rejected.is_empty(),
        format!(
            "{} graphs up to n={max_n}, {} rejected {:?}",
            corpus.len(),
            rejected.len(),
            first(&rejected)
        ),
    )
}

fn fuzz_config() -> FuzzConfig {
    FuzzConfig {
        trials: FUZZ_TRIALS,
        ..FuzzConfig::default()
    }
}

fn verifier_soundness() -> Outcome {
    let r = run_fuzz(&fuzz_config());
    outcome(
        r.perfect() && r.evaluated >= FUZZ_MIN_EVALUATED,
        format!(
            "{} trials, {} shift-equivalent excluded, detected {}/{} (rate {:.6}), misses {}",
            r.trials,
            r.excluded_shift_equivalent,
            r.detected,
            r.evaluated,
            r.detection_rate,
            r.misses.len()
        ),
    )
}

fn one_round_detection() -> Outcome {
    let cfg = fuzz_config();
    let latencies: Vec<Option<usize>> = (0..cfg.trials)
        .into_par_iter()
        .filter_map(|i| {
            let case = cfg.case(i);
            if case.shift_equivalent {
                return None;
            }
            let mut sim = Simulator::new(
                &case.graph,
                case.config,
                DaemonSchedule::synchronous(),
                None,
            )
            .unwrap();
            sim.step_round();
            Some(sim.metrics().detection_latency)
        })
        .collect();
    let bad = latencies.iter().filter(|l| **l != Some(1)).count();
    outcome(
        bad == 0,
        format!(
            "{} replayed trials, {bad} with latency != 1",
            latencies.len()
        ),
    )
}

fn label_bound(corpus: &[CorpusEntry]) -> Outcome {
    let bad: Vec<String> = corpus
        .par_iter()
        .filter(|e| {
            let n = e.graph.node_count() as i64;
            let mut labels: Vec<i64> = Vec::with_capacity(2 * n as usize);
            for l in &first_dfs_mark(&e.graph).nodes {
                match l.interval {
                    Some(i) => labels.extend([i.enter, i.exit]),
                    None => return true,
                }
            }
            labels.sort_unstable();
            labels != (1..=2 * n).collect::<Vec<_>>()
        })
        .map(|e| e.describe())
        .collect();
    outcome(
        bad.is_empty(),
        format!(
            "{} graphs, {} not a permutation of 1..2n {:?}",
            corpus.len(),
            bad.len(),
            first(&bad)
        ),
    )
}

fn linear_time() -> Outcome {
    let cfg = BenchConfig {
        sizes: BENCH_SIZES.to_vec(),
        seeds: BENCH_SEEDS.to_vec(),
        inits: vec![InitKind::Null, InitKind::Corrupted, InitKind::Garbage],
        time_factor: TIME_FACTOR,
        ..BenchConfig::default()
    };
    let r = run_bench(&cfg);
    let gated = [InitKind::Null, InitKind::Corrupted];
    let mut pass = r.all_converged;
    let mut parts = Vec::new();
    for (init, fit) in &r.fits {
        let rows: Vec<_> = r.rows.iter().filter(|row| row.init == *init).collect();
        let worst = rows
            .iter()
            .map(|row| row.rounds_to_silence as f64 / row.n as f64)
            .fold(0.0, f64::max);
        let within = rows
            .iter()
            .all(|row| row.converged && row.rounds_to_silence <= TIME_FACTOR * row.n);
        if gated.contains(init) {
            pass &= fit.r_squared >= FIT_MIN_R2 && within;
        }
        parts.push(format!(
            "{}{}: {:.2}n{:+.1} R2={:.4} max {:.2}n",
            init.name(),
            if gated.contains(init) { "" } else { " (info)" },
            fit.slope,
            fit.intercept,
            fit.r_squared,
            worst
        ));
    }
    outcome(pass, format!("{} runs; {}", r.rows.len(), parts.join("; ")))
}

fn closure(corpus: &[CorpusEntry]) -> Outcome {
    let modes = [
        ActivationMode::Synchronous,
        ActivationMode::RandomSubset,
        ActivationMode::AdversarialSingle,
    ];
    let jobs: Vec<(&CorpusEntry, ActivationMode)> = corpus
        .iter()
        .flat_map(|e| modes.iter().map(move |&m| (e, m)))
        .collect();
    let dirty: Vec<String> = jobs
        .par_iter()
        .filter_map(|&(e, mode)| {
            let n = e.graph.node_count();
            let schedule = DaemonSchedule::for_mode(mode, n, 11);
            let mut sim =
                Simulator::new(&e.graph, legal_configuration(&e.graph), schedule, None).unwrap();
            let writes: usize = (0..CLOSURE_FACTOR * n)
                .map(|_| sim.step_round().writers.len())
                .sum();
            (writes > 0).then(|| format!("{} {mode:?}: {writes} writes", e.describe()))
        })
        .collect();
    outcome(
        dirty.is_empty(),
        format!(
            "{} runs of 10n rounds, {} with writes {:?}",
            jobs.len(),
            dirty.len(),
            first(&dirty)
        ),
    )
}

fn mode_split() -> Outcome {
    let g = PortGraph::new(0, vec![vec![1, 2], vec![0, 2], vec![0, 1]]).unwrap();
    // r -> b -> a although r's port 0 leads to a
    let mut c = Configuration::null(3);
    for (v, parent, enter, exit) in [(0, None, 1, 6), (2, Some(0), 2, 5), (1, Some(1), 3, 4)] {
        c[v].parent_port = parent;
        c[v].in_label = Some(enter);
        c[v].out_label = Some(exit);
    }
    let some = verify_all(&g, &c, VerifyMode::SomeDfs);
    let firstdfs = verify_all(&g, &c, VerifyMode::FirstDfs);
    let root_a6 = firstdfs.get(0).failures.contains(&Predicate::A6);
    outcome(
        some.accepted() && !firstdfs.accepted() && root_a6,
        format!(
            "some_dfs accepted={}, first_dfs accepted={}, root failures {:?}",
            some.accepted(),
            firstdfs.accepted(),
            firstdfs.get(0).failures
        ),
    )
}

fn token_graphs(corpus: &[CorpusEntry]) -> Vec<&CorpusEntry> {
    let (small, large): (Vec<_>, Vec<_>) = corpus.iter().partition(|e| e.n <= 6);
    let want_small = TOKEN_GRAPHS.saturating_sub(large.len().min(TOKEN_GRAPHS / 2));
    let stride = (small.len() / want_small.max(1)).max(1);
    let mut picked: Vec<&CorpusEntry> = small
        .iter()
        .step_by(stride)
        .take(want_small)
        .copied()
        .collect();
    let large_stride = (large.len() / (TOKEN_GRAPHS - picked.len()).max(1)).max(1);
    picked.extend(
        large
            .iter()
            .step_by(large_stride)
            .take(TOKEN_GRAPHS - picked.len()),
    );
    picked
}

/// Rounds from the fault until the holder count is 1 for good.
fn recovery(trace: &CirculationTrace, fault_round: usize) -> Option<usize> {
    trace
        .single_token_from()
        .map(|r| r.saturating_sub(fault_round - 1))
}

fn token_circulation(corpus: &[CorpusEntry]) -> Outcome {
    let graphs = token_graphs(corpus);
    let failures: Vec<String> = graphs
        .par_iter()
        .flat_map_iter(|e| {
            let n = e.graph.node_count();
            let bound = TOKEN_RECOVERY_FACTOR * n;
            let fault_round = 4 * n + 3;
            let rounds = fault_round + bound + 8 * n + 10;
            let mut errs = Vec::new();

            let clean = run_circulation(&e.graph, &CirculationOptions::new(rounds)).unwrap();
            let cycles: Vec<_> = clean.cycles_after(0).collect();
            if cycles.len() < 2
                || cycles.iter().any(|c| c.order != clean.expected_order)
                || clean.single_token_from() != Some(0)
            {
                errs.push(format!("{} clean run", e.describe()));
            }

            let mut from_null = CirculationOptions::new(rounds + 20 * n);
            from_null.tree_start = TreeStart::Null;
            if run_circulation(&e.graph, &from_null)
                .unwrap()
                .legitimate_from()
                .is_none()
            {
                errs.push(format!("{} null tree start", e.describe()));
            }

            let victim = n - 1;
            for (name, fault) in [
                ("duplicate", Fault::DuplicateToken { node: victim }),
                ("delete", Fault::DeleteToken),
            ] {
                let mut opts = CirculationOptions::new(rounds);
                opts.faults.push(ScheduledFault {
                    round: fault_round,
                    fault,
                });
                let t = run_circulation(&e.graph, &opts).unwrap();
                match (recovery(&t, fault_round), t.legitimate_from()) {
                    (Some(r), Some(_)) if r <= bound => {}
                    (r, l) => errs.push(format!(
                        "{} {name}: recovery {r:?} legitimate_from {l:?}",
                        e.describe()
                    )),
                }
            }
            errs
        })
        .collect();
    outcome(
        failures.is_empty(),
        format!(
            "{} graphs (clean, null tree, duplicate, delete), {} failures {:?}",
            graphs.len(),
            failures.len(),
            first(&failures)
        ),
    )
}

fn space_audit() -> Outcome {
    let cfg = BenchConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for &n in &BENCH_SIZES {
        for &seed in &BENCH_SEEDS {
            let g = silentdfs_core::graph::generate(cfg.kind, n, seed).unwrap();
            let a = audit_register_width(&g, &legal_configuration(&g));
            pass &= a.violations() == 0 && a.within(WIDTH_CONSTANT);
            if seed == BENCH_SEEDS[0] {
                parts.push(format!(
                    "n={n}: {}b label, {}b/node = {:.1}*log2n",
                    a.widths.label, a.bits_per_node, a.ratio
                ));
            }
        }
    }
    outcome(pass, format!("c={WIDTH_CONSTANT}; {}", parts.join(", ")))
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let corpus = default_corpus();
    let criteria: Vec<(&str, Check)> = vec![
        ("oracle equivalence", Box::new(oracle_equivalence)),
        (
            "verifier completeness",
            Box::new(|| verifier_completeness(&corpus)),
        ),
        ("verifier soundness", Box::new(verifier_soundness)),
        ("one-round detection", Box::new(one_round_detection)),
        ("label bound", Box::new(|| label_bound(&corpus))),
        ("linear stabilization time", Box::new(linear_time)),
        ("closure and silence", Box::new(|| closure(&corpus))),
        ("mode split", Box::new(mode_split)),
        ("token circulation", Box::new(|| token_circulation(&corpus))),
        ("space audit", Box::new(space_audit)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {:>2} {name}: {} ({:.1}s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{}/{} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        t0.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
