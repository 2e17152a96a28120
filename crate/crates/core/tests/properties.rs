use std::cmp::Ordering;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use silentdfs_core::doc::GraphDocument;
use silentdfs_core::experiments::fuzz::{
    corrupt, garbage_configuration, CorruptionKind, FuzzConfig,
};
use silentdfs_core::graph::{generate, path_compare, GraphKind, PathString, PortGraph};
use silentdfs_core::oracle::{
    first_dfs_mark, lex_smallest_paths, random_dfs_mark, tree_from_paths,
};
use silentdfs_core::registers::Configuration;
use silentdfs_core::stabilizer::{
    legal_configuration, run, ActivationMode, DaemonSchedule, RunOptions, Simulator,
};
use silentdfs_core::token::{run_circulation, CirculationOptions, Fault, ScheduledFault};
use silentdfs_core::verifier::{verify_all, verify_node, NeighborhoodSnapshot, VerifyMode};

fn kind() -> impl Strategy<Value = GraphKind> {
    prop::sample::select(GraphKind::ALL.to_vec())
}

fn mode() -> impl Strategy<Value = ActivationMode> {
    prop::sample::select(vec![
        ActivationMode::Synchronous,
        ActivationMode::RandomSubset,
        ActivationMode::AdversarialSingle,
    ])
}

fn graph(max_n: usize) -> impl Strategy<Value = PortGraph> {
    (kind(), 1..=max_n, any::<u64>()).prop_map(|(k, n, s)| generate(k, n, s).unwrap())
}

fn path() -> impl Strategy<Value = PathString> {
    prop::collection::vec(0usize..4, 0..6).prop_map(PathString)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn path_order_is_total(p in path(), q in path(), r in path()) {
        let pq = path_compare(&p, &q);
        prop_assert_eq!(pq, path_compare(&q, &p).reverse());
        prop_assert_eq!(pq == Ordering::Equal, p == q);
        if pq != Ordering::Greater && path_compare(&q, &r) != Ordering::Greater {
            prop_assert_ne!(path_compare(&p, &r), Ordering::Greater);
        }
    }

    #[test]
    fn extension_is_larger(p in path(), port in 0usize..4) {
        prop_assert_eq!(path_compare(&p, &p.extended(port)), Ordering::Less);
    }

    #[test]
    fn documents_roundtrip(g in graph(24), seed in any::<u64>()) {
        let c = garbage_configuration(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let text = GraphDocument::with_config(&g, &c).to_json();
        let (g2, c2) = GraphDocument::parse(&text).unwrap().labeled().unwrap();
        prop_assert_eq!(g2, g);
        prop_assert_eq!(c2, c);
    }

    #[test]
    fn uniform_shift_still_accepted(g in graph(40), k in -1000i64..1000) {
        let mut c = legal_configuration(&g);
        for v in g.nodes() {
            c[v].in_label = c[v].in_label.map(|x| x + k);
            c[v].out_label = c[v].out_label.map(|x| x + k);
        }
        prop_assert!(verify_all(&g, &c, VerifyMode::FirstDfs).accepted());
    }

    #[test]
    fn some_dfs_failures_subset_of_first_dfs(g in graph(20), seed in any::<u64>(), ck in 0usize..CorruptionKind::ALL.len()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = corrupt(&g, &legal_configuration(&g), CorruptionKind::ALL[ck], &mut rng);
        let some = verify_all(&g, &c, VerifyMode::SomeDfs);
        let first = verify_all(&g, &c, VerifyMode::FirstDfs);
        for v in g.nodes() {
            for p in &some.get(v).failures {
                prop_assert!(first.get(v).failures.contains(p), "node {} {:?}", v, p);
            }
        }
    }

    #[test]
    fn any_dfs_tree_passes_some_dfs(g in graph(30), seed in any::<u64>()) {
        let labels = random_dfs_mark(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let c = Configuration::from_labels(&labels);
        prop_assert!(verify_all(&g, &c, VerifyMode::SomeDfs).accepted());
        let first = verify_all(&g, &c, VerifyMode::FirstDfs).accepted();
        prop_assert_eq!(first, c == legal_configuration(&g));
    }

    #[test]
    fn verdict_depends_only_on_neighborhood(g in graph(20), seed in any::<u64>(), v in any::<prop::sample::Index>()) {
        let v = v.index(g.node_count());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = garbage_configuration(&g, &mut rng);
        let noise = garbage_configuration(&g, &mut rng);
        let mut changed = base.clone();
        for u in g.nodes() {
            if u != v && !g.neighbors(v).contains(&u) {
                changed[u] = noise[u].clone();
            }
        }
        for mode in [VerifyMode::FirstDfs, VerifyMode::SomeDfs] {
            let a = verify_node(&NeighborhoodSnapshot::capture(&g, &base, v), mode);
            let b = verify_node(&NeighborhoodSnapshot::capture(&g, &changed, v), mode);
            prop_assert_eq!(a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn marker_matches_path_oracle(g in graph(9)) {
        let paths = lex_smallest_paths(&g).unwrap();
        prop_assert_eq!(tree_from_paths(&paths, &g).unwrap(), first_dfs_mark(&g).parent_nodes(&g));
    }

    #[test]
    fn converges_from_garbage(g in graph(24), seed in any::<u64>(), m in mode()) {
        let n = g.node_count();
        let start = garbage_configuration(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let schedule = DaemonSchedule::for_mode(m, n, seed);
        let r = run(&g, start, &schedule, &RunOptions::for_graph(&g, &schedule)).unwrap();
        prop_assert!(r.converged());
        prop_assert_eq!(&r.final_config, &legal_configuration(&g));
        prop_assert!(verify_all(&g, &r.final_config, VerifyMode::FirstDfs).accepted());
    }

    #[test]
    fn legal_configuration_is_closed(g in graph(30), seed in any::<u64>(), m in mode()) {
        let n = g.node_count();
        let mut sim = Simulator::new(&g, legal_configuration(&g), DaemonSchedule::for_mode(m, n, seed), None).unwrap();
        for _ in 0..10 * n {
            prop_assert!(sim.step_round().writers.is_empty());
        }
    }

    #[test]
    fn token_settles_from_garbage(g in graph(16), seed in any::<u64>()) {
        let n = g.node_count();
        let mut opts = CirculationOptions::new(30 * n + 20);
        opts.faults.push(ScheduledFault { round: 1, fault: Fault::TokenGarbage { seed } });
        let t = run_circulation(&g, &opts).unwrap();
        let from = t.legitimate_from().expect("settles");
        prop_assert!(from <= 10 * n + 2, "settled at {}", from);
        prop_assert!(t.tree_writes.iter().all(|&w| w == 0));
    }
}

#[test]
fn fuzz_cases_are_reproducible() {
    let cfg = FuzzConfig {
        trials: 50,
        ..FuzzConfig::default()
    };
    for i in [0, 7, 49] {
        let (a, b) = (cfg.case(i), cfg.case(i));
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.config, b.config);
    }
}
