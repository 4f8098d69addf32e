use std::collections::BTreeSet;

use distreach::automaton::{build_query_automaton, wildcard_star};
use distreach::dist::{self, BoundedQuery, Distance};
use distreach::fragment::{build_from_parts, random_partition, Fragmentation};
use distreach::graph::{Graph, GraphBuilder};
use distreach::oracle;
use distreach::reach::{self, ReachQuery};
use distreach::regular::{self, RegularQuery};
use distreach::runtime::{self, Query};
use distreach::workload;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_graph(seed: u64, n: usize, density: usize, alphabet: usize) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    workload::random_graph(&mut rng, n, n * density / 2, alphabet)
}

fn with_edge(g: &Graph, s: usize, d: usize) -> Graph {
    let mut b = GraphBuilder::default();
    b.add_document(&g.to_text()).unwrap();
    b.add_edge(0, g.node(s).as_str(), g.node(d).as_str());
    b.build().unwrap()
}

fn check_fragmentation(g: &Graph, frag: &Fragmentation) {
    let total: usize = frag.fragments().iter().map(|f| f.local_count()).sum();
    assert_eq!(total, g.node_count());
    let mut locals = BTreeSet::new();
    let mut edges = BTreeSet::new();
    let mut vf = BTreeSet::new();
    let mut ef = BTreeSet::new();
    for f in frag.fragments() {
        for v in f.local_nodes() {
            assert!(locals.insert(v.clone()), "{v} in two fragments");
            assert_eq!(frag.fragment_of(v.as_str()), Some(f.id()));
        }
        for w in f.virtual_nodes() {
            assert!(!f.is_local(w.as_str()));
            let owner = frag.fragment(frag.fragment_of(w.as_str()).unwrap());
            assert!(owner.is_in_node(w.as_str()), "{w} is not an in-node of its owner");
            vf.insert(w.clone());
        }
        vf.extend(f.in_nodes().cloned());
        for (a, b) in f.local_edges() {
            edges.insert((a.clone(), b.clone()));
        }
        for (a, b) in f.cross_edges() {
            assert!(f.is_virtual(b.as_str()));
            edges.insert((a.clone(), b.clone()));
            ef.insert((a.clone(), b.clone()));
        }
    }
    let all: BTreeSet<_> = g.edges().map(|(a, b)| (a.clone(), b.clone())).collect();
    assert_eq!(edges, all);
    assert_eq!(&vf, &frag.fragment_graph().nodes);
    assert_eq!(&ef, &frag.fragment_graph().edges);
}

#[test]
fn exhaustive_pairs_on_small_graphs() {
    for seed in 0..12 {
        let g = small_graph(seed, 9, 3, 2);
        for k in 1..=4 {
            let frag = random_partition(&g, k, seed).unwrap();
            check_fragmentation(&g, &frag);
            for s in g.nodes() {
                for t in g.nodes() {
                    let (s, t) = (s.as_str(), t.as_str());
                    let truth = oracle::oracle_dist(&g, s, t).unwrap();
                    assert_eq!(reach::dis_reach(&frag, &ReachQuery::new(s, t)).unwrap(), truth.is_finite());
                    let d = dist::dis_dist(&frag, &BoundedQuery::new(s, t, 3)).unwrap();
                    assert_eq!(d.within_bound, truth.within(3), "{s} -> {t}");
                    let q = RegularQuery::new(s, t, wildcard_star());
                    assert_eq!(regular::dis_rpq(&frag, &q).unwrap(), truth.is_finite());
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_invariance(seed in any::<u64>(), n in 2usize..40, k1 in 1usize..6, k2 in 1usize..6, s in any::<prop::sample::Index>(), t in any::<prop::sample::Index>()) {
        let g = small_graph(seed, n, 3, 3);
        let f1 = random_partition(&g, k1.min(n), seed).unwrap();
        let f2 = random_partition(&g, k2.min(n), seed.wrapping_add(1)).unwrap();
        let (s, t) = (g.node(s.index(n)).as_str(), g.node(t.index(n)).as_str());
        let rq = ReachQuery::new(s, t);
        prop_assert_eq!(reach::dis_reach(&f1, &rq).unwrap(), reach::dis_reach(&f2, &rq).unwrap());
        let bq = BoundedQuery::new(s, t, 4);
        prop_assert_eq!(dist::dis_dist(&f1, &bq).unwrap(), dist::dis_dist(&f2, &bq).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pattern = workload::random_pattern(&mut rng, 5, 3);
        let gq = RegularQuery::new(s, t, build_query_automaton(&pattern));
        prop_assert_eq!(regular::dis_rpq(&f1, &gq).unwrap(), regular::dis_rpq(&f2, &gq).unwrap());
    }

    #[test]
    fn fragmentation_invariants(seed in any::<u64>(), n in 1usize..50, k in 1usize..8) {
        let g = small_graph(seed, n, 4, 2);
        let frag = random_partition(&g, k.min(n), seed).unwrap();
        check_fragmentation(&g, &frag);
        let sizes: Vec<usize> = frag.fragments().iter().map(|f| f.local_count()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(&random_partition(&g, k.min(n), seed).unwrap(), &frag);
    }

    #[test]
    fn adding_an_edge_never_breaks_reachability(seed in any::<u64>(), n in 2usize..30, k in 1usize..5, a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let g = small_graph(seed, n, 2, 2);
        let g2 = with_edge(&g, a.index(n), b.index(n));
        let f1 = random_partition(&g, k.min(n), seed).unwrap();
        let f2 = random_partition(&g2, k.min(n), seed).unwrap();
        for s in g.nodes().iter().take(6) {
            for t in g.nodes() {
                let q = ReachQuery::new(s.as_str(), t.as_str());
                if reach::dis_reach(&f1, &q).unwrap() {
                    prop_assert!(reach::dis_reach(&f2, &q).unwrap());
                }
            }
        }
    }

    #[test]
    fn bounds_are_monotone_and_pruning_is_safe(seed in any::<u64>(), n in 2usize..40, k in 1usize..5, s in any::<prop::sample::Index>(), t in any::<prop::sample::Index>()) {
        let g = small_graph(seed, n, 3, 1);
        let frag = random_partition(&g, k.min(n), seed).unwrap();
        let (s, t) = (g.node(s.index(n)).as_str(), g.node(t.index(n)).as_str());
        let truth = oracle::oracle_dist(&g, s, t).unwrap();
        let mut seen_true = false;
        for l in 0..10u32 {
            let q = BoundedQuery::new(s, t, l);
            let answer = dist::dis_dist(&frag, &q).unwrap();
            prop_assert!(!seen_true || answer.within_bound);
            seen_true |= answer.within_bound;
            if answer.within_bound {
                prop_assert_eq!(answer.distance, truth);
            } else {
                prop_assert_eq!(answer.distance, Distance::Infinite);
            }
            let unpruned: Vec<_> = frag.fragments().iter().flat_map(|f| dist::local_eval_d_with_cutoff(f, &q, None)).collect();
            prop_assert_eq!(dist::eval_dg_d(&unpruned, &q).unwrap().within_bound, answer.within_bound);
        }
    }

    #[test]
    fn partial_answers_respect_size_bounds(seed in any::<u64>(), n in 2usize..40, k in 1usize..6, s in any::<prop::sample::Index>(), t in any::<prop::sample::Index>()) {
        let g = small_graph(seed, n, 3, 2);
        let frag = random_partition(&g, k.min(n), seed).unwrap();
        let vf = frag.fragment_graph().nodes.len();
        let (s, t) = (g.node(s.index(n)).as_str(), g.node(t.index(n)).as_str());
        let rq = ReachQuery::new(s, t);
        let rvset: Vec<_> = frag.fragments().iter().flat_map(|f| reach::local_eval(f, &rq)).collect();
        prop_assert!(rvset.len() <= vf + 1);
        for f in frag.fragments() {
            for e in reach::local_eval(f, &rq) {
                prop_assert!(e.rhs.var_count() <= f.virtual_count() + 1);
            }
            prop_assert_eq!(reach::local_eval(f, &rq), reach::local_eval(f, &rq));
        }
        let bq = BoundedQuery::new(s, t, 1000);
        let terms: usize = frag.fragments().iter().flat_map(|f| dist::local_eval_d(f, &bq)).map(|e| e.terms.len()).sum();
        prop_assert!(terms <= (vf + 1) * (vf + 1));
        let gq = RegularQuery::new(s, t, wildcard_star());
        let states = gq.automaton.state_count();
        for f in frag.fragments() {
            let vecs = regular::local_eval_r(f, &gq);
            prop_assert!(vecs.len() <= f.in_node_count() + 1);
            for v in vecs {
                prop_assert_eq!(v.entries.len(), states);
                prop_assert!(v.entries.iter().all(|phi| phi.var_count() <= f.virtual_count() * states));
            }
        }
    }

    #[test]
    fn kleene_solution_is_least(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rvset = workload::random_bes(&mut rng, n, true);
        let sol = oracle::kleene_solve(&rvset).unwrap();
        for e in &rvset {
            let rhs = e.rhs.is_true() || e.rhs.vars().any(|v| sol[v]);
            prop_assert_eq!(sol[&e.lhs], rhs);
            prop_assert_eq!(reach::eval_dg(&rvset, e.lhs.as_str()).unwrap(), sol[&e.lhs]);
        }
    }
}

#[test]
fn runtime_stats_are_deterministic() {
    let g = small_graph(9, 60, 3, 3);
    let frag = random_partition(&g, 4, 9).unwrap();
    let (s, t) = (g.node(0).as_str(), g.node(59).as_str());
    let queries = [
        Query::Reach(ReachQuery::new(s, t)),
        Query::Bounded(BoundedQuery::new(s, t, 7)),
        Query::Regular(RegularQuery::new(s, t, wildcard_star())),
    ];
    for q in &queries {
        let a = runtime::run_distributed(&frag, q, 1).unwrap();
        let b = runtime::run_distributed(&frag, q, 1).unwrap();
        assert_eq!((a.answer, a.distance, &a.stats.per_site, &a.stats.messages), (b.answer, b.distance, &b.stats.per_site, &b.stats.messages));
    }
    let a = runtime::msg_bfs(&frag, &ReachQuery::new(s, t), 0, Some(3)).unwrap();
    let b = runtime::msg_bfs(&frag, &ReachQuery::new(s, t), 0, Some(3)).unwrap();
    assert_eq!(a.stats.messages, b.stats.messages);
}

#[test]
fn every_node_in_its_own_fragment() {
    let g = small_graph(4, 12, 3, 2);
    let parts: Vec<usize> = (0..g.node_count()).collect();
    let frag = build_from_parts(&g, &parts).unwrap();
    assert_eq!(frag.fragment_graph().edges.len(), g.edge_count() - g.edges().filter(|(a, b)| a == b).count());
    for s in g.nodes() {
        for t in g.nodes() {
            let q = Query::Reach(ReachQuery::new(s.as_str(), t.as_str()));
            let out = runtime::run_distributed(&frag, &q, 0).unwrap();
            assert_eq!(out.answer, oracle::oracle_reach(&g, s.as_str(), t.as_str()).unwrap());
            assert!(out.stats.visited_once());
        }
    }
}
