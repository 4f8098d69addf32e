//! Seeded generators for graphs, patterns, queries and equation systems,
//! plus the paired graphs used to compare traffic across interior sizes.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::automaton::RegexAst;
use crate::formula::Formula;
use crate::fragment::{build_from_parts, random_partition, Fragmentation};
use crate::graph::{Graph, GraphBuilder, NodeId};
use crate::reach::BoolEquation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_nodes: usize,
    pub max_edges: usize,
    pub max_alphabet: usize,
    pub max_fragments: usize,
    pub max_pattern: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_nodes: 200, max_edges: 800, max_alphabet: 5, max_fragments: 5, max_pattern: 6 }
    }
}

pub fn label_name(i: usize) -> String {
    format!("L{i}")
}

/// `n` nodes `v0..`, up to `m` distinct random edges (self-loops allowed),
/// labels drawn from `L0..L{alphabet-1}`.
pub fn random_graph(rng: &mut impl Rng, n: usize, m: usize, alphabet: usize) -> Graph {
    let mut b = GraphBuilder::default();
    for v in 0..n {
        b.add_node(0, &format!("v{v}"), &label_name(rng.gen_range(0..alphabet)))
            .expect("generated ids are unique");
    }
    for _ in 0..m {
        let (s, d) = (rng.gen_range(0..n), rng.gen_range(0..n));
        b.add_edge(0, &format!("v{s}"), &format!("v{d}"));
    }
    b.build().expect("generated edges name declared nodes")
}

/// A random pattern with at most `budget` constructors. Atoms come from the
/// alphabet, with the occasional wildcard or unknown label.
pub fn random_pattern(rng: &mut impl Rng, budget: usize, alphabet: usize) -> RegexAst {
    fn leaf(rng: &mut impl Rng, alphabet: usize) -> RegexAst {
        match rng.gen_range(0..20) {
            0 => RegexAst::Epsilon,
            1 | 2 => RegexAst::Wildcard,
            3 => RegexAst::atom("Lx"),
            _ => RegexAst::atom(&label_name(rng.gen_range(0..alphabet))),
        }
    }
    if budget <= 1 {
        return leaf(rng, alphabet);
    }
    match rng.gen_range(0..5) {
        0 => leaf(rng, alphabet),
        1 => RegexAst::star(random_pattern(rng, budget - 1, alphabet)),
        op if budget >= 3 => {
            let left = rng.gen_range(1..budget - 1);
            let a = random_pattern(rng, left, alphabet);
            let b = random_pattern(rng, budget - 1 - a.size(), alphabet);
            if op == 2 {
                RegexAst::union(a, b)
            } else {
                RegexAst::concat(a, b)
            }
        }
        _ => RegexAst::star(leaf(rng, alphabet)),
    }
}

/// One randomized test case covering all three query classes.
#[derive(Clone, Debug)]
pub struct Instance {
    pub seed: u64,
    pub graph: Graph,
    pub k: usize,
    pub partition_seed: u64,
    pub frag: Fragmentation,
    pub source: NodeId,
    pub target: NodeId,
    pub bound: u32,
    pub pattern: RegexAst,
}

pub fn random_instance(seed: u64, limits: &Limits) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=limits.max_nodes);
    let m = rng.gen_range(0..=limits.max_edges.min(4 * n));
    let alphabet = rng.gen_range(1..=limits.max_alphabet);
    let graph = random_graph(&mut rng, n, m, alphabet);
    let k = rng.gen_range(1..=limits.max_fragments.min(n));
    let partition_seed = rng.gen();
    let frag = random_partition(&graph, k, partition_seed).expect("1 <= k <= n");
    let s = rng.gen_range(0..n);
    // Half of the targets are picked among the nodes `s` reaches.
    let t = if rng.gen_bool(0.5) {
        let reached = reachable_from(&graph, s);
        *reached.choose(&mut rng).expect("s reaches itself")
    } else {
        rng.gen_range(0..n)
    };
    let bound = rng.gen_range(0..=12);
    let budget = rng.gen_range(1..=limits.max_pattern);
    let pattern = random_pattern(&mut rng, budget, alphabet);
    Instance {
        seed,
        source: graph.node(s).clone(),
        target: graph.node(t).clone(),
        graph,
        k,
        partition_seed,
        frag,
        bound,
        pattern,
    }
}

fn reachable_from(g: &Graph, s: usize) -> Vec<usize> {
    let mut seen = vec![false; g.node_count()];
    seen[s] = true;
    let mut queue = VecDeque::from([s]);
    let mut out = Vec::new();
    while let Some(v) = queue.pop_front() {
        out.push(v);
        for &w in g.successors_at(v) {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    out
}

/// Fewest fragment boundary crossings over all `s`-`t` paths, by 0-1 BFS.
pub fn min_crossings(g: &Graph, frag: &Fragmentation, s: &str, t: &str) -> Option<usize> {
    let (s, t) = (g.index_of(s)?, g.index_of(t)?);
    let part: Vec<usize> = g.nodes().iter().map(|v| frag.fragment_of(v.as_str()).expect("partition is total")).collect();
    let mut best = vec![usize::MAX; g.node_count()];
    best[s] = 0;
    let mut deque = VecDeque::from([s]);
    while let Some(v) = deque.pop_front() {
        for &w in g.successors_at(v) {
            let cost = usize::from(part[v] != part[w]);
            if best[v] + cost < best[w] {
                best[w] = best[v] + cost;
                if cost == 0 {
                    deque.push_front(w);
                } else {
                    deque.push_back(w);
                }
            }
        }
    }
    (best[t] != usize::MAX).then_some(best[t])
}

/// A random disjunctive equation system over `x0..x{n-1}`, usually cyclic.
/// With `constants` false no right-hand side is `true`.
pub fn random_bes(rng: &mut impl Rng, n: usize, constants: bool) -> Vec<BoolEquation> {
    let vars: Vec<NodeId> = (0..n).map(|i| NodeId::new(&format!("x{i}"))).collect();
    vars.iter()
        .map(|lhs| {
            let rhs = if constants && rng.gen_bool(0.08) {
                Formula::True
            } else {
                let fanout = rng.gen_range(0..=3);
                (0..fanout).map(|_| vars[rng.gen_range(0..n)].clone()).collect()
            };
            BoolEquation { lhs: lhs.clone(), rhs }
        })
        .collect()
}

/// Two graphs with the same fragment boundaries and the same
/// boundary-to-boundary behaviour. Each fragment has a small core that
/// carries all cross edges; the interior hangs off the core as dead-end
/// chains of `interior` nodes, so it changes no partial answer.
pub fn boundary_twin(k: usize, interior: usize, seed: u64) -> (Graph, Fragmentation) {
    const CORE: usize = 6;
    const LABELS: [&str; 3] = ["HR", "DB", "SE"];
    let mut b = GraphBuilder::default();
    let mut parts = Vec::new();
    let core = |i: usize, j: usize| format!("c{i}_{j}");
    for i in 0..k {
        for j in 0..CORE {
            b.add_node(0, &core(i, j), LABELS[(i + j) % 3]).expect("unique");
            parts.push(i);
        }
        for j in 0..CORE {
            b.add_edge(0, &core(i, j), &core(i, (j + 1) % CORE));
        }
        b.add_edge(0, &core(i, 0), &core(i, 3));
        b.add_edge(0, &core(i, 2), &core((i + 1) % k, 0));
        b.add_edge(0, &core(i, 5), &core((i + 2) % k, 1));
        b.add_edge(0, &core(i, 4), &core((i + k - 1) % k, 4));
    }
    // Interior nodes are declared after all core nodes so the core keeps its
    // node order in both twins.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..k {
        for j in 0..interior {
            let name = format!("d{i}_{j}");
            b.add_node(0, &name, LABELS[rng.gen_range(0..3)]).expect("unique");
            parts.push(i);
            if j % 8 == 0 {
                b.add_edge(0, &core(i, (j / 8) % CORE), &name);
            } else {
                b.add_edge(0, &format!("d{i}_{}", j - 1), &name);
            }
        }
    }
    let g = b.build().expect("generated edges name declared nodes");
    let frag = build_from_parts(&g, &parts).expect("every fragment has a core");
    (g, frag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    #[test]
    fn instances_are_deterministic_and_within_limits() {
        let limits = Limits::default();
        for seed in 0..50 {
            let a = random_instance(seed, &limits);
            let b = random_instance(seed, &limits);
            assert_eq!(a.graph.to_text(), b.graph.to_text());
            assert_eq!(a.frag, b.frag);
            assert_eq!((a.source, a.target, a.pattern.clone()), (b.source, b.target, b.pattern));
            assert!(a.graph.node_count() <= 200 && a.graph.edge_count() <= 800);
            assert!((1..=5).contains(&a.k) && a.pattern.size() <= 6);
        }
    }

    #[test]
    fn patterns_respect_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for budget in 1..=8 {
            for _ in 0..200 {
                assert!(random_pattern(&mut rng, budget, 3).size() <= budget);
            }
        }
    }

    #[test]
    fn crossings_on_fixture() {
        let g = fixture::graph();
        let frag = fixture::fragmentation();
        assert_eq!(min_crossings(&g, &frag, "Ann", "Mark"), Some(4));
        assert_eq!(min_crossings(&g, &frag, "Ann", "Bill"), Some(0));
        assert_eq!(min_crossings(&g, &frag, "Mark", "Ann"), None);
    }

    #[test]
    fn twins_share_boundaries() {
        let (_, small) = boundary_twin(4, 100, 5);
        let (_, large) = boundary_twin(4, 1000, 5);
        assert_eq!(small.fragment_graph(), large.fragment_graph());
        for (a, b) in small.fragments().iter().zip(large.fragments()) {
            assert_eq!(a.boundary(), b.boundary());
            assert_eq!(a.local_count() + 900, b.local_count());
        }
    }

    #[test]
    fn bes_without_constants_has_no_true() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bes = random_bes(&mut rng, 40, false);
        assert!(bes.iter().all(|e| !e.rhs.is_true()));
    }
}
