//! Centralized reference answers computed on the unfragmented graph.
//!
//! Nothing here touches fragments or the partial evaluators; every traversal
//! is written directly against [`Graph`].

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::automaton::{QueryAutomaton, StateLabel};
use crate::dist::Distance;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::reach::BoolEquation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OracleResult {
    pub reachable: bool,
    pub distance: Distance,
    pub regular_match: bool,
}

fn lookup(g: &Graph, v: &str) -> Result<usize> {
    g.index_of(v).ok_or_else(|| Error::UnknownNode(NodeId::new(v)))
}

fn bfs_levels(g: &Graph, from: usize) -> Vec<Option<u64>> {
    let mut level = vec![None; g.node_count()];
    level[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        let d = level[v].unwrap();
        for &w in g.successors_at(v) {
            if level[w].is_none() {
                level[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

pub fn oracle_reach(g: &Graph, s: &str, t: &str) -> Result<bool> {
    Ok(oracle_dist(g, s, t)?.is_finite())
}

pub fn oracle_dist(g: &Graph, s: &str, t: &str) -> Result<Distance> {
    let (s, t) = (lookup(g, s)?, lookup(g, t)?);
    Ok(bfs_levels(g, s)[t].map_or(Distance::Infinite, Distance::Finite))
}

/// BFS over `G x Gq` from `(s, u_s)`; true iff `(t, u_t)` is reached. When
/// `s = t` the empty path counts if the pattern accepts the empty string.
pub fn oracle_regular(g: &Graph, s: &str, t: &str, a: &QueryAutomaton) -> Result<bool> {
    let (s, t) = (lookup(g, s)?, lookup(g, t)?);
    if s == t && a.accepts_empty() {
        return Ok(true);
    }
    let states = a.state_count();
    let fits = |v: usize, u: usize| match a.state_label(u) {
        StateLabel::Start => v == s,
        StateLabel::Final => v == t,
        StateLabel::Any => true,
        StateLabel::Atom(l) => g.label_at(v) == l,
    };
    let goal = t * states + a.final_state();
    let mut seen = vec![false; g.node_count() * states];
    let begin = s * states + a.start();
    seen[begin] = true;
    let mut queue = VecDeque::from([begin]);
    while let Some(p) = queue.pop_front() {
        if p == goal {
            return Ok(true);
        }
        let (v, u) = (p / states, p % states);
        for &w in g.successors_at(v) {
            for &(from, to) in a.transitions().range((u, 0)..(u + 1, 0)) {
                debug_assert_eq!(from, u);
                let next = w * states + to;
                if !seen[next] && fits(w, to) {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(false)
}

pub fn oracle(g: &Graph, s: &str, t: &str, a: &QueryAutomaton) -> Result<OracleResult> {
    let distance = oracle_dist(g, s, t)?;
    Ok(OracleResult { reachable: distance.is_finite(), distance, regular_match: oracle_regular(g, s, t, a)? })
}

/// Least solution of a disjunctive Boolean equation system by Kleene
/// iteration from all-false.
pub fn kleene_solve(rvset: &[BoolEquation]) -> Result<BTreeMap<NodeId, bool>> {
    let mut value: BTreeMap<NodeId, bool> = rvset.iter().map(|e| (e.lhs.clone(), false)).collect();
    for e in rvset {
        if let Some(v) = e.rhs.vars().find(|v| !value.contains_key(*v)) {
            return Err(Error::DanglingVariable(v.to_string()));
        }
    }
    loop {
        let mut changed = false;
        for e in rvset {
            let now = e.rhs.is_true() || e.rhs.vars().any(|v| value[v]);
            if now && !value[&e.lhs] {
                value.insert(e.lhs.clone(), true);
                changed = true;
            }
        }
        if !changed {
            return Ok(value);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{build_query_automaton, parse_regex, wildcard_star};
    use crate::fixture;
    use crate::formula::Formula;
    use crate::graph::parse_graph;

    fn automaton(p: &str) -> QueryAutomaton {
        build_query_automaton(&parse_regex(p).unwrap())
    }

    #[test]
    fn fixture_answers() {
        let g = fixture::graph();
        assert!(oracle_reach(&g, "Ann", "Mark").unwrap());
        assert!(!oracle_reach(&g, "Mark", "Ann").unwrap());
        assert!(oracle_reach(&g, "Tom", "Tom").unwrap());
        assert_eq!(oracle_dist(&g, "Ann", "Mark").unwrap(), Distance::Finite(6));
        assert_eq!(oracle_dist(&g, "Lily", "Lily").unwrap(), Distance::Finite(0));
        assert_eq!(oracle_dist(&g, "Mark", "Ann").unwrap(), Distance::Infinite);
        assert!(oracle_regular(&g, "Ann", "Mark", &automaton("DB* | HR*")).unwrap());
        assert!(!oracle_regular(&g, "Ann", "Mark", &automaton("DB*")).unwrap());
        assert!(oracle_regular(&g, "Walt", "Mark", &automaton("CTO DB* | HR*")).unwrap());
        assert!(oracle_regular(&g, "Ross", "Mark", &automaton("()")).unwrap());
        assert!(!oracle_regular(&g, "Emmy", "Mark", &automaton("()")).unwrap());
    }

    #[test]
    fn unknown_nodes() {
        let g = fixture::graph();
        assert_eq!(oracle_reach(&g, "Nobody", "Ann"), Err(Error::UnknownNode("Nobody".into())));
        assert!(oracle_regular(&g, "Ann", "Nobody", &wildcard_star()).is_err());
    }

    #[test]
    fn wildcard_star_is_reachability() {
        let g = fixture::graph();
        let a = wildcard_star();
        for s in g.nodes() {
            for t in g.nodes() {
                assert_eq!(
                    oracle_regular(&g, s.as_str(), t.as_str(), &a).unwrap(),
                    oracle_reach(&g, s.as_str(), t.as_str()).unwrap(),
                    "{s} -> {t}"
                );
            }
        }
    }

    #[test]
    fn self_loops_repeat_labels() {
        let g = parse_graph("#nodes\ns X\nh HR\nt X\n#edges\ns h\nh h\nh t\n").unwrap();
        assert!(oracle_regular(&g, "s", "t", &automaton("HR HR HR")).unwrap());
        assert!(!oracle_regular(&g, "s", "t", &automaton("()")).unwrap());
    }

    fn eq(lhs: &str, rhs: &[&str]) -> BoolEquation {
        BoolEquation { lhs: lhs.into(), rhs: rhs.iter().map(|v| NodeId::from(*v)).collect() }
    }

    #[test]
    fn kleene_on_example_system() {
        let rvset = vec![
            eq("Ann", &["Mat", "Pat"]),
            eq("Fred", &["Emmy"]),
            eq("Emmy", &["Fred", "Ross"]),
            eq("Jack", &["Fred"]),
            eq("Mat", &["Fred"]),
            BoolEquation { lhs: "Ross".into(), rhs: Formula::True },
            eq("Pat", &["Jack"]),
        ];
        let sol = kleene_solve(&rvset).unwrap();
        assert!(sol.values().all(|&b| b));
    }

    #[test]
    fn kleene_cycle_and_dangling() {
        let sol = kleene_solve(&[eq("a", &["b"]), eq("b", &["a"])]).unwrap();
        assert_eq!(sol.into_values().collect::<Vec<_>>(), [false, false]);
        assert!(matches!(kleene_solve(&[eq("a", &["z"])]), Err(Error::DanglingVariable(_))));
    }
}
