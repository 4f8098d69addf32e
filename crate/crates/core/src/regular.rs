//! Partial evaluation of regular reachability queries `qrr(s, t, R)`.
//!
//! A node `v` *matches* an automaton state `u` when `v` can occupy `u` and
//! some path from `v` to `t` spells a run from `u` to the final state. Every
//! site computes, for each in-node and each state, a formula over the
//! unknown matches `X_(w, u')` of its virtual nodes. Formulas are read off
//! reachability in the fragment's product with the automaton, which also
//! covers cycles inside a fragment.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::automaton::{build_query_automaton, parse_regex, QueryAutomaton, StateId, StateLabel};
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::fragment::{Boundary, Fragment, Fragmentation};
use crate::graph::NodeId;
use crate::reach::check_endpoints;
use crate::wire::{Reader, Writer};

pub type MatchVar = (NodeId, StateId);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularQuery {
    pub source: NodeId,
    pub target: NodeId,
    pub automaton: QueryAutomaton,
}

impl RegularQuery {
    pub fn new(source: &str, target: &str, automaton: QueryAutomaton) -> Self {
        RegularQuery { source: NodeId::new(source), target: NodeId::new(target), automaton }
    }

    pub fn from_pattern(source: &str, target: &str, pattern: &str) -> Result<Self> {
        Ok(Self::new(source, target, build_query_automaton(&parse_regex(pattern)?)))
    }
}

/// `v.rvec`: one formula per automaton state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct MatchVector {
    pub owner: NodeId,
    pub entries: Vec<Formula<MatchVar>>,
}

/// Whether node `v` may occupy state `u`: endpoints by identity, interior
/// states by label.
fn admits(f: &Fragment, q: &RegularQuery, v: usize, u: StateId) -> bool {
    match q.automaton.state_label(u) {
        StateLabel::Start => f.node_at(v) == &q.source,
        StateLabel::Final => f.node_at(v) == &q.target,
        label => label.admits(f.label_at(v)),
    }
}

struct Product {
    states: usize,
    admitted: Vec<bool>,
    reverse: Vec<Vec<usize>>,
}

impl Product {
    fn new(f: &Fragment, q: &RegularQuery) -> Self {
        let states = q.automaton.state_count();
        let n = f.slot_count() * states;
        let mut admitted = vec![false; n];
        for v in 0..f.slot_count() {
            for u in 0..states {
                admitted[v * states + u] = admits(f, q, v, u);
            }
        }
        let mut reverse = vec![Vec::new(); n];
        for v in 0..f.local_count() {
            for u in (0..states).filter(|&u| admitted[v * states + u]) {
                for &w in f.successors_at(v) {
                    for &u2 in q.automaton.successors(u) {
                        if admitted[w * states + u2] {
                            reverse[w * states + u2].push(v * states + u);
                        }
                    }
                }
            }
        }
        Product { states, admitted, reverse }
    }

    /// Pairs that reach any of `seeds`, seeds included.
    fn ancestors(&self, seeds: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.reverse.len()];
        let mut queue = VecDeque::new();
        for &s in seeds {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(p) = queue.pop_front() {
            for &r in &self.reverse[p] {
                if !seen[r] {
                    seen[r] = true;
                    queue.push_back(r);
                }
            }
        }
        seen
    }
}

/// Formulas for every local pair `(v, u)` that `v` can occupy, keyed by
/// `(node, state)`. A pair gets `true` when it reaches `(t, u_t)` inside the
/// fragment; otherwise it gets the disjunction of the virtual pairs it
/// reaches.
pub fn product_fixpoint(f: &Fragment, q: &RegularQuery) -> HashMap<MatchVar, Formula<MatchVar>> {
    let formulas = product_formulas(f, q);
    let states = q.automaton.state_count();
    (0..f.local_count() * states)
        .filter_map(|p| formulas[p].clone().map(|phi| ((f.node_at(p / states).clone(), p % states), phi)))
        .collect()
}

/// Dense per-pair formulas; `None` where the node cannot occupy the state.
fn product_formulas(f: &Fragment, q: &RegularQuery) -> Vec<Option<Formula<MatchVar>>> {
    let product = Product::new(f, q);
    let states = product.states;
    let mut accepting = Vec::new();
    if let Some(t) = f.slot(q.target.as_str()).filter(|&t| t < f.local_count()) {
        accepting.push(t * states + q.automaton.final_state());
        // The empty path from s to itself.
        if q.source == q.target && q.automaton.accepts_empty() {
            accepting.push(t * states + q.automaton.start());
        }
    }
    let is_true = product.ancestors(&accepting);

    let mut vars: Vec<BTreeSet<MatchVar>> = vec![BTreeSet::new(); f.local_count() * states];
    for w in f.local_count()..f.slot_count() {
        for u in (0..states).filter(|&u| product.admitted[w * states + u]) {
            if product.reverse[w * states + u].is_empty() {
                continue;
            }
            let reached = product.ancestors(&[w * states + u]);
            for p in (0..f.local_count() * states).filter(|&p| reached[p] && !is_true[p]) {
                vars[p].insert((f.node_at(w).clone(), u));
            }
        }
    }
    vars.into_iter()
        .enumerate()
        .map(|(p, vs)| {
            product.admitted[p].then(|| if is_true[p] { Formula::True } else { Formula::Or(vs) })
        })
        .collect()
}

/// `localEval_r`: the match vectors of `iset`, in canonical order.
pub fn local_eval_r(f: &Fragment, q: &RegularQuery) -> Vec<MatchVector> {
    let formulas = product_formulas(f, q);
    let states = q.automaton.state_count();
    f.iset(q.source.as_str())
        .into_iter()
        .map(|v| MatchVector {
            owner: f.node_at(v).clone(),
            entries: (0..states).map(|u| formulas[v * states + u].clone().unwrap_or_default()).collect(),
        })
        .collect()
}

/// Dependency graph over `(node, state)` pairs of the collected vectors.
#[derive(Clone, Debug)]
pub struct RegDepGraph {
    pub nodes: Vec<MatchVar>,
    pub index: HashMap<MatchVar, usize>,
    pub labels: Vec<Formula<MatchVar>>,
    pub edges: Vec<Vec<usize>>,
}

pub fn build_reg_dep_graph(rvset: &[MatchVector]) -> Result<RegDepGraph> {
    let mut nodes = Vec::new();
    let mut index = HashMap::new();
    let mut labels = Vec::new();
    for vec in rvset {
        for (u, phi) in vec.entries.iter().enumerate() {
            let key = (vec.owner.clone(), u);
            if !index.contains_key(&key) {
                index.insert(key.clone(), nodes.len());
                nodes.push(key);
                labels.push(phi.clone());
            }
        }
    }
    let mut edges = Vec::with_capacity(labels.len());
    for phi in &labels {
        let mut out = Vec::with_capacity(phi.var_count());
        for var in phi.vars() {
            out.push(*index.get(var).ok_or_else(|| Error::DanglingVariable(format!("({}, {})", var.0, var.1)))?);
        }
        edges.push(out);
    }
    Ok(RegDepGraph { nodes, index, labels, edges })
}

/// `evalDG_r`: whether `(s, u_s)` reaches a pair whose formula is `true`.
pub fn eval_dg_r(rvset: &[MatchVector], q: &RegularQuery) -> Result<bool> {
    let g = build_reg_dep_graph(rvset)?;
    let start = *g
        .index
        .get(&(q.source.clone(), q.automaton.start()))
        .ok_or_else(|| Error::MissingSource(q.source.clone()))?;
    let mut seen = vec![false; g.nodes.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(p) = queue.pop_front() {
        if g.labels[p].is_true() {
            return Ok(true);
        }
        for &r in &g.edges[p] {
            if !seen[r] {
                seen[r] = true;
                queue.push_back(r);
            }
        }
    }
    Ok(false)
}

/// `disRPQ` without the message layer.
pub fn dis_rpq(frag: &Fragmentation, q: &RegularQuery) -> Result<bool> {
    check_endpoints(frag, &q.source, &q.target)?;
    let rvset: Vec<_> = frag.fragments().iter().flat_map(|f| local_eval_r(f, q)).collect();
    eval_dg_r(&rvset, q)
}

/// Response payload: `fragment id, |iset|, |Vq|, |Fi.O|` as varints, a
/// bitmap of `|iset| * |Vq|` constant-true flags, then per vector its `iset`
/// index as a varint followed by, per state, a bitmap of `|Fi.O| * |Vq|`
/// bits over the pairs `(w, u')` in order `w * |Vq| + u'`.
pub fn encode_response(f: &Fragment, q: &RegularQuery, rvset: &[MatchVector]) -> Vec<u8> {
    let iset = f.iset(q.source.as_str());
    let states = q.automaton.state_count();
    let width = f.virtual_count() * states;
    let mut w = Writer::new();
    w.varint(f.id() as u64).varint(iset.len() as u64).varint(states as u64).varint(f.virtual_count() as u64);
    let by_owner: HashMap<&NodeId, &MatchVector> = rvset.iter().map(|v| (&v.owner, v)).collect();
    let ordered: Vec<&MatchVector> = iset.iter().map(|&v| by_owner[f.node_at(v)]).collect();
    let flags: Vec<bool> = ordered.iter().flat_map(|v| v.entries.iter().map(Formula::is_true)).collect();
    w.bitmap(&flags);
    for (i, vec) in ordered.iter().enumerate() {
        w.varint(i as u64);
        for phi in &vec.entries {
            let mut bits = vec![false; width];
            for (node, u) in phi.vars() {
                let j = f.slot(node.as_str()).and_then(|s| f.virtual_index(s)).expect("variable names a virtual node");
                bits[j * states + u] = true;
            }
            w.bitmap(&bits);
        }
    }
    w.finish()
}

pub fn decode_response(bytes: &[u8], boundary: &Boundary, source: &NodeId) -> Result<(usize, Vec<MatchVector>)> {
    let mut r = Reader::new(bytes);
    let id = r.usize()?;
    let n = r.usize()?;
    let states = r.usize()?;
    let virtuals = r.usize()?;
    if virtuals != boundary.virtual_nodes.len() || n > boundary.in_nodes.len() + 1 {
        return Err(Error::Wire(format!("fragment {id}: header does not match its boundary")));
    }
    let flags = r.bitmap(n * states)?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let idx = r.usize()?;
        let owner = match idx.cmp(&boundary.in_nodes.len()) {
            std::cmp::Ordering::Less => boundary.in_nodes[idx].clone(),
            std::cmp::Ordering::Equal => source.clone(),
            std::cmp::Ordering::Greater => return Err(Error::Wire(format!("iset index {idx} out of range"))),
        };
        let mut entries = Vec::with_capacity(states);
        for u in 0..states {
            let bits = r.bitmap(virtuals * states)?;
            entries.push(if flags[i * states + u] {
                Formula::True
            } else {
                bits.iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(k, _)| (boundary.virtual_nodes[k / states].clone(), k % states))
                    .collect()
            });
        }
        out.push(MatchVector { owner, entries });
    }
    r.expect_end()?;
    Ok((id, out))
}
