//! Partial evaluation of reachability queries `qr(s, t)`.
//!
//! Each site emits one boolean equation `X_v = rhs` per in-node (and for
//! `s` when local): `rhs` is `true` when `t` is local and reachable from `v`,
//! otherwise the disjunction of the virtual nodes `v` reaches. The
//! coordinator solves the resulting system by reachability to the merged
//! `true` node of its dependency graph.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::fragment::{Boundary, Fragment, Fragmentation};
use crate::graph::NodeId;
use crate::wire::{Reader, Writer};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachQuery {
    pub source: NodeId,
    pub target: NodeId,
}

impl ReachQuery {
    pub fn new(source: &str, target: &str) -> Self {
        ReachQuery { source: NodeId::new(source), target: NodeId::new(target) }
    }
}

/// `X_lhs = rhs`, where `rhs` ranges over virtual nodes of the producing
/// fragment.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BoolEquation {
    pub lhs: NodeId,
    pub rhs: Formula<NodeId>,
}

/// `localEval`: one equation per member of `iset`, in canonical order.
pub fn local_eval(f: &Fragment, q: &ReachQuery) -> Vec<BoolEquation> {
    let target = f.slot(q.target.as_str()).filter(|&t| t < f.local_count());
    f.iset(q.source.as_str())
        .into_iter()
        .map(|v| {
            let reached = f.reach_mask(v);
            let rhs = if target.is_some_and(|t| reached[t]) {
                Formula::True
            } else {
                (f.local_count()..f.slot_count())
                    .filter(|&w| reached[w])
                    .map(|w| f.node_at(w).clone())
                    .collect()
            };
            BoolEquation { lhs: f.node_at(v).clone(), rhs }
        })
        .collect()
}

/// Dependency graph of a boolean equation system. Every variable is a node;
/// all variables defined as `true` share the single node `true_node`.
#[derive(Clone, Debug)]
pub struct BoolDepGraph {
    pub nodes: Vec<NodeId>,
    pub index: HashMap<NodeId, usize>,
    pub edges: Vec<Vec<usize>>,
    pub labels: Vec<Formula<NodeId>>,
    pub true_node: Option<usize>,
}

impl BoolDepGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len() + usize::from(self.true_node.is_some())
    }

    /// Dense id of a variable, with constant-true variables mapped onto the
    /// merged true node.
    pub fn resolve(&self, v: &str) -> Option<usize> {
        let i = *self.index.get(v)?;
        Some(if self.labels[i].is_true() { self.true_node.unwrap_or(i) } else { i })
    }
}

pub fn build_bool_dep_graph(rvset: &[BoolEquation]) -> Result<BoolDepGraph> {
    let mut nodes = Vec::new();
    let mut index = HashMap::new();
    let mut labels = Vec::new();
    for eq in rvset {
        if index.insert(eq.lhs.clone(), nodes.len()).is_none() {
            nodes.push(eq.lhs.clone());
            labels.push(eq.rhs.clone());
        }
    }
    let true_node = labels.iter().any(Formula::is_true).then_some(nodes.len());
    let mut g = BoolDepGraph { edges: vec![Vec::new(); nodes.len()], nodes, index, labels, true_node };
    for i in 0..g.nodes.len() {
        let mut out = BTreeSet::new();
        for v in g.labels[i].vars() {
            out.insert(g.resolve(v.as_str()).ok_or_else(|| Error::DanglingVariable(v.to_string()))?);
        }
        g.edges[i] = out.into_iter().collect();
    }
    if let Some(t) = true_node {
        g.edges.push(Vec::new());
        debug_assert_eq!(g.edges.len(), t + 1);
    }
    Ok(g)
}

/// `evalDG`: whether `X_s` reaches the merged true node.
pub fn eval_dg(rvset: &[BoolEquation], source: &str) -> Result<bool> {
    let g = build_bool_dep_graph(rvset)?;
    let start = g.resolve(source).ok_or_else(|| Error::MissingSource(NodeId::new(source)))?;
    let Some(goal) = g.true_node else { return Ok(false) };
    let mut seen = vec![false; g.edges.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        if u == goal {
            return Ok(true);
        }
        for &w in &g.edges[u] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    Ok(false)
}

pub(crate) fn check_endpoints(frag: &Fragmentation, source: &NodeId, target: &NodeId) -> Result<()> {
    for v in [source, target] {
        if frag.fragment_of(v.as_str()).is_none() {
            return Err(Error::UnknownNode(v.clone()));
        }
    }
    Ok(())
}

/// `disReach` without the message layer: evaluates every fragment and
/// assembles the union of their equations.
pub fn dis_reach(frag: &Fragmentation, q: &ReachQuery) -> Result<bool> {
    check_endpoints(frag, &q.source, &q.target)?;
    let rvset: Vec<_> = frag.fragments().iter().flat_map(|f| local_eval(f, q)).collect();
    eval_dg(&rvset, q.source.as_str())
}

/// Response payload: `fragment id, |iset|, |Fi.O|` as varints, a bitmap of
/// `|iset|` constant-true flags, then per equation the `iset` index as a
/// varint followed by a `|Fi.O|`-bit bitmap of the referenced virtual nodes.
pub fn encode_response(f: &Fragment, q: &ReachQuery, rvset: &[BoolEquation]) -> Vec<u8> {
    let iset = f.iset(q.source.as_str());
    let mut w = Writer::new();
    w.varint(f.id() as u64).varint(iset.len() as u64).varint(f.virtual_count() as u64);
    let by_lhs: HashMap<&NodeId, &BoolEquation> = rvset.iter().map(|e| (&e.lhs, e)).collect();
    let ordered: Vec<&BoolEquation> = iset.iter().map(|&v| by_lhs[f.node_at(v)]).collect();
    w.bitmap(&ordered.iter().map(|e| e.rhs.is_true()).collect::<Vec<_>>());
    for (i, eq) in ordered.iter().enumerate() {
        w.varint(i as u64);
        let mut bits = vec![false; f.virtual_count()];
        for v in eq.rhs.vars() {
            let slot = f.slot(v.as_str()).expect("rhs names a virtual node");
            bits[f.virtual_index(slot).expect("rhs names a virtual node")] = true;
        }
        w.bitmap(&bits);
    }
    w.finish()
}

/// Decodes a response using the coordinator's view of the fragment's
/// boundary. An `iset` index equal to `|Fi.I|` denotes the query source.
pub fn decode_response(bytes: &[u8], boundary: &Boundary, source: &NodeId) -> Result<(usize, Vec<BoolEquation>)> {
    let mut r = Reader::new(bytes);
    let id = r.usize()?;
    let n = r.usize()?;
    let width = r.usize()?;
    if width != boundary.virtual_nodes.len() || n > boundary.in_nodes.len() + 1 {
        return Err(Error::Wire(format!("fragment {id}: header does not match its boundary")));
    }
    let flags = r.bitmap(n)?;
    let mut out = Vec::with_capacity(n);
    for flag in flags {
        let idx = r.usize()?;
        let lhs = match idx.cmp(&boundary.in_nodes.len()) {
            std::cmp::Ordering::Less => boundary.in_nodes[idx].clone(),
            std::cmp::Ordering::Equal => source.clone(),
            std::cmp::Ordering::Greater => return Err(Error::Wire(format!("iset index {idx} out of range"))),
        };
        let bits = r.bitmap(width)?;
        let rhs = if flag {
            Formula::True
        } else {
            bits.iter().zip(&boundary.virtual_nodes).filter(|(b, _)| **b).map(|(_, v)| v.clone()).collect()
        };
        out.push(BoolEquation { lhs, rhs });
    }
    r.expect_end()?;
    Ok((id, out))
}
