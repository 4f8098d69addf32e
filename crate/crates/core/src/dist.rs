//! Partial evaluation of bounded reachability queries `qbr(s, t, l)`.
//!
//! Sites emit min-plus equations `X_v = min{X_w + dist(v, w)}` over their
//! virtual nodes, with the term `t + d` when `t` is local. The coordinator
//! turns the terms into a weighted dependency graph and runs Dijkstra from
//! `X_s` to `X_t`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fragment::{Boundary, Fragment, Fragmentation};
use crate::graph::NodeId;
use crate::reach::check_endpoints;
use crate::wire::{Reader, Writer};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundedQuery {
    pub source: NodeId,
    pub target: NodeId,
    pub bound: u32,
}

impl BoundedQuery {
    pub fn new(source: &str, target: &str, bound: u32) -> Self {
        BoundedQuery { source: NodeId::new(source), target: NodeId::new(target), bound }
    }
}

/// A path length in edges, or unreachable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Distance {
    Finite(u64),
    Infinite,
}

impl Distance {
    pub fn finite(self) -> Option<u64> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Distance::Finite(_))
    }

    pub fn within(self, bound: u64) -> bool {
        self.finite().is_some_and(|d| d <= bound)
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

/// Serialized as a number, or `null` when infinite.
impl Serialize for Distance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.finite().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Distance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Option::<u64>::deserialize(d)?.map_or(Distance::Infinite, Distance::Finite))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistVar {
    /// Unknown `dist(w, t)` of a virtual node `w`.
    Node(NodeId),
    /// The local target, whose distance to itself is 0.
    Target,
}

/// `X_lhs = min { var + weight }`. No terms means `+∞`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DistEquation {
    pub lhs: NodeId,
    pub terms: Vec<(DistVar, u32)>,
}

/// `localEval_d` with segment cutoff `dist(v, w) <= l`.
pub fn local_eval_d(f: &Fragment, q: &BoundedQuery) -> Vec<DistEquation> {
    local_eval_d_with_cutoff(f, q, Some(q.bound))
}

/// Like [`local_eval_d`] but with an explicit segment cutoff; `None` keeps
/// every reachable boundary node.
pub fn local_eval_d_with_cutoff(f: &Fragment, q: &BoundedQuery, cutoff: Option<u32>) -> Vec<DistEquation> {
    let target = f.slot(q.target.as_str()).filter(|&t| t < f.local_count());
    let keep = |d: u32| cutoff.is_none_or(|c| d <= c);
    f.iset(q.source.as_str())
        .into_iter()
        .map(|v| {
            let dist = f.distances_from(v);
            let mut terms: Vec<(DistVar, u32)> = (f.local_count()..f.slot_count())
                .filter_map(|w| dist[w].filter(|&d| keep(d)).map(|d| (DistVar::Node(f.node_at(w).clone()), d)))
                .collect();
            if let Some(d) = target.and_then(|t| dist[t]).filter(|&d| keep(d)) {
                terms.push((DistVar::Target, d));
            }
            DistEquation { lhs: f.node_at(v).clone(), terms }
        })
        .collect()
}

/// Weighted dependency graph: one node per defined variable plus the target
/// node, and an edge `X_v -w-> X_u` per term.
#[derive(Clone, Debug)]
pub struct WeightedDepGraph {
    pub nodes: Vec<NodeId>,
    pub index: HashMap<NodeId, usize>,
    pub edges: Vec<Vec<(usize, u32)>>,
    pub target: usize,
}

impl WeightedDepGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len() + 1
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Single-source shortest distances from `from`.
    pub fn dijkstra(&self, from: usize) -> Vec<Distance> {
        let mut dist = vec![Distance::Infinite; self.edges.len()];
        let mut heap = BinaryHeap::new();
        dist[from] = Distance::Finite(0);
        heap.push(Reverse((0u64, from)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if Distance::Finite(d) > dist[u] {
                continue;
            }
            for &(w, weight) in &self.edges[u] {
                let nd = d + u64::from(weight);
                if Distance::Finite(nd).cmp(&dist[w]) == Ordering::Less {
                    dist[w] = Distance::Finite(nd);
                    heap.push(Reverse((nd, w)));
                }
            }
        }
        dist
    }
}

pub fn build_weighted_dep_graph(rvset: &[DistEquation]) -> Result<WeightedDepGraph> {
    let mut nodes = Vec::new();
    let mut index = HashMap::new();
    for eq in rvset {
        if !index.contains_key(&eq.lhs) {
            index.insert(eq.lhs.clone(), nodes.len());
            nodes.push(eq.lhs.clone());
        }
    }
    let target = nodes.len();
    let mut edges = vec![Vec::new(); nodes.len() + 1];
    for eq in rvset {
        let from = index[&eq.lhs];
        for (var, weight) in &eq.terms {
            let to = match var {
                DistVar::Target => target,
                DistVar::Node(v) => *index.get(v).ok_or_else(|| Error::DanglingVariable(v.to_string()))?,
            };
            edges[from].push((to, *weight));
        }
    }
    Ok(WeightedDepGraph { nodes, index, edges, target })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistAnswer {
    pub within_bound: bool,
    /// `dist(s, t)` when it is within the bound, `+∞` otherwise.
    pub distance: Distance,
}

/// `evalDG_d`.
pub fn eval_dg_d(rvset: &[DistEquation], q: &BoundedQuery) -> Result<DistAnswer> {
    let g = build_weighted_dep_graph(rvset)?;
    let start = *g.index.get(&q.source).ok_or_else(|| Error::MissingSource(q.source.clone()))?;
    let d = g.dijkstra(start)[g.target];
    Ok(if d.within(u64::from(q.bound)) {
        DistAnswer { within_bound: true, distance: d }
    } else {
        DistAnswer { within_bound: false, distance: Distance::Infinite }
    })
}

/// `disDist` without the message layer.
pub fn dis_dist(frag: &Fragmentation, q: &BoundedQuery) -> Result<DistAnswer> {
    check_endpoints(frag, &q.source, &q.target)?;
    let rvset: Vec<_> = frag.fragments().iter().flat_map(|f| local_eval_d(f, q)).collect();
    eval_dg_d(&rvset, q)
}

/// Response payload: `fragment id, |iset|, |oset|` as varints, then per
/// equation its `iset` index and term count, and per term the `oset` index
/// and the weight. `oset` is `Fi.O` followed by the target when it is local.
pub fn encode_response(f: &Fragment, q: &BoundedQuery, rvset: &[DistEquation]) -> Vec<u8> {
    let iset = f.iset(q.source.as_str());
    let target_local = f.is_local(q.target.as_str());
    let mut w = Writer::new();
    w.varint(f.id() as u64).varint(iset.len() as u64).varint((f.virtual_count() + usize::from(target_local)) as u64);
    let by_lhs: HashMap<&NodeId, &DistEquation> = rvset.iter().map(|e| (&e.lhs, e)).collect();
    for (i, &v) in iset.iter().enumerate() {
        let eq = by_lhs[f.node_at(v)];
        w.varint(i as u64).varint(eq.terms.len() as u64);
        for (var, weight) in &eq.terms {
            let idx = match var {
                DistVar::Target => f.virtual_count(),
                DistVar::Node(n) => f.slot(n.as_str()).and_then(|s| f.virtual_index(s)).expect("term names a virtual node"),
            };
            w.varint(idx as u64).varint(u64::from(*weight));
        }
    }
    w.finish()
}

pub fn decode_response(bytes: &[u8], boundary: &Boundary, source: &NodeId) -> Result<(usize, Vec<DistEquation>)> {
    let mut r = Reader::new(bytes);
    let id = r.usize()?;
    let n = r.usize()?;
    let oset = r.usize()?;
    let width = boundary.virtual_nodes.len();
    if oset < width || oset > width + 1 || n > boundary.in_nodes.len() + 1 {
        return Err(Error::Wire(format!("fragment {id}: header does not match its boundary")));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let idx = r.usize()?;
        let lhs = match idx.cmp(&boundary.in_nodes.len()) {
            Ordering::Less => boundary.in_nodes[idx].clone(),
            Ordering::Equal => source.clone(),
            Ordering::Greater => return Err(Error::Wire(format!("iset index {idx} out of range"))),
        };
        let count = r.usize()?;
        let mut terms = Vec::with_capacity(count.min(oset));
        for _ in 0..count {
            let j = r.usize()?;
            let weight = u32::try_from(r.varint()?).map_err(|_| Error::Wire("weight out of range".into()))?;
            let var = match j {
                j if j < width => DistVar::Node(boundary.virtual_nodes[j].clone()),
                j if j < oset => DistVar::Target,
                _ => return Err(Error::Wire(format!("oset index {j} out of range"))),
            };
            terms.push((var, weight));
        }
        out.push(DistEquation { lhs, terms });
    }
    r.expect_end()?;
    Ok((id, out))
}
