//! Fragmentations of a graph: per-site fragments with their boundary sets,
//! the fragment graph, and the partition file format.
//!
//! Inside a [`Fragment`], every node owns a dense *slot*. Local nodes occupy
//! slots `0..local_count` and virtual nodes follow, both groups sorted by
//! [`NodeId`]. Virtual nodes never have outgoing edges inside the fragment.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, Label, NodeId};
use crate::wire::{Reader, Writer};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fragment {
    id: usize,
    nodes: Vec<NodeId>,
    labels: Vec<Label>,
    local_count: usize,
    slots: HashMap<NodeId, usize>,
    adj: Vec<Vec<usize>>,
    in_slots: Vec<usize>,
}

impl Fragment {
    pub fn id(&self) -> usize {
        self.id
    }

    /// `Vi`, sorted.
    pub fn local_nodes(&self) -> &[NodeId] {
        &self.nodes[..self.local_count]
    }

    /// `Fi.O`, sorted.
    pub fn virtual_nodes(&self) -> &[NodeId] {
        &self.nodes[self.local_count..]
    }

    /// `Fi.I`, sorted.
    pub fn in_nodes(&self) -> impl ExactSizeIterator<Item = &NodeId> + '_ {
        self.in_slots.iter().map(move |&s| &self.nodes[s])
    }

    pub fn in_node_count(&self) -> usize {
        self.in_slots.len()
    }

    pub fn virtual_count(&self) -> usize {
        self.nodes.len() - self.local_count
    }

    pub fn local_count(&self) -> usize {
        self.local_count
    }

    pub fn is_local(&self, v: &str) -> bool {
        self.slot(v).is_some_and(|s| s < self.local_count)
    }

    pub fn is_virtual(&self, v: &str) -> bool {
        self.slot(v).is_some_and(|s| s >= self.local_count)
    }

    pub fn is_in_node(&self, v: &str) -> bool {
        self.slot(v).is_some_and(|s| self.in_slots.binary_search(&s).is_ok())
    }

    pub fn label(&self, v: &str) -> Option<&Label> {
        self.slot(v).map(|s| &self.labels[s])
    }

    /// Edges between two local nodes.
    pub fn local_edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> + '_ {
        self.slot_edges().filter(|&(_, d)| d < self.local_count).map(|(s, d)| (&self.nodes[s], &self.nodes[d]))
    }

    /// `cEi`: edges from a local node to a virtual node.
    pub fn cross_edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> + '_ {
        self.slot_edges().filter(|&(_, d)| d >= self.local_count).map(|(s, d)| (&self.nodes[s], &self.nodes[d]))
    }

    fn slot_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(s, out)| out.iter().map(move |&d| (s, d)))
    }

    // Slot-level access used by the local evaluators.

    pub fn slot(&self, v: &str) -> Option<usize> {
        self.slots.get(v).copied()
    }

    pub fn slot_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_at(&self, slot: usize) -> &NodeId {
        &self.nodes[slot]
    }

    pub fn label_at(&self, slot: usize) -> &Label {
        &self.labels[slot]
    }

    pub fn successors_at(&self, slot: usize) -> &[usize] {
        &self.adj[slot]
    }

    pub fn in_node_slots(&self) -> &[usize] {
        &self.in_slots
    }

    /// The `iset` of a query: the in-nodes in canonical order, followed by
    /// the query source when it is local and not already an in-node.
    pub fn iset(&self, source: &str) -> Vec<usize> {
        let mut out = self.in_slots.clone();
        if let Some(s) = self.slot(source).filter(|&s| s < self.local_count) {
            if self.in_slots.binary_search(&s).is_err() {
                out.push(s);
            }
        }
        out
    }

    /// Boundary sets as known to the coordinator.
    pub fn boundary(&self) -> Boundary {
        Boundary {
            in_nodes: self.in_nodes().cloned().collect(),
            virtual_nodes: self.virtual_nodes().to_vec(),
        }
    }

    /// Position of a virtual slot within `Fi.O`.
    pub fn virtual_index(&self, slot: usize) -> Option<usize> {
        slot.checked_sub(self.local_count)
    }

    fn slot_checked(&self, v: &str) -> Result<usize> {
        self.slot(v).ok_or_else(|| Error::NotInFragment { node: NodeId::new(v), fragment: self.id })
    }

    /// Slots reachable from `from` by paths of length zero or more.
    pub fn reach_mask(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Unweighted BFS distances from `from`; `None` marks unreachable slots.
    pub fn distances_from(&self, from: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.nodes.len()];
        let mut queue = VecDeque::from([from]);
        dist[from] = Some(0);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &w in &self.adj[u] {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// `des(v, Fi)`, reflexive.
    pub fn descendants(&self, v: &str) -> Result<BTreeSet<NodeId>> {
        let mask = self.reach_mask(self.slot_checked(v)?);
        Ok(mask.iter().enumerate().filter(|(_, &r)| r).map(|(s, _)| self.nodes[s].clone()).collect())
    }

    /// Edge-count distances from `v` to every node it reaches in the fragment.
    pub fn local_distances(&self, v: &str) -> Result<BTreeMap<NodeId, u32>> {
        let dist = self.distances_from(self.slot_checked(v)?);
        Ok(dist
            .iter()
            .enumerate()
            .filter_map(|(s, d)| d.map(|d| (self.nodes[s].clone(), d)))
            .collect())
    }

    /// Serializes the fragment's local nodes, local edges and cross edges as a
    /// graph document. Virtual nodes are not declared.
    pub fn to_text(&self) -> String {
        let mut out = String::from("#nodes\n");
        for (id, label) in self.nodes[..self.local_count].iter().zip(&self.labels) {
            out.push_str(id.as_str());
            out.push(' ');
            out.push_str(label.as_str());
            out.push('\n');
        }
        out.push_str("#edges\n");
        for (s, d) in self.slot_edges() {
            out.push_str(self.nodes[s].as_str());
            out.push(' ');
            out.push_str(self.nodes[d].as_str());
            out.push('\n');
        }
        out
    }

    /// Self-contained binary form of the fragment: id, node counts, every
    /// node with its label, the in-node slots and the slot adjacency.
    pub fn encode_split(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.varint(self.id as u64).varint(self.local_count as u64).varint(self.virtual_count() as u64);
        for (id, label) in self.nodes.iter().zip(&self.labels) {
            w.str(id.as_str()).str(label.as_str());
        }
        w.varint(self.in_slots.len() as u64);
        for &s in &self.in_slots {
            w.varint(s as u64);
        }
        for out in &self.adj[..self.local_count] {
            w.varint(out.len() as u64);
            for &d in out {
                w.varint(d as u64);
            }
        }
        w.finish()
    }

    pub fn decode_split(bytes: &[u8]) -> Result<Fragment> {
        let mut r = Reader::new(bytes);
        Self::read_split(&mut r).and_then(|f| r.expect_end().map(|_| f))
    }

    pub(crate) fn read_split(r: &mut Reader<'_>) -> Result<Fragment> {
        let id = r.usize()?;
        let local_count = r.usize()?;
        let total = local_count
            .checked_add(r.usize()?)
            .ok_or_else(|| Error::Wire("node count overflow".into()))?;
        let mut nodes = Vec::with_capacity(total.min(1 << 16));
        let mut labels = Vec::with_capacity(total.min(1 << 16));
        for _ in 0..total {
            nodes.push(NodeId::new(r.str()?));
            labels.push(Label::new(r.str()?));
        }
        let bad_slot = |s: usize, limit: usize| {
            if s < limit {
                Ok(s)
            } else {
                Err(Error::Wire(format!("slot {s} out of range")))
            }
        };
        let in_count = r.usize()?;
        let mut in_slots = Vec::with_capacity(in_count.min(local_count));
        for _ in 0..in_count {
            in_slots.push(bad_slot(r.usize()?, local_count)?);
        }
        let mut adj = vec![Vec::new(); total];
        for out in adj.iter_mut().take(local_count) {
            let deg = r.usize()?;
            for _ in 0..deg {
                out.push(bad_slot(r.usize()?, total)?);
            }
        }
        let slots: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(s, v)| (v.clone(), s)).collect();
        if slots.len() != total {
            return Err(Error::Wire("duplicate node in split".into()));
        }
        Ok(Fragment { id, nodes, labels, local_count, slots, adj, in_slots })
    }
}

/// The canonical `Fi.I` and `Fi.O` lists of one fragment. This is all the
/// coordinator needs to decode that fragment's partial answers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Boundary {
    pub in_nodes: Vec<NodeId>,
    pub virtual_nodes: Vec<NodeId>,
}

/// `Gf = (Vf, Ef)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FragmentGraph {
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeSet<(NodeId, NodeId)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fragmentation {
    fragments: Vec<Fragment>,
    fragment_of: HashMap<NodeId, usize>,
    fragment_graph: FragmentGraph,
}

impl Fragmentation {
    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn fragment(&self, i: usize) -> &Fragment {
        &self.fragments[i]
    }

    /// `card(F)`.
    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    pub fn fragment_of(&self, v: &str) -> Option<usize> {
        self.fragment_of.get(v).copied()
    }

    pub fn fragment_graph(&self) -> &FragmentGraph {
        &self.fragment_graph
    }

    /// Partition file contents, one `<node> <fragment>` line per node in the
    /// graph's declaration order.
    pub fn to_partition_text(&self, g: &Graph) -> String {
        let mut out = String::new();
        for v in g.nodes() {
            out.push_str(&format!("{} {}\n", v, self.fragment_of[v]));
        }
        out
    }
}

/// Derives every fragment's boundary sets and the fragment graph from a node
/// assignment.
pub fn build_fragmentation(g: &Graph, assignment: &HashMap<NodeId, usize>) -> Result<Fragmentation> {
    let mut parts = Vec::with_capacity(g.node_count());
    for v in g.nodes() {
        parts.push(*assignment.get(v).ok_or_else(|| Error::UnassignedNode(v.clone()))?);
    }
    if let Some(extra) = assignment.keys().find(|v| !g.contains(v.as_str())) {
        return Err(Error::UnknownNode(extra.clone()));
    }
    build_from_parts(g, &parts)
}

/// Same as [`build_fragmentation`], with the assignment indexed by the
/// graph's dense node order.
pub fn build_from_parts(g: &Graph, parts: &[usize]) -> Result<Fragmentation> {
    assert_eq!(parts.len(), g.node_count(), "one fragment index per node");
    let k = parts.iter().max().map_or(0, |m| m + 1);
    let mut used = vec![false; k];
    for &p in parts {
        used[p] = true;
    }
    if let Some(gap) = used.iter().position(|u| !u) {
        return Err(Error::NonContiguousFragments(gap));
    }

    let mut is_in_node = vec![false; g.node_count()];
    for (u, &pu) in parts.iter().enumerate() {
        for &w in g.successors_at(u) {
            if parts[w] != pu {
                is_in_node[w] = true;
            }
        }
    }

    let mut fragments = Vec::with_capacity(k);
    let mut fragment_graph = FragmentGraph::default();
    for i in 0..k {
        let mut locals: Vec<usize> = (0..g.node_count()).filter(|&u| parts[u] == i).collect();
        locals.sort_by(|&a, &b| g.node(a).cmp(g.node(b)));
        let mut virtuals: Vec<usize> = locals
            .iter()
            .flat_map(|&u| g.successors_at(u).iter().copied())
            .filter(|&w| parts[w] != i)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        virtuals.sort_by(|&a, &b| g.node(a).cmp(g.node(b)));

        let order: Vec<usize> = locals.iter().chain(&virtuals).copied().collect();
        let slot_of: HashMap<usize, usize> = order.iter().enumerate().map(|(s, &u)| (u, s)).collect();
        let mut adj = vec![Vec::new(); order.len()];
        for (s, &u) in locals.iter().enumerate() {
            adj[s] = g.successors_at(u).iter().map(|w| slot_of[w]).collect();
            for &w in g.successors_at(u) {
                if parts[w] != i {
                    fragment_graph.edges.insert((g.node(u).clone(), g.node(w).clone()));
                }
            }
        }
        let in_slots: Vec<usize> = (0..locals.len()).filter(|&s| is_in_node[locals[s]]).collect();
        let nodes: Vec<NodeId> = order.iter().map(|&u| g.node(u).clone()).collect();
        for &s in &in_slots {
            fragment_graph.nodes.insert(nodes[s].clone());
        }
        fragment_graph.nodes.extend(nodes[locals.len()..].iter().cloned());

        fragments.push(Fragment {
            id: i,
            labels: order.iter().map(|&u| g.label_at(u).clone()).collect(),
            local_count: locals.len(),
            slots: nodes.iter().enumerate().map(|(s, v)| (v.clone(), s)).collect(),
            nodes,
            adj,
            in_slots,
        });
    }

    let fragment_of = g.nodes().iter().cloned().zip(parts.iter().copied()).collect();
    Ok(Fragmentation { fragments, fragment_of, fragment_graph })
}

/// Seeded uniform assignment of nodes to `k` parts, rebalanced so part sizes
/// differ by at most one.
pub fn random_partition(g: &Graph, k: usize, seed: u64) -> Result<Fragmentation> {
    let n = g.node_count();
    if k == 0 || k > n {
        return Err(Error::InvalidFragmentCount { k, nodes: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (u, &p) in parts.iter().enumerate() {
        members[p].push(u);
    }
    loop {
        let (big, _) = members.iter().enumerate().max_by_key(|(i, m)| (m.len(), usize::MAX - i)).unwrap();
        let (small, _) = members.iter().enumerate().min_by_key(|(i, m)| (m.len(), *i)).unwrap();
        if members[big].len() - members[small].len() <= 1 {
            break;
        }
        let pick = rng.gen_range(0..members[big].len());
        let u = members[big].swap_remove(pick);
        parts[u] = small;
        members[small].push(u);
    }
    build_from_parts(g, &parts)
}

/// Parses a partition file: one `<node-id> <fragment-index>` per line.
pub fn parse_partition(text: &str) -> Result<HashMap<NodeId, usize>> {
    let mut out = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let [node, idx] = fields[..] else {
            return Err(Error::Parse { line, message: format!("expected `<node> <fragment>`, found `{trimmed}`") });
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("bad fragment index `{idx}`") })?;
        if out.insert(NodeId::new(node), idx).is_some() {
            return Err(Error::DuplicateNode { line, node: node.to_string() });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn ids<'a>(it: impl IntoIterator<Item = &'a NodeId>) -> Vec<&'a str> {
        it.into_iter().map(|n| n.as_str()).collect()
    }

    #[test]
    fn split_round_trip() {
        let frag = fixture::fragmentation();
        for f in frag.fragments() {
            assert_eq!(&Fragment::decode_split(&f.encode_split()).unwrap(), f);
        }
        let mut bytes = frag.fragment(1).encode_split();
        bytes.pop();
        assert!(Fragment::decode_split(&bytes).is_err());
    }

    #[test]
    fn fixture_boundaries() {
        let frag = fixture::fragmentation();
        let f1 = frag.fragment(0);
        assert_eq!(ids(f1.virtual_nodes()), ["Emmy", "Mat", "Pat"]);
        assert_eq!(ids(f1.in_nodes()), ["Fred"]);
        let cross: BTreeSet<_> = f1.cross_edges().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        assert_eq!(cross, BTreeSet::from([("Bill", "Pat"), ("Fred", "Emmy"), ("Walt", "Mat")]));

        let f2 = frag.fragment(1);
        assert_eq!(ids(f2.in_nodes()), ["Emmy", "Jack", "Mat"]);
        assert_eq!(ids(f2.virtual_nodes()), ["Fred", "Ross"]);
        let f3 = frag.fragment(2);
        assert_eq!(ids(f3.in_nodes()), ["Pat", "Ross"]);
        assert_eq!(ids(f3.virtual_nodes()), ["Jack"]);

        let gf = frag.fragment_graph();
        assert!(gf.edges.contains(&("Mat".into(), "Fred".into())));
        assert!(gf.edges.contains(&("Bill".into(), "Pat".into())));
        assert_eq!(gf.edges.len(), 7);
        assert_eq!(ids(&gf.nodes), ["Emmy", "Fred", "Jack", "Mat", "Pat", "Ross"]);
    }

    #[test]
    fn single_fragment_has_no_boundary() {
        let g = fixture::graph();
        let frag = build_from_parts(&g, &vec![0; g.node_count()]).unwrap();
        assert_eq!(frag.len(), 1);
        assert_eq!(frag.fragment(0).virtual_count(), 0);
        assert_eq!(frag.fragment(0).in_node_count(), 0);
        assert!(frag.fragment_graph().nodes.is_empty());
    }

    #[test]
    fn descendants_in_first_fragment() {
        let frag = fixture::fragmentation();
        let f1 = frag.fragment(0);
        assert_eq!(ids(&f1.descendants("Ann").unwrap()), ["Ann", "Bill", "Mat", "Pat", "Walt"]);
        assert_eq!(ids(&f1.descendants("Emmy").unwrap()), ["Emmy"]);
        assert_eq!(ids(&f1.descendants("Fred").unwrap()), ["Emmy", "Fred"]);
        assert!(matches!(f1.descendants("Mark"), Err(Error::NotInFragment { .. })));
    }

    #[test]
    fn isolated_node_reaches_itself() {
        let g = crate::graph::parse_graph("#nodes\na X\nb Y\n").unwrap();
        let frag = build_from_parts(&g, &[0, 0]).unwrap();
        assert_eq!(ids(&frag.fragment(0).descendants("a").unwrap()), ["a"]);
    }

    #[test]
    fn distances_in_second_fragment() {
        let frag = fixture::fragmentation();
        let f2 = frag.fragment(1);
        assert_eq!(f2.local_distances("Mat").unwrap()["Fred"], 1);
        let emmy = f2.local_distances("Emmy").unwrap();
        assert_eq!(emmy["Fred"], 3);
        assert_eq!(emmy["Ross"], 1);
        assert_eq!(emmy["Emmy"], 0);
        assert_eq!(f2.local_distances("Jack").unwrap()["Fred"], 3);
        assert!(!f2.local_distances("Jack").unwrap().contains_key("Ross"));
    }

    #[test]
    fn random_partition_balances() {
        let g = fixture::graph();
        let frag = random_partition(&g, 3, 7).unwrap();
        let sizes: Vec<_> = frag.fragments().iter().map(|f| f.local_count()).collect();
        assert_eq!(sizes, [4, 4, 4]);
        assert_eq!(random_partition(&g, 3, 7).unwrap(), frag);
        let one = random_partition(&g, 1, 99).unwrap();
        assert!(one.fragment_graph().nodes.is_empty());
        let all = random_partition(&g, 12, 5).unwrap();
        assert_eq!(all.fragment_graph().edges.len(), g.edge_count());
    }

    #[test]
    fn random_partition_rejects_bad_k() {
        let g = fixture::graph();
        assert!(matches!(random_partition(&g, 0, 1), Err(Error::InvalidFragmentCount { .. })));
        assert!(matches!(random_partition(&g, 13, 1), Err(Error::InvalidFragmentCount { .. })));
    }

    #[test]
    fn assignment_errors() {
        let g = fixture::graph();
        let mut a = parse_partition(fixture::PARTITION).unwrap();
        a.remove("Ann");
        assert_eq!(build_fragmentation(&g, &a).unwrap_err(), Error::UnassignedNode("Ann".into()));
        let mut a = parse_partition(fixture::PARTITION).unwrap();
        a.insert("Ann".into(), 5);
        assert_eq!(build_fragmentation(&g, &a).unwrap_err(), Error::NonContiguousFragments(3));
    }

    #[test]
    fn partition_file_errors() {
        assert!(matches!(parse_partition("a 0\na 1\n"), Err(Error::DuplicateNode { line: 2, .. })));
        assert!(matches!(parse_partition("a x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_partition("a\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn partition_text_round_trip() {
        let g = fixture::graph();
        let frag = fixture::fragmentation();
        let text = frag.to_partition_text(&g);
        assert_eq!(text.lines().count(), 12);
        let back = build_fragmentation(&g, &parse_partition(&text).unwrap()).unwrap();
        assert_eq!(back, frag);
    }
}
