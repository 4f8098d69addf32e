//! Directed node-labeled graphs and the line-oriented graph file format.
//!
//! ```text
//! #nodes
//! Ann CTO
//! Walt HR
//! #edges
//! Ann Walt
//! ```
//!
//! Lines starting with `#` other than the two section headers are comments.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node identifier. Ordered lexicographically, which fixes the canonical
/// ordering of boundary sets.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(Arc<str>);

impl NodeId {
    pub fn new(id: &str) -> Self {
        NodeId(Arc::from(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId::new(s)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(label: &str) -> Self {
        Label(Arc::from(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

/// A directed node-labeled graph `G = (V, E, L)`.
///
/// Nodes keep their declaration order; the adjacency list of every node keeps
/// the order in which its edges were first added. Parallel edges are collapsed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    ids: Vec<NodeId>,
    labels: Vec<Label>,
    index: HashMap<NodeId, usize>,
    adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn contains(&self, v: &str) -> bool {
        self.index.contains_key(v)
    }

    /// Nodes in declaration order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn index_of(&self, v: &str) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn node(&self, idx: usize) -> &NodeId {
        &self.ids[idx]
    }

    pub fn label(&self, v: &str) -> Option<&Label> {
        self.index_of(v).map(|i| &self.labels[i])
    }

    pub fn label_at(&self, idx: usize) -> &Label {
        &self.labels[idx]
    }

    /// Out-neighbours by dense index.
    pub fn successors_at(&self, idx: usize) -> &[usize] {
        &self.adj[idx]
    }

    pub fn successors<'a>(&'a self, v: &str) -> impl Iterator<Item = &'a NodeId> + 'a {
        let adj: &'a [usize] = self.index_of(v).map(|i| self.adj[i].as_slice()).unwrap_or(&[]);
        adj.iter().map(move |&j| &self.ids[j])
    }

    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(move |(i, out)| out.iter().map(move |&j| (&self.ids[i], &self.ids[j])))
    }

    /// Serializes the graph in the file format accepted by [`parse_graph`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("#nodes\n");
        for (id, label) in self.ids.iter().zip(&self.labels) {
            out.push_str(id.as_str());
            out.push(' ');
            out.push_str(label.as_str());
            out.push('\n');
        }
        out.push_str("#edges\n");
        for (u, v) in self.edges() {
            out.push_str(u.as_str());
            out.push(' ');
            out.push_str(v.as_str());
            out.push('\n');
        }
        out
    }
}

/// Incremental graph construction. Node declarations and edges may arrive in
/// any order across several documents; references are checked in
/// [`GraphBuilder::build`].
#[derive(Default, Debug)]
pub struct GraphBuilder {
    ids: Vec<NodeId>,
    labels: Vec<Label>,
    index: HashMap<NodeId, usize>,
    pending: Vec<(usize, NodeId, NodeId)>,
}

impl GraphBuilder {
    pub fn node(mut self, id: &str, label: &str) -> Result<Self> {
        self.add_node(0, id, label)?;
        Ok(self)
    }

    pub fn edge(mut self, src: &str, dst: &str) -> Self {
        self.pending.push((0, NodeId::new(src), NodeId::new(dst)));
        self
    }

    pub fn add_node(&mut self, line: usize, id: &str, label: &str) -> Result<()> {
        if self.index.contains_key(id) {
            return Err(Error::DuplicateNode { line, node: id.to_string() });
        }
        let id = NodeId::new(id);
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.labels.push(Label::new(label));
        Ok(())
    }

    pub fn add_edge(&mut self, line: usize, src: &str, dst: &str) {
        self.pending.push((line, NodeId::new(src), NodeId::new(dst)));
    }

    /// Reads one graph document into the builder.
    pub fn add_document(&mut self, text: &str) -> Result<()> {
        #[derive(PartialEq)]
        enum Section {
            Preamble,
            Nodes,
            Edges,
        }
        let mut section = Section::Preamble;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if trimmed == "#nodes" {
                section = Section::Nodes;
                continue;
            }
            if trimmed == "#edges" {
                section = Section::Edges;
                continue;
            }
            if trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line,
                    message: format!("expected two fields, found `{trimmed}`"),
                });
            };
            match section {
                Section::Preamble => {
                    return Err(Error::Parse {
                        line,
                        message: "record before the `#nodes` header".into(),
                    })
                }
                Section::Nodes => self.add_node(line, a, b)?,
                Section::Edges => self.add_edge(line, a, b),
            }
        }
        Ok(())
    }

    pub fn build(self) -> Result<Graph> {
        let GraphBuilder { ids, labels, index, pending } = self;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
        let mut seen = std::collections::HashSet::new();
        for (line, src, dst) in pending {
            let s = *index
                .get(&src)
                .ok_or_else(|| Error::UndeclaredNode { line, node: src.to_string() })?;
            let d = *index
                .get(&dst)
                .ok_or_else(|| Error::UndeclaredNode { line, node: dst.to_string() })?;
            if seen.insert((s, d)) {
                adj[s].push(d);
            }
        }
        let edge_count = seen.len();
        Ok(Graph { ids, labels, index, adj, edge_count })
    }
}

/// Parses a graph document.
pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut builder = GraphBuilder::default();
    builder.add_document(text)?;
    builder.build()
}
