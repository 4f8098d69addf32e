//! Distributed evaluation of reachability, bounded reachability and regular
//! reachability queries over fragmented graphs by partial evaluation.
//!
//! Every site computes a partial answer over its own fragment, treating the
//! rest of the graph as unknown boolean or numeric variables attached to its
//! virtual nodes. A coordinator collects those partial answers and solves the
//! resulting equation system. Each site is visited once and the traffic
//! depends only on the fragment boundaries, not on the graph size.

pub mod automaton;
pub mod dist;
pub mod error;
pub mod fixture;
pub mod formula;
pub mod fragment;
pub mod graph;
pub mod oracle;
pub mod reach;
pub mod regular;
pub mod runtime;
pub mod wire;
pub mod workload;

pub use error::{Error, Result};
pub use graph::{parse_graph, Graph, Label, NodeId};
pub use fragment::{build_fragmentation, random_partition, Fragment, Fragmentation};
