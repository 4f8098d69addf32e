//! The twelve-node recommendation network shipped with the crate, together
//! with its three-site partition. Used as golden test data.

use crate::fragment::{build_fragmentation, parse_partition, Fragmentation};
use crate::graph::{parse_graph, Graph};

pub const GRAPH: &str = include_str!("../data/social.graph");
pub const PARTITION: &str = include_str!("../data/social.part");

pub fn graph() -> Graph {
    parse_graph(GRAPH).expect("bundled graph parses")
}

pub fn fragmentation() -> Fragmentation {
    let g = graph();
    let assignment = parse_partition(PARTITION).expect("bundled partition parses");
    build_fragmentation(&g, &assignment).expect("bundled partition is valid")
}
