//! Small example graphs used by tests, docs and the CLI smoke tests.

use crate::generate::{generate, Model, Weights};
use crate::graph::{load_edge_list, Graph};

/// Connected-ish random graph with integer weights in `1..=max_w`
/// (`max_w == 1` gives unit weights).
pub fn random_graph(n: usize, m: usize, max_w: u32, seed: u64) -> Graph {
    let weights = if max_w <= 1 {
        Weights::Unit
    } else {
        Weights::UniformInt { max: max_w }
    };
    generate(Model::UniformEdges { n, m }, weights, seed).unwrap()
}

/// 16-node example network: leaves {3, 7, 8, 11, 12, 13, 14, 16}; inside
/// the pruned graph node 1 has unit neighbors {2, 4, 5, 6, 9}.
pub const SIXTEEN_NODE: &str = "\
1 2\n1 4\n1 5\n1 6\n1 9\n\
2 3\n4 7\n5 8\n6 11\n9 12\n10 13\n15 14\n15 16\n\
9 10\n10 15\n15 4\n15 5\n15 6\n";

pub fn sixteen_node() -> Graph {
    load_edge_list(SIXTEEN_NODE.as_bytes()).unwrap()
}
