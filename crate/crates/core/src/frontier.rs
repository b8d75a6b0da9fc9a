use std::cmp::Ordering;

use crate::graph::NodeId;

/// Min-heap entry ordered by `(dist, tie)`, smallest first under `BinaryHeap`.
///
/// `tie` is the node id itself for consistent tie-breaking, or a permuted key
/// when an alternative order is requested. Distances are never NaN.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frontier {
    pub dist: f64,
    pub tie: u32,
    pub node: NodeId,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.tie.cmp(&self.tie))
            .then_with(|| other.node.cmp(&self.node))
    }
}
