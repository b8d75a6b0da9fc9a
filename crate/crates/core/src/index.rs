use rayon::prelude::*;

use crate::error::BuildError;
use crate::graph::{prune_degree_one, Graph, NodeId, NodeRole, PrunedView};
use crate::pspt::{compute_beta, Pspt, PsptBuilder, TieOrder};

/// All PSPT blocks of a graph together with the redirect table and id map.
///
/// A complete index holds one block per surviving node. A partial index
/// (see [`Index::build_for_roots`]) holds blocks for a chosen subset only; it
/// answers queries whose redirected endpoints are covered and cannot be
/// serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    alpha: f64,
    beta: usize,
    pruned: PrunedView,
    original_ids: Vec<u64>,
    blocks: Vec<Option<Pspt>>,
}

impl Index {
    /// Builds every surviving node's block with consistent tie-breaking.
    /// Blocks are built in parallel on the current rayon pool.
    pub fn build(graph: &Graph, alpha: f64) -> Result<Index, BuildError> {
        let pruned = prune_degree_one(graph);
        let roots: Vec<NodeId> = pruned.survivors().collect();
        Self::assemble(graph, pruned, alpha, &roots, &TieOrder::Consistent)
    }

    /// Builds blocks only for `roots`, which must all survive pruning.
    pub fn build_for_roots(
        graph: &Graph,
        alpha: f64,
        roots: &[NodeId],
        tie: &TieOrder,
    ) -> Result<Index, BuildError> {
        let pruned = prune_degree_one(graph);
        let mut roots = roots.to_vec();
        roots.sort_unstable();
        roots.dedup();
        if let Some(&bad) = roots.iter().find(|&&r| !pruned.survives(r)) {
            return Err(BuildError::NotSurviving(bad));
        }
        Self::assemble(graph, pruned, alpha, &roots, tie)
    }

    fn assemble(
        graph: &Graph,
        pruned: PrunedView,
        alpha: f64,
        roots: &[NodeId],
        tie: &TieOrder,
    ) -> Result<Index, BuildError> {
        let beta = compute_beta(alpha, graph.node_count())?;
        let built: Vec<Pspt> = roots
            .par_iter()
            .map_init(
                || PsptBuilder::new(graph, &pruned, tie),
                |builder, &root| builder.build(root, beta),
            )
            .collect::<Result<_, _>>()?;
        let mut blocks = vec![None; graph.node_count()];
        for block in built {
            let root = block.root() as usize;
            blocks[root] = Some(block);
        }
        Ok(Index {
            alpha,
            beta,
            pruned,
            original_ids: graph.original_ids().to_vec(),
            blocks,
        })
    }

    /// Reassembles an index from decoded parts, checking every invariant a
    /// complete index must satisfy.
    pub fn from_parts(
        alpha: f64,
        beta: usize,
        roles: Vec<NodeRole>,
        original_ids: Vec<u64>,
        blocks: Vec<Pspt>,
    ) -> Result<Index, String> {
        let n = original_ids.len();
        if roles.len() != n {
            return Err("redirect table length differs from id map".into());
        }
        if original_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err("id map is not strictly ascending".into());
        }
        let expected_beta = compute_beta(alpha, n).map_err(|e| e.to_string())?;
        if beta != expected_beta {
            return Err(format!("beta {beta} does not match alpha (expected {expected_beta})"));
        }
        for (u, role) in roles.iter().enumerate() {
            if let NodeRole::Leaf { anchor, weight } = *role {
                if anchor as usize >= n || anchor as usize == u {
                    return Err(format!("node {u}: redirect anchor {anchor} invalid"));
                }
                if !(weight.is_finite() && weight > 0.0) {
                    return Err(format!("node {u}: redirect weight {weight} invalid"));
                }
            }
        }
        let pruned = PrunedView::from_roles(roles);
        let mut slots: Vec<Option<Pspt>> = vec![None; n];
        for block in blocks {
            let root = block.root();
            if root as usize >= n || !pruned.survives(root) {
                return Err(format!("block root {root} is not a surviving node"));
            }
            if slots[root as usize].is_some() {
                return Err(format!("duplicate block for node {root}"));
            }
            if block.len() > beta {
                return Err(format!("block {root} has {} entries, beta is {beta}", block.len()));
            }
            block.check()?;
            if let Some(e) = block
                .entries()
                .find(|e| e.member as usize >= n || !pruned.survives(e.member))
            {
                return Err(format!("block {root}: member {} is not a surviving node", e.member));
            }
            slots[root as usize] = Some(block);
        }
        if let Some(missing) = pruned.survivors().find(|&u| slots[u as usize].is_none()) {
            return Err(format!("surviving node {missing} has no block"));
        }
        Ok(Index {
            alpha,
            beta,
            pruned,
            original_ids,
            blocks: slots,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn node_count(&self) -> usize {
        self.original_ids.len()
    }

    pub fn pruned(&self) -> &PrunedView {
        &self.pruned
    }

    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }

    pub fn block(&self, u: NodeId) -> Option<&Pspt> {
        self.blocks.get(u as usize).and_then(Option::as_ref)
    }

    /// Blocks in ascending root order.
    pub fn blocks(&self) -> impl Iterator<Item = &Pspt> + '_ {
        self.blocks.iter().flatten()
    }

    pub fn block_count(&self) -> usize {
        self.blocks().count()
    }

    pub fn total_entries(&self) -> usize {
        self.blocks().map(Pspt::len).sum()
    }

    /// True when every surviving node has a block.
    pub fn is_complete(&self) -> bool {
        self.pruned
            .survivors()
            .all(|u| self.blocks[u as usize].is_some())
    }
}

/// Builds the complete index of `graph` for PSPT size `ceil(alpha * sqrt(n))`.
pub fn build_index(graph: &Graph, alpha: f64) -> Result<Index, BuildError> {
    Index::build(graph, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{sixteen_node, random_graph};
    use crate::graph::load_edge_list;

    #[test]
    fn path_prunes_to_center() {
        let g = load_edge_list("1 2\n2 3\n".as_bytes()).unwrap();
        let idx = build_index(&g, 1.0).unwrap();
        assert_eq!(idx.block_count(), 1);
        let b = idx.block(1).unwrap();
        assert_eq!(b.members().collect::<Vec<_>>(), vec![1]);
        assert_eq!(idx.pruned().redirect(0), Some((1, 1.0)));
        assert_eq!(idx.pruned().redirect(2), Some((1, 1.0)));
    }

    #[test]
    fn beta_for_hundred_nodes() {
        let g = random_graph(100, 300, 1, 1);
        let idx = build_index(&g, 4.0).unwrap();
        assert_eq!(idx.beta(), 40);
        assert!(idx.is_complete());
    }

    #[test]
    fn sixteen_node_block_count() {
        let g = sixteen_node();
        let idx = build_index(&g, 1.25).unwrap();
        assert_eq!(idx.beta(), 5);
        assert_eq!(idx.block_count(), 8);
        let pruned: Vec<u64> = (0..16)
            .filter(|&u| !idx.pruned().survives(u))
            .map(|u| g.original_id(u))
            .collect();
        assert_eq!(pruned, vec![3, 7, 8, 11, 12, 13, 14, 16]);
        // the fifteen-node vicinity examples: 15 stops at distance 1, 10 reaches 2
        let max_dist = |id: u64| {
            idx.block(g.dense_id(id).unwrap())
                .unwrap()
                .entries()
                .map(|e| e.distance)
                .fold(0.0, f64::max)
        };
        assert_eq!(max_dist(15), 1.0);
        assert_eq!(max_dist(10), 2.0);
    }

    #[test]
    fn partial_index_contains_requested_roots_only() {
        let g = random_graph(60, 150, 3, 4);
        let full = build_index(&g, 2.0).unwrap();
        let roots: Vec<NodeId> = full.pruned().survivors().take(5).collect();
        let part = Index::build_for_roots(&g, 2.0, &roots, &TieOrder::Consistent).unwrap();
        assert_eq!(part.block_count(), 5);
        assert!(!part.is_complete());
        for &r in &roots {
            assert_eq!(part.block(r), full.block(r));
        }
        let leaf = (0..60).find(|&u| !full.pruned().survives(u));
        if let Some(leaf) = leaf {
            assert!(Index::build_for_roots(&g, 2.0, &[leaf], &TieOrder::Consistent).is_err());
        }
    }

    #[test]
    fn invalid_alpha() {
        let g = sixteen_node();
        assert_eq!(build_index(&g, 0.0), Err(BuildError::InvalidAlpha(0.0)));
        assert!(build_index(&g, -1.0).is_err());
    }
}
