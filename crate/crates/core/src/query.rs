//! Distance, path and multi-path queries over an [`Index`].
//!
//! A query first routes each degree-1 endpoint to its anchor, then merges the
//! two endpoint blocks and picks the common member with the smallest summed
//! distance. Paths are rebuilt from first-hop chains inside the blocks. When
//! the blocks share no member the engine falls back to an exact
//! bidirectional search on the full graph.

use std::collections::HashSet;

use crate::error::QueryError;
use crate::graph::{Graph, NodeId, NodeRole};
use crate::index::Index;
use crate::oracle::bidirectional_search;
use crate::pspt::{best_meeting, intersect, Pspt, NO_FIRST_HOP};

/// A walk from `nodes[0]` to the last node, over original ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<u64>,
    /// Sum of the traversed edge weights.
    pub length: f64,
}

/// How a query was answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Resolution {
    /// Source equals target.
    Trivial,
    /// Answered from the two PSPT blocks.
    Intersection,
    /// Answered by an exact search on the graph.
    Fallback,
    /// No path exists.
    Unreachable,
}

impl Resolution {
    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::Trivial => "trivial",
            Resolution::Intersection => "intersection",
            Resolution::Fallback => "fallback",
            Resolution::Unreachable => "unreachable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    /// `None` when unreachable.
    pub distance: Option<f64>,
    pub path: Option<Path>,
    pub resolution: Resolution,
    /// Original id of the meeting node for [`Resolution::Intersection`].
    pub meeting_node: Option<u64>,
}

impl QueryOutcome {
    fn unreachable() -> Self {
        QueryOutcome {
            distance: None,
            path: None,
            resolution: Resolution::Unreachable,
            meeting_node: None,
        }
    }
}

/// A query endpoint after degree-1 redirection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    /// A surviving node, reached from the original endpoint through an
    /// optional pruned leaf of the given weight.
    Routed {
        node: NodeId,
        leaf: Option<(NodeId, f64)>,
    },
    /// Degree-1 node whose only neighbor also has degree 1.
    PairComponent { node: NodeId, partner: NodeId, weight: f64 },
    Isolated(NodeId),
}

/// Redirects a dense endpoint through the pruning table.
pub fn resolve_endpoint(index: &Index, u: NodeId) -> Endpoint {
    let pruned = index.pruned();
    match pruned.role(u) {
        NodeRole::Survivor => Endpoint::Routed { node: u, leaf: None },
        NodeRole::Isolated => Endpoint::Isolated(u),
        NodeRole::Leaf { anchor, weight } => {
            if pruned.survives(anchor) {
                Endpoint::Routed {
                    node: anchor,
                    leaf: Some((u, weight)),
                }
            } else {
                Endpoint::PairComponent {
                    node: u,
                    partner: anchor,
                    weight,
                }
            }
        }
    }
}

/// Members from the block root to `w`, following first hops.
pub fn reconstruct_subpath(block: &Pspt, w: NodeId) -> Result<Vec<NodeId>, QueryError> {
    let pos = block.position(w).ok_or(QueryError::NotAMember(w))?;
    Ok(chain_from(block, pos))
}

pub(crate) fn chain_from(block: &Pspt, pos: usize) -> Vec<NodeId> {
    let mut chain = Vec::new();
    push_to_root(block, pos, &mut chain);
    chain.reverse();
    chain
}

// Appends members from `pos` up to the root, nearest first.
fn push_to_root(block: &Pspt, mut pos: usize, out: &mut Vec<NodeId>) {
    let (members, hops) = (block.member_ids(), block.first_hops());
    // bounded by the entry count even on a corrupted block
    for _ in 0..block.len() {
        out.push(members[pos]);
        if hops[pos] == NO_FIRST_HOP {
            break;
        }
        pos = hops[pos] as usize;
    }
}

/// Meeting point of a query's routed endpoints, before any fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Routed {
    pub source: NodeId,
    pub target: NodeId,
    pub source_leaf: Option<(NodeId, f64)>,
    pub target_leaf: Option<(NodeId, f64)>,
}

impl Routed {
    /// Combined weight of the redirect edges.
    pub fn leaf_weight(&self) -> f64 {
        self.source_leaf.map_or(0.0, |l| l.1) + self.target_leaf.map_or(0.0, |l| l.1)
    }
}

enum Plan {
    Trivial,
    Unreachable,
    Direct { weight: f64 },
    Routed(Routed),
}

/// Read-only query front end over an index and the graph it was built from.
#[derive(Clone, Copy)]
pub struct QueryEngine<'a> {
    index: &'a Index,
    graph: &'a Graph,
}

impl<'a> QueryEngine<'a> {
    pub fn new(index: &'a Index, graph: &'a Graph) -> Result<Self, QueryError> {
        if index.original_ids() != graph.original_ids() {
            return Err(QueryError::Mismatch(
                "node id maps differ; was the index built from this graph?".into(),
            ));
        }
        Ok(QueryEngine { index, graph })
    }

    pub fn index(&self) -> &'a Index {
        self.index
    }

    pub fn graph(&self) -> &'a Graph {
        self.graph
    }

    pub fn dense(&self, original: u64) -> Result<NodeId, QueryError> {
        self.graph
            .dense_id(original)
            .ok_or(QueryError::UnknownId(original))
    }

    fn block(&self, u: NodeId) -> Result<&'a Pspt, QueryError> {
        self.index
            .block(u)
            .ok_or_else(|| QueryError::MissingBlock(self.graph.original_id(u)))
    }

    fn plan(&self, s: NodeId, t: NodeId) -> Plan {
        if s == t {
            return Plan::Trivial;
        }
        let (src, dst) = (resolve_endpoint(self.index, s), resolve_endpoint(self.index, t));
        match (src, dst) {
            (Endpoint::Isolated(_), _) | (_, Endpoint::Isolated(_)) => Plan::Unreachable,
            (Endpoint::PairComponent { partner, weight, .. }, _) => {
                if partner == t {
                    Plan::Direct { weight }
                } else {
                    Plan::Unreachable
                }
            }
            (_, Endpoint::PairComponent { .. }) => Plan::Unreachable,
            (
                Endpoint::Routed { node: a, leaf: la },
                Endpoint::Routed { node: b, leaf: lb },
            ) => Plan::Routed(Routed {
                source: a,
                target: b,
                source_leaf: la,
                target_leaf: lb,
            }),
        }
    }

    /// Routes both endpoints and merges their blocks. Returns the routing and
    /// the best meeting candidate, without running any fallback search.
    pub fn meet(&self, s: NodeId, t: NodeId) -> Result<Option<(Routed, Option<crate::pspt::Meeting>)>, QueryError> {
        match self.plan(s, t) {
            Plan::Routed(r) => {
                let (a, b) = (self.block(r.source)?, self.block(r.target)?);
                Ok(Some((r, best_meeting(a, b))))
            }
            _ => Ok(None),
        }
    }

    /// Shortest distance (and optionally path) between two original ids.
    pub fn query(&self, s: u64, t: u64, want_path: bool) -> Result<QueryOutcome, QueryError> {
        let (s, t) = (self.dense(s)?, self.dense(t)?);
        self.query_dense(s, t, want_path)
    }

    pub fn query_dense(&self, s: NodeId, t: NodeId, want_path: bool) -> Result<QueryOutcome, QueryError> {
        let orig = |u: NodeId| self.graph.original_id(u);
        match self.plan(s, t) {
            Plan::Trivial => Ok(QueryOutcome {
                distance: Some(0.0),
                path: want_path.then(|| Path {
                    nodes: vec![orig(s)],
                    length: 0.0,
                }),
                resolution: Resolution::Trivial,
                meeting_node: None,
            }),
            Plan::Unreachable => Ok(QueryOutcome::unreachable()),
            Plan::Direct { weight } => Ok(QueryOutcome {
                distance: Some(weight),
                path: want_path.then(|| Path {
                    nodes: vec![orig(s), orig(t)],
                    length: weight,
                }),
                resolution: Resolution::Fallback,
                meeting_node: None,
            }),
            Plan::Routed(r) => {
                let (a, b) = (self.block(r.source)?, self.block(r.target)?);
                match best_meeting(a, b) {
                    Some(m) => {
                        let distance = r.source_leaf.map_or(0.0, |l| l.1)
                            + m.distance
                            + r.target_leaf.map_or(0.0, |l| l.1);
                        let path = want_path.then(|| {
                            let nodes = self.splice(&r, a, m.a_pos, b, m.b_pos);
                            self.to_path(&nodes)
                        });
                        Ok(QueryOutcome {
                            distance: Some(distance),
                            path,
                            resolution: Resolution::Intersection,
                            meeting_node: Some(orig(m.member)),
                        })
                    }
                    None => Ok(self.fallback(s, t, want_path)),
                }
            }
        }
    }

    fn fallback(&self, s: NodeId, t: NodeId, want_path: bool) -> QueryOutcome {
        match bidirectional_search(self.graph, s, t) {
            None => QueryOutcome::unreachable(),
            Some(found) => QueryOutcome {
                distance: Some(found.distance),
                path: want_path.then(|| self.to_path(&found.path)),
                resolution: Resolution::Fallback,
                meeting_node: None,
            },
        }
    }

    // leaf? + (source root .. meeting) + (meeting .. target root) + leaf?
    fn splice(&self, r: &Routed, a: &Pspt, a_pos: usize, b: &Pspt, b_pos: usize) -> Vec<NodeId> {
        let mut nodes = Vec::with_capacity(16);
        if let Some((leaf, _)) = r.source_leaf {
            nodes.push(leaf);
        }
        let start = nodes.len();
        push_to_root(a, a_pos, &mut nodes);
        nodes[start..].reverse();
        nodes.pop();
        push_to_root(b, b_pos, &mut nodes);
        if let Some((leaf, _)) = r.target_leaf {
            nodes.push(leaf);
        }
        nodes
    }

    fn to_path(&self, nodes: &[NodeId]) -> Path {
        let length = nodes
            .windows(2)
            .map(|e| self.graph.edge_weight(e[0], e[1]).unwrap_or(f64::NAN))
            .sum();
        Path {
            nodes: nodes.iter().map(|&u| self.graph.original_id(u)).collect(),
            length,
        }
    }

    /// Multiple simple paths through distinct meeting nodes, shortest first.
    ///
    /// Candidates are visited in ascending `(distance, id)` order; a candidate
    /// already lying on an emitted path is skipped, as is any candidate whose
    /// two tree paths overlap.
    pub fn query_multi(&self, s: u64, t: u64, max_paths: Option<usize>) -> Result<Vec<Path>, QueryError> {
        let (s, t) = (self.dense(s)?, self.dense(t)?);
        self.query_multi_dense(s, t, max_paths)
    }

    pub fn query_multi_dense(
        &self,
        s: NodeId,
        t: NodeId,
        max_paths: Option<usize>,
    ) -> Result<Vec<Path>, QueryError> {
        let limit = max_paths.unwrap_or(usize::MAX);
        if limit == 0 {
            return Ok(Vec::new());
        }
        let r = match self.plan(s, t) {
            Plan::Trivial => return Ok(vec![self.to_path(&[s])]),
            Plan::Unreachable => return Ok(Vec::new()),
            Plan::Direct { .. } => return Ok(vec![self.to_path(&[s, t])]),
            Plan::Routed(r) => r,
        };
        let (a, b) = (self.block(r.source)?, self.block(r.target)?);
        let mut candidates: Vec<(f64, NodeId)> = intersect(a, b)
            .into_iter()
            .map(|c| (c.a_distance + c.b_distance, c.member))
            .collect();
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

        let mut visited: HashSet<NodeId> = HashSet::new();
        let mut seen_on_path: HashSet<NodeId> = HashSet::new();
        let mut paths = Vec::new();
        for (_, w) in candidates {
            if visited.contains(&w) {
                continue;
            }
            let a_pos = a.position(w).expect("candidate in block");
            let b_pos = b.position(w).expect("candidate in block");
            let nodes = self.splice(&r, a, a_pos, b, b_pos);
            seen_on_path.clear();
            if !nodes.iter().all(|&u| seen_on_path.insert(u)) {
                continue;
            }
            visited.extend(nodes.iter().copied());
            paths.push(self.to_path(&nodes));
            if paths.len() >= limit {
                break;
            }
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{sixteen_node, random_graph};
    use crate::graph::load_edge_list;
    use crate::index::build_index;
    use crate::oracle::dijkstra;

    fn engine_for(text: &str, alpha: f64) -> (Graph, Index) {
        let g = load_edge_list(text.as_bytes()).unwrap();
        let idx = build_index(&g, alpha).unwrap();
        (g, idx)
    }

    #[test]
    fn identity_query() {
        let g = sixteen_node();
        let idx = build_index(&g, 1.25).unwrap();
        let e = QueryEngine::new(&idx, &g).unwrap();
        let out = e.query(7, 7, true).unwrap();
        assert_eq!(out.distance, Some(0.0));
        assert_eq!(out.path.unwrap().nodes, vec![7]);
        assert_eq!(out.resolution, Resolution::Trivial);
    }

    #[test]
    fn sixteen_node_leaf_redirect() {
        let g = sixteen_node();
        let idx = build_index(&g, 1.25).unwrap();
        let e = QueryEngine::new(&idx, &g).unwrap();
        let out = e.query(3, 1, true).unwrap();
        let truth = dijkstra(&g, g.dense_id(3).unwrap(), None);
        assert_eq!(out.distance, truth.distance(g.dense_id(1).unwrap()));
        assert_eq!(out.distance, Some(2.0));
        assert_eq!(out.path.as_ref().unwrap().nodes, vec![3, 2, 1]);
        assert_eq!(out.resolution, Resolution::Intersection);
        assert!(out.path.unwrap().nodes.contains(&out.meeting_node.unwrap()));
    }

    #[test]
    fn disconnected_components_are_unreachable() {
        let (g, idx) = engine_for("1 2\n2 3\n3 1\n4 5\n5 6\n6 4\n", 0.5);
        let e = QueryEngine::new(&idx, &g).unwrap();
        let out = e.query(1, 5, true).unwrap();
        assert_eq!(out.resolution, Resolution::Unreachable);
        assert_eq!(out.distance, None);
        assert!(out.path.is_none());
    }

    #[test]
    fn pair_component_and_isolated() {
        let (g, idx) = engine_for("1 2 3\n4 5\n5 6\n6 4\n9 9\n", 1.0);
        let e = QueryEngine::new(&idx, &g).unwrap();
        let direct = e.query(1, 2, true).unwrap();
        assert_eq!(direct.distance, Some(3.0));
        assert_eq!(direct.path.unwrap().nodes, vec![1, 2]);
        assert_eq!(e.query(2, 1, false).unwrap().distance, Some(3.0));
        assert_eq!(e.query(1, 4, false).unwrap().resolution, Resolution::Unreachable);
        assert_eq!(e.query(4, 1, false).unwrap().resolution, Resolution::Unreachable);
        assert_eq!(e.query(9, 4, false).unwrap().resolution, Resolution::Unreachable);
        assert_eq!(e.query(9, 9, false).unwrap().resolution, Resolution::Trivial);
        assert_eq!(e.query(1, 77, false), Err(QueryError::UnknownId(77)));
    }

    #[test]
    fn leaves_sharing_an_anchor() {
        // star: leaves meet at the center
        let (g, idx) = engine_for("0 1 2\n0 2 5\n0 3 1\n", 1.0);
        let e = QueryEngine::new(&idx, &g).unwrap();
        let out = e.query(1, 2, true).unwrap();
        assert_eq!(out.distance, Some(7.0));
        assert_eq!(out.path.unwrap().nodes, vec![1, 0, 2]);
        assert_eq!(out.meeting_node, Some(0));
        let to_center = e.query(3, 0, true).unwrap();
        assert_eq!(to_center.distance, Some(1.0));
        assert_eq!(to_center.path.unwrap().nodes, vec![3, 0]);
    }

    #[test]
    fn fallback_when_blocks_are_disjoint() {
        // cycle of 12, beta = 1 -> every block is its root only
        let text: String = (0..12).map(|i| format!("{} {}\n", i, (i + 1) % 12)).collect();
        let (g, idx) = engine_for(&text, 0.2);
        assert_eq!(idx.beta(), 1);
        let e = QueryEngine::new(&idx, &g).unwrap();
        let out = e.query(0, 5, true).unwrap();
        assert_eq!(out.resolution, Resolution::Fallback);
        assert_eq!(out.distance, Some(5.0));
        let p = out.path.unwrap();
        assert_eq!((p.nodes[0], *p.nodes.last().unwrap(), p.length), (0, 5, 5.0));
    }

    #[test]
    fn subpath_weights_match_stored_distances() {
        let g = random_graph(50, 110, 6, 21);
        let idx = build_index(&g, 2.0).unwrap();
        for block in idx.blocks() {
            assert_eq!(reconstruct_subpath(block, block.root()).unwrap(), vec![block.root()]);
            for e in block.entries() {
                let chain = reconstruct_subpath(block, e.member).unwrap();
                assert!(chain.len() <= block.len());
                assert_eq!(chain[0], block.root());
                assert_eq!(*chain.last().unwrap(), e.member);
                let w: f64 = chain.windows(2).map(|h| g.edge_weight(h[0], h[1]).unwrap()).sum();
                assert_eq!(w, e.distance);
            }
        }
        let block = idx.blocks().next().unwrap();
        let outsider = (0..50).find(|&u| !block.contains(u)).unwrap();
        assert_eq!(reconstruct_subpath(block, outsider), Err(QueryError::NotAMember(outsider)));
    }

    #[test]
    fn triangle_plus_square_multi() {
        // a=1 b=2 c=3 d=4 e=5
        let (g, idx) = engine_for("1 2\n2 3\n1 4\n4 5\n5 3\n", 4.0);
        let e = QueryEngine::new(&idx, &g).unwrap();
        let paths = e.query_multi(1, 3, None).unwrap();
        let got: Vec<(Vec<u64>, f64)> = paths.into_iter().map(|p| (p.nodes, p.length)).collect();
        assert_eq!(got, vec![(vec![1, 2, 3], 2.0), (vec![1, 4, 5, 3], 3.0)]);
        let single = e.query(1, 3, true).unwrap().path.unwrap();
        assert_eq!(e.query_multi(1, 3, Some(1)).unwrap(), vec![single]);
    }

    #[test]
    fn multi_on_disjoint_blocks_is_empty() {
        let text: String = (0..12).map(|i| format!("{} {}\n", i, (i + 1) % 12)).collect();
        let (g, idx) = engine_for(&text, 0.2);
        let e = QueryEngine::new(&idx, &g).unwrap();
        assert!(e.query_multi(0, 6, None).unwrap().is_empty());
    }

    #[test]
    fn mismatched_graph_is_rejected() {
        let g = sixteen_node();
        let idx = build_index(&g, 1.25).unwrap();
        let other = random_graph(16, 30, 1, 0);
        assert!(matches!(QueryEngine::new(&idx, &other), Err(QueryError::Mismatch(_))));
    }

    #[test]
    fn missing_block_in_partial_index() {
        use crate::pspt::TieOrder;
        let g = sixteen_node();
        let roots = [g.dense_id(1).unwrap(), g.dense_id(2).unwrap()];
        let idx = Index::build_for_roots(&g, 1.25, &roots, &TieOrder::Consistent).unwrap();
        let e = QueryEngine::new(&idx, &g).unwrap();
        assert!(e.query(1, 3, false).is_ok());
        assert_eq!(e.query(1, 10, false), Err(QueryError::MissingBlock(10)));
    }
}
