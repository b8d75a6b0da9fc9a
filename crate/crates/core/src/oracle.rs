//! Exact shortest-path algorithms.
//!
//! These serve two roles: the query-time fallback when two PSPTs are disjoint,
//! and the ground truth every other module is tested against.

use std::collections::BinaryHeap;

use crate::error::OracleError;
use crate::frontier::Frontier;
use crate::graph::{Graph, NodeId, PrunedView};

/// Default node limit for [`all_pairs_paths`].
pub const DEFAULT_ALL_PAIRS_LIMIT: usize = 500;

/// Single-source distances and shortest-path tree parents.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub source: NodeId,
    dist: Vec<f64>,
    parent: Vec<Option<NodeId>>,
}

impl DistanceMap {
    /// Distance to `u`, `None` if unreachable.
    pub fn distance(&self, u: NodeId) -> Option<f64> {
        let d = self.dist[u as usize];
        d.is_finite().then_some(d)
    }

    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        self.parent[u as usize]
    }

    /// Raw distances, `f64::INFINITY` for unreachable nodes.
    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    /// Tree path from the source to `u`.
    pub fn path_to(&self, u: NodeId) -> Option<Vec<NodeId>> {
        self.distance(u)?;
        let mut path = vec![u];
        let mut cur = u;
        while let Some(p) = self.parent[cur as usize] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

/// Dijkstra from `source`, frontier ordered by `(distance, id)`.
///
/// With `restrict` set, only nodes surviving the pruning are visited (the
/// source is always visited).
pub fn dijkstra(graph: &Graph, source: NodeId, restrict: Option<&PrunedView>) -> DistanceMap {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source as usize] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        tie: source,
        node: source,
    });
    while let Some(Frontier { dist: d, node: u, .. }) = heap.pop() {
        if settled[u as usize] {
            continue;
        }
        settled[u as usize] = true;
        for (v, w) in graph.neighbors(u) {
            if restrict.is_some_and(|p| !p.survives(v)) {
                continue;
            }
            let nd = d + w;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                parent[v as usize] = Some(u);
                heap.push(Frontier {
                    dist: nd,
                    tie: v,
                    node: v,
                });
            }
        }
    }
    DistanceMap {
        source,
        dist,
        parent,
    }
}

/// Result of a point-to-point search: distance and one shortest path.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub distance: f64,
    pub path: Vec<NodeId>,
}

/// Bidirectional Dijkstra with reusable scratch space.
///
/// Scratch arrays are sized to the graph once and reset through a touched
/// list, so repeated queries cost only what they explore.
pub struct BidirectionalSearch {
    dist: [Vec<f64>; 2],
    parent: [Vec<NodeId>; 2],
    settled: [Vec<bool>; 2],
    touched: Vec<NodeId>,
    heaps: [BinaryHeap<Frontier>; 2],
}

const NO_PARENT: NodeId = NodeId::MAX;

impl BidirectionalSearch {
    pub fn new(node_count: usize) -> Self {
        BidirectionalSearch {
            dist: [vec![f64::INFINITY; node_count], vec![f64::INFINITY; node_count]],
            parent: [vec![NO_PARENT; node_count], vec![NO_PARENT; node_count]],
            settled: [vec![false; node_count], vec![false; node_count]],
            touched: Vec::new(),
            heaps: [BinaryHeap::new(), BinaryHeap::new()],
        }
    }

    fn reset(&mut self) {
        for &u in &self.touched {
            let u = u as usize;
            for side in 0..2 {
                self.dist[side][u] = f64::INFINITY;
                self.parent[side][u] = NO_PARENT;
                self.settled[side][u] = false;
            }
        }
        self.touched.clear();
        self.heaps[0].clear();
        self.heaps[1].clear();
    }

    fn top(&mut self, side: usize) -> Option<f64> {
        while let Some(top) = self.heaps[side].peek() {
            if self.settled[side][top.node as usize] {
                self.heaps[side].pop();
            } else {
                return Some(top.dist);
            }
        }
        None
    }

    /// Exact `s`-`t` distance and path, `None` when disconnected.
    pub fn run(&mut self, graph: &Graph, s: NodeId, t: NodeId) -> Option<SearchResult> {
        assert!(self.dist[0].len() >= graph.node_count(), "scratch too small");
        if s == t {
            return Some(SearchResult {
                distance: 0.0,
                path: vec![s],
            });
        }
        self.reset();
        for (side, root) in [(0, s), (1, t)] {
            self.dist[side][root as usize] = 0.0;
            self.touched.push(root);
            self.heaps[side].push(Frontier {
                dist: 0.0,
                tie: root,
                node: root,
            });
        }

        let mut best = f64::INFINITY;
        let mut meet = None;
        while let (Some(top_f), Some(top_b)) = (self.top(0), self.top(1)) {
            // weighted stopping rule: no unexplored meeting can beat `best`
            if top_f + top_b >= best {
                break;
            }
            let side = if self.heaps[0].len() <= self.heaps[1].len() { 0 } else { 1 };
            let other = 1 - side;
            let Frontier { dist: d, node: u, .. } = self.heaps[side].pop().unwrap();
            self.settled[side][u as usize] = true;
            for (v, w) in graph.neighbors(u) {
                let vi = v as usize;
                let nd = d + w;
                if nd < self.dist[side][vi] {
                    if self.dist[0][vi].is_infinite() && self.dist[1][vi].is_infinite() {
                        self.touched.push(v);
                    }
                    self.dist[side][vi] = nd;
                    self.parent[side][vi] = u;
                    self.heaps[side].push(Frontier {
                        dist: nd,
                        tie: v,
                        node: v,
                    });
                    let through = nd + self.dist[other][vi];
                    if through < best {
                        best = through;
                        meet = Some(v);
                    }
                }
            }
        }

        let meet = meet?;
        let mut path = Vec::new();
        let mut cur = meet;
        while cur != NO_PARENT {
            path.push(cur);
            cur = self.parent[0][cur as usize];
        }
        path.reverse();
        let mut cur = self.parent[1][meet as usize];
        while cur != NO_PARENT {
            path.push(cur);
            cur = self.parent[1][cur as usize];
        }
        Some(SearchResult {
            distance: best,
            path,
        })
    }
}

/// One-shot bidirectional search on `graph`.
pub fn bidirectional_search(graph: &Graph, s: NodeId, t: NodeId) -> Option<SearchResult> {
    BidirectionalSearch::new(graph.node_count()).run(graph, s, t)
}

/// Dense all-pairs distance table.
#[derive(Debug, Clone)]
pub struct AllPairs {
    n: usize,
    dist: Vec<f64>,
}

impl AllPairs {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn distance(&self, u: NodeId, v: NodeId) -> Option<f64> {
        let d = self.raw(u, v);
        d.is_finite().then_some(d)
    }

    fn raw(&self, u: NodeId, v: NodeId) -> f64 {
        self.dist[u as usize * self.n + v as usize]
    }

    /// Nodes lying on at least one shortest `s`-`t` path, ascending. Empty if
    /// the pair is disconnected.
    pub fn on_shortest_path(&self, s: NodeId, t: NodeId) -> Vec<NodeId> {
        let Some(d) = self.distance(s, t) else {
            return Vec::new();
        };
        (0..self.n as NodeId)
            .filter(|&w| self.raw(s, w) + self.raw(t, w) == d)
            .collect()
    }
}

/// Exact all-pairs distances by repeated Dijkstra, for graphs of at most
/// `max_n` nodes.
pub fn all_pairs_paths(graph: &Graph, max_n: usize) -> Result<AllPairs, OracleError> {
    let n = graph.node_count();
    if n > max_n {
        return Err(OracleError::TooLarge { n, max: max_n });
    }
    let mut dist = Vec::with_capacity(n * n);
    for s in 0..n as NodeId {
        dist.extend_from_slice(dijkstra(graph, s, None).distances());
    }
    Ok(AllPairs { n, dist })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_edge_list, prune_degree_one};
    use crate::fixtures::random_graph;

    fn bellman_ford(graph: &Graph, s: NodeId) -> Vec<f64> {
        let n = graph.node_count();
        let mut dist = vec![f64::INFINITY; n];
        dist[s as usize] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for (u, v, w) in graph.edges() {
                for (a, b) in [(u, v), (v, u)] {
                    if dist[a as usize] + w < dist[b as usize] {
                        dist[b as usize] = dist[a as usize] + w;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist
    }

    fn path_weight(graph: &Graph, path: &[NodeId]) -> f64 {
        path.windows(2)
            .map(|e| graph.edge_weight(e[0], e[1]).expect("path uses an edge"))
            .sum()
    }

    #[test]
    fn single_node() {
        let g = load_edge_list("1 1\n".as_bytes()).unwrap();
        let d = dijkstra(&g, 0, None);
        assert_eq!(d.distance(0), Some(0.0));
    }

    #[test]
    fn unit_path() {
        let g = load_edge_list("1 2\n2 3\n".as_bytes()).unwrap();
        let d = dijkstra(&g, 0, None);
        assert_eq!(d.distances(), &[0.0, 1.0, 2.0]);
        assert_eq!(d.path_to(2), Some(vec![0, 1, 2]));
    }

    #[test]
    fn agrees_with_bellman_ford() {
        for seed in 0..5 {
            let g = random_graph(100, 250, 5, seed);
            for s in [0, 17, 99] {
                let d = dijkstra(&g, s, None);
                assert_eq!(d.distances(), bellman_ford(&g, s).as_slice());
                for u in 0..100 {
                    if let Some(p) = d.path_to(u) {
                        assert_eq!(path_weight(&g, &p), d.distance(u).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn restricted_search_skips_pruned_nodes() {
        // triangle 1-2-3 plus leaf 4 on 3
        let g = load_edge_list("1 2\n2 3\n3 1\n3 4\n".as_bytes()).unwrap();
        let p = prune_degree_one(&g);
        let d = dijkstra(&g, 0, Some(&p));
        assert_eq!(d.distance(3), None);
        assert_eq!(d.distance(2), Some(1.0));
    }

    #[test]
    fn bidirectional_trivial_and_disconnected() {
        let g = load_edge_list("1 2\n3 4\n".as_bytes()).unwrap();
        let r = bidirectional_search(&g, 0, 0).unwrap();
        assert_eq!((r.distance, r.path), (0.0, vec![0]));
        assert_eq!(bidirectional_search(&g, 0, 3), None);
        let r = bidirectional_search(&g, 0, 1).unwrap();
        assert_eq!((r.distance, r.path), (1.0, vec![0, 1]));
    }

    #[test]
    fn bidirectional_matches_dijkstra() {
        use rand::{Rng, SeedableRng};
        let g = random_graph(1000, 2500, 9, 11);
        let mut search = BidirectionalSearch::new(g.node_count());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sources: Vec<NodeId> = (0..20).map(|_| rng.gen_range(0..1000)).collect();
        for &s in &sources {
            let truth = dijkstra(&g, s, None);
            for _ in 0..50 {
                let t = rng.gen_range(0..1000);
                match search.run(&g, s, t) {
                    None => assert_eq!(truth.distance(t), None),
                    Some(r) => {
                        assert_eq!(Some(r.distance), truth.distance(t));
                        assert_eq!(r.path.first(), Some(&s));
                        assert_eq!(r.path.last(), Some(&t));
                        assert_eq!(path_weight(&g, &r.path), r.distance);
                    }
                }
            }
        }
    }

    #[test]
    fn all_pairs_triangle() {
        let g = load_edge_list("1 2\n2 3\n3 1\n".as_bytes()).unwrap();
        let ap = all_pairs_paths(&g, DEFAULT_ALL_PAIRS_LIMIT).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                assert_eq!(ap.distance(u, v), Some(if u == v { 0.0 } else { 1.0 }));
            }
        }
    }

    #[test]
    fn all_pairs_matches_dijkstra_and_guards_size() {
        let g = random_graph(50, 120, 4, 5);
        let ap = all_pairs_paths(&g, 50).unwrap();
        for s in 0..50 {
            let d = dijkstra(&g, s, None);
            for t in 0..50 {
                assert_eq!(ap.distance(s, t), d.distance(t));
            }
        }
        assert_eq!(
            all_pairs_paths(&g, 49).unwrap_err(),
            OracleError::TooLarge { n: 50, max: 49 }
        );
    }

    #[test]
    fn on_path_membership_is_symmetric_and_contains_endpoints() {
        let g = random_graph(60, 150, 3, 8);
        let ap = all_pairs_paths(&g, 100).unwrap();
        for s in 0..60 {
            for t in 0..60 {
                let fwd = ap.on_shortest_path(s, t);
                assert_eq!(fwd, ap.on_shortest_path(t, s));
                if ap.distance(s, t).is_some() {
                    assert!(fwd.contains(&s) && fwd.contains(&t));
                }
            }
        }
    }
}
