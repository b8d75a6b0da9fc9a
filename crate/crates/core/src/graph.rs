//! Undirected weighted graphs, edge-list loading and degree-1 pruning.
//!
//! Nodes carry arbitrary non-negative integer ids in the input. Internally they
//! are renumbered to dense `NodeId`s in increasing original-id order, so any
//! comparison on dense ids gives the same answer as the comparison on the
//! original ids. All identifier tie-breaking relies on this.

use std::io::{BufRead, Write};

use crate::error::GraphError;

/// Dense node identifier, `0..node_count`.
pub type NodeId = u32;

/// Immutable undirected graph in compressed adjacency form.
///
/// Every undirected edge is stored twice (once per endpoint). Adjacency lists
/// are sorted by neighbor id.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    weights: Vec<f64>,
    original_ids: Vec<u64>,
}

/// Counters collected while normalizing an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub lines: usize,
    pub self_loops_dropped: usize,
    pub duplicates_collapsed: usize,
}

impl Graph {
    /// Builds a graph from `(u, v, weight)` triples over original ids.
    ///
    /// Self-loops are dropped (their endpoint still becomes a node), parallel
    /// edges collapse to the minimum weight. Weights must be finite and > 0.
    pub fn from_edges<I>(edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (u64, u64, f64)>,
    {
        Self::from_edges_with_stats(edges).map(|(g, _)| g)
    }

    pub fn from_edges_with_stats<I>(edges: I) -> Result<(Self, LoadStats), GraphError>
    where
        I: IntoIterator<Item = (u64, u64, f64)>,
    {
        let mut stats = LoadStats::default();
        let mut ids = Vec::new();
        let mut raw = Vec::new();
        for (u, v, w) in edges {
            if !(w.is_finite() && w > 0.0) {
                return Err(GraphError::InvalidWeight { line: None, weight: w });
            }
            ids.push(u);
            ids.push(v);
            if u == v {
                stats.self_loops_dropped += 1;
                continue;
            }
            raw.push((u.min(v), u.max(v), w));
        }
        let graph = Self::assemble(ids, raw, &mut stats)?;
        Ok((graph, stats))
    }

    /// Graph with `node_count` nodes whose original ids are `0..node_count`.
    pub fn from_dense_edges<I>(node_count: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        let mut stats = LoadStats::default();
        let ids: Vec<u64> = (0..node_count as u64).collect();
        let mut raw = Vec::new();
        for (u, v, w) in edges {
            if !(w.is_finite() && w > 0.0) {
                return Err(GraphError::InvalidWeight { line: None, weight: w });
            }
            if u as usize >= node_count || v as usize >= node_count {
                return Err(GraphError::NodeOutOfRange(u.max(v) as u64));
            }
            if u == v {
                stats.self_loops_dropped += 1;
                continue;
            }
            raw.push((u.min(v) as u64, u.max(v) as u64, w));
        }
        Self::assemble(ids, raw, &mut stats)
    }

    fn assemble(
        mut ids: Vec<u64>,
        mut raw: Vec<(u64, u64, f64)>,
        stats: &mut LoadStats,
    ) -> Result<Self, GraphError> {
        ids.sort_unstable();
        ids.dedup();
        if ids.len() >= NodeId::MAX as usize {
            return Err(GraphError::TooManyNodes(ids.len()));
        }

        raw.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let before = raw.len();
        // sorted ascending by weight within a pair, so dedup keeps the minimum
        raw.dedup_by(|later, first| later.0 == first.0 && later.1 == first.1);
        stats.duplicates_collapsed += before - raw.len();

        let dense = |id: u64| ids.binary_search(&id).expect("id collected above") as NodeId;
        let n = ids.len();
        let mut degree = vec![0usize; n];
        let edges: Vec<(NodeId, NodeId, f64)> = raw
            .iter()
            .map(|&(u, v, w)| (dense(u), dense(v), w))
            .collect();
        for &(u, v, _) in &edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut targets = vec![0; edges.len() * 2];
        let mut weights = vec![0.0; edges.len() * 2];
        for &(u, v, w) in &edges {
            for (a, b) in [(u, v), (v, u)] {
                let slot = cursor[a as usize];
                targets[slot] = b;
                weights[slot] = w;
                cursor[a as usize] += 1;
            }
        }
        for u in 0..n {
            let range = offsets[u]..offsets[u + 1];
            let mut adj: Vec<(NodeId, f64)> = range
                .clone()
                .map(|i| (targets[i], weights[i]))
                .collect();
            adj.sort_unstable_by_key(|&(t, _)| t);
            for (i, (t, w)) in range.zip(adj) {
                targets[i] = t;
                weights[i] = w;
            }
        }

        Ok(Graph {
            offsets,
            targets,
            weights,
            original_ids: ids,
        })
    }

    pub fn node_count(&self) -> usize {
        self.original_ids.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn degree(&self, u: NodeId) -> usize {
        let u = u as usize;
        self.offsets[u + 1] - self.offsets[u]
    }

    /// `(neighbor, weight)` pairs of `u`, ascending by neighbor.
    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        let range = self.offsets[u as usize]..self.offsets[u as usize + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    /// Weight of edge `{u, v}`, if present.
    pub fn edge_weight(&self, u: NodeId, v: NodeId) -> Option<f64> {
        let range = self.offsets[u as usize]..self.offsets[u as usize + 1];
        let adj = &self.targets[range.clone()];
        adj.binary_search(&v)
            .ok()
            .map(|i| self.weights[range.start + i])
    }

    /// Heaviest edge incident on `u` (0 for isolated nodes).
    pub fn max_incident_weight(&self, u: NodeId) -> f64 {
        self.neighbors(u).map(|(_, w)| w).fold(0.0, f64::max)
    }

    /// Original ids, ascending; position is the dense id.
    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }

    pub fn original_id(&self, u: NodeId) -> u64 {
        self.original_ids[u as usize]
    }

    pub fn dense_id(&self, original: u64) -> Option<NodeId> {
        self.original_ids
            .binary_search(&original)
            .ok()
            .map(|i| i as NodeId)
    }

    /// Iterates every undirected edge once as `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.node_count() as NodeId).flat_map(move |u| {
            self.neighbors(u)
                .filter(move |&(v, _)| u < v)
                .map(move |(v, w)| (u, v, w))
        })
    }

    /// True if every edge weight equals 1.
    pub fn is_unit_weight(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    /// Writes the graph as an edge list over original ids, one edge per line.
    /// Isolated nodes cannot be represented and are lost.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (u, v, w) in self.edges() {
            writeln!(out, "{} {} {}", self.original_id(u), self.original_id(v), w)?;
        }
        Ok(())
    }
}

/// Parses a whitespace-separated edge list: `u v` or `u v w` per line.
///
/// Lines starting with `#` and blank lines are skipped. A missing weight
/// defaults to 1.
pub fn load_edge_list<R: BufRead>(reader: R) -> Result<Graph, GraphError> {
    load_edge_list_with_stats(reader).map(|(g, _)| g)
}

pub fn load_edge_list_with_stats<R: BufRead>(reader: R) -> Result<(Graph, LoadStats), GraphError> {
    let mut edges = Vec::new();
    let mut lines = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        lines += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let parse_id = |f: Option<&str>| -> Result<u64, GraphError> {
            let f = f.ok_or_else(|| GraphError::Parse {
                line: line_no,
                message: "expected at least two node ids".into(),
            })?;
            f.parse().map_err(|_| GraphError::Parse {
                line: line_no,
                message: format!("invalid node id {f:?}"),
            })
        };
        let u = parse_id(fields.next())?;
        let v = parse_id(fields.next())?;
        let w = match fields.next() {
            None => 1.0,
            Some(f) => f.parse::<f64>().map_err(|_| GraphError::Parse {
                line: line_no,
                message: format!("invalid weight {f:?}"),
            })?,
        };
        if let Some(extra) = fields.next() {
            return Err(GraphError::Parse {
                line: line_no,
                message: format!("unexpected trailing field {extra:?}"),
            });
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(GraphError::InvalidWeight {
                line: Some(line_no),
                weight: w,
            });
        }
        edges.push((u, v, w));
    }
    let (graph, mut stats) = Graph::from_edges_with_stats(edges)?;
    stats.lines = lines;
    Ok((graph, stats))
}

/// How a node is treated after degree-1 pruning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeRole {
    /// Degree >= 2; owns a PSPT block.
    Survivor,
    /// Degree exactly 1; queries are routed through its only neighbor.
    Leaf { anchor: NodeId, weight: f64 },
    /// Degree 0.
    Isolated,
}

/// The pruned subgraph G' described by survivor flags plus the redirect
/// table for degree-1 nodes. Pruning is a single pass over original degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedView {
    roles: Vec<NodeRole>,
}

impl PrunedView {
    pub fn from_roles(roles: Vec<NodeRole>) -> Self {
        PrunedView { roles }
    }

    pub fn survives(&self, u: NodeId) -> bool {
        matches!(self.roles[u as usize], NodeRole::Survivor)
    }

    /// `(anchor, weight)` for a degree-1 node.
    pub fn redirect(&self, u: NodeId) -> Option<(NodeId, f64)> {
        match self.roles[u as usize] {
            NodeRole::Leaf { anchor, weight } => Some((anchor, weight)),
            _ => None,
        }
    }

    pub fn role(&self, u: NodeId) -> NodeRole {
        self.roles[u as usize]
    }

    pub fn roles(&self) -> &[NodeRole] {
        &self.roles
    }

    pub fn node_count(&self) -> usize {
        self.roles.len()
    }

    pub fn survivor_count(&self) -> usize {
        self.roles
            .iter()
            .filter(|r| matches!(r, NodeRole::Survivor))
            .count()
    }

    pub fn survivors(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, NodeRole::Survivor))
            .map(|(u, _)| u as NodeId)
    }
}

/// Removes every node of degree <= 1 (one pass, original degrees only).
pub fn prune_degree_one(graph: &Graph) -> PrunedView {
    let roles = (0..graph.node_count() as NodeId)
        .map(|u| match graph.degree(u) {
            0 => NodeRole::Isolated,
            1 => {
                let (anchor, weight) = graph.neighbors(u).next().unwrap();
                NodeRole::Leaf { anchor, weight }
            }
            _ => NodeRole::Survivor,
        })
        .collect();
    PrunedView { roles }
}
