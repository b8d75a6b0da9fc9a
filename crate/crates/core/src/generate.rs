//! Deterministic synthetic graph generators.
//!
//! All generators produce dense ids `0..n` (original id = dense id) and take
//! an explicit seed; the same parameters always yield the same graph.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::GraphError;
use crate::graph::{Graph, NodeId};

/// Edge weight distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weights {
    Unit,
    /// Uniform integer in `1..=max`.
    UniformInt { max: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    /// Preferential attachment, `m` edges per arriving node.
    PreferentialAttachment { n: usize, m: usize },
    /// Erdős–Rényi G(n, p).
    ErdosRenyi { n: usize, p: f64 },
    /// Uniform random G(n, m): `m` distinct edges.
    UniformEdges { n: usize, m: usize },
    Line { n: usize },
    Grid { rows: usize, cols: usize },
}

impl Model {
    pub fn node_count(&self) -> usize {
        match *self {
            Model::PreferentialAttachment { n, .. }
            | Model::ErdosRenyi { n, .. }
            | Model::UniformEdges { n, .. }
            | Model::Line { n } => n,
            Model::Grid { rows, cols } => rows * cols,
        }
    }
}

/// Unweighted edge list of the model, in generation order.
pub fn topology(model: Model, seed: u64) -> Vec<(NodeId, NodeId)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match model {
        Model::PreferentialAttachment { n, m } => preferential_attachment(n, m, &mut rng),
        Model::ErdosRenyi { n, p } => erdos_renyi(n, p, &mut rng),
        Model::UniformEdges { n, m } => uniform_edges(n, m, &mut rng),
        Model::Line { n } => (1..n as NodeId).map(|v| (v - 1, v)).collect(),
        Model::Grid { rows, cols } => {
            let id = |r: usize, c: usize| (r * cols + c) as NodeId;
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    if c + 1 < cols {
                        edges.push((id(r, c), id(r, c + 1)));
                    }
                    if r + 1 < rows {
                        edges.push((id(r, c), id(r + 1, c)));
                    }
                }
            }
            edges
        }
    }
}

/// Weighted edge list: topology plus weights drawn from an independent stream.
pub fn weighted_edges(model: Model, weights: Weights, seed: u64) -> Vec<(NodeId, NodeId, f64)> {
    let edges = topology(model, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    edges
        .into_iter()
        .map(|(u, v)| {
            let w = match weights {
                Weights::Unit => 1.0,
                Weights::UniformInt { max } => rng.gen_range(1..=max.max(1)) as f64,
            };
            (u, v, w)
        })
        .collect()
}

pub fn generate(model: Model, weights: Weights, seed: u64) -> Result<Graph, GraphError> {
    Graph::from_dense_edges(model.node_count(), weighted_edges(model, weights, seed))
}

/// Writes the generated edge list (`u v` for unit weights, `u v w` otherwise).
pub fn write_generated<W: Write>(
    mut out: W,
    model: Model,
    weights: Weights,
    seed: u64,
) -> std::io::Result<()> {
    writeln!(out, "# {model:?} weights={weights:?} seed={seed}")?;
    for (u, v, w) in weighted_edges(model, weights, seed) {
        match weights {
            Weights::Unit => writeln!(out, "{u} {v}")?,
            Weights::UniformInt { .. } => writeln!(out, "{u} {v} {w}")?,
        }
    }
    Ok(())
}

// Nodes 0..m start unconnected; node m links to all of them, and every later
// node links to m distinct earlier nodes chosen proportionally to degree.
// Yields m * (n - m) edges.
fn preferential_attachment(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    if m == 0 || n <= m {
        return Vec::new();
    }
    let mut edges = Vec::with_capacity(m * (n - m));
    let mut repeated: Vec<NodeId> = Vec::with_capacity(2 * m * (n - m));
    let mut targets: Vec<NodeId> = (0..m as NodeId).collect();
    for source in m as NodeId..n as NodeId {
        for &t in &targets {
            edges.push((source, t));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat_n(source, m));
        targets.clear();
        while targets.len() < m {
            let pick = *repeated.choose(rng).unwrap();
            if !targets.contains(&pick) {
                targets.push(pick);
            }
        }
    }
    edges
}

// Geometric edge skipping (Batagelj & Brandes), O(n + m).
fn erdos_renyi(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    if p <= 0.0 || n < 2 {
        return edges;
    }
    if p >= 1.0 {
        for v in 1..n as NodeId {
            for u in 0..v {
                edges.push((u, v));
            }
        }
        return edges;
    }
    let log_q = (1.0 - p).ln();
    let (mut v, mut w) = (1i64, -1i64);
    let n = n as i64;
    while v < n {
        let r: f64 = rng.gen();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v && v < n {
            w -= v;
            v += 1;
        }
        if v < n {
            edges.push((w as NodeId, v as NodeId));
        }
    }
    edges
}

fn uniform_edges(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    let max_edges = n.saturating_sub(1) * n / 2;
    let m = m.min(max_edges);
    let mut seen = std::collections::HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let u = rng.gen_range(0..n as NodeId);
        let v = rng.gen_range(0..n as NodeId);
        if u != v && seen.insert((u.min(v), u.max(v))) {
            edges.push((u, v));
        }
    }
    edges
}
