//! Experiment harness: intersection sweeps over alpha, accuracy
//! classification against an exact oracle, and latency benchmarks.

use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{BuildError, QueryError};
use crate::graph::{Graph, NodeId};
use crate::index::Index;
use crate::oracle::{dijkstra, BidirectionalSearch};
use crate::pspt::{best_meeting, compute_beta, intersect, Pspt, TieOrder};
use crate::query::{resolve_endpoint, Endpoint, QueryEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieMode {
    Consistent,
    /// Ties broken by a permutation of the ids drawn from `seed`.
    Arbitrary { seed: u64 },
}

impl TieMode {
    pub fn order(&self, node_count: usize) -> TieOrder {
        match *self {
            TieMode::Consistent => TieOrder::Consistent,
            TieMode::Arbitrary { seed } => TieOrder::shuffled(node_count, seed),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TieMode::Consistent => "consistent",
            TieMode::Arbitrary { .. } => "arbitrary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub alphas: Vec<f64>,
    /// Nodes drawn per round, from all nodes including pruned ones.
    pub node_sample: usize,
    /// Pairs drawn per round among the sampled nodes; all pairs when `None`.
    pub pairs_per_round: Option<usize>,
    pub rounds: usize,
    pub seed: u64,
    pub tie: TieMode,
}

impl EvalConfig {
    pub fn new(alphas: Vec<f64>, seed: u64) -> Self {
        EvalConfig {
            alphas,
            node_sample: 200,
            pairs_per_round: None,
            rounds: 5,
            seed,
            tie: TieMode::Consistent,
        }
    }
}

/// Raw counts for one alpha.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCounts {
    pub pairs: usize,
    pub disconnected: usize,
    /// Connected pairs with distinct endpoints.
    pub evaluated: usize,
    pub intersecting: usize,
    /// Some common member lies on a shortest path.
    pub along_sp: usize,
    /// The best common member gives the exact distance.
    pub exact: usize,
    pub within_bound: usize,
    pub bound_violations: usize,
    /// Along-SP pairs whose answer is not exact; must stay zero.
    pub along_sp_inexact: usize,
}

impl PairCounts {
    fn add(&mut self, o: &PairCounts) {
        self.pairs += o.pairs;
        self.disconnected += o.disconnected;
        self.evaluated += o.evaluated;
        self.intersecting += o.intersecting;
        self.along_sp += o.along_sp;
        self.exact += o.exact;
        self.within_bound += o.within_bound;
        self.bound_violations += o.bound_violations;
        self.along_sp_inexact += o.along_sp_inexact;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaRow {
    pub alpha: f64,
    pub beta: usize,
    pub counts: PairCounts,
}

impl AlphaRow {
    pub fn fraction_intersecting(&self) -> f64 {
        ratio(self.counts.intersecting, self.counts.evaluated)
    }

    pub fn fraction_intersecting_along_sp(&self) -> f64 {
        ratio(self.counts.along_sp, self.counts.evaluated)
    }

    pub fn fraction_exact(&self) -> f64 {
        ratio(self.counts.exact, self.counts.evaluated)
    }

    /// Measured over intersecting pairs.
    pub fn fraction_within_bound(&self) -> f64 {
        ratio(self.counts.within_bound, self.counts.intersecting)
    }

    pub fn fallback_rate(&self) -> f64 {
        ratio(self.counts.evaluated - self.counts.intersecting, self.counts.evaluated)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: EvalConfig,
    pub rows: Vec<AlphaRow>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    alpha: f64,
    beta: usize,
    tie_mode: &'a str,
    seed: u64,
    node_sample: usize,
    rounds: usize,
    pairs: usize,
    disconnected: usize,
    evaluated: usize,
    intersecting: usize,
    along_sp: usize,
    exact: usize,
    within_bound: usize,
    bound_violations: usize,
    fraction_intersecting: String,
    fraction_intersecting_along_sp: String,
    fraction_exact: String,
    fraction_within_bound: String,
    fallback_rate: String,
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let f = |x: f64| format!("{x:.6}");
        for row in &self.rows {
            let c = &row.counts;
            w.serialize(CsvRow {
                alpha: row.alpha,
                beta: row.beta,
                tie_mode: self.config.tie.label(),
                seed: self.config.seed,
                node_sample: self.config.node_sample,
                rounds: self.config.rounds,
                pairs: c.pairs,
                disconnected: c.disconnected,
                evaluated: c.evaluated,
                intersecting: c.intersecting,
                along_sp: c.along_sp,
                exact: c.exact,
                within_bound: c.within_bound,
                bound_violations: c.bound_violations,
                fraction_intersecting: f(row.fraction_intersecting()),
                fraction_intersecting_along_sp: f(row.fraction_intersecting_along_sp()),
                fraction_exact: f(row.fraction_exact()),
                fraction_within_bound: f(row.fraction_within_bound()),
                fallback_rate: f(row.fallback_rate()),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `node_sample` distinct nodes, then pairs among them.
pub fn sample_round<R: Rng>(
    rng: &mut R,
    node_count: usize,
    node_sample: usize,
    pairs: Option<usize>,
) -> Vec<(NodeId, NodeId)> {
    let k = node_sample.min(node_count);
    let nodes: Vec<NodeId> = sample(rng, node_count, k).into_iter().map(|u| u as NodeId).collect();
    let all = k * k.saturating_sub(1) / 2;
    match pairs {
        Some(want) if want < all => {
            let mut seen = HashSet::with_capacity(want);
            let mut out = Vec::with_capacity(want);
            while out.len() < want {
                let (i, j) = (rng.gen_range(0..k), rng.gen_range(0..k));
                if i != j && seen.insert((i.min(j), i.max(j))) {
                    out.push((nodes[i], nodes[j]));
                }
            }
            out
        }
        _ => {
            let mut out = Vec::with_capacity(all);
            for i in 0..k {
                out.extend((i + 1..k).map(|j| (nodes[i], nodes[j])));
            }
            out
        }
    }
}

/// Heaviest surviving-graph edge incident on any member of `block`.
pub fn block_max_weight(graph: &Graph, index: &Index, block: &Pspt) -> f64 {
    let pruned = index.pruned();
    block
        .members()
        .flat_map(|u| graph.neighbors(u).filter(|&(v, _)| pruned.survives(v)).map(|(_, w)| w))
        .fold(0.0, f64::max)
}

enum Job {
    Disconnected,
    /// Answered without blocks (direct edge of a two-node component).
    Direct,
    Routed { source: NodeId, target: NodeId },
}

fn classify_job(index: &Index, s: NodeId, t: NodeId) -> Job {
    match (resolve_endpoint(index, s), resolve_endpoint(index, t)) {
        (Endpoint::PairComponent { partner, .. }, _) if partner == t => Job::Direct,
        (Endpoint::Routed { node: a, .. }, Endpoint::Routed { node: b, .. }) => Job::Routed { source: a, target: b },
        _ => Job::Disconnected,
    }
}

/// Classifies a routed pair given exact distances from its source.
fn classify(
    graph: &Graph,
    index: &Index,
    dist_from_source: &[f64],
    source: NodeId,
    target: NodeId,
) -> PairCounts {
    let mut c = PairCounts {
        pairs: 1,
        ..Default::default()
    };
    let truth = dist_from_source[target as usize];
    if !truth.is_finite() {
        c.disconnected = 1;
        return c;
    }
    c.evaluated = 1;
    let (a, b) = (
        index.block(source).expect("root block"),
        index.block(target).expect("root block"),
    );
    let Some(m) = best_meeting(a, b) else {
        return c;
    };
    c.intersecting = 1;
    let along = intersect(a, b)
        .iter()
        .any(|cand| dist_from_source[cand.member as usize] + cand.b_distance == truth);
    let exact = m.distance == truth;
    c.along_sp = along as usize;
    c.exact = exact as usize;
    c.along_sp_inexact = (along && !exact) as usize;
    if m.distance <= truth + block_max_weight(graph, index, a) {
        c.within_bound = 1;
    } else {
        c.bound_violations = 1;
    }
    c
}

/// Runs the sweep. Blocks are built only for the redirected endpoints of the
/// sampled pairs, and one exact search per distinct source serves every alpha.
pub fn run_experiment(graph: &Graph, config: &EvalConfig) -> Result<ExperimentReport, BuildError> {
    let n = graph.node_count();
    let tie = config.tie.order(n);
    let mut totals = vec![PairCounts::default(); config.alphas.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // blockless index, used for endpoint redirection only
    let base = Index::build_for_roots(graph, 1.0, &[], &tie)?;
    for _ in 0..config.rounds {
        let pairs = sample_round(&mut rng, n, config.node_sample, config.pairs_per_round);
        let mut roots = Vec::new();
        let mut routed: Vec<(NodeId, NodeId)> = Vec::new();
        let mut other = PairCounts::default();
        for &(s, t) in &pairs {
            match classify_job(&base, s, t) {
                Job::Disconnected => {
                    other.pairs += 1;
                    other.disconnected += 1;
                }
                Job::Direct => {
                    other.pairs += 1;
                    other.evaluated += 1;
                }
                Job::Routed { source, target } => {
                    roots.push(source);
                    roots.push(target);
                    routed.push((source, target));
                }
            }
        }
        routed.sort_unstable();
        let indexes: Vec<Index> = config
            .alphas
            .iter()
            .map(|&alpha| Index::build_for_roots(graph, alpha, &roots, &tie))
            .collect::<Result<_, _>>()?;
        let groups: Vec<&[(NodeId, NodeId)]> = routed.chunk_by(|x, y| x.0 == y.0).collect();
        let round: Vec<PairCounts> = groups
            .par_iter()
            .map(|group| {
                let dist = dijkstra(graph, group[0].0, None);
                let mut per_alpha = vec![PairCounts::default(); indexes.len()];
                for &(s, t) in group.iter() {
                    for (acc, index) in per_alpha.iter_mut().zip(&indexes) {
                        acc.add(&classify(graph, index, dist.distances(), s, t));
                    }
                }
                per_alpha
            })
            .reduce(
                || vec![PairCounts::default(); indexes.len()],
                |mut x, y| {
                    x.iter_mut().zip(&y).for_each(|(a, b)| a.add(b));
                    x
                },
            );
        for (total, r) in totals.iter_mut().zip(&round) {
            total.add(r);
            total.add(&other);
        }
    }
    let rows = config
        .alphas
        .iter()
        .zip(totals)
        .map(|(&alpha, counts)| {
            Ok(AlphaRow {
                alpha,
                beta: compute_beta(alpha, n)?,
                counts,
            })
        })
        .collect::<Result<_, BuildError>>()?;
    Ok(ExperimentReport {
        config: config.clone(),
        rows,
    })
}

/// `count` uniform pairs of distinct nodes.
pub fn sample_pairs(node_count: usize, count: usize, seed: u64) -> Vec<(NodeId, NodeId)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    if node_count < 2 {
        return out;
    }
    while out.len() < count {
        let (s, t) = (rng.gen_range(0..node_count), rng.gen_range(0..node_count));
        if s != t {
            out.push((s as NodeId, t as NodeId));
        }
    }
    out
}

/// Latency percentiles in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub mean: f64,
}

impl Percentiles {
    pub fn from_micros(mut samples: Vec<f64>) -> Percentiles {
        if samples.is_empty() {
            return Percentiles {
                p50: 0.0,
                p95: 0.0,
                p99: 0.0,
                mean: 0.0,
            };
        }
        samples.sort_by(f64::total_cmp);
        // nearest-rank
        let at = |q: f64| samples[((q * samples.len() as f64).ceil() as usize).clamp(1, samples.len()) - 1];
        Percentiles {
            p50: at(0.50),
            p95: at(0.95),
            p99: at(0.99),
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub pairs: usize,
    pub engine: Percentiles,
    pub baseline: Percentiles,
    /// Engine answers that disagreed with the baseline distance.
    pub inexact: usize,
    pub fallbacks: usize,
}

impl LatencyReport {
    pub fn median_speedup(&self) -> f64 {
        self.baseline.p50 / self.engine.p50
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "pairs", "p50_us", "p95_us", "p99_us", "mean_us"])?;
        for (name, p) in [("pspt", &self.engine), ("bidirectional", &self.baseline)] {
            w.write_record([
                name.to_string(),
                self.pairs.to_string(),
                format!("{:.3}", p.p50),
                format!("{:.3}", p.p95),
                format!("{:.3}", p.p99),
                format!("{:.3}", p.mean),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Times path queries on `pairs` for the engine and for a plain
/// bidirectional search, after one untimed warm-up pass of each.
pub fn bench_latency(engine: &QueryEngine<'_>, pairs: &[(NodeId, NodeId)]) -> Result<LatencyReport, QueryError> {
    let graph = engine.graph();
    let mut search = BidirectionalSearch::new(graph.node_count());
    for &(s, t) in pairs.iter().take(1000) {
        engine.query_dense(s, t, true)?;
        search.run(graph, s, t);
    }
    let mut engine_us = Vec::with_capacity(pairs.len());
    let mut answers = Vec::with_capacity(pairs.len());
    let mut fallbacks = 0;
    for &(s, t) in pairs {
        let start = Instant::now();
        let out = engine.query_dense(s, t, true)?;
        engine_us.push(start.elapsed().as_secs_f64() * 1e6);
        fallbacks += (out.resolution == crate::query::Resolution::Fallback) as usize;
        answers.push(out.distance);
    }
    let mut baseline_us = Vec::with_capacity(pairs.len());
    let mut inexact = 0;
    for (&(s, t), answer) in pairs.iter().zip(&answers) {
        let start = Instant::now();
        let found = search.run(graph, s, t);
        baseline_us.push(start.elapsed().as_secs_f64() * 1e6);
        inexact += (found.map(|f| f.distance) != *answer) as usize;
    }
    Ok(LatencyReport {
        pairs: pairs.len(),
        engine: Percentiles::from_micros(engine_us),
        baseline: Percentiles::from_micros(baseline_us),
        inexact,
        fallbacks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::random_graph;
    use crate::generate::{generate, Model, Weights};
    use crate::index::build_index;
    use crate::oracle::all_pairs_paths;

    #[test]
    fn sampling_is_seeded_and_distinct() {
        let a = sample_round(&mut ChaCha8Rng::seed_from_u64(3), 100, 20, None);
        let b = sample_round(&mut ChaCha8Rng::seed_from_u64(3), 100, 20, None);
        assert_eq!(a, b);
        assert_eq!(a.len(), 190);
        assert!(a.iter().all(|&(s, t)| s != t));
        let some = sample_round(&mut ChaCha8Rng::seed_from_u64(3), 100, 20, Some(50));
        assert_eq!(some.len(), 50);
        let set: HashSet<_> = some.iter().map(|&(s, t)| (s.min(t), s.max(t))).collect();
        assert_eq!(set.len(), 50);
        assert_eq!(sample_pairs(10, 30, 1), sample_pairs(10, 30, 1));
    }

    #[test]
    fn percentiles_nearest_rank() {
        let p = Percentiles::from_micros((1..=100).map(f64::from).collect());
        assert_eq!((p.p50, p.p95, p.p99), (50.0, 95.0, 99.0));
        assert_eq!(p.mean, 50.5);
    }

    // Compare the harness against a brute-force classification on a full
    // index and an all-pairs oracle.
    #[test]
    fn classification_matches_brute_force() {
        let g = random_graph(120, 260, 5, 17);
        let config = EvalConfig {
            alphas: vec![0.5, 1.0, 3.0],
            node_sample: 120,
            pairs_per_round: None,
            rounds: 1,
            seed: 4,
            tie: TieMode::Consistent,
        };
        let report = run_experiment(&g, &config).unwrap();
        let oracle = all_pairs_paths(&g, 500).unwrap();
        let pairs = sample_round(&mut ChaCha8Rng::seed_from_u64(4), 120, 120, None);
        for row in &report.rows {
            let idx = build_index(&g, row.alpha).unwrap();
            let engine = QueryEngine::new(&idx, &g).unwrap();
            let (mut disconnected, mut evaluated, mut intersecting, mut along) = (0, 0, 0, 0);
            for &(s, t) in &pairs {
                let Some(d) = oracle.distance(s, t) else {
                    disconnected += 1;
                    continue;
                };
                evaluated += 1;
                let (a, b) = match (resolve_endpoint(&idx, s), resolve_endpoint(&idx, t)) {
                    (Endpoint::Routed { node: a, leaf: la }, Endpoint::Routed { node: b, leaf: lb }) => {
                        let leaves = la.map_or(0.0, |l| l.1) + lb.map_or(0.0, |l| l.1);
                        assert_eq!(oracle.distance(a, b), Some(d - leaves));
                        (a, b)
                    }
                    _ => continue,
                };
                let out = engine.query_dense(s, t, false).unwrap();
                if out.resolution == crate::query::Resolution::Intersection {
                    intersecting += 1;
                    let on_sp: HashSet<NodeId> = oracle.on_shortest_path(a, b).into_iter().collect();
                    let (ba, bb) = (idx.block(a).unwrap(), idx.block(b).unwrap());
                    if ba.members().any(|w| bb.contains(w) && on_sp.contains(&w)) {
                        along += 1;
                        assert_eq!(out.distance, Some(d));
                    }
                }
            }
            let c = row.counts;
            assert_eq!(c.pairs, pairs.len());
            assert_eq!(
                (c.disconnected, c.evaluated, c.intersecting, c.along_sp),
                (disconnected, evaluated, intersecting, along),
                "alpha {}",
                row.alpha
            );
            assert_eq!(c.along_sp_inexact, 0);
            assert_eq!(c.bound_violations, 0);
            assert!(c.along_sp <= c.exact && c.exact <= c.intersecting);
        }
    }

    #[test]
    fn fractions_grow_with_alpha() {
        let g = generate(Model::PreferentialAttachment { n: 2000, m: 3 }, Weights::Unit, 5).unwrap();
        let mut config = EvalConfig::new(vec![0.0625, 0.25, 1.0, 4.0, 16.0], 8);
        config.node_sample = 60;
        config.rounds = 2;
        let report = run_experiment(&g, &config).unwrap();
        for w in report.rows.windows(2) {
            assert!(w[0].fraction_intersecting() <= w[1].fraction_intersecting());
            assert!(w[0].fraction_intersecting_along_sp() <= w[1].fraction_intersecting_along_sp());
        }
        assert_eq!(report.rows[4].fraction_intersecting(), 1.0);
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("alpha,beta,tie_mode,seed,"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn bench_reports_agreement() {
        let g = generate(Model::PreferentialAttachment { n: 3000, m: 4 }, Weights::Unit, 2).unwrap();
        let idx = build_index(&g, 4.0).unwrap();
        let engine = QueryEngine::new(&idx, &g).unwrap();
        let pairs = sample_pairs(g.node_count(), 200, 1);
        let r = bench_latency(&engine, &pairs).unwrap();
        assert_eq!(r.pairs, 200);
        assert!(r.engine.p50 <= r.engine.p99);
        assert!(r.baseline.p50 > 0.0);
    }
}
