//! Partial shortest path trees.
//!
//! The PSPT of a surviving node `u` is the set of the `beta` nodes closest to
//! `u` in the pruned graph, where closeness is the total order
//! `(distance, tie key)`. With the consistent order the tie key is the node
//! id itself. A block stores the members sorted by id together with their
//! distance from the root and the array position of their tree parent, which
//! is enough to rebuild every root-to-member path without touching the graph.

use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::BuildError;
use crate::frontier::Frontier;
use crate::graph::{Graph, NodeId, PrunedView};

/// `first_hop_idx` of the root entry.
pub const NO_FIRST_HOP: u32 = u32::MAX;

/// One member of a block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsptEntry {
    pub member: NodeId,
    pub distance: f64,
    /// Position (within the same block) of the next node from `member`
    /// toward the root, or [`NO_FIRST_HOP`] for the root itself.
    pub first_hop_idx: u32,
}

/// A PSPT block, stored as parallel arrays strictly ascending by member id.
#[derive(Debug, Clone, PartialEq)]
pub struct Pspt {
    root: NodeId,
    members: Vec<NodeId>,
    distances: Vec<f64>,
    first_hops: Vec<u32>,
}

impl Pspt {
    /// Assembles a block from raw parts. Callers are responsible for the
    /// ordering and first-hop invariants; see [`Pspt::check`].
    pub fn from_parts(root: NodeId, entries: Vec<PsptEntry>) -> Self {
        Pspt {
            root,
            members: entries.iter().map(|e| e.member).collect(),
            distances: entries.iter().map(|e| e.distance).collect(),
            first_hops: entries.iter().map(|e| e.first_hop_idx).collect(),
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn entry(&self, pos: usize) -> PsptEntry {
        PsptEntry {
            member: self.members[pos],
            distance: self.distances[pos],
            first_hop_idx: self.first_hops[pos],
        }
    }

    /// Entries in ascending member order.
    pub fn entries(&self) -> impl ExactSizeIterator<Item = PsptEntry> + '_ {
        (0..self.members.len()).map(|i| self.entry(i))
    }

    pub fn member_ids(&self) -> &[NodeId] {
        &self.members
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn first_hops(&self) -> &[u32] {
        &self.first_hops
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn position(&self, member: NodeId) -> Option<usize> {
        self.members.binary_search(&member).ok()
    }

    pub fn get(&self, member: NodeId) -> Option<PsptEntry> {
        self.position(member).map(|i| self.entry(i))
    }

    pub fn contains(&self, member: NodeId) -> bool {
        self.position(member).is_some()
    }

    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().copied()
    }

    /// Verifies the structural invariants of a block: strictly ascending
    /// members, the root present at distance 0 with no first hop, and every
    /// other first hop pointing at a strictly closer entry.
    pub fn check(&self) -> Result<(), String> {
        if self.distances.len() != self.members.len() || self.first_hops.len() != self.members.len() {
            return Err(format!("block {}: column lengths differ", self.root));
        }
        if self.members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("block {}: members not strictly ascending", self.root));
        }
        let root_pos = self
            .position(self.root)
            .ok_or_else(|| format!("block {}: root missing", self.root))?;
        for (i, e) in self.entries().enumerate() {
            if !(e.distance.is_finite() && e.distance >= 0.0) {
                return Err(format!("block {}: bad distance {}", self.root, e.distance));
            }
            if i == root_pos {
                if e.distance != 0.0 || e.first_hop_idx != NO_FIRST_HOP {
                    return Err(format!("block {}: malformed root entry", self.root));
                }
                continue;
            }
            let hop = e.first_hop_idx as usize;
            if e.first_hop_idx == NO_FIRST_HOP || hop >= self.members.len() {
                return Err(format!("block {}: member {} has no valid first hop", self.root, e.member));
            }
            if self.distances[hop] >= e.distance {
                return Err(format!(
                    "block {}: first hop of {} is not closer to the root",
                    self.root, e.member
                ));
            }
        }
        Ok(())
    }
}

/// Order used to break distance ties while growing a PSPT.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TieOrder {
    /// Smaller node id first.
    Consistent,
    /// Smaller `keys[node]` first; `keys` is a permutation of the node ids.
    Permuted(Vec<u32>),
}

impl TieOrder {
    /// A seeded random permutation of `0..node_count` as tie keys.
    pub fn shuffled(node_count: usize, seed: u64) -> Self {
        let mut keys: Vec<u32> = (0..node_count as u32).collect();
        keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        TieOrder::Permuted(keys)
    }

    #[inline]
    fn key(&self, u: NodeId) -> u32 {
        match self {
            TieOrder::Consistent => u,
            TieOrder::Permuted(keys) => keys[u as usize],
        }
    }
}

/// `ceil(alpha * sqrt(node_count))`, at least 1.
pub fn compute_beta(alpha: f64, node_count: usize) -> Result<usize, BuildError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(BuildError::InvalidAlpha(alpha));
    }
    Ok(((alpha * (node_count as f64).sqrt()).ceil() as usize).max(1))
}

/// Truncated Dijkstra with scratch space reused across roots.
pub struct PsptBuilder<'a> {
    graph: &'a Graph,
    pruned: &'a PrunedView,
    tie: &'a TieOrder,
    dist: Vec<f64>,
    parent: Vec<NodeId>,
    settled: Vec<bool>,
    touched: Vec<NodeId>,
    heap: BinaryHeap<Frontier>,
    order: Vec<NodeId>,
}

impl<'a> PsptBuilder<'a> {
    pub fn new(graph: &'a Graph, pruned: &'a PrunedView, tie: &'a TieOrder) -> Self {
        let n = graph.node_count();
        PsptBuilder {
            graph,
            pruned,
            tie,
            dist: vec![f64::INFINITY; n],
            parent: vec![NodeId::MAX; n],
            settled: vec![false; n],
            touched: Vec::new(),
            heap: BinaryHeap::new(),
            order: Vec::new(),
        }
    }

    fn reset(&mut self) {
        for &u in &self.touched {
            self.dist[u as usize] = f64::INFINITY;
            self.parent[u as usize] = NodeId::MAX;
            self.settled[u as usize] = false;
        }
        self.touched.clear();
        self.heap.clear();
        self.order.clear();
    }

    /// Settles the first `beta` nodes around `root` and returns them as a block.
    pub fn build(&mut self, root: NodeId, beta: usize) -> Result<Pspt, BuildError> {
        if !self.pruned.survives(root) {
            return Err(BuildError::NotSurviving(root));
        }
        if beta == 0 {
            return Err(BuildError::ZeroBeta);
        }
        self.reset();
        self.dist[root as usize] = 0.0;
        self.touched.push(root);
        self.heap.push(Frontier {
            dist: 0.0,
            tie: self.tie.key(root),
            node: root,
        });

        while self.order.len() < beta {
            let Some(Frontier { dist: d, node: u, .. }) = self.heap.pop() else {
                break;
            };
            if self.settled[u as usize] {
                continue;
            }
            self.settled[u as usize] = true;
            self.order.push(u);
            if self.order.len() == beta {
                break;
            }
            for (v, w) in self.graph.neighbors(u) {
                let vi = v as usize;
                if self.settled[vi] || !self.pruned.survives(v) {
                    continue;
                }
                let nd = d + w;
                // strict: an equal-distance offer keeps the earlier parent
                if nd < self.dist[vi] {
                    if self.dist[vi].is_infinite() {
                        self.touched.push(v);
                    }
                    self.dist[vi] = nd;
                    self.parent[vi] = u;
                    self.heap.push(Frontier {
                        dist: nd,
                        tie: self.tie.key(v),
                        node: v,
                    });
                }
            }
        }

        let mut members = self.order.clone();
        members.sort_unstable();
        let distances = members.iter().map(|&m| self.dist[m as usize]).collect();
        let first_hops = members
            .iter()
            .map(|&m| {
                if m == root {
                    NO_FIRST_HOP
                } else {
                    let p = self.parent[m as usize];
                    // parents settle strictly before their children
                    members.binary_search(&p).expect("parent settled") as u32
                }
            })
            .collect();
        Ok(Pspt {
            root,
            members,
            distances,
            first_hops,
        })
    }

    /// Members of the last build in settlement order.
    pub fn settlement_order(&self) -> &[NodeId] {
        &self.order
    }
}

/// Builds the PSPT of `root` with consistent tie-breaking.
pub fn build_pspt(
    graph: &Graph,
    pruned: &PrunedView,
    root: NodeId,
    beta: usize,
) -> Result<Pspt, BuildError> {
    PsptBuilder::new(graph, pruned, &TieOrder::Consistent).build(root, beta)
}

/// A member shared by two blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub member: NodeId,
    pub a_distance: f64,
    pub b_distance: f64,
}

/// All common members of two blocks, ascending by id, via a linear merge.
pub fn intersect(a: &Pspt, b: &Pspt) -> Vec<Candidate> {
    let mut out = Vec::new();
    merge(a, b, |i, j| {
        out.push(Candidate {
            member: a.members[i],
            a_distance: a.distances[i],
            b_distance: b.distances[j],
        })
    });
    out
}

/// Meeting point minimizing `(a_distance + b_distance, member)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Meeting {
    pub member: NodeId,
    pub a_pos: usize,
    pub b_pos: usize,
    pub distance: f64,
}

const LANES: usize = 4;

#[derive(Clone, Copy)]
struct Lane {
    i: usize,
    j: usize,
    end_i: usize,
    end_j: usize,
    best_d: f64,
    best_i: usize,
    best_j: usize,
}

impl Lane {
    #[inline(always)]
    fn live(&self) -> bool {
        self.i < self.end_i && self.j < self.end_j
    }

    // Free of data-dependent branches.
    #[inline(always)]
    fn step(&mut self, a: &Pspt, b: &Pspt) {
        let (x, y) = (a.members[self.i], b.members[self.j]);
        let d = a.distances[self.i] + b.distances[self.j];
        // ascending member order, so strict `<` keeps the smaller id on ties
        let take = (x == y) & (d < self.best_d);
        self.best_d = if take { d } else { self.best_d };
        self.best_i = if take { self.i } else { self.best_i };
        self.best_j = if take { self.j } else { self.best_j };
        self.i += (x <= y) as usize;
        self.j += (y <= x) as usize;
    }
}

/// Best common member of two blocks, `None` if they are disjoint.
pub fn best_meeting(a: &Pspt, b: &Pspt) -> Option<Meeting> {
    #[cfg(target_arch = "x86_64")]
    if is_x86_feature_detected!("avx2") {
        // SAFETY: the feature was detected at runtime
        return unsafe { simd::best_meeting_avx2(a, b) };
    }
    best_meeting_lanes(a, b)
}

// The id range is cut into a few lanes at members of `a`; each lane is an
// ordinary two-pointer merge, and the lanes advance in lockstep so their
// dependency chains overlap.
fn best_meeting_lanes(a: &Pspt, b: &Pspt) -> Option<Meeting> {
    let (ea, eb) = (&a.members[..], &b.members[..]);
    let lanes = if ea.len() >= 16 * LANES { LANES } else { 1 };
    let mut lane = [Lane {
        i: 0,
        j: 0,
        end_i: 0,
        end_j: 0,
        best_d: f64::INFINITY,
        best_i: usize::MAX,
        best_j: 0,
    }; LANES];
    let mut start = (0, 0);
    for (k, l) in lane.iter_mut().enumerate().take(lanes) {
        let end = if k + 1 == lanes {
            (ea.len(), eb.len())
        } else {
            let cut = ea.len() * (k + 1) / lanes;
            let pivot = ea[cut];
            (cut, eb.partition_point(|&m| m < pivot))
        };
        (l.i, l.j, l.end_i, l.end_j) = (start.0, start.1, end.0, end.1);
        start = end;
    }
    if lanes == LANES {
        while lane.iter().all(Lane::live) {
            for l in lane.iter_mut() {
                l.step(a, b);
            }
        }
    }
    let mut best: Option<Meeting> = None;
    for l in lane.iter_mut().take(lanes) {
        while l.live() {
            l.step(a, b);
        }
        if l.best_i != usize::MAX && best.is_none_or(|m| l.best_d < m.distance) {
            best = Some(Meeting {
                member: ea[l.best_i],
                a_pos: l.best_i,
                b_pos: l.best_j,
                distance: l.best_d,
            });
        }
    }
    best
}

// Compares eight members of each block at a time against all rotations of
// the other window, then finishes with a scalar merge.
#[cfg(target_arch = "x86_64")]
mod simd {
    use super::{Meeting, Pspt};
    use std::arch::x86_64::*;

    // the window loops prefetch this many entries ahead
    const AHEAD: usize = 128;

    struct Best {
        meeting: Option<Meeting>,
    }

    impl Best {
        #[inline(always)]
        fn offer(&mut self, member: u32, distance: f64, a_pos: usize, b_pos: usize) {
            if self.meeting.is_none_or(|m| {
                distance < m.distance || (distance == m.distance && member < m.member)
            }) {
                self.meeting = Some(Meeting {
                    member,
                    a_pos,
                    b_pos,
                    distance,
                });
            }
        }

        fn finish(mut self, a: &Pspt, b: &Pspt, mut i: usize, mut j: usize) -> Option<Meeting> {
            let (am, bm) = (&a.members, &b.members);
            while i < am.len() && j < bm.len() {
                let (x, y) = (am[i], bm[j]);
                if x == y {
                    self.offer(x, a.distances[i] + b.distances[j], i, j);
                }
                i += (x <= y) as usize;
                j += (y <= x) as usize;
            }
            self.meeting
        }
    }

    #[inline(always)]
    unsafe fn prefetch(a: &Pspt, b: &Pspt, i: usize, j: usize) {
        _mm_prefetch::<_MM_HINT_T0>(a.members.as_ptr().wrapping_add(i) as *const i8);
        _mm_prefetch::<_MM_HINT_T0>(b.members.as_ptr().wrapping_add(j) as *const i8);
        _mm_prefetch::<_MM_HINT_T0>(a.distances.as_ptr().wrapping_add(i) as *const i8);
        _mm_prefetch::<_MM_HINT_T0>(b.distances.as_ptr().wrapping_add(j) as *const i8);
    }

    #[inline(always)]
    unsafe fn warm(a: &Pspt, b: &Pspt) {
        for k in (0..AHEAD).step_by(8) {
            prefetch(a, b, k, k);
        }
    }

    /// Distances are read only for matching lanes.
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn best_meeting_avx2(a: &Pspt, b: &Pspt) -> Option<Meeting> {
        let (am, bm) = (&a.members[..], &b.members[..]);
        let mut best = Best { meeting: None };
        warm(a, b);
        let rotate = _mm256_setr_epi32(1, 2, 3, 4, 5, 6, 7, 0);
        let (mut i, mut j) = (0, 0);
        while i + 8 <= am.len() && j + 8 <= bm.len() {
            prefetch(a, b, i + AHEAD, j + AHEAD);
            let va = _mm256_loadu_si256(am.as_ptr().add(i) as *const __m256i);
            let vb = _mm256_loadu_si256(bm.as_ptr().add(j) as *const __m256i);
            let mut eq = _mm256_cmpeq_epi32(va, vb);
            let mut r = vb;
            for _ in 0..7 {
                r = _mm256_permutevar8x32_epi32(r, rotate);
                eq = _mm256_or_si256(eq, _mm256_cmpeq_epi32(va, r));
            }
            let mut mask = _mm256_movemask_ps(_mm256_castsi256_ps(eq)) as u32;
            while mask != 0 {
                let k = mask.trailing_zeros() as usize;
                mask &= mask - 1;
                let x = _mm256_set1_epi32(am[i + k] as i32);
                let hit = _mm256_movemask_ps(_mm256_castsi256_ps(_mm256_cmpeq_epi32(x, vb)));
                let l = hit.trailing_zeros() as usize;
                best.offer(am[i + k], a.distances[i + k] + b.distances[j + l], i + k, j + l);
            }
            let (x, y) = (am[i + 7], bm[j + 7]);
            i += if x <= y { 8 } else { 0 };
            j += if y <= x { 8 } else { 0 };
        }
        best.finish(a, b, i, j)
    }
}

#[inline]
fn merge(a: &Pspt, b: &Pspt, mut on_match: impl FnMut(usize, usize)) {
    let (ea, eb) = (&a.members, &b.members);
    let (mut i, mut j) = (0, 0);
    while i < ea.len() && j < eb.len() {
        let (x, y) = (ea[i], eb[j]);
        if x == y {
            on_match(i, j);
        }
        i += (x <= y) as usize;
        j += (y <= x) as usize;
    }
}
