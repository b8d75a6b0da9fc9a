//! In-process simulation of batch shortest-distance queries as three
//! map/shuffle/reduce steps over `p` logical machines.
//!
//! Step 1 emits `<w; (u, d(u, w))>` for every member `w` of each queried
//! node's block. Records are shuffled to the machine owning `w`. Step 2 pairs
//! the values received under each key into `<(u, v); d(u, w) + d(v, w)>`, and
//! Step 3 keeps the minimum per pair. Every stage sorts its input before
//! reducing, so results do not depend on `p` or on scheduling.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{BatchError, GraphError, QueryError};
use crate::graph::{Graph, NodeId};
use crate::index::Index;
use crate::query::chain_from;

pub const DEFAULT_FAN_IN_CAP: usize = 10_000;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Assignment of node keys and pair keys to machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterPlan {
    machines: usize,
    seed: u64,
}

impl ClusterPlan {
    pub fn new(machines: usize, seed: u64) -> Result<Self, BatchError> {
        if machines == 0 {
            return Err(BatchError::NoMachines);
        }
        Ok(ClusterPlan { machines, seed })
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn machine_of(&self, node: NodeId) -> usize {
        (splitmix64(u64::from(node) ^ self.seed) % self.machines as u64) as usize
    }

    pub fn machine_of_pair(&self, pair: (NodeId, NodeId)) -> usize {
        let key = (u64::from(pair.0) << 32) | u64::from(pair.1);
        (splitmix64(key ^ self.seed.rotate_left(29)) % self.machines as u64) as usize
    }

    /// `ceil(alpha * n * sqrt(n) / p)` entries.
    pub fn storage_bound(&self, alpha: f64, node_count: usize) -> u64 {
        let n = node_count as f64;
        (alpha * n * n.sqrt() / self.machines as f64).ceil() as u64
    }
}

/// Step 1 output.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitRecord {
    pub key: NodeId,
    pub source: NodeId,
    pub distance: f64,
    /// Members from `source` to `key`.
    pub subpath: Option<Vec<NodeId>>,
}

/// Step 2 output, keyed by an unordered pair stored as `(min, max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub pair: (NodeId, NodeId),
    pub distance: f64,
    pub meeting: NodeId,
    /// Walk from `pair.0` to `pair.1`.
    pub path: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuerySet {
    /// Every unordered pair of distinct nodes.
    Nodes(Vec<u64>),
    Pairs(Vec<(u64, u64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BatchStatus {
    Ok,
    Trivial,
    NoIntersection,
    Rejected(QueryError),
}

impl BatchStatus {
    pub fn label(&self) -> &'static str {
        match self {
            BatchStatus::Ok => "ok",
            BatchStatus::Trivial => "trivial",
            BatchStatus::NoIntersection => "no_intersection",
            BatchStatus::Rejected(QueryError::UnknownId(_)) => "unknown_id",
            BatchStatus::Rejected(QueryError::NotSurviving(_)) => "not_surviving",
            BatchStatus::Rejected(QueryError::MissingBlock(_)) => "missing_block",
            BatchStatus::Rejected(_) => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub u: u64,
    pub v: u64,
    pub distance: Option<f64>,
    pub meeting_node: Option<u64>,
    /// Original ids from `u` to `v`.
    pub path: Option<Vec<u64>>,
    pub status: BatchStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MachineStats {
    /// Block entries read in Step 1 for the queried nodes this machine owns.
    pub step1_entries: usize,
    /// Entries of every block whose root this machine owns.
    pub resident_entries: usize,
    pub emitted: usize,
    pub received: usize,
    pub keys: usize,
    pub max_fan_in: usize,
    pub pairs_emitted: usize,
    pub pairs_received: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accounting {
    pub storage_bound: u64,
    pub queried_nodes: usize,
    pub per_machine: Vec<MachineStats>,
    pub shuffle_records: usize,
    pub shuffle_bytes: u64,
    pub pair_records: usize,
    pub pair_bytes: u64,
}

impl Accounting {
    pub fn max_step1_entries(&self) -> usize {
        self.per_machine.iter().map(|m| m.step1_entries).max().unwrap_or(0)
    }

    pub fn max_resident_entries(&self) -> usize {
        self.per_machine.iter().map(|m| m.resident_entries).max().unwrap_or(0)
    }

    pub fn max_fan_in(&self) -> usize {
        self.per_machine.iter().map(|m| m.max_fan_in).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRun {
    pub rows: Vec<BatchRow>,
    pub accounting: Accounting,
}

pub fn account(run: &BatchRun) -> &Accounting {
    &run.accounting
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub want_paths: bool,
    pub fan_in_cap: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            want_paths: false,
            fan_in_cap: DEFAULT_FAN_IN_CAP,
        }
    }
}

enum Request {
    Pair { u: u64, v: u64, a: NodeId, b: NodeId },
    Done(BatchRow),
}

fn emit_bytes(r: &EmitRecord) -> u64 {
    16 + 4 * r.subpath.as_ref().map_or(0, Vec::len) as u64
}

fn pair_bytes(r: &PairRecord) -> u64 {
    20 + 4 * r.path.as_ref().map_or(0, Vec::len) as u64
}

/// Runs the three batch steps for `queries` over the machines of `plan`.
pub fn batch_query(
    index: &Index,
    graph: &Graph,
    queries: &QuerySet,
    plan: &ClusterPlan,
    options: BatchOptions,
) -> Result<BatchRun, BatchError> {
    if index.original_ids() != graph.original_ids() {
        return Err(QueryError::Mismatch("node id maps differ".into()).into());
    }
    let check = |id: u64| -> Result<NodeId, QueryError> {
        let u = graph.dense_id(id).ok_or(QueryError::UnknownId(id))?;
        if !index.pruned().survives(u) {
            return Err(QueryError::NotSurviving(id));
        }
        index.block(u).ok_or(QueryError::MissingBlock(id))?;
        Ok(u)
    };
    let (pairs, all_pairs): (Vec<(u64, u64)>, bool) = match queries {
        QuerySet::Pairs(p) => (p.clone(), false),
        QuerySet::Nodes(nodes) => {
            let mut nodes = nodes.clone();
            nodes.sort_unstable();
            nodes.dedup();
            let mut p = Vec::new();
            for (i, &u) in nodes.iter().enumerate() {
                p.extend(nodes[i + 1..].iter().map(|&v| (u, v)));
            }
            (p, true)
        }
    };
    let empty = match queries {
        QuerySet::Pairs(p) => p.is_empty(),
        QuerySet::Nodes(n) => n.is_empty(),
    };
    if empty {
        return Err(BatchError::EmptyQuery);
    }

    let mut queried: Vec<NodeId> = Vec::new();
    let mut partners: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    let mut requests = Vec::with_capacity(pairs.len());
    let rejected = |u: u64, v: u64, e: QueryError| {
        Request::Done(BatchRow {
            u,
            v,
            distance: None,
            meeting_node: None,
            path: None,
            status: BatchStatus::Rejected(e),
        })
    };
    if let QuerySet::Nodes(nodes) = queries {
        // a single node still contributes its Step 1 records
        for &id in nodes {
            if let Ok(u) = check(id) {
                queried.push(u);
            }
        }
    }
    for &(u, v) in &pairs {
        let (a, b) = match (check(u), check(v)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                requests.push(rejected(u, v, e));
                continue;
            }
        };
        if a == b {
            requests.push(Request::Done(BatchRow {
                u,
                v,
                distance: Some(0.0),
                meeting_node: None,
                path: options.want_paths.then(|| vec![u]),
                status: BatchStatus::Trivial,
            }));
            continue;
        }
        queried.push(a);
        queried.push(b);
        if !all_pairs {
            partners.entry(a.min(b)).or_default().push(a.max(b));
        }
        requests.push(Request::Pair { u, v, a, b });
    }
    queried.sort_unstable();
    queried.dedup();
    for list in partners.values_mut() {
        list.sort_unstable();
        list.dedup();
    }

    let p = plan.machines();
    let mut stats = vec![MachineStats::default(); p];
    for block in index.blocks() {
        stats[plan.machine_of(block.root())].resident_entries += block.len();
    }

    // Step 1: each machine emits records for the queried nodes it owns.
    let mut owned: Vec<Vec<NodeId>> = vec![Vec::new(); p];
    for &u in &queried {
        owned[plan.machine_of(u)].push(u);
    }
    let emitted: Vec<Vec<EmitRecord>> = owned
        .par_iter()
        .map(|nodes| {
            let mut out = Vec::new();
            for &u in nodes {
                let block = index.block(u).expect("checked above");
                for (pos, e) in block.entries().enumerate() {
                    out.push(EmitRecord {
                        key: e.member,
                        source: u,
                        distance: e.distance,
                        subpath: options.want_paths.then(|| chain_from(block, pos)),
                    });
                }
            }
            out
        })
        .collect();

    // Shuffle by key.
    let mut shuffle_records = 0;
    let mut shuffle_bytes = 0;
    let mut inbox: Vec<Vec<EmitRecord>> = vec![Vec::new(); p];
    for (m, records) in emitted.into_iter().enumerate() {
        stats[m].step1_entries = owned[m]
            .iter()
            .map(|&u| index.block(u).map_or(0, |b| b.len()))
            .sum();
        stats[m].emitted = records.len();
        shuffle_records += records.len();
        for r in records {
            shuffle_bytes += emit_bytes(&r);
            let dest = plan.machine_of(r.key);
            stats[dest].received += 1;
            inbox[dest].push(r);
        }
    }

    // Step 2: pair values per key.
    let cap = options.fan_in_cap;
    let step2: Vec<Result<(Vec<PairRecord>, usize, usize), (NodeId, usize)>> = inbox
        .into_par_iter()
        .map(|mut records| {
            records.sort_by(|x, y| x.key.cmp(&y.key).then(x.source.cmp(&y.source)));
            let mut out = Vec::new();
            let (mut keys, mut max_fan_in) = (0, 0);
            for group in records.chunk_by(|x, y| x.key == y.key) {
                keys += 1;
                max_fan_in = max_fan_in.max(group.len());
                if group.len() > cap {
                    return Err((group[0].key, group.len()));
                }
                for (i, x) in group.iter().enumerate() {
                    let mut emit = |y: &EmitRecord| {
                        out.push(PairRecord {
                            pair: (x.source, y.source),
                            distance: x.distance + y.distance,
                            meeting: x.key,
                            path: x.subpath.as_ref().zip(y.subpath.as_ref()).map(|(px, py)| {
                                let mut path = px.clone();
                                path.extend(py.iter().rev().skip(1));
                                path
                            }),
                        })
                    };
                    if all_pairs {
                        group[i + 1..].iter().for_each(&mut emit);
                    } else if let Some(list) = partners.get(&x.source) {
                        for &v in list {
                            if let Ok(j) = group[i + 1..].binary_search_by(|y| y.source.cmp(&v)) {
                                emit(&group[i + 1 + j]);
                            }
                        }
                    }
                }
            }
            Ok((out, keys, max_fan_in))
        })
        .collect();

    let mut overflow: Option<(NodeId, usize)> = None;
    let mut pair_inbox: Vec<Vec<PairRecord>> = vec![Vec::new(); p];
    let mut pair_records = 0;
    let mut pair_bytes_total = 0;
    for (m, result) in step2.into_iter().enumerate() {
        match result {
            Err(o) => {
                if overflow.is_none_or(|cur| o.0 < cur.0) {
                    overflow = Some(o);
                }
            }
            Ok((records, keys, max_fan_in)) => {
                stats[m].keys = keys;
                stats[m].max_fan_in = max_fan_in;
                stats[m].pairs_emitted = records.len();
                pair_records += records.len();
                for r in records {
                    pair_bytes_total += pair_bytes(&r);
                    let dest = plan.machine_of_pair(r.pair);
                    stats[dest].pairs_received += 1;
                    pair_inbox[dest].push(r);
                }
            }
        }
    }
    if let Some((key, fan_in)) = overflow {
        return Err(BatchError::FanInOverflow {
            key: graph.original_id(key),
            fan_in,
            cap,
        });
    }

    // Step 3: minimum per pair, ties to the smaller meeting node.
    let best: Vec<Vec<PairRecord>> = pair_inbox
        .into_par_iter()
        .map(|mut records| {
            records.sort_by(|x, y| {
                x.pair
                    .cmp(&y.pair)
                    .then(x.distance.total_cmp(&y.distance))
                    .then(x.meeting.cmp(&y.meeting))
            });
            records.dedup_by(|later, first| later.pair == first.pair);
            records
        })
        .collect();
    let mut found: HashMap<(NodeId, NodeId), PairRecord> = HashMap::new();
    for (m, records) in best.into_iter().enumerate() {
        stats[m].outputs = records.len();
        found.extend(records.into_iter().map(|r| (r.pair, r)));
    }

    let to_original = |nodes: &[NodeId]| nodes.iter().map(|&x| graph.original_id(x)).collect::<Vec<_>>();
    let rows = requests
        .into_iter()
        .map(|req| match req {
            Request::Done(row) => row,
            Request::Pair { u, v, a, b } => match found.get(&(a.min(b), a.max(b))) {
                None => BatchRow {
                    u,
                    v,
                    distance: None,
                    meeting_node: None,
                    path: None,
                    status: BatchStatus::NoIntersection,
                },
                Some(r) => BatchRow {
                    u,
                    v,
                    distance: Some(r.distance),
                    meeting_node: Some(graph.original_id(r.meeting)),
                    path: r.path.as_ref().map(|p| {
                        let mut nodes = to_original(p);
                        if a > b {
                            nodes.reverse();
                        }
                        nodes
                    }),
                    status: BatchStatus::Ok,
                },
            },
        })
        .collect();

    Ok(BatchRun {
        rows,
        accounting: Accounting {
            storage_bound: plan.storage_bound(index.alpha(), index.node_count()),
            queried_nodes: queried.len(),
            per_machine: stats,
            shuffle_records,
            shuffle_bytes,
            pair_records,
            pair_bytes: pair_bytes_total,
        },
    })
}

fn join_ids(ids: &[u64]) -> String {
    ids.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
}

/// Writes `u,v,distance,meeting_node,status[,path]` rows with a header.
pub fn write_results_csv<W: Write>(rows: &[BatchRow], with_paths: bool, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["u", "v", "distance", "meeting_node", "status"];
    if with_paths {
        header.push("path");
    }
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![
            row.u.to_string(),
            row.v.to_string(),
            row.distance.map(|d| d.to_string()).unwrap_or_default(),
            row.meeting_node.map(|m| m.to_string()).unwrap_or_default(),
            row.status.label().to_string(),
        ];
        if with_paths {
            record.push(row.path.as_deref().map(join_ids).unwrap_or_default());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per machine plus a `total` row.
pub fn write_accounting_csv<W: Write>(acc: &Accounting, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "machine",
        "step1_entries",
        "resident_entries",
        "storage_bound",
        "emitted",
        "received",
        "keys",
        "max_fan_in",
        "pairs_emitted",
        "pairs_received",
        "outputs",
    ])?;
    let line = |label: String, m: &MachineStats| {
        vec![
            label,
            m.step1_entries.to_string(),
            m.resident_entries.to_string(),
            acc.storage_bound.to_string(),
            m.emitted.to_string(),
            m.received.to_string(),
            m.keys.to_string(),
            m.max_fan_in.to_string(),
            m.pairs_emitted.to_string(),
            m.pairs_received.to_string(),
            m.outputs.to_string(),
        ]
    };
    for (i, m) in acc.per_machine.iter().enumerate() {
        w.write_record(line(i.to_string(), m))?;
    }
    let total = acc.per_machine.iter().fold(MachineStats::default(), |t, m| MachineStats {
        step1_entries: t.step1_entries + m.step1_entries,
        resident_entries: t.resident_entries + m.resident_entries,
        emitted: t.emitted + m.emitted,
        received: t.received + m.received,
        keys: t.keys + m.keys,
        max_fan_in: t.max_fan_in.max(m.max_fan_in),
        pairs_emitted: t.pairs_emitted + m.pairs_emitted,
        pairs_received: t.pairs_received + m.pairs_received,
        outputs: t.outputs + m.outputs,
    });
    w.write_record(line("total".into(), &total))?;
    w.flush()?;
    Ok(())
}

/// Reads one `u v` pair per line; blank lines and `#` comments are skipped.
pub fn parse_pairs<R: BufRead>(reader: R) -> Result<Vec<(u64, u64)>, GraphError> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<u64>().map_err(|_| GraphError::Parse {
                line: i + 1,
                message: format!("bad node id {s:?}"),
            })
        };
        match fields.as_slice() {
            [u, v] => pairs.push((parse(u)?, parse(v)?)),
            _ => {
                return Err(GraphError::Parse {
                    line: i + 1,
                    message: format!("expected \"u v\", got {} fields", fields.len()),
                })
            }
        }
    }
    Ok(pairs)
}
