//! Approximate shortest-path queries from precomputed partial shortest path
//! trees (PSPTs).
//!
//! Every node that survives degree-1 pruning stores the first
//! `ceil(alpha * sqrt(n))` nodes settled by a Dijkstra search from it. A query
//! intersects the two endpoint blocks and picks the best common member,
//! falling back to an exact bidirectional search when they share none.

pub mod distributed;
pub mod error;
pub mod eval;
pub mod fixtures;
mod frontier;
pub mod format;
pub mod generate;
pub mod graph;
pub mod index;
pub mod oracle;
pub mod pspt;
pub mod query;

pub use error::{BuildError, FormatError, GraphError, QueryError};
pub use graph::{load_edge_list, prune_degree_one, Graph, NodeId, NodeRole, PrunedView};
pub use index::{build_index, Index};
pub use pspt::{compute_beta, Pspt, PsptEntry, TieOrder};
pub use query::{Path, QueryEngine, QueryOutcome, Resolution};
