//! Road graph, OD demand, candidate sets, node-feature encoding and the
//! search-space estimate.

mod demand;
mod encode;
mod file;
pub(crate) mod graph;
mod space;
pub mod synth;

pub use demand::{od_marginals, DemandMatrix};
pub use encode::{col, encode_partial, encode_state, StateEncoder, StateEncoding, EDGE_FEATURES, NODE_FEATURES};
pub use file::{
    load_network, DemandRecord, EdgeRecord, Network, NetworkFile, NodeRecord,
};
pub use graph::{candidate_set, NodeCoord, RoadEdge, RoadGraph};
pub use space::{estimate_from_counts, estimate_search_space, SearchSpaceEstimate};

use thiserror::Error;

/// Ordered node sequence of one route. Validity (simple path on the road
/// graph) is checked by [`RoadGraph::check_route`].
pub type Route = Vec<usize>;

/// Routes finished so far plus the route under construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct PartialDesign {
    pub completed: Vec<Route>,
    pub current: Route,
    pub routes_total: usize,
    pub max_len: usize,
}

impl PartialDesign {
    pub fn new(hub: usize, routes_total: usize, max_len: usize) -> Self {
        Self {
            completed: Vec::with_capacity(routes_total),
            current: vec![hub],
            routes_total,
            max_len,
        }
    }

    /// Last node of the route under construction.
    pub fn frontier(&self) -> Option<usize> {
        self.current.last().copied()
    }

    /// Completed routes followed by the current one (when non-empty).
    pub fn all_routes(&self) -> Vec<Route> {
        let mut routes = self.completed.clone();
        if !self.current.is_empty() {
            routes.push(self.current.clone());
        }
        routes
    }

    pub fn is_complete(&self) -> bool {
        self.completed.len() >= self.routes_total
    }
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("cannot read network file: {0}")]
    Io(#[from] std::io::Error),
    #[error("network file does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate node id {0}")]
    DuplicateNode(i64),
    #[error("duplicate edge between {u} and {v}")]
    DuplicateEdge { u: i64, v: i64 },
    #[error("self-loop on node {0}")]
    SelfLoop(i64),
    #[error("{record} references unknown node {id}")]
    DanglingNode { record: String, id: i64 },
    #[error("{record}: {field} must be {requirement}, got {value}")]
    InvalidValue {
        record: String,
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("network has no nodes")]
    Empty,
    #[error("invalid route {route:?}: {reason}")]
    InvalidRoute { route: Vec<usize>, reason: String },
}
