use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{NetError, PartialDesign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCoord {
    pub x: f64,
    pub y: f64,
}

/// Undirected road segment between dense node indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadEdge {
    pub u: usize,
    pub v: usize,
    /// Meters.
    pub length: f64,
    /// Meters per second.
    pub free_speed: f64,
}

impl RoadEdge {
    pub fn other(&self, node: usize) -> usize {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn free_travel_time(&self) -> f64 {
        self.length / self.free_speed
    }
}

/// Undirected road graph with densely indexed nodes.
///
/// Adjacency lists are sorted by neighbor index so every traversal that walks
/// them visits neighbors in ascending id order.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    nodes: Vec<NodeCoord>,
    edges: Vec<RoadEdge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    transit_center: usize,
    source_ids: Vec<i64>,
}

impl RoadGraph {
    /// Builds a graph whose source ids are the dense indices themselves.
    pub fn new(
        nodes: Vec<NodeCoord>,
        edges: Vec<RoadEdge>,
        transit_center: usize,
    ) -> Result<Self, NetError> {
        let ids = (0..nodes.len() as i64).collect();
        Self::with_source_ids(nodes, edges, transit_center, ids)
    }

    pub fn with_source_ids(
        nodes: Vec<NodeCoord>,
        edges: Vec<RoadEdge>,
        transit_center: usize,
        source_ids: Vec<i64>,
    ) -> Result<Self, NetError> {
        let n = nodes.len();
        if n == 0 {
            return Err(NetError::Empty);
        }
        let sid = |i: usize| source_ids.get(i).copied().unwrap_or(i as i64);
        if transit_center >= n {
            return Err(NetError::DanglingNode {
                record: "transit_center".into(),
                id: transit_center as i64,
            });
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = HashSet::new();
        for (k, e) in edges.iter().enumerate() {
            for end in [e.u, e.v] {
                if end >= n {
                    return Err(NetError::DanglingNode {
                        record: format!("edge #{k}"),
                        id: end as i64,
                    });
                }
            }
            if e.u == e.v {
                return Err(NetError::SelfLoop(sid(e.u)));
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            if !seen.insert(key) {
                return Err(NetError::DuplicateEdge {
                    u: sid(e.u),
                    v: sid(e.v),
                });
            }
            for (field, value) in [("length", e.length), ("free_speed", e.free_speed)] {
                if !(value.is_finite() && value > 0.0) {
                    return Err(NetError::InvalidValue {
                        record: format!("edge {}-{}", sid(e.u), sid(e.v)),
                        field,
                        requirement: "finite and > 0",
                        value,
                    });
                }
            }
            adjacency[e.u].push((e.v, k));
            adjacency[e.v].push((e.u, k));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            nodes,
            edges,
            adjacency,
            transit_center,
            source_ids,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeCoord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn transit_center(&self) -> usize {
        self.transit_center
    }

    pub fn source_id(&self, node: usize) -> i64 {
        self.source_ids[node]
    }

    pub fn source_ids(&self) -> &[i64] {
        &self.source_ids
    }

    pub fn dense_id(&self, source: i64) -> Option<usize> {
        self.source_ids.iter().position(|&s| s == source)
    }

    /// `(neighbor, edge index)` pairs in ascending neighbor order.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<&RoadEdge> {
        self.adjacency[u]
            .binary_search_by_key(&v, |&(nb, _)| nb)
            .ok()
            .map(|pos| &self.edges[self.adjacency[u][pos].1])
    }

    /// Directed arcs: `(u, v)` followed by `(v, u)` for every edge, in edge order.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .flat_map(|e| [(e.u, e.v), (e.v, e.u)])
            .collect()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.nodes[a], self.nodes[b]);
        (p.x - q.x).hypot(p.y - q.y)
    }

    /// Sum of link lengths along a route, in meters.
    pub fn route_length(&self, route: &[usize]) -> f64 {
        route
            .windows(2)
            .map(|w| self.edge_between(w[0], w[1]).map_or(0.0, |e| e.length))
            .sum()
    }

    /// Checks that `route` is a non-empty simple path on this graph.
    pub fn check_route(&self, route: &[usize]) -> Result<(), NetError> {
        let bad = |reason: String| NetError::InvalidRoute {
            route: route.to_vec(),
            reason,
        };
        if route.is_empty() {
            return Err(bad("empty route".into()));
        }
        let mut seen = HashSet::with_capacity(route.len());
        for &node in route {
            if node >= self.node_count() {
                return Err(bad(format!("node {node} out of range")));
            }
            if !seen.insert(node) {
                return Err(bad(format!("node {node} repeats")));
            }
        }
        for w in route.windows(2) {
            if self.edge_between(w[0], w[1]).is_none() {
                return Err(bad(format!("no road edge between {} and {}", w[0], w[1])));
            }
        }
        Ok(())
    }
}

/// Unvisited one-hop neighbors of the frontier, ascending.
///
/// An empty result means the current route cannot be extended.
pub fn candidate_set(graph: &RoadGraph, partial: &PartialDesign) -> Vec<usize> {
    match partial.frontier() {
        Some(frontier) => graph
            .neighbors(frontier)
            .iter()
            .map(|&(nb, _)| nb)
            .filter(|nb| !partial.current.contains(nb))
            .collect(),
        None => Vec::new(),
    }
}
