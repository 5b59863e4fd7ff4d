use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::netmodel::{RoadGraph, Route};

/// On-disk design: routes as source node ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    #[serde(default)]
    pub method: String,
    #[serde(default)]
    pub seed: u64,
    pub transit_center: i64,
    pub routes: Vec<Vec<i64>>,
}

impl DesignFile {
    pub fn from_routes(graph: &RoadGraph, routes: &[Route], method: &str, seed: u64) -> Self {
        Self {
            method: method.to_string(),
            seed,
            transit_center: graph.source_id(graph.transit_center()),
            routes: routes
                .iter()
                .map(|r| r.iter().map(|&v| graph.source_id(v)).collect())
                .collect(),
        }
    }

    /// Maps back to dense ids and checks every route is a simple path.
    pub fn to_routes(&self, graph: &RoadGraph) -> Result<Vec<Route>, EnvError> {
        let routes = self
            .routes
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&id| {
                        graph
                            .dense_id(id)
                            .ok_or_else(|| EnvError::InvalidDesign(format!("unknown node id {id}")))
                    })
                    .collect::<Result<Route, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        validate_design(graph, &routes, None, false)?;
        Ok(routes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        serde_json::from_str(text).map_err(|e| EnvError::InvalidDesign(e.to_string()))
    }
}

/// Every route is a non-empty simple path on the road graph. With
/// `shape = Some((K, L_max))` there must be exactly K routes of at most
/// L_max nodes; `from_hub` requires each route to start at the transit center.
pub fn validate_design(
    graph: &RoadGraph,
    routes: &[Route],
    shape: Option<(usize, usize)>,
    from_hub: bool,
) -> Result<(), EnvError> {
    if routes.is_empty() {
        return Err(EnvError::InvalidDesign("no routes".into()));
    }
    if let Some((k, max_len)) = shape {
        if routes.len() != k {
            return Err(EnvError::InvalidDesign(format!("{} routes, expected {k}", routes.len())));
        }
        if let Some(r) = routes.iter().find(|r| r.len() > max_len) {
            return Err(EnvError::InvalidDesign(format!("route {r:?} longer than {max_len} nodes")));
        }
    }
    for route in routes {
        graph
            .check_route(route)
            .map_err(|e| EnvError::InvalidDesign(e.to_string()))?;
        if from_hub && route[0] != graph.transit_center() {
            return Err(EnvError::InvalidDesign(format!(
                "route {route:?} does not start at the transit center"
            )));
        }
    }
    Ok(())
}
