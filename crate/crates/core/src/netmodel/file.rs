use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DemandMatrix, NetError, NodeCoord, RoadEdge, RoadGraph, Route};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: i64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: i64,
    pub v: i64,
    pub length: f64,
    pub free_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandRecord {
    pub o: i64,
    pub d: i64,
    pub rate: f64,
}

/// On-disk network description. Units: meters, meters/second, trips/hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub transit_center: i64,
    #[serde(default)]
    pub demand: Vec<DemandRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_routes: Option<Vec<Vec<i64>>>,
}

/// A validated road graph with its demand and optional reference routes,
/// all in dense node indices.
#[derive(Debug, Clone)]
pub struct Network {
    pub graph: RoadGraph,
    pub demand: DemandMatrix,
    pub real_routes: Option<Vec<Route>>,
}

impl NetworkFile {
    pub fn from_json(text: &str) -> Result<Self, NetError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network file serializes")
    }

    /// Validates the records and re-indexes node ids densely in input order.
    pub fn into_network(self) -> Result<Network, NetError> {
        let mut index = HashMap::with_capacity(self.nodes.len());
        let mut coords = Vec::with_capacity(self.nodes.len());
        let mut source_ids = Vec::with_capacity(self.nodes.len());
        for (k, rec) in self.nodes.iter().enumerate() {
            if index.insert(rec.id, k).is_some() {
                return Err(NetError::DuplicateNode(rec.id));
            }
            for (field, value) in [("x", rec.x), ("y", rec.y)] {
                if !value.is_finite() {
                    return Err(NetError::InvalidValue {
                        record: format!("node {}", rec.id),
                        field,
                        requirement: "finite",
                        value,
                    });
                }
            }
            coords.push(NodeCoord { x: rec.x, y: rec.y });
            source_ids.push(rec.id);
        }
        let lookup = |id: i64, record: &dyn Fn() -> String| {
            index.get(&id).copied().ok_or_else(|| NetError::DanglingNode {
                record: record(),
                id,
            })
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        for rec in &self.edges {
            let what = || format!("edge {}-{}", rec.u, rec.v);
            if rec.u == rec.v {
                return Err(NetError::SelfLoop(rec.u));
            }
            edges.push(RoadEdge {
                u: lookup(rec.u, &what)?,
                v: lookup(rec.v, &what)?,
                length: rec.length,
                free_speed: rec.free_speed,
            });
        }
        let hub = lookup(self.transit_center, &|| "transit_center".to_string())?;
        let graph = RoadGraph::with_source_ids(coords, edges, hub, source_ids)?;

        let mut entries = Vec::with_capacity(self.demand.len());
        for rec in &self.demand {
            let what = || format!("demand {}->{}", rec.o, rec.d);
            if !(rec.rate.is_finite() && rec.rate >= 0.0) {
                return Err(NetError::InvalidValue {
                    record: what(),
                    field: "rate",
                    requirement: "finite and >= 0",
                    value: rec.rate,
                });
            }
            entries.push((lookup(rec.o, &what)?, lookup(rec.d, &what)?, rec.rate));
        }
        let demand = DemandMatrix::from_entries(graph.node_count(), entries)?;

        let real_routes = match self.real_routes {
            None => None,
            Some(routes) => {
                let mut dense = Vec::with_capacity(routes.len());
                for (k, route) in routes.iter().enumerate() {
                    let what = || format!("real route #{k}");
                    let r = route
                        .iter()
                        .map(|&id| lookup(id, &what))
                        .collect::<Result<Route, _>>()?;
                    graph.check_route(&r)?;
                    dense.push(r);
                }
                Some(dense)
            }
        };
        Ok(Network {
            graph,
            demand,
            real_routes,
        })
    }
}

impl Network {
    /// Serializes back to the file schema using the original source ids.
    pub fn to_file(&self) -> NetworkFile {
        let g = &self.graph;
        NetworkFile {
            nodes: g
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, c)| NodeRecord {
                    id: g.source_id(i),
                    x: c.x,
                    y: c.y,
                })
                .collect(),
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeRecord {
                    u: g.source_id(e.u),
                    v: g.source_id(e.v),
                    length: e.length,
                    free_speed: e.free_speed,
                })
                .collect(),
            transit_center: g.source_id(g.transit_center()),
            demand: self
                .demand
                .entries()
                .map(|(o, d, rate)| DemandRecord {
                    o: g.source_id(o),
                    d: g.source_id(d),
                    rate,
                })
                .collect(),
            real_routes: self.real_routes.as_ref().map(|routes| {
                routes
                    .iter()
                    .map(|r| r.iter().map(|&v| g.source_id(v)).collect())
                    .collect()
            }),
        }
    }
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network, NetError> {
    let text = std::fs::read_to_string(path)?;
    NetworkFile::from_json(&text)?.into_network()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIANGLE: &str = r#"{
        "nodes": [{"id": 10, "x": 0, "y": 0}, {"id": 20, "x": 1, "y": 0}, {"id": 30, "x": 0, "y": 1}],
        "edges": [{"u": 10, "v": 20, "length": 1, "free_speed": 1},
                  {"u": 20, "v": 30, "length": 1, "free_speed": 1},
                  {"u": 30, "v": 10, "length": 1, "free_speed": 1}],
        "transit_center": 20,
        "demand": [{"o": 10, "d": 30, "rate": 4.5}],
        "real_routes": [[20, 10, 30]]
    }"#;

    #[test]
    fn loads_and_densifies() {
        let net = NetworkFile::from_json(TRIANGLE).unwrap().into_network().unwrap();
        assert_eq!(net.graph.node_count(), 3);
        assert_eq!(net.graph.edge_count(), 3);
        assert_eq!(net.graph.arcs().len(), 6);
        assert_eq!(net.graph.transit_center(), 1);
        assert_eq!(net.demand.rate(0, 2), 4.5);
        assert_eq!(net.real_routes, Some(vec![vec![1, 0, 2]]));
        assert_eq!(net.graph.dense_id(30), Some(2));
    }

    #[test]
    fn round_trips_through_file() {
        let file = NetworkFile::from_json(TRIANGLE).unwrap();
        let net = file.clone().into_network().unwrap();
        assert_eq!(net.to_file(), file);
    }

    #[test]
    fn reports_offending_records() {
        let self_loop = TRIANGLE.replace(r#""u": 10, "v": 20"#, r#""u": 10, "v": 10"#);
        let err = NetworkFile::from_json(&self_loop).unwrap().into_network().unwrap_err();
        assert!(matches!(err, NetError::SelfLoop(10)));

        let dangling = TRIANGLE.replace(r#""o": 10"#, r#""o": 99"#);
        let err = NetworkFile::from_json(&dangling).unwrap().into_network().unwrap_err();
        assert!(err.to_string().contains("99"), "{err}");

        let negative = TRIANGLE.replace("4.5", "-4.5");
        let err = NetworkFile::from_json(&negative).unwrap().into_network().unwrap_err();
        assert!(err.to_string().contains("rate"), "{err}");

        let dup = TRIANGLE.replace(r#""u": 30, "v": 10"#, r#""u": 20, "v": 10"#);
        let err = NetworkFile::from_json(&dup).unwrap().into_network().unwrap_err();
        assert!(matches!(err, NetError::DuplicateEdge { u: 20, v: 10 }));

        assert!(matches!(
            NetworkFile::from_json("{ not json").unwrap_err(),
            NetError::Parse(_)
        ));
    }
}
