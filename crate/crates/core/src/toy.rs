//! Tiny fixed instances for tests, demos and exhaustive checks.

use std::sync::Arc;

use crate::designenv::{DesignEnv, EnvConfig, EnvError, Instance};
use crate::netmodel::synth::{generate_city, CityLayout, CityParams};
use crate::netmodel::{DemandMatrix, Network, NodeCoord, RoadEdge, RoadGraph};
use crate::transitsim::SimConfig;

fn build(name: &str, coords: &[(f64, f64)], arcs: &[(usize, usize)], hub: usize, demand: &[(usize, usize, f64)]) -> ToyInstance {
    let nodes: Vec<NodeCoord> = coords.iter().map(|&(x, y)| NodeCoord { x, y }).collect();
    let edges = arcs
        .iter()
        .map(|&(u, v)| RoadEdge {
            u,
            v,
            length: (coords[u].0 - coords[v].0).hypot(coords[u].1 - coords[v].1),
            free_speed: 10.0,
        })
        .collect();
    let graph = RoadGraph::new(nodes, edges, hub).expect("toy graph is valid");
    let demand = DemandMatrix::from_entries(coords.len(), demand.iter().copied()).expect("toy demand is valid");
    ToyInstance {
        name: name.to_string(),
        instance: Arc::new(Instance::new(graph, demand)),
    }
}

#[derive(Debug, Clone)]
pub struct ToyInstance {
    pub name: String,
    pub instance: Arc<Instance>,
}

/// Five graphs with at most five nodes each.
pub fn toy_suite() -> Vec<ToyInstance> {
    vec![
        build(
            "star",
            &[(0.0, 0.0), (400.0, 0.0), (800.0, 0.0), (1200.0, 0.0), (0.0, 400.0)],
            &[(0, 1), (1, 2), (2, 3), (0, 4)],
            0,
            &[(0, 3, 20.0), (4, 2, 10.0)],
        ),
        build(
            "square",
            &[(0.0, 0.0), (500.0, 0.0), (500.0, 500.0), (0.0, 500.0)],
            &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)],
            0,
            &[(1, 3, 30.0), (2, 1, 12.0), (3, 0, 8.0)],
        ),
        build(
            "path",
            &[(0.0, 0.0), (300.0, 0.0), (600.0, 0.0), (900.0, 0.0), (1200.0, 0.0)],
            &[(0, 1), (1, 2), (2, 3), (3, 4)],
            2,
            &[(0, 4, 25.0), (1, 3, 10.0)],
        ),
        build(
            "bowtie",
            &[(0.0, 0.0), (-400.0, 300.0), (-400.0, -300.0), (400.0, 300.0), (400.0, -300.0)],
            &[(0, 1), (0, 2), (1, 2), (0, 3), (0, 4), (3, 4)],
            0,
            &[(1, 4, 15.0), (2, 3, 20.0), (3, 1, 5.0)],
        ),
        build(
            "kite",
            &[(0.0, 0.0), (400.0, 200.0), (400.0, -200.0), (800.0, 0.0)],
            &[(0, 1), (1, 2), (2, 0), (2, 3)],
            0,
            &[(0, 3, 40.0), (1, 3, 10.0)],
        ),
    ]
}

/// Environment on a toy instance with a one-hour horizon.
pub fn toy_env(instance: Arc<Instance>, routes: usize, max_len: usize, alpha: f64) -> Result<DesignEnv, EnvError> {
    let cfg = EnvConfig {
        routes,
        max_len,
        alpha,
        sim: SimConfig {
            horizon: 3600,
            ..SimConfig::default()
        },
        ..EnvConfig::default()
    };
    DesignEnv::new(instance, cfg)
}

/// Seeded `rows x cols` grid city with 500 m blocks.
pub fn grid_city(rows: usize, cols: usize, demand_pairs: usize, seed: u64) -> Network {
    generate_city(&CityParams {
        layout: CityLayout::Grid {
            rows,
            cols,
            spacing: 500.0,
        },
        demand_pairs,
        seed,
        ..CityParams::default()
    })
    .and_then(|f| f.into_network())
    .expect("grid parameters are valid")
}
