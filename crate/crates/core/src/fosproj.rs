//! Overlap-normalized segment loads, the max-load frequency projection and
//! fleet sizing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::netmodel::{DemandMatrix, RoadGraph, Route};
use crate::routegraph::{segment, RouteGraph, Segment};

/// Per-route segment loads in passengers/hour, already divided by the number
/// of routes sharing each segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLoads {
    pub per_route: Vec<BTreeMap<Segment, f64>>,
}

impl SegmentLoads {
    pub fn max_load(&self, route: usize) -> f64 {
        self.per_route[route].values().copied().fold(0.0, f64::max)
    }

    pub fn route_count(&self) -> usize {
        self.per_route.len()
    }
}

/// Buses per hour for each route; every component is at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyVector(pub Vec<u32>);

impl FrequencyVector {
    pub fn headway_seconds(&self, route: usize) -> f64 {
        3600.0 / self.0[route] as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FleetPlan {
    pub per_route: Vec<u32>,
    pub total: u32,
}

/// Raw (undivided) per-segment load from routing every served OD pair along
/// its deterministic minimum-hop path on the route graph.
pub fn raw_segment_flows(routes: &[Route], demand: &DemandMatrix, alpha: f64) -> BTreeMap<Segment, f64> {
    let rg = RouteGraph::with_node_count(routes, demand.size());
    let mut flows: BTreeMap<Segment, f64> = rg.segments().keys().map(|&s| (s, 0.0)).collect();
    if alpha == 0.0 {
        return flows;
    }
    let mut current_origin = None;
    let mut tree = None;
    for (o, d, rate) in demand.trip_entries() {
        if !rg.is_served(o) || !rg.is_served(d) {
            continue;
        }
        if current_origin != Some(o) {
            tree = Some(rg.bfs(o));
            current_origin = Some(o);
        }
        let Some(path) = tree.as_ref().and_then(|t| t.path_to(d)) else {
            continue;
        };
        let flow = alpha * rate;
        for w in path.windows(2) {
            *flows.get_mut(&segment(w[0], w[1])).expect("path uses route segments") += flow;
        }
    }
    flows
}

/// Assigns `alpha * D_ij` of every served, connected OD pair to its
/// minimum-hop path and divides each segment's load by the number of routes
/// containing it.
pub fn assign_segment_loads(routes: &[Route], demand: &DemandMatrix, alpha: f64) -> SegmentLoads {
    let flows = raw_segment_flows(routes, demand, alpha);
    let rg = RouteGraph::with_node_count(routes, demand.size());
    let per_route = routes
        .iter()
        .map(|route| {
            route
                .windows(2)
                .map(|w| {
                    let s = segment(w[0], w[1]);
                    let overlap = rg.members(s.0, s.1).len().max(1);
                    (s, flows[&s] / overlap as f64)
                })
                .collect()
        })
        .collect();
    SegmentLoads { per_route }
}

/// `load <= delta_max * capacity * frequency`, the capacity condition.
pub fn segment_feasible(load: f64, capacity: f64, delta_max: f64, frequency: u32) -> bool {
    load <= delta_max * capacity * frequency as f64
}

/// `F_k = max(1, ceil(Q_k,max / (delta_max * capacity)))`.
pub fn max_load_frequencies(loads: &SegmentLoads, capacity: f64, delta_max: f64) -> FrequencyVector {
    assert!(capacity > 0.0 && delta_max > 0.0, "capacity and load factor must be positive");
    FrequencyVector(
        (0..loads.route_count())
            .map(|k| {
                let q = loads.max_load(k);
                let mut f = ((q / (delta_max * capacity)).ceil() as u32).max(1);
                // Rounding in the division can land one below the capacity condition.
                while !segment_feasible(q, capacity, delta_max, f) {
                    f += 1;
                }
                f
            })
            .collect(),
    )
}

/// Brute-force check that the projection is the componentwise-minimal
/// feasible vector among all of `{1..=bound}^K`.
pub fn verify_minimality(loads: &SegmentLoads, capacity: f64, delta_max: f64, bound: u32) -> bool {
    let projection = max_load_frequencies(loads, capacity, delta_max);
    let k = loads.route_count();
    let feasible = |f: &[u32]| {
        (0..k).all(|r| {
            loads.per_route[r]
                .values()
                .all(|&q| segment_feasible(q, capacity, delta_max, f[r]))
        })
    };
    if projection.0.iter().all(|&f| f <= bound) && !feasible(&projection.0) {
        return false;
    }
    // Lowering any component above 1 must break feasibility.
    for r in 0..k {
        if projection.0[r] > 1 {
            let mut lower = projection.0.clone();
            lower[r] -= 1;
            if feasible(&lower) {
                return false;
            }
        }
    }
    let mut f = vec![1u32; k];
    loop {
        if feasible(&f) && f.iter().zip(&projection.0).any(|(a, b)| a < b) {
            return false;
        }
        let mut pos = 0;
        loop {
            if pos == k {
                return true;
            }
            if f[pos] < bound {
                f[pos] += 1;
                break;
            }
            f[pos] = 1;
            pos += 1;
        }
    }
}

/// Round-trip time at free-flow speed plus dwell at every stop, both ways.
pub fn round_trip_seconds(graph: &RoadGraph, route: &[usize], dwell: f64) -> f64 {
    let travel: f64 = route
        .windows(2)
        .map(|w| graph.edge_between(w[0], w[1]).map_or(0.0, |e| e.free_travel_time()))
        .sum();
    2.0 * (travel + dwell * route.len() as f64)
}

/// `count_k = max(1, ceil(T_k / headway_k))` with `T_k` the round-trip time.
pub fn fleet_size(graph: &RoadGraph, routes: &[Route], frequencies: &FrequencyVector, dwell: f64) -> FleetPlan {
    let per_route: Vec<u32> = routes
        .iter()
        .enumerate()
        .map(|(k, route)| buses_for(round_trip_seconds(graph, route, dwell), frequencies.0[k]))
        .collect();
    FleetPlan {
        total: per_route.iter().sum(),
        per_route,
    }
}

pub fn buses_for(round_trip: f64, frequency: u32) -> u32 {
    let headway = 3600.0 / frequency as f64;
    ((round_trip / headway).ceil() as u32).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loads(per_route: Vec<Vec<f64>>) -> SegmentLoads {
        SegmentLoads {
            per_route: per_route
                .into_iter()
                .map(|qs| qs.into_iter().enumerate().map(|(i, q)| ((i, i + 1), q)).collect())
                .collect(),
        }
    }

    #[test]
    fn single_route_carries_through_flow() {
        let d = DemandMatrix::from_entries(3, [(0, 2, 10.0)]).unwrap();
        let l = assign_segment_loads(&[vec![0, 1, 2]], &d, 1.0);
        assert_eq!(l.per_route[0][&(0, 1)], 10.0);
        assert_eq!(l.per_route[0][&(1, 2)], 10.0);
    }

    #[test]
    fn overlap_divides_load() {
        let d = DemandMatrix::from_entries(2, [(0, 1, 10.0)]).unwrap();
        let l = assign_segment_loads(&[vec![0, 1], vec![0, 1]], &d, 1.0);
        assert_eq!(l.per_route[0][&(0, 1)], 5.0);
        assert_eq!(l.per_route[1][&(0, 1)], 5.0);
    }

    #[test]
    fn zero_alpha_zero_loads() {
        let d = DemandMatrix::from_entries(3, [(0, 2, 10.0)]).unwrap();
        let l = assign_segment_loads(&[vec![0, 1, 2]], &d, 0.0);
        assert!(l.per_route[0].values().all(|&q| q == 0.0));
    }

    #[test]
    fn projection_examples() {
        assert_eq!(max_load_frequencies(&loads(vec![vec![0.0], vec![0.0]]), 40.0, 1.0).0, vec![1, 1]);
        assert_eq!(max_load_frequencies(&loads(vec![vec![100.0]]), 40.0, 1.0).0, vec![3]);
        assert_eq!(max_load_frequencies(&loads(vec![vec![40.0]]), 40.0, 1.0).0, vec![1]);
    }

    #[test]
    fn minimality_examples() {
        let l = loads(vec![vec![100.0], vec![0.0]]);
        assert_eq!(max_load_frequencies(&l, 40.0, 1.0).0, vec![3, 1]);
        assert!(verify_minimality(&l, 40.0, 1.0, 6));
        assert!(verify_minimality(&loads(vec![vec![0.0, 0.0]; 3]), 40.0, 1.0, 6));
    }

    #[test]
    fn fleet_examples() {
        assert_eq!(buses_for(3600.0, 2), 2);
        assert_eq!(buses_for(3600.0, 1), 1);
        assert_eq!(buses_for(100.0, 1), 1);
        assert_eq!(buses_for(3601.0, 1), 2);
    }
}
