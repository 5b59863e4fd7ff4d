use serde::{Deserialize, Serialize};

use super::EnvConfig;
use crate::netmodel::{DemandMatrix, RoadGraph, Route};
use crate::routegraph::RouteGraph;
use crate::transitsim::{compute_metrics, overlap_ratio, SimulationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub coverage: f64,
    pub service: f64,
    pub wait: f64,
    pub movement: f64,
    pub overlap: f64,
    pub fleet: f64,
    pub utilization: f64,
    /// Per-step coverage gain weight (shaped PPO only).
    pub shaping_coverage: f64,
    /// Per-step overlap penalty weight (shaped PPO only).
    pub shaping_overlap: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            coverage: 60.0,
            service: 45.0,
            wait: 20.0,
            movement: 10.0,
            overlap: 10.0,
            fleet: 2.0,
            utilization: 12.0,
            shaping_coverage: 20.0,
            shaping_overlap: 8.0,
        }
    }
}

impl RewardWeights {
    pub fn all(&self) -> [f64; 9] {
        [
            self.coverage,
            self.service,
            self.wait,
            self.movement,
            self.overlap,
            self.fleet,
            self.utilization,
            self.shaping_coverage,
            self.shaping_overlap,
        ]
    }
}

/// Raw ingredients of the terminal reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    /// Reachable transit share of demand, in [0, 1].
    pub coverage: f64,
    /// Served passengers / all generated transit passengers.
    pub service: f64,
    /// Mean wait over served passengers, minutes.
    pub wait_minutes: f64,
    /// Mean in-vehicle time over served passengers, minutes.
    pub move_minutes: f64,
    pub overlap: f64,
    pub fleet: u32,
    pub routes: usize,
    /// Mean bus occupancy over capacity, in [0, 1].
    pub utilization: f64,
}

/// Share of off-diagonal demand that rides transit between two served nodes
/// connected in the route graph.
pub fn coverage_potential(graph: &RoadGraph, demand: &DemandMatrix, routes: &[Route], alpha: f64) -> f64 {
    let total = demand.trip_total();
    if total <= 0.0 {
        return 0.0;
    }
    let rg = RouteGraph::with_node_count(routes, graph.node_count());
    let comp = rg.components();
    let reachable: f64 = demand
        .trip_entries()
        .filter(|&(o, d, _)| comp[o].is_some() && comp[o] == comp[d])
        .map(|(_, _, r)| r)
        .sum();
    alpha * reachable / total
}

pub fn reward_terms(report: &SimulationReport, routes: &[Route], coverage: f64) -> RewardTerms {
    let m = compute_metrics(report);
    RewardTerms {
        coverage,
        service: if report.n_od > 0 {
            report.n_served() as f64 / report.n_od as f64
        } else {
            0.0
        },
        wait_minutes: m.wait_time,
        move_minutes: m.in_vehicle_time,
        overlap: overlap_ratio(routes),
        fleet: report.fleet.total,
        routes: routes.len(),
        utilization: m.bus_utilization / 100.0,
    }
}

pub fn terminal_reward(t: &RewardTerms, cfg: &EnvConfig) -> f64 {
    let w = &cfg.weights;
    let wait = (t.wait_minutes / cfg.wait_cap_minutes).min(1.0);
    let movement = (t.move_minutes / cfg.move_cap_minutes).min(1.0);
    let fleet = if t.routes > 0 { t.fleet as f64 / t.routes as f64 } else { 0.0 };
    w.coverage * t.coverage + w.service * t.service - w.wait * wait - w.movement * movement - w.overlap * t.overlap
        - w.fleet * fleet
        + w.utilization * t.utilization
}

pub fn shaping_reward(previous_coverage: f64, coverage: f64, overlap: f64, w: &RewardWeights) -> f64 {
    w.shaping_coverage * (coverage - previous_coverage).max(0.0) - w.shaping_overlap * overlap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::graph::tests::{edge, line_nodes};

    fn zero_terms() -> RewardTerms {
        RewardTerms {
            coverage: 0.0,
            service: 0.0,
            wait_minutes: 0.0,
            move_minutes: 0.0,
            overlap: 0.0,
            fleet: 0,
            routes: 1,
            utilization: 0.0,
        }
    }

    #[test]
    fn reward_golden_values() {
        let cfg = EnvConfig::default();
        assert_eq!(terminal_reward(&zero_terms(), &cfg), 0.0);
        let full = RewardTerms {
            coverage: 1.0,
            service: 1.0,
            utilization: 1.0,
            ..zero_terms()
        };
        assert_eq!(terminal_reward(&full, &cfg), 117.0);
        let slow = RewardTerms {
            wait_minutes: 45.0,
            ..zero_terms()
        };
        assert_eq!(terminal_reward(&slow, &cfg), -20.0);
        let half = RewardTerms {
            wait_minutes: 15.0,
            move_minutes: 20.0,
            overlap: 0.25,
            fleet: 8,
            routes: 4,
            ..zero_terms()
        };
        assert_eq!(terminal_reward(&half, &cfg), -10.0 - 5.0 - 2.5 - 4.0);
    }

    #[test]
    fn shaping_examples() {
        let w = RewardWeights::default();
        assert!((shaping_reward(0.2, 0.3, 0.0, &w) - 2.0).abs() < 1e-12);
        assert_eq!(shaping_reward(0.5, 0.4, 0.0, &w), 0.0);
        assert_eq!(shaping_reward(0.4, 0.4, 0.5, &w), -4.0);
    }

    #[test]
    fn coverage_examples() {
        let g = RoadGraph::new(line_nodes(4), (0..3).map(|i| edge(i, i + 1, 1.0)).collect(), 0).unwrap();
        let d = DemandMatrix::from_entries(4, [(0, 3, 2.0), (1, 2, 1.0), (3, 1, 1.0), (2, 2, 7.0)]).unwrap();
        let all = vec![vec![0, 1, 2, 3]];
        assert_eq!(coverage_potential(&g, &d, &all, 1.0), 1.0);
        assert!((coverage_potential(&g, &d, &all, 0.3) - 0.3).abs() < 1e-15);
        let split = vec![vec![0, 1], vec![2, 3]];
        let d2 = DemandMatrix::from_entries(4, [(0, 3, 2.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(coverage_potential(&g, &d2, &split, 1.0), 0.0);
        assert_eq!(coverage_potential(&g, &DemandMatrix::zeros(4), &all, 1.0), 0.0);
    }
}
