use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::SimulationReport;
use crate::netmodel::Route;
use crate::routegraph::{segment, Segment};

/// Evaluation metrics derived from a [`SimulationReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Served / reachable generated passengers, percent.
    pub service_rate: f64,
    /// Mean wait over served passengers, minutes.
    pub wait_time: f64,
    /// Completed trips with a transfer, percent of completed trips.
    pub transfer_rate: f64,
    /// Mean wait + in-vehicle time over served passengers, minutes.
    pub journey_time: f64,
    /// Mean in-vehicle time over served passengers, minutes.
    pub in_vehicle_time: f64,
    /// Completed trips per route kilometer.
    pub route_efficiency: f64,
    pub fleet_size: u32,
    /// Mean over buses of time-averaged occupancy / capacity, percent.
    pub bus_utilization: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn compute_metrics(report: &SimulationReport) -> Metrics {
    let served = report.n_served() as f64;
    let utilization = if report.bus_occupancy.is_empty() {
        0.0
    } else {
        let cap = report.bus_capacity as f64;
        report.bus_occupancy.iter().map(|o| o / cap).sum::<f64>() / report.bus_occupancy.len() as f64
    };
    Metrics {
        service_rate: 100.0 * ratio(served, report.n_want as f64),
        wait_time: ratio(report.served_wait_seconds, served) / 60.0,
        transfer_rate: 100.0 * ratio(report.n_transfer as f64, report.n_comp as f64),
        journey_time: ratio(report.served_wait_seconds + report.served_move_seconds, served) / 60.0,
        in_vehicle_time: ratio(report.served_move_seconds, served) / 60.0,
        route_efficiency: ratio(report.n_comp as f64, report.total_route_km),
        fleet_size: report.fleet.total,
        bus_utilization: 100.0 * utilization,
    }
}

/// Mean over used segments of `(c_e - 1) / (K_eff - 1)`, where `c_e` counts
/// routes containing the segment and `K_eff` routes with any segment.
pub fn overlap_ratio(routes: &[Route]) -> f64 {
    let per_route: Vec<BTreeSet<Segment>> = routes
        .iter()
        .map(|r| r.windows(2).map(|w| segment(w[0], w[1])).collect())
        .filter(|s: &BTreeSet<Segment>| !s.is_empty())
        .collect();
    let k_eff = per_route.len();
    if k_eff <= 1 {
        return 0.0;
    }
    let mut counts: BTreeMap<Segment, usize> = BTreeMap::new();
    for set in &per_route {
        for &s in set {
            *counts.entry(s).or_default() += 1;
        }
    }
    let sum: usize = counts.values().map(|c| c - 1).sum();
    sum as f64 / (counts.len() as f64 * (k_eff - 1) as f64)
}

pub const CSV_HEADER: &str = "label,seed,n_od,n_want,n_comp,n_ongoing,n_waiting,n_transfer,\
service_rate,wait_time,transfer_rate,journey_time,route_efficiency,fleet_size,bus_utilization";

impl SimulationReport {
    /// One CSV row under [`CSV_HEADER`].
    pub fn csv_row(&self, label: &str, seed: u64) -> String {
        let m = compute_metrics(self);
        format!(
            "{label},{seed},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n_od,
            self.n_want,
            self.n_comp,
            self.n_ongoing,
            self.n_waiting,
            self.n_transfer,
            m.service_rate,
            m.wait_time,
            m.transfer_rate,
            m.journey_time,
            m.route_efficiency,
            m.fleet_size,
            m.bus_utilization
        )
    }

    /// Counters plus derived metrics as one JSON object.
    pub fn to_json(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("report serializes");
        value["metrics"] = serde_json::to_value(compute_metrics(self)).expect("metrics serialize");
        value
    }
}
