//! Fixed-step bus/passenger simulator and the evaluation metrics computed
//! from its report.

mod itinerary;
mod metrics;
mod sim;

pub use itinerary::{plan_itinerary, AccessMap, Itinerary, Leg};
pub use metrics::{compute_metrics, overlap_ratio, Metrics, CSV_HEADER};
pub use sim::{car_volumes, simulate, simulate_spawns, simulate_traced, spawn_schedule, SimulationReport, Spawn, StepCounts};

pub use crate::routegraph::RouteGraph;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{NetError, Route};

/// Graph induced by a finalized route set.
pub fn build_route_graph(routes: &[Route]) -> RouteGraph {
    RouteGraph::build(routes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Number of simulation steps.
    pub horizon: u32,
    /// Step length in seconds.
    pub dt: f64,
    pub bus_capacity: u32,
    /// Stop duration at every visited node, seconds.
    pub dwell: f64,
    /// Walking radius, meters, for mapping unserved demand nodes onto the network.
    pub access_radius: f64,
    /// Link slowdown `1 + coefficient * (volume / reference_volume)^exponent`;
    /// a coefficient of 0 disables it.
    pub congestion_coefficient: f64,
    pub congestion_exponent: f64,
    /// Car volume (vehicles/hour) at which the slowdown equals `1 + coefficient`.
    pub congestion_reference_volume: f64,
    /// Spawn times are shifted by a uniform integer in `[-jitter, jitter]` steps.
    pub spawn_jitter: u32,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 10_000,
            dt: 1.0,
            bus_capacity: 40,
            dwell: 60.0,
            access_radius: 500.0,
            congestion_coefficient: 0.0,
            congestion_exponent: 4.0,
            congestion_reference_volume: 1000.0,
            spawn_jitter: 1,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Default settings with the link slowdown switched on.
    pub fn with_congestion() -> Self {
        Self {
            congestion_coefficient: 0.15,
            ..Self::default()
        }
    }

    pub fn horizon_seconds(&self) -> f64 {
        self.horizon as f64 * self.dt
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field: &'static str, requirement: &'static str| {
            Err(SimError::InvalidConfig { field, requirement })
        };
        if self.horizon == 0 {
            return bad("horizon", ">= 1 step");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", "> 0");
        }
        if self.bus_capacity == 0 {
            return bad("bus_capacity", ">= 1");
        }
        if !(self.dwell.is_finite() && self.dwell >= 0.0) {
            return bad("dwell", ">= 0");
        }
        if !(self.access_radius.is_finite() && self.access_radius >= 0.0) {
            return bad("access_radius", ">= 0");
        }
        if !(self.congestion_coefficient.is_finite() && self.congestion_coefficient >= 0.0) {
            return bad("congestion_coefficient", ">= 0");
        }
        if !self.congestion_exponent.is_finite() {
            return bad("congestion_exponent", "finite");
        }
        if !(self.congestion_reference_volume.is_finite() && self.congestion_reference_volume > 0.0) {
            return bad("congestion_reference_volume", "> 0");
        }
        Ok(())
    }

    pub(crate) fn steps(&self, seconds: f64) -> u32 {
        (seconds / self.dt).round() as u32
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("design has no routes")]
    EmptyDesign,
    #[error("{frequencies} frequencies given for {routes} routes")]
    FrequencyMismatch { routes: usize, frequencies: usize },
    #[error("route {route} has frequency 0")]
    ZeroFrequency { route: usize },
    #[error("horizon of {horizon} s is shorter than the {headway} s headway of route {route}")]
    HorizonTooShort { route: usize, headway: f64, horizon: f64 },
    #[error("simulation config: {field} must be {requirement}")]
    InvalidConfig {
        field: &'static str,
        requirement: &'static str,
    },
    #[error(transparent)]
    Route(#[from] NetError),
}
