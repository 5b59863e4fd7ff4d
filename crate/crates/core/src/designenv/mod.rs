//! Route construction as a sequential decision process, and the evaluation
//! pipeline that scores a finished design.

mod design;
mod reward;

pub use design::{validate_design, DesignFile};
pub use reward::{coverage_potential, reward_terms, shaping_reward, terminal_reward, RewardTerms, RewardWeights};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fosproj::{assign_segment_loads, fleet_size, max_load_frequencies, FleetPlan, FrequencyVector};
use crate::netmodel::{
    candidate_set, DemandMatrix, Network, PartialDesign, RoadGraph, Route, StateEncoder, StateEncoding,
};
use crate::transitsim::{compute_metrics, overlap_ratio, simulate, Metrics, SimConfig, SimError, SimulationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Number of routes K.
    pub routes: usize,
    /// Maximum nodes per route.
    pub max_len: usize,
    /// Modal split: share of demand that rides transit.
    pub alpha: f64,
    pub weights: RewardWeights,
    pub wait_cap_minutes: f64,
    pub move_cap_minutes: f64,
    /// Maximum load factor used by the frequency projection.
    pub delta_max: f64,
    pub sim: SimConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            routes: 16,
            max_len: 14,
            alpha: 0.3,
            weights: RewardWeights::default(),
            wait_cap_minutes: 30.0,
            move_cap_minutes: 40.0,
            delta_max: 1.0,
            sim: SimConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |field: &'static str, requirement: &'static str| Err(EnvError::InvalidConfig { field, requirement });
        if self.routes == 0 {
            return bad("routes", ">= 1");
        }
        if self.max_len < 2 {
            return bad("max_len", ">= 2");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", "in [0, 1]");
        }
        if !self.weights.all().iter().all(|w| w.is_finite() && *w >= 0.0) {
            return bad("weights", "finite and >= 0");
        }
        if !(self.wait_cap_minutes > 0.0 && self.move_cap_minutes > 0.0) {
            return bad("wait/move caps", "> 0");
        }
        if !(self.delta_max.is_finite() && self.delta_max > 0.0) {
            return bad("delta_max", "> 0");
        }
        self.sim.validate()?;
        Ok(())
    }

    /// Upper bound on executed actions per episode.
    pub fn max_actions(&self) -> usize {
        self.routes * (self.max_len - 1)
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("node {action} is not an admissible extension; admissible: {admissible:?}")]
    InvalidAction { action: usize, admissible: Vec<usize> },
    #[error("episode is already complete")]
    EpisodeDone,
    #[error("environment config: {field} must be {requirement}")]
    InvalidConfig {
        field: &'static str,
        requirement: &'static str,
    },
    #[error("transit center {0} has no road edges")]
    IsolatedHub(i64),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Read-only data shared by every environment on one network.
#[derive(Debug)]
pub struct Instance {
    pub graph: RoadGraph,
    pub demand: DemandMatrix,
    pub real_routes: Option<Vec<Route>>,
    pub encoder: StateEncoder,
}

impl Instance {
    pub fn new(graph: RoadGraph, demand: DemandMatrix) -> Self {
        let encoder = StateEncoder::new(&graph, &demand);
        Self {
            graph,
            demand,
            real_routes: None,
            encoder,
        }
    }

    pub fn from_network(net: Network) -> Self {
        let mut inst = Self::new(net.graph, net.demand);
        inst.real_routes = net.real_routes;
        inst
    }
}

/// Partial design plus the bookkeeping the search and learners need.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DesignState {
    pub partial: PartialDesign,
    /// Admissible next nodes, ascending. Empty once the episode is done.
    pub candidates: Vec<usize>,
    /// Actions executed so far.
    pub actions: usize,
    /// Forced route finalizations so far.
    pub forced: usize,
}

impl DesignState {
    pub fn is_done(&self) -> bool {
        self.partial.is_complete()
    }

    /// Environment steps: executed actions plus forced finalizations.
    pub fn env_steps(&self) -> usize {
        self.actions + self.forced
    }

    pub fn routes(&self) -> Vec<Route> {
        self.partial.all_routes()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &c in &self.candidates {
            m[c] = true;
        }
        m
    }
}

/// Result of applying one action, before any simulation.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: DesignState,
    pub route_finalized: bool,
    /// Forced finalizations triggered after the action (dead ends).
    pub forced: usize,
    pub done: bool,
}

/// Full scoring of a finished design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub frequencies: FrequencyVector,
    pub fleet: FleetPlan,
    pub report: SimulationReport,
    pub metrics: Metrics,
    pub terms: RewardTerms,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: DesignState,
    pub route_finalized: bool,
    pub forced: usize,
    pub episode_done: bool,
    pub shaping_reward: Option<f64>,
    /// Present exactly when `episode_done`.
    pub terminal: Option<Evaluation>,
}

impl StepOutcome {
    pub fn terminal_reward(&self) -> Option<f64> {
        self.terminal.as_ref().map(|e| e.reward)
    }
}

/// Route construction environment. Cheap to clone; the instance is shared.
#[derive(Debug)]
pub struct DesignEnv {
    instance: Arc<Instance>,
    cfg: EnvConfig,
    /// Emit shaping rewards from [`DesignEnv::step`].
    pub shaping: bool,
    simulations: AtomicU64,
}

impl Clone for DesignEnv {
    fn clone(&self) -> Self {
        Self {
            instance: Arc::clone(&self.instance),
            cfg: self.cfg.clone(),
            shaping: self.shaping,
            simulations: AtomicU64::new(0),
        }
    }
}

impl DesignEnv {
    pub fn new(instance: Arc<Instance>, cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let hub = instance.graph.transit_center();
        if instance.graph.degree(hub) == 0 {
            return Err(EnvError::IsolatedHub(instance.graph.source_id(hub)));
        }
        Ok(Self {
            instance,
            cfg,
            shaping: false,
            simulations: AtomicU64::new(0),
        })
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn graph(&self) -> &RoadGraph {
        &self.instance.graph
    }

    pub fn demand(&self) -> &DemandMatrix {
        &self.instance.demand
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Simulator runs performed by this environment.
    pub fn simulations(&self) -> u64 {
        self.simulations.load(Ordering::Relaxed)
    }

    pub fn reset(&self) -> DesignState {
        let partial = PartialDesign::new(self.graph().transit_center(), self.cfg.routes, self.cfg.max_len);
        let candidates = candidate_set(self.graph(), &partial);
        DesignState {
            partial,
            candidates,
            actions: 0,
            forced: 0,
        }
    }

    pub fn encode(&self, state: &DesignState) -> StateEncoding {
        self.instance.encoder.encode(&state.partial, &state.candidates)
    }

    /// Applies `action` and any forced finalizations that follow it.
    pub fn transition(&self, state: &DesignState, action: usize) -> Result<Transition, EnvError> {
        if state.is_done() {
            return Err(EnvError::EpisodeDone);
        }
        if state.candidates.binary_search(&action).is_err() {
            return Err(EnvError::InvalidAction {
                action,
                admissible: state.candidates.clone(),
            });
        }
        let hub = self.graph().transit_center();
        let mut next = state.clone();
        next.actions += 1;
        next.partial.current.push(action);
        let mut route_finalized = false;
        let mut forced = 0;
        let finalize = |p: &mut PartialDesign| {
            let route = std::mem::take(&mut p.current);
            p.completed.push(route);
            if !p.is_complete() {
                p.current = vec![hub];
            }
        };
        if next.partial.current.len() >= self.cfg.max_len {
            finalize(&mut next.partial);
            route_finalized = true;
        }
        loop {
            if next.partial.is_complete() {
                next.candidates.clear();
                break;
            }
            next.candidates = candidate_set(self.graph(), &next.partial);
            if !next.candidates.is_empty() {
                break;
            }
            // Dead end: close the route without consuming an action.
            finalize(&mut next.partial);
            route_finalized = true;
            forced += 1;
        }
        next.forced += forced;
        let done = next.is_done();
        Ok(Transition {
            state: next,
            route_finalized,
            forced,
            done,
        })
    }

    /// [`DesignEnv::transition`] plus rewards; runs the evaluation pipeline
    /// once when the last route closes.
    pub fn step(&self, state: &DesignState, action: usize) -> Result<StepOutcome, EnvError> {
        let t = self.transition(state, action)?;
        let shaping_reward = self.shaping.then(|| {
            let before = self.coverage(&state.routes());
            let routes = t.state.routes();
            let after = self.coverage(&routes);
            shaping_reward(before, after, overlap_ratio(&routes), &self.cfg.weights)
        });
        let terminal = if t.done {
            Some(self.evaluate(&t.state.partial.completed, self.cfg.sim.seed)?)
        } else {
            None
        };
        Ok(StepOutcome {
            state: t.state,
            route_finalized: t.route_finalized,
            forced: t.forced,
            episode_done: t.done,
            shaping_reward,
            terminal,
        })
    }

    pub fn coverage(&self, routes: &[Route]) -> f64 {
        coverage_potential(self.graph(), self.demand(), routes, self.cfg.alpha)
    }

    /// Frequency projection, fleet sizing, one simulation and the reward.
    pub fn evaluate(&self, routes: &[Route], seed: u64) -> Result<Evaluation, EnvError> {
        let g = self.graph();
        for route in routes {
            g.check_route(route).map_err(|e| EnvError::InvalidDesign(e.to_string()))?;
        }
        let cfg = &self.cfg;
        let loads = assign_segment_loads(routes, self.demand(), cfg.alpha);
        let frequencies = max_load_frequencies(&loads, cfg.sim.bus_capacity as f64, cfg.delta_max);
        let fleet = fleet_size(g, routes, &frequencies, cfg.sim.dwell);
        let sim_cfg = SimConfig {
            seed,
            ..cfg.sim.clone()
        };
        self.simulations.fetch_add(1, Ordering::Relaxed);
        let report = simulate(g, routes, &frequencies, &fleet, self.demand(), cfg.alpha, &sim_cfg)?;
        let metrics = compute_metrics(&report);
        let terms = reward_terms(&report, routes, self.coverage(routes));
        let reward = terminal_reward(&terms, cfg);
        Ok(Evaluation {
            frequencies,
            fleet,
            report,
            metrics,
            terms,
            reward,
        })
    }
}

/// One executed decision in an episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub route_index: usize,
    /// Source ids.
    pub current_route: Vec<i64>,
    pub candidates: usize,
    pub action: i64,
    pub route_finalized: bool,
    pub forced: usize,
    pub shaping_reward: Option<f64>,
}

/// Replayable record of one episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
    pub design: DesignFile,
    pub evaluation: Option<Evaluation>,
}

impl EpisodeTrace {
    pub fn new() -> Self {
        Self {
            steps: Vec::new(),
            design: DesignFile::default(),
            evaluation: None,
        }
    }

    pub fn record(&mut self, graph: &RoadGraph, before: &DesignState, action: usize, out: &StepOutcome) {
        self.steps.push(TraceStep {
            step: self.steps.len(),
            route_index: before.partial.completed.len(),
            current_route: before.partial.current.iter().map(|&v| graph.source_id(v)).collect(),
            candidates: before.candidates.len(),
            action: graph.source_id(action),
            route_finalized: out.route_finalized,
            forced: out.forced,
            shaping_reward: out.shaping_reward,
        });
        if let Some(eval) = &out.terminal {
            self.design = DesignFile::from_routes(graph, &out.state.partial.completed, "", 0);
            self.evaluation = Some(eval.clone());
        }
    }
}

impl Default for EpisodeTrace {
    fn default() -> Self {
        Self::new()
    }
}
