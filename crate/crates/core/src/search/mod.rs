//! Tree search over route construction: PUCT selection, pluggable leaf
//! evaluation, visit-count policies and subtree reuse between decisions.

mod evaluator;
mod tree;


pub use evaluator::{random_completion, Evaluated, Evaluator, NeuralEvaluator, OracleEvaluator, RolloutEvaluator};
pub use tree::{apply_root_noise, puct_select, root_policy, SearchNode, SearchResult, SearchTree};

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::designenv::{DesignEnv, DesignFile, DesignState, EnvError, Evaluation};
use crate::netmodel::Route;
use crate::neural::NeuralError;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("search started from a complete design")]
    TerminalRoot,
    #[error("evaluator returned {got} priors for {expected} candidates")]
    PriorLength { expected: usize, got: usize },
    #[error("evaluating {context}: {source}")]
    Evaluation {
        context: String,
        #[source]
        source: Box<SearchError>,
    },
    #[error("search config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Root visit total per decision.
    pub iterations: usize,
    pub c_puct: f64,
    pub dirichlet_alpha: f64,
    pub noise_eps: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            c_puct: 1.0,
            dirichlet_alpha: 0.3,
            noise_eps: 0.25,
        }
    }
}

impl SearchConfig {
    /// Exploration constant by modal split: 1.0 at low transit share, 1.5 at full.
    pub fn for_alpha(alpha: f64) -> Self {
        Self {
            c_puct: if alpha >= 0.65 { 1.5 } else { 1.0 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.iterations == 0 {
            return Err(SearchError::Config("iterations must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.noise_eps) {
            return Err(SearchError::Config("noise_eps must be in [0, 1]"));
        }
        if !(self.dirichlet_alpha > 0.0) || !(self.c_puct >= 0.0) {
            return Err(SearchError::Config("dirichlet_alpha must be > 0 and c_puct >= 0"));
        }
        Ok(())
    }
}

/// One executed search decision.
#[derive(Debug, Clone)]
pub struct Decision {
    pub state: DesignState,
    /// Visit-count policy over `state.candidates`.
    pub pi: Vec<f64>,
    pub action: usize,
    pub search: SearchResult,
}

/// Per-decision record for the trace file (node ids are source ids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDecision {
    pub step: usize,
    pub route_index: usize,
    pub candidates: Vec<i64>,
    pub priors: Vec<f64>,
    pub visits: Vec<u32>,
    pub q: Vec<f64>,
    pub policy: Vec<f64>,
    pub action: i64,
    pub forced_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub decisions: Vec<TraceDecision>,
    pub design: DesignFile,
    pub reward: f64,
}

impl SearchTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub decisions: Vec<Decision>,
    pub routes: Vec<Route>,
    pub evaluation: Evaluation,
    /// Executed actions plus forced finalizations.
    pub env_steps: usize,
    pub trace: SearchTrace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    /// Visit-count temperature used to derive and sample from the policy.
    pub temperature: f64,
    pub add_noise: bool,
    /// Simulation seed of the final evaluation.
    pub eval_seed: u64,
}

/// Draws an index from a probability vector.
pub fn sample_index(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    WeightedIndex::new(p).map(|w| w.sample(rng)).unwrap_or(0)
}

/// Builds one design by searching at every decision, then evaluates it once.
pub fn play_episode(
    env: &DesignEnv,
    evaluator: &mut dyn Evaluator,
    cfg: &SearchConfig,
    opts: EpisodeOptions,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeOutcome, SearchError> {
    let graph = env.graph();
    let mut state = env.reset();
    let mut tree = SearchTree::new(state.clone());
    let mut decisions = Vec::new();
    let mut trace = Vec::new();
    while !state.is_done() {
        let result = tree.run(env, evaluator, cfg, opts.add_noise, rng)?;
        let pi = root_policy(&result.visits, opts.temperature);
        let a = sample_index(&pi, rng);
        let action = state.candidates[a];
        let t = env.transition(&state, action)?;
        trace.push(TraceDecision {
            step: decisions.len(),
            route_index: state.partial.completed.len(),
            candidates: result.candidates.iter().map(|&c| graph.source_id(c)).collect(),
            priors: result.priors.clone(),
            visits: result.visits.clone(),
            q: result.q.clone(),
            policy: pi.clone(),
            action: graph.source_id(action),
            forced_after: t.forced,
        });
        decisions.push(Decision {
            state: state.clone(),
            pi,
            action,
            search: result,
        });
        tree.reroot(a, &t);
        state = t.state;
    }
    let routes = state.partial.completed.clone();
    let evaluation = env.evaluate(&routes, opts.eval_seed)?;
    let trace = SearchTrace {
        decisions: trace,
        design: DesignFile::from_routes(graph, &routes, "search", opts.eval_seed),
        reward: evaluation.reward,
    };
    Ok(EpisodeOutcome {
        decisions,
        routes,
        env_steps: state.env_steps(),
        evaluation,
        trace,
    })
}
