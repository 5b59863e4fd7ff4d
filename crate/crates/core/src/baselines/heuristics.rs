use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineDesign, BaselineError};
use crate::designenv::{DesignEnv, DesignState};
use crate::search::sample_index;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicKind {
    /// Uniform over candidates.
    Random,
    /// Proportional to demand exchanged with the route under construction.
    DemandCover,
    /// Inversely proportional to the length of the road link.
    ShortestPath,
}

impl HeuristicKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::DemandCover => "demand-cover",
            Self::ShortestPath => "shortest-path",
        }
    }
}

/// `s(i) = sum_{j in current route} D_ij + D_ji` for each candidate.
pub fn demand_scores(env: &DesignEnv, state: &DesignState) -> Vec<f64> {
    let d = env.demand();
    state
        .candidates
        .iter()
        .map(|&i| state.partial.current.iter().map(|&j| d.rate(i, j) + d.rate(j, i)).sum())
        .collect()
}

fn normalized(weights: Vec<f64>) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    if total > 0.0 && total.is_finite() {
        weights.into_iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / weights.len() as f64; weights.len()]
    }
}

/// Sampling distribution over `state.candidates`.
pub fn heuristic_probabilities(kind: HeuristicKind, env: &DesignEnv, state: &DesignState) -> Vec<f64> {
    let m = state.candidates.len();
    match kind {
        HeuristicKind::Random => vec![1.0 / m as f64; m],
        HeuristicKind::DemandCover => normalized(demand_scores(env, state)),
        HeuristicKind::ShortestPath => {
            let frontier = state.partial.frontier().expect("nonempty route under construction");
            normalized(
                state
                    .candidates
                    .iter()
                    .map(|&i| {
                        let len = env.graph().edge_between(frontier, i).map_or(f64::INFINITY, |e| e.length);
                        1.0 / len
                    })
                    .collect(),
            )
        }
    }
}

pub fn heuristic_policy(kind: HeuristicKind, env: &DesignEnv, state: &DesignState, rng: &mut rand_chacha::ChaCha8Rng) -> usize {
    let p = heuristic_probabilities(kind, env, state);
    state.candidates[sample_index(&p, rng)]
}

/// Rolls out a full design with the heuristic and evaluates it once.
pub fn heuristic_design(kind: HeuristicKind, env: &DesignEnv, seed_value: u64) -> Result<BaselineDesign, BaselineError> {
    let mut rng = seed::child_rng(seed_value, 0x6865_7572);
    let mut state = env.reset();
    while !state.is_done() {
        let a = heuristic_policy(kind, env, &state, &mut rng);
        state = env.transition(&state, a)?.state;
    }
    let routes = state.partial.completed;
    let evaluation = env.evaluate(&routes, seed_value)?;
    Ok(BaselineDesign {
        method: kind.name().to_string(),
        routes,
        evaluation,
    })
}

/// Grows a route from `prefix` by uniform random extension until `max_len`
/// or a dead end.
pub fn random_walk_from(env: &DesignEnv, mut route: Vec<usize>, rng: &mut impl Rng) -> Vec<usize> {
    let g = env.graph();
    let max_len = env.config().max_len;
    while route.len() < max_len {
        let frontier = *route.last().expect("route has a start");
        let options: Vec<usize> = g
            .neighbors(frontier)
            .iter()
            .map(|&(nb, _)| nb)
            .filter(|nb| !route.contains(nb))
            .collect();
        if options.is_empty() {
            break;
        }
        route.push(options[rng.random_range(0..options.len())]);
    }
    route
}
