//! Non-learned designers: sampling heuristics, a genetic algorithm and tree
//! search with random rollouts.

mod ga;
mod heuristics;


pub use ga::{crossover, ga_optimize, mutate, GaConfig, GaResult, GenerationStats, Individual};
pub use heuristics::{
    demand_scores, heuristic_design, heuristic_policy, heuristic_probabilities, random_walk_from, HeuristicKind,
};

use rayon::prelude::*;
use thiserror::Error;

use crate::designenv::{DesignEnv, EnvError, Evaluation};
use crate::netmodel::Route;
use crate::search::{play_episode, EpisodeOptions, RolloutEvaluator, SearchConfig, SearchError, SearchTrace};
use crate::seed;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("baseline config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone)]
pub struct BaselineDesign {
    pub method: String,
    pub routes: Vec<Route>,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone)]
pub struct PureMctsOutcome {
    pub design: BaselineDesign,
    pub trace: SearchTrace,
    /// Leaf evaluations (simulator runs inside the search) per worker.
    pub rollouts: Vec<u64>,
}

/// Tree search with uniform priors and random-rollout values. Each worker
/// runs an independent search from its own seed; the best design wins.
pub fn pure_mcts_design(
    env: &DesignEnv,
    search: &SearchConfig,
    workers: usize,
    seed_value: u64,
) -> Result<PureMctsOutcome, BaselineError> {
    let runs: Vec<_> = (0..workers.max(1) as u64)
        .into_par_iter()
        .map(|w| {
            let env = env.clone();
            let mut evaluator = RolloutEvaluator::new(seed_value);
            let mut rng = seed::child_rng(seed_value, 0x6d63_7473 + w);
            let out = play_episode(
                &env,
                &mut evaluator,
                search,
                EpisodeOptions {
                    temperature: crate::learner::EVAL_TEMPERATURE,
                    add_noise: false,
                    eval_seed: seed_value,
                },
                &mut rng,
            )?;
            Ok::<_, BaselineError>((out, env.simulations() - 1))
        })
        .collect::<Result<_, _>>()?;
    let rollouts = runs.iter().map(|(_, n)| *n).collect();
    let (best, _) = runs
        .into_iter()
        .reduce(|a, b| if b.0.evaluation.reward > a.0.evaluation.reward { b } else { a })
        .expect("at least one worker");
    Ok(PureMctsOutcome {
        design: BaselineDesign {
            method: "pure-mcts".into(),
            routes: best.routes,
            evaluation: best.evaluation,
        },
        trace: best.trace,
        rollouts,
    })
}
