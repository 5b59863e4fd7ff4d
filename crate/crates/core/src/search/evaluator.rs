//! Leaf evaluators: network priors/value, uniform priors with a random
//! rollout, and an exhaustive oracle for small instances.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::SearchError;
use crate::designenv::{DesignEnv, DesignState};
use crate::learner::RewardStats;
use crate::netmodel::Route;
use crate::neural::{masked_policy, NetParams};

/// Priors aligned with `state.candidates` (empty at terminal states) and a
/// value on the normalized scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub priors: Vec<f64>,
    pub value: f64,
}

pub trait Evaluator {
    fn evaluate(&mut self, env: &DesignEnv, state: &DesignState, rng: &mut ChaCha8Rng) -> Result<Evaluated, SearchError>;
}

/// One forward pass per leaf.
pub struct NeuralEvaluator<'p> {
    pub params: &'p NetParams,
}

impl Evaluator for NeuralEvaluator<'_> {
    fn evaluate(&mut self, env: &DesignEnv, state: &DesignState, _: &mut ChaCha8Rng) -> Result<Evaluated, SearchError> {
        let out = self.params.evaluate(&env.encode(state))?;
        let priors = if state.candidates.is_empty() {
            Vec::new()
        } else {
            let p = masked_policy(&out.logits, &state.mask(out.logits.len()))?;
            state.candidates.iter().map(|&c| p[c]).collect()
        };
        Ok(Evaluated {
            priors,
            value: out.value,
        })
    }
}

/// Completes `state` with uniformly random admissible actions.
pub fn random_completion(env: &DesignEnv, state: &DesignState, rng: &mut impl Rng) -> Result<DesignState, SearchError> {
    let mut s = state.clone();
    while !s.is_done() {
        let a = s.candidates[rng.random_range(0..s.candidates.len())];
        s = env.transition(&s, a)?.state;
    }
    Ok(s)
}

/// Uniform priors; value from one random completion and one simulation,
/// normalized with the running reward statistics.
pub struct RolloutEvaluator {
    pub stats: RewardStats,
    pub eval_seed: u64,
}

impl RolloutEvaluator {
    pub fn new(eval_seed: u64) -> Self {
        Self {
            stats: RewardStats::default(),
            eval_seed,
        }
    }
}

impl Evaluator for RolloutEvaluator {
    fn evaluate(&mut self, env: &DesignEnv, state: &DesignState, rng: &mut ChaCha8Rng) -> Result<Evaluated, SearchError> {
        let m = state.candidates.len();
        let done = random_completion(env, state, rng)?;
        let z = env.evaluate(&done.partial.completed, self.eval_seed)?.reward;
        self.stats.update(z);
        Ok(Evaluated {
            priors: vec![1.0 / m.max(1) as f64; m],
            value: self.stats.normalize(z),
        })
    }
}

/// Uniform priors and the exact best normalized reward reachable from the
/// state, by enumerating every completion. Only for tiny instances.
pub struct OracleEvaluator {
    rewards: HashMap<Vec<Route>, f64>,
    stats: RewardStats,
    cache: HashMap<DesignState, f64>,
}

impl OracleEvaluator {
    /// Enumerates and simulates every complete design reachable from reset.
    pub fn new(env: &DesignEnv, eval_seed: u64) -> Result<Self, SearchError> {
        let mut designs = Vec::new();
        enumerate(env, &env.reset(), &mut designs)?;
        let mut rewards = HashMap::new();
        let mut stats = RewardStats::default();
        for d in designs {
            if rewards.contains_key(&d) {
                continue;
            }
            let r = env.evaluate(&d, eval_seed)?.reward;
            stats.update(r);
            rewards.insert(d, r);
        }
        Ok(Self {
            rewards,
            stats,
            cache: HashMap::new(),
        })
    }

    pub fn design_count(&self) -> usize {
        self.rewards.len()
    }

    /// Best raw reward over completions of `state`.
    pub fn best_reward(&mut self, env: &DesignEnv, state: &DesignState) -> Result<f64, SearchError> {
        if let Some(&v) = self.cache.get(state) {
            return Ok(v);
        }
        let v = if state.is_done() {
            self.rewards[&state.partial.completed]
        } else {
            let mut best = f64::NEG_INFINITY;
            for &a in &state.candidates {
                let next = env.transition(state, a)?.state;
                best = best.max(self.best_reward(env, &next)?);
            }
            best
        };
        self.cache.insert(state.clone(), v);
        Ok(v)
    }

    /// Candidates of `state` whose best completion attains the optimum.
    pub fn optimal_actions(&mut self, env: &DesignEnv, state: &DesignState) -> Result<Vec<usize>, SearchError> {
        let best = self.best_reward(env, state)?;
        let mut out = Vec::new();
        for &a in &state.candidates {
            let next = env.transition(state, a)?.state;
            if self.best_reward(env, &next)? == best {
                out.push(a);
            }
        }
        Ok(out)
    }
}

fn enumerate(env: &DesignEnv, state: &DesignState, out: &mut Vec<Vec<Route>>) -> Result<(), SearchError> {
    if state.is_done() {
        out.push(state.partial.completed.clone());
        return Ok(());
    }
    for &a in &state.candidates {
        enumerate(env, &env.transition(state, a)?.state, out)?;
    }
    Ok(())
}

impl Evaluator for OracleEvaluator {
    fn evaluate(&mut self, env: &DesignEnv, state: &DesignState, _: &mut ChaCha8Rng) -> Result<Evaluated, SearchError> {
        let m = state.candidates.len();
        let best = self.best_reward(env, state)?;
        Ok(Evaluated {
            priors: vec![1.0 / m.max(1) as f64; m],
            value: self.stats.normalize(best),
        })
    }
}
