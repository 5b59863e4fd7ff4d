use rand::Rng;

use super::{LearnerError, LossRecord, ReplayBuffer, ReplayItem, RewardStats};
use crate::designenv::{DesignEnv, DesignState};
use crate::netmodel::Route;
use crate::neural::{alphatransit_loss, clip_grad_norm, Adam, NetParams, PolicyValueTarget};
use crate::search::{play_episode, EpisodeOptions, NeuralEvaluator, SearchConfig};
use crate::seed;

/// Search-guided episode: one `(state, pi)` per executed decision, all
/// paired with the episode's raw terminal reward.
#[derive(Debug, Clone)]
pub struct Episode {
    pub tuples: Vec<(DesignState, Vec<f64>)>,
    pub z: f64,
    pub env_steps: usize,
    pub routes: Vec<Route>,
}

impl Episode {
    pub fn items(&self) -> impl Iterator<Item = ReplayItem> + '_ {
        self.tuples.iter().map(|(state, pi)| ReplayItem {
            state: state.clone(),
            pi: pi.clone(),
            z: self.z,
        })
    }
}

pub fn collect_episode(
    env: &DesignEnv,
    params: &NetParams,
    search: &SearchConfig,
    temperature: f64,
    episode_seed: u64,
) -> Result<Episode, LearnerError> {
    let mut rng = seed::rng(episode_seed);
    let mut evaluator = NeuralEvaluator { params };
    let out = play_episode(
        env,
        &mut evaluator,
        search,
        EpisodeOptions {
            temperature,
            add_noise: true,
            eval_seed: env.config().sim.seed,
        },
        &mut rng,
    )?;
    Ok(Episode {
        tuples: out.decisions.into_iter().map(|d| (d.state, d.pi)).collect(),
        z: out.evaluation.reward,
        env_steps: out.env_steps,
        routes: out.routes,
    })
}

/// `steps` Adam updates on batches drawn from `buffer`, with value targets
/// normalized by `stats`.
#[allow(clippy::too_many_arguments)]
pub fn train_iteration(
    env: &DesignEnv,
    buffer: &ReplayBuffer,
    params: &mut NetParams,
    adam: &mut Adam,
    stats: &RewardStats,
    steps: usize,
    batch_size: usize,
    lr: f64,
    grad_clip: Option<f64>,
    rng: &mut impl Rng,
) -> Result<Vec<LossRecord>, LearnerError> {
    if buffer.is_empty() {
        return Err(LearnerError::EmptyBuffer);
    }
    let mut trace = Vec::with_capacity(steps);
    for _ in 0..steps {
        let batch = buffer.sample(batch_size, rng);
        let encodings: Vec<_> = batch.iter().map(|it| env.encode(&it.state)).collect();
        let targets: Vec<PolicyValueTarget> = batch
            .iter()
            .zip(&encodings)
            .map(|(it, enc)| PolicyValueTarget {
                encoding: enc,
                candidates: &it.state.candidates,
                pi: &it.pi,
                z: stats.normalize(it.z),
            })
            .collect();
        let mut out = alphatransit_loss(params, &targets)?;
        let grad_norm = match grad_clip {
            Some(c) => clip_grad_norm(&mut out.grads, c),
            None => out.grad_norm(),
        };
        if !grad_norm.is_finite() {
            return Err(LearnerError::NonFinite("gradient norm"));
        }
        adam.update(&mut params.tensors, &out.grads, lr);
        trace.push(LossRecord {
            loss: out.loss,
            policy: out.policy,
            value: out.value,
            entropy: out.entropy,
            grad_norm,
        });
    }
    Ok(trace)
}
