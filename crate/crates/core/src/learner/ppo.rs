use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{LearnerError, LossRecord, PpoConfig, RewardStats};
use crate::designenv::{DesignEnv, DesignState, Evaluation};
use crate::netmodel::Route;
use crate::neural::{clip_grad_norm, masked_policy, ppo_loss, Adam, NetParams, PpoCoefficients, PpoSample};
use crate::search::sample_index;

/// One executed action of a policy rollout.
#[derive(Debug, Clone)]
pub struct PpoStep {
    pub state: DesignState,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub shaping: f64,
}

#[derive(Debug, Clone)]
pub struct PpoEpisode {
    pub steps: Vec<PpoStep>,
    pub routes: Vec<Route>,
    pub evaluation: Evaluation,
    pub env_steps: usize,
}

/// Masked softmax of `logits / temperature`.
pub fn tempered_policy(logits: &[f64], mask: &[bool], temperature: f64) -> Result<Vec<f64>, LearnerError> {
    let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    Ok(masked_policy(&scaled, mask)?)
}

/// Samples a full design from the policy head. Shaping rewards are recorded
/// when `env.shaping` is on.
pub fn rollout_policy(
    env: &DesignEnv,
    params: &NetParams,
    temperature: f64,
    eval_seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<PpoEpisode, LearnerError> {
    let mut state = env.reset();
    let mut steps = Vec::new();
    while !state.is_done() {
        let out = params.evaluate(&env.encode(&state))?;
        let mask = state.mask(out.logits.len());
        let p = tempered_policy(&out.logits, &mask, temperature)?;
        let probs: Vec<f64> = state.candidates.iter().map(|&c| p[c]).collect();
        let action = state.candidates[sample_index(&probs, rng)];
        // Log-probabilities always refer to the untempered policy being trained.
        let log_prob = masked_policy(&out.logits, &mask)?[action].ln();
        let t = env.transition(&state, action)?;
        let shaping = if env.shaping {
            let routes = t.state.routes();
            crate::designenv::shaping_reward(
                env.coverage(&state.routes()),
                env.coverage(&routes),
                crate::transitsim::overlap_ratio(&routes),
                &env.config().weights,
            )
        } else {
            0.0
        };
        steps.push(PpoStep {
            state,
            action,
            log_prob,
            value: out.value,
            shaping,
        });
        state = t.state;
    }
    let routes = state.partial.completed.clone();
    let evaluation = env.evaluate(&routes, eval_seed)?;
    Ok(PpoEpisode {
        steps,
        routes,
        evaluation,
        env_steps: state.env_steps(),
    })
}

/// Generalized advantage estimates; the value after the last step is 0.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let mut adv = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let next = values.get(t + 1).copied().unwrap_or(0.0);
        let delta = rewards[t] + gamma * next - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    adv
}

/// Training sample built from a rollout.
#[derive(Debug, Clone)]
pub struct PpoTarget {
    pub state: DesignState,
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Per-step rewards: scaled shaping, plus the normalized terminal reward on
/// the last step. Stats must already include this episode.
pub fn episode_targets(
    ep: &PpoEpisode,
    shaping_stats: &RewardStats,
    terminal_stats: &RewardStats,
    cfg: &PpoConfig,
) -> Vec<PpoTarget> {
    let n = ep.steps.len();
    let rewards: Vec<f64> = ep
        .steps
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let mut r = shaping_stats.scale(s.shaping);
            if t + 1 == n {
                r += terminal_stats.normalize(ep.evaluation.reward);
            }
            r
        })
        .collect();
    let values: Vec<f64> = ep.steps.iter().map(|s| s.value).collect();
    let adv = gae(&rewards, &values, cfg.gamma, cfg.gae_lambda);
    ep.steps
        .iter()
        .zip(adv)
        .map(|(s, a)| PpoTarget {
            state: s.state.clone(),
            action: s.action,
            old_log_prob: s.log_prob,
            advantage: a,
            ret: a + s.value,
        })
        .collect()
}

/// `epochs` passes of shuffled minibatch updates over `targets`.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    env: &DesignEnv,
    targets: &[PpoTarget],
    params: &mut NetParams,
    adam: &mut Adam,
    cfg: &PpoConfig,
    lr: f64,
    grad_clip: Option<f64>,
    rng: &mut impl Rng,
) -> Result<Vec<LossRecord>, LearnerError> {
    let encodings: Vec<_> = targets.iter().map(|t| env.encode(&t.state)).collect();
    let coef = PpoCoefficients {
        clip: cfg.clip,
        value: cfg.value_coef,
        entropy: cfg.entropy_coef,
    };
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut trace = Vec::new();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let mean = chunk.iter().map(|&i| targets[i].advantage).sum::<f64>() / chunk.len() as f64;
            let var = chunk
                .iter()
                .map(|&i| (targets[i].advantage - mean).powi(2))
                .sum::<f64>()
                / chunk.len() as f64;
            let std = var.sqrt() + 1e-8;
            let samples: Vec<PpoSample> = chunk
                .iter()
                .map(|&i| PpoSample {
                    encoding: &encodings[i],
                    candidates: &targets[i].state.candidates,
                    action: targets[i].action,
                    old_log_prob: targets[i].old_log_prob,
                    advantage: if chunk.len() > 1 {
                        (targets[i].advantage - mean) / std
                    } else {
                        targets[i].advantage
                    },
                    ret: targets[i].ret,
                })
                .collect();
            let mut out = ppo_loss(params, &samples, coef)?;
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
    }
    Ok(trace)
}
