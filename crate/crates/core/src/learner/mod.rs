//! Training loops: tree-search self-play with a replay buffer, and PPO.

mod alphatransit;
mod buffer;
mod config;
mod ppo;
mod stats;

#[cfg(test)]
mod tests;

pub use alphatransit::{collect_episode, train_iteration, Episode};
pub use buffer::{ReplayBuffer, ReplayItem};
pub use config::{Method, PpoConfig, TrainRunConfig};
pub use ppo::{episode_targets, gae, ppo_update, rollout_policy, tempered_policy, PpoEpisode, PpoStep, PpoTarget};
pub use stats::{normalize_value, temperature, RewardStats, STATS_EPS, VALUE_CLIP};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::designenv::{DesignEnv, EnvError, Evaluation};
use crate::netmodel::Route;
use crate::neural::{Adam, Checkpoint, NetParams, NeuralError};
use crate::search::{play_episode, EpisodeOptions, NeuralEvaluator, SearchConfig, SearchError};
use crate::seed;

/// Sampling temperature used when evaluating trained policies.
pub const EVAL_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("training config: {0}")]
    Config(String),
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("checkpoint does not match this run: {0}")]
    Resume(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub loss: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub grad_norm: f64,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iteration: u64,
    pub method: Method,
    pub env_steps: u64,
    pub episodes: usize,
    pub mean_z: f64,
    pub smoothed_reward: f64,
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub temperature: f64,
    pub lr: f64,
    pub buffer_len: usize,
    pub wall_seconds: f64,
}

impl LogRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("log record serializes")
    }
}

/// Trainer bookkeeping stored alongside the parameters in checkpoints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub iteration: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub smoothed_reward: Option<f64>,
    /// Terminal rewards (value targets, PPO terminal stream).
    pub reward_stats: RewardStats,
    /// PPO shaping stream.
    pub shaping_stats: RewardStats,
}

pub struct Trainer {
    env: DesignEnv,
    cfg: TrainRunConfig,
    params: NetParams,
    adam: Adam,
    state: TrainerState,
    buffer: ReplayBuffer,
    started: Instant,
}

fn mean_loss(trace: &[LossRecord]) -> LossRecord {
    let n = trace.len().max(1) as f64;
    let sum = |f: fn(&LossRecord) -> f64| trace.iter().map(f).sum::<f64>() / n;
    LossRecord {
        loss: sum(|r| r.loss),
        policy: sum(|r| r.policy),
        value: sum(|r| r.value),
        entropy: sum(|r| r.entropy),
        grad_norm: sum(|r| r.grad_norm),
    }
}

impl Trainer {
    pub fn new(env: DesignEnv, cfg: TrainRunConfig) -> Result<Self, LearnerError> {
        cfg.validate()?;
        let params = NetParams::init(cfg.net.clone(), seed::derive(cfg.seed, 0x1417))?;
        let adam = Adam::new(&params.shapes());
        Ok(Self::assemble(env, cfg, params, adam, TrainerState::default()))
    }

    /// Continues a run. The replay buffer is not persisted and starts empty.
    pub fn resume(env: DesignEnv, cfg: TrainRunConfig, ckpt: &Checkpoint) -> Result<Self, LearnerError> {
        cfg.validate()?;
        let params = ckpt.params()?;
        if params.config != cfg.net {
            return Err(LearnerError::Resume("network config differs".into()));
        }
        let adam = ckpt.optimizer.clone().unwrap_or_else(|| Adam::new(&params.shapes()));
        let state: TrainerState =
            serde_json::from_value(ckpt.state.clone()).map_err(|e| LearnerError::Resume(e.to_string()))?;
        Ok(Self::assemble(env, cfg, params, adam, state))
    }

    fn assemble(env: DesignEnv, cfg: TrainRunConfig, params: NetParams, adam: Adam, state: TrainerState) -> Self {
        let mut env = env;
        env.shaping = cfg.method == Method::Ppo;
        Self {
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            env,
            cfg,
            params,
            adam,
            state,
            started: Instant::now(),
        }
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    pub fn state(&self) -> &TrainerState {
        &self.state
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn env(&self) -> &DesignEnv {
        &self.env
    }

    pub fn progress(&self) -> f64 {
        if self.cfg.env_steps == 0 {
            1.0
        } else {
            (self.state.env_steps as f64 / self.cfg.env_steps as f64).min(1.0)
        }
    }

    pub fn is_finished(&self) -> bool {
        self.state.env_steps >= self.cfg.env_steps
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            &self.params,
            Some(&self.adam),
            self.progress(),
            serde_json::to_value(&self.state).expect("trainer state serializes"),
        )
    }

    /// Runs iterations until the step budget is spent.
    pub fn run(
        &mut self,
        on_log: &mut dyn FnMut(&LogRecord),
        on_checkpoint: &mut dyn FnMut(&Checkpoint),
    ) -> Result<(), LearnerError> {
        while !self.is_finished() {
            let rec = self.iteration()?;
            on_log(&rec);
            if self.cfg.checkpoint_every > 0 && rec.iteration % self.cfg.checkpoint_every as u64 == 0 {
                on_checkpoint(&self.checkpoint());
            }
        }
        on_checkpoint(&self.checkpoint());
        Ok(())
    }

    pub fn iteration(&mut self) -> Result<LogRecord, LearnerError> {
        match self.cfg.method {
            Method::Alphatransit => self.alphatransit_iteration(),
            Method::Ppo => self.ppo_iteration(),
        }
    }

    fn episode_seeds(&self, count: usize) -> Vec<u64> {
        let base = seed::derive(self.cfg.seed, self.state.iteration + 1);
        (0..count as u64).map(|w| seed::derive(base, w)).collect()
    }

    fn note_rewards(&mut self, zs: &[f64]) -> f64 {
        let mean = zs.iter().sum::<f64>() / zs.len().max(1) as f64;
        self.state.smoothed_reward = Some(match self.state.smoothed_reward {
            Some(s) => 0.9 * s + 0.1 * mean,
            None => mean,
        });
        mean
    }

    fn alphatransit_iteration(&mut self) -> Result<LogRecord, LearnerError> {
        let tau = temperature(self.progress());
        let seeds = self.episode_seeds(self.cfg.workers);
        let (env, params, search) = (&self.env, &self.params, &self.cfg.search);
        let episodes: Vec<Episode> = seeds
            .par_iter()
            .map(|&s| collect_episode(env, params, search, tau, s))
            .collect::<Result<_, _>>()?;
        let zs: Vec<f64> = episodes.iter().map(|e| e.z).collect();
        for &z in &zs {
            self.state.reward_stats.update(z);
        }
        for ep in &episodes {
            for item in ep.items() {
                self.buffer.push(item);
            }
        }
        self.state.env_steps += episodes.iter().map(|e| e.env_steps as u64).sum::<u64>();
        self.state.episodes += episodes.len() as u64;
        self.state.iteration += 1;
        let mut rng = seed::child_rng(self.cfg.seed, 0x7261_696e ^ self.state.iteration);
        let trace = train_iteration(
            &self.env,
            &self.buffer,
            &mut self.params,
            &mut self.adam,
            &self.state.reward_stats,
            self.cfg.train_steps_per_iter,
            self.cfg.batch_size,
            self.cfg.lr,
            self.cfg.grad_clip,
            &mut rng,
        )?;
        let mean_z = self.note_rewards(&zs);
        Ok(self.record(episodes.len(), mean_z, &trace, tau, self.cfg.lr))
    }

    fn ppo_iteration(&mut self) -> Result<LogRecord, LearnerError> {
        let cfg = self.cfg.ppo.clone();
        let lr = if cfg.anneal_lr {
            cfg.lr * (1.0 - self.progress()).max(0.0)
        } else {
            cfg.lr
        };
        let seeds = self.episode_seeds(cfg.episodes_per_iter);
        let (env, params) = (&self.env, &self.params);
        let eval_seed = env.config().sim.seed;
        let episodes: Vec<PpoEpisode> = seeds
            .par_iter()
            .map(|&s| rollout_policy(env, params, 1.0, eval_seed, &mut seed::rng(s)))
            .collect::<Result<_, _>>()?;
        for ep in &episodes {
            self.state.reward_stats.update(ep.evaluation.reward);
            for s in &ep.steps {
                self.state.shaping_stats.update(s.shaping);
            }
        }
        let targets: Vec<PpoTarget> = episodes
            .iter()
            .flat_map(|ep| episode_targets(ep, &self.state.shaping_stats, &self.state.reward_stats, &cfg))
            .collect();
        self.state.env_steps += episodes.iter().map(|e| e.env_steps as u64).sum::<u64>();
        self.state.episodes += episodes.len() as u64;
        self.state.iteration += 1;
        let mut rng = seed::child_rng(self.cfg.seed, 0x7070_6f ^ self.state.iteration);
        let trace = ppo_update(
            &self.env,
            &targets,
            &mut self.params,
            &mut self.adam,
            &cfg,
            lr,
            self.cfg.grad_clip,
            &mut rng,
        )?;
        let zs: Vec<f64> = episodes.iter().map(|e| e.evaluation.reward).collect();
        let mean_z = self.note_rewards(&zs);
        Ok(self.record(episodes.len(), mean_z, &trace, 1.0, lr))
    }

    fn record(&self, episodes: usize, mean_z: f64, trace: &[LossRecord], tau: f64, lr: f64) -> LogRecord {
        let m = mean_loss(trace);
        LogRecord {
            iteration: self.state.iteration,
            method: self.cfg.method,
            env_steps: self.state.env_steps,
            episodes,
            mean_z,
            smoothed_reward: self.state.smoothed_reward.unwrap_or(mean_z),
            loss: m.loss,
            policy_loss: m.policy,
            value_loss: m.value,
            entropy: m.entropy,
            temperature: tau,
            lr,
            buffer_len: self.buffer.len(),
            wall_seconds: self.started.elapsed().as_secs_f64(),
        }
    }
}

/// A design produced by a trained network, with its evaluation.
#[derive(Debug, Clone)]
pub struct PolicyDesign {
    pub routes: Vec<Route>,
    pub evaluation: Evaluation,
    pub env_steps: usize,
    pub trace: Option<crate::search::SearchTrace>,
}

/// Builds one design with a trained network: search with `tau = 0.1` and
/// no noise, or direct policy sampling at `tau = 0.1` for PPO.
pub fn design_with_network(
    env: &DesignEnv,
    params: &NetParams,
    method: Method,
    search: &SearchConfig,
    seed_value: u64,
) -> Result<PolicyDesign, LearnerError> {
    let mut rng = seed::child_rng(seed_value, 0x6576_616c);
    let eval_seed = seed_value;
    match method {
        Method::Alphatransit => {
            let out = play_episode(
                env,
                &mut NeuralEvaluator { params },
                search,
                EpisodeOptions {
                    temperature: EVAL_TEMPERATURE,
                    add_noise: false,
                    eval_seed,
                },
                &mut rng,
            )?;
            Ok(PolicyDesign {
                routes: out.routes,
                evaluation: out.evaluation,
                env_steps: out.env_steps,
                trace: Some(out.trace),
            })
        }
        Method::Ppo => {
            let ep = rollout_policy(env, params, EVAL_TEMPERATURE, eval_seed, &mut rng)?;
            Ok(PolicyDesign {
                routes: ep.routes,
                evaluation: ep.evaluation,
                env_steps: ep.env_steps,
                trace: None,
            })
        }
    }
}
