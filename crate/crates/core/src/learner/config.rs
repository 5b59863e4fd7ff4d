use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::neural::NetConfig;
use crate::search::SearchConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Alphatransit,
    Ppo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub lr: f64,
    pub clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub anneal_lr: bool,
    pub episodes_per_iter: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self::for_alpha(0.3)
    }
}

impl PpoConfig {
    pub fn for_alpha(alpha: f64) -> Self {
        let full = alpha >= 0.65;
        Self {
            lr: if full { 1e-5 } else { 5e-5 },
            clip: if full { 0.1 } else { 0.2 },
            epochs: if full { 4 } else { 8 },
            batch_size: if full { 128 } else { 256 },
            entropy_coef: if full { 0.02 } else { 0.01 },
            value_coef: 0.5,
            gamma: 0.999,
            gae_lambda: 0.95,
            anneal_lr: full,
            episodes_per_iter: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRunConfig {
    pub method: Method,
    /// Environment-step budget.
    pub env_steps: u64,
    pub workers: usize,
    pub train_steps_per_iter: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub buffer_capacity: usize,
    /// Global gradient-norm clip; `None` disables it.
    pub grad_clip: Option<f64>,
    pub search: SearchConfig,
    pub net: NetConfig,
    pub ppo: PpoConfig,
    /// Save a checkpoint every this many iterations (0: only at the end).
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self::for_alpha(0.3)
    }
}

impl TrainRunConfig {
    /// Settings by modal split.
    pub fn for_alpha(alpha: f64) -> Self {
        Self {
            method: Method::Alphatransit,
            env_steps: 1_000_000,
            workers: if alpha >= 0.65 { 16 } else { 8 },
            train_steps_per_iter: 200,
            batch_size: 256,
            lr: 1e-4,
            buffer_capacity: 50_000,
            grad_clip: None,
            search: SearchConfig::for_alpha(alpha),
            net: NetConfig::default(),
            ppo: PpoConfig::for_alpha(alpha),
            checkpoint_every: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::Config(m.to_string()));
        if self.workers == 0 {
            return bad("workers must be >= 1");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch_size and buffer_capacity must be >= 1");
        }
        if !(self.lr > 0.0) || !(self.ppo.lr > 0.0) {
            return bad("learning rates must be > 0");
        }
        let p = &self.ppo;
        if p.epochs == 0 || p.batch_size == 0 || p.episodes_per_iter == 0 {
            return bad("ppo epochs, batch_size and episodes_per_iter must be >= 1");
        }
        if !(0.0..=1.0).contains(&p.gamma) || !(0.0..=1.0).contains(&p.gae_lambda) {
            return bad("gamma and gae_lambda must be in [0, 1]");
        }
        if !(p.clip > 0.0 && p.clip < 1.0) {
            return bad("ppo clip must be in (0, 1)");
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad("grad_clip must be > 0");
            }
        }
        self.search.validate()?;
        self.net.validate()?;
        Ok(())
    }
}
