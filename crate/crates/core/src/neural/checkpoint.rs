//! JSON checkpoint container.
//!
//! ```text
//! {
//!   "format": "transit-design-checkpoint",
//!   "version": 1,
//!   "config": { NetConfig },
//!   "params": [ { "name": "input.w", "shape": [16, 64], "values": [row-major f64] }, ... ],
//!   "optimizer": { "beta1", "beta2", "eps", "step", "m": [Matrix], "v": [Matrix] } | null,
//!   "progress": f64 in [0, 1],
//!   "state": arbitrary JSON owned by the trainer (reward statistics, counters)
//! }
//! ```
//! Floats are written with round-trip precision, so a save/load cycle is exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::net::{NetConfig, NetParams};
use super::tensor::Matrix;
use super::NeuralError;

pub const FORMAT: &str = "transit-design-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: NetConfig,
    pub params: Vec<NamedTensor>,
    pub optimizer: Option<Adam>,
    pub progress: f64,
    #[serde(default)]
    pub state: serde_json::Value,
}

impl Checkpoint {
    pub fn new(params: &NetParams, optimizer: Option<&Adam>, progress: f64, state: serde_json::Value) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            config: params.config.clone(),
            params: params
                .names
                .iter()
                .zip(&params.tensors)
                .map(|(name, t)| NamedTensor {
                    name: name.clone(),
                    shape: [t.rows, t.cols],
                    values: t.data.clone(),
                })
                .collect(),
            optimizer: optimizer.cloned(),
            progress,
            state,
        }
    }

    /// Rebuilds parameters, checking names and shapes against the config.
    pub fn params(&self) -> Result<NetParams, NeuralError> {
        let mut p = NetParams::init(self.config.clone(), 0)?;
        if p.names.len() != self.params.len() {
            return Err(NeuralError::Checkpoint(format!(
                "{} tensors stored, config needs {}",
                self.params.len(),
                p.names.len()
            )));
        }
        for (i, stored) in self.params.iter().enumerate() {
            let expect = p.tensors[i].shape();
            if stored.name != p.names[i] || (stored.shape[0], stored.shape[1]) != expect {
                return Err(NeuralError::Checkpoint(format!(
                    "tensor #{i} is {} {:?}, expected {} {:?}",
                    stored.name, stored.shape, p.names[i], expect
                )));
            }
            if stored.values.len() != expect.0 * expect.1 {
                return Err(NeuralError::Checkpoint(format!("tensor {} has wrong length", stored.name)));
            }
            p.tensors[i] = Matrix::from_vec(expect.0, expect.1, stored.values.clone());
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let c: Self = serde_json::from_str(text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(NeuralError::Checkpoint(format!(
                "unsupported format {} version {}",
                c.format, c.version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NeuralError> {
        std::fs::write(path, self.to_json()).map_err(|e| NeuralError::Checkpoint(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NeuralError> {
        let text = std::fs::read_to_string(path).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        Self::from_json(&text)
    }
}
