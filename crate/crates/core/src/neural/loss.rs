//! Masked policy and the two training objectives.

use std::rc::Rc;

use super::net::{GraphBatch, NetParams};
use super::tape::Tape;
use super::tensor::Matrix;
use super::NeuralError;
use crate::netmodel::StateEncoding;

/// Softmax over the entries where `mask` is true; exact zeros elsewhere.
pub fn masked_policy(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, NeuralError> {
    if logits.len() != mask.len() {
        return Err(NeuralError::Shape(format!(
            "{} logits but mask of length {}",
            logits.len(),
            mask.len()
        )));
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(NeuralError::EmptyMask);
    }
    let mut p: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}

/// Boolean mask of length `n` from a candidate list.
pub fn candidate_mask(n: usize, candidates: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &c in candidates {
        mask[c] = true;
    }
    mask
}

/// Loss value, its parts and per-parameter gradients.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub grads: Vec<Matrix>,
}

impl LossOutput {
    pub fn grad_norm(&self) -> f64 {
        self.grads.iter().map(Matrix::norm_sq).sum::<f64>().sqrt()
    }
}

/// One distillation sample: `pi` is aligned with `candidates`.
#[derive(Debug, Clone, Copy)]
pub struct PolicyValueTarget<'s> {
    pub encoding: &'s StateEncoding,
    pub candidates: &'s [usize],
    pub pi: &'s [f64],
    pub z: f64,
}

fn masks(encodings: &[&StateEncoding], candidates: &[&[usize]]) -> Rc<[bool]> {
    encodings
        .iter()
        .zip(candidates)
        .flat_map(|(e, c)| candidate_mask(e.num_nodes, c))
        .collect()
}

fn check_candidates(enc: &StateEncoding, candidates: &[usize]) -> Result<(), NeuralError> {
    if candidates.is_empty() {
        return Err(NeuralError::EmptyMask);
    }
    if let Some(&c) = candidates.iter().find(|&&c| c >= enc.num_nodes) {
        return Err(NeuralError::Shape(format!("candidate {c} outside {} nodes", enc.num_nodes)));
    }
    Ok(())
}

/// `(1/B) sum_b [ -sum_a pi(a) log p(a) + (v - z)^2 ]`.
pub fn alphatransit_loss(params: &NetParams, samples: &[PolicyValueTarget<'_>]) -> Result<LossOutput, NeuralError> {
    if samples.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    let encodings: Vec<&StateEncoding> = samples.iter().map(|s| s.encoding).collect();
    let batch = GraphBatch::new(&encodings)?;
    let b = samples.len() as f64;
    let mut weights = vec![0.0; batch.node_count()];
    for (k, s) in samples.iter().enumerate() {
        check_candidates(s.encoding, s.candidates)?;
        if s.pi.len() != s.candidates.len() {
            return Err(NeuralError::Shape(format!(
                "target of length {} for {} candidates",
                s.pi.len(),
                s.candidates.len()
            )));
        }
        for (&c, &p) in s.candidates.iter().zip(s.pi) {
            weights[batch.offsets[k] + c] -= p / b;
        }
    }
    let mask = masks(&encodings, &samples.iter().map(|s| s.candidates).collect::<Vec<_>>());
    if let Some(i) = (0..weights.len()).find(|&i| weights[i] != 0.0 && !mask[i]) {
        return Err(NeuralError::TargetOutsideMask(i));
    }

    let mut tape = Tape::new();
    let f = params.forward(&mut tape, &batch, None);
    let logp = tape.masked_log_softmax(f.logits, batch.node_graph.clone(), mask.clone(), batch.graph_count());
    let policy = tape.weighted_sum(logp, weights.into());
    let z = tape.constant(Matrix::column(samples.iter().map(|s| s.z).collect()));
    let diff = tape.sub(f.values, z);
    let sq = tape.square(diff);
    let sq_sum = tape.sum(sq);
    let value = tape.scale(sq_sum, 1.0 / b);
    let loss = tape.add(policy, value);
    let ent = tape.masked_entropy(logp, batch.node_graph.clone(), mask, batch.graph_count());
    let entropy = tape.value(ent).data.iter().sum::<f64>() / b;

    let grads = tape.backward(loss);
    Ok(LossOutput {
        loss: tape.value(loss).data[0],
        policy: tape.value(policy).data[0],
        value: tape.value(value).data[0],
        entropy,
        grads: tape.param_grads(&grads, &params.shapes()),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PpoSample<'s> {
    pub encoding: &'s StateEncoding,
    pub candidates: &'s [usize],
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoCoefficients {
    pub clip: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Clipped surrogate plus value regression minus an entropy bonus, all
/// averaged over the batch.
pub fn ppo_loss(params: &NetParams, samples: &[PpoSample<'_>], coef: PpoCoefficients) -> Result<LossOutput, NeuralError> {
    if samples.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    let encodings: Vec<&StateEncoding> = samples.iter().map(|s| s.encoding).collect();
    let batch = GraphBatch::new(&encodings)?;
    let b = samples.len() as f64;
    let mut picked = Vec::with_capacity(samples.len());
    for (k, s) in samples.iter().enumerate() {
        check_candidates(s.encoding, s.candidates)?;
        if !s.candidates.contains(&s.action) {
            return Err(NeuralError::TargetOutsideMask(batch.offsets[k] + s.action));
        }
        if !s.advantage.is_finite() {
            return Err(NeuralError::NonFinite("advantage"));
        }
        picked.push(batch.offsets[k] + s.action);
    }
    let mask = masks(&encodings, &samples.iter().map(|s| s.candidates).collect::<Vec<_>>());

    let mut tape = Tape::new();
    let f = params.forward(&mut tape, &batch, None);
    let logp = tape.masked_log_softmax(f.logits, batch.node_graph.clone(), mask.clone(), batch.graph_count());
    let chosen = tape.gather(logp, picked.into());
    let old = tape.constant(Matrix::column(samples.iter().map(|s| s.old_log_prob).collect()));
    let log_ratio = tape.sub(chosen, old);
    let ratio = tape.exp(log_ratio);
    let adv = tape.constant(Matrix::column(samples.iter().map(|s| s.advantage).collect()));
    let s1 = tape.mul(ratio, adv);
    let clipped = tape.clamp(ratio, 1.0 - coef.clip, 1.0 + coef.clip);
    let s2 = tape.mul(clipped, adv);
    let surrogate = tape.min(s1, s2);
    let surrogate_sum = tape.sum(surrogate);
    let policy = tape.scale(surrogate_sum, -1.0 / b);

    let ret = tape.constant(Matrix::column(samples.iter().map(|s| s.ret).collect()));
    let diff = tape.sub(f.values, ret);
    let sq = tape.square(diff);
    let sq_sum = tape.sum(sq);
    let value = tape.scale(sq_sum, 1.0 / b);

    let ent = tape.masked_entropy(logp, batch.node_graph.clone(), mask, batch.graph_count());
    let ent_sum = tape.sum(ent);
    let entropy = tape.scale(ent_sum, 1.0 / b);

    let vterm = tape.scale(value, coef.value);
    let eterm = tape.scale(entropy, coef.entropy);
    let partial = tape.add(policy, vterm);
    let loss = tape.sub(partial, eterm);
    let grads = tape.backward(loss);
    Ok(LossOutput {
        loss: tape.value(loss).data[0],
        policy: tape.value(policy).data[0],
        value: tape.value(value).data[0],
        entropy: tape.value(entropy).data[0],
        grads: tape.param_grads(&grads, &params.shapes()),
    })
}
