//! Graph-attention policy-value network.

use std::rc::Rc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use super::tensor::Matrix;
use super::NeuralError;
use crate::netmodel::{StateEncoding, EDGE_FEATURES, NODE_FEATURES};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub input_dim: usize,
    pub edge_dim: usize,
    pub hidden: usize,
    pub widths: Vec<usize>,
    pub heads: Vec<usize>,
    pub actor: Vec<usize>,
    pub critic: Vec<usize>,
    pub leaky_slope: f64,
    pub dropout: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            input_dim: NODE_FEATURES,
            edge_dim: EDGE_FEATURES,
            hidden: 64,
            widths: vec![128, 128, 64, 64],
            heads: vec![8, 8, 4, 4],
            actor: vec![256, 128, 64],
            critic: vec![256, 128, 64],
            leaky_slope: 0.2,
            dropout: 0.0,
        }
    }
}

impl NetConfig {
    /// A narrow variant for tests and quick experiments.
    pub fn small() -> Self {
        Self {
            hidden: 8,
            widths: vec![8, 6],
            heads: vec![2, 2],
            actor: vec![8],
            critic: vec![8],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |what: &str| Err(NeuralError::Config(what.to_string()));
        if self.widths.is_empty() || self.widths.len() != self.heads.len() {
            return bad("widths and heads must be nonempty and of equal length");
        }
        if self.widths.contains(&0) || self.heads.contains(&0) || self.hidden == 0 {
            return bad("widths, heads and hidden must be positive");
        }
        if self.actor.contains(&0) || self.critic.contains(&0) {
            return bad("head layer widths must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }
}

/// Named parameter tensors in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub config: NetConfig,
    pub names: Vec<String>,
    pub tensors: Vec<Matrix>,
}

/// `rows x cols` matrix with orthonormal rows or columns (whichever are
/// fewer), scaled by `gain`.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Matrix {
    let (short, long) = (rows.min(cols), rows.max(cols));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut m = Matrix::zeros(rows, cols);
    for (i, b) in basis.iter().enumerate() {
        for (j, &x) in b.iter().enumerate() {
            if rows <= cols {
                m.data[i * cols + j] = gain * x;
            } else {
                m.data[j * cols + i] = gain * x;
            }
        }
    }
    m
}

struct Builder<'r, R: Rng> {
    rng: &'r mut R,
    names: Vec<String>,
    tensors: Vec<Matrix>,
}

impl<R: Rng> Builder<'_, R> {
    fn push(&mut self, name: String, m: Matrix) {
        self.names.push(name);
        self.tensors.push(m);
    }

    fn ortho(&mut self, name: String, rows: usize, cols: usize, gain: f64) {
        let m = orthogonal(rows, cols, gain, self.rng);
        self.push(name, m);
    }

    fn linear(&mut self, name: &str, d_in: usize, d_out: usize, gain: f64) {
        self.ortho(format!("{name}.w"), d_in, d_out, gain);
        self.push(format!("{name}.b"), Matrix::zeros(1, d_out));
    }

    fn mlp(&mut self, name: &str, d_in: usize, hidden: &[usize], out_gain: f64) {
        let mut d = d_in;
        for (i, &h) in hidden.iter().enumerate() {
            self.linear(&format!("{name}.{i}"), d, h, 1.0);
            d = h;
        }
        self.linear(&format!("{name}.out"), d, 1, out_gain);
    }
}

impl NetParams {
    pub fn init(config: NetConfig, seed_value: u64) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut rng = seed::child_rng(seed_value, 0x4e45_54);
        let mut b = Builder {
            rng: &mut rng,
            names: Vec::new(),
            tensors: Vec::new(),
        };
        b.linear("input", config.input_dim, config.hidden, 1.0);
        let mut d_in = config.hidden;
        for (l, (&c, &h)) in config.widths.iter().zip(&config.heads).enumerate() {
            b.push(format!("block{l}.ln.g"), Matrix::filled(1, d_in, 1.0));
            b.push(format!("block{l}.ln.b"), Matrix::zeros(1, d_in));
            b.ortho(format!("block{l}.att.w"), d_in, h * c, 1.0);
            b.ortho(format!("block{l}.att.we"), config.edge_dim, h * c, 1.0);
            b.ortho(format!("block{l}.att.a"), 1, h * c, 1.0);
            b.push(format!("block{l}.bias"), Matrix::zeros(1, c));
            if d_in != c {
                b.ortho(format!("block{l}.res.w"), d_in, c, 1.0);
            }
            d_in = c;
        }
        let jk_in: usize = config.widths.iter().sum();
        b.linear("jk", jk_in, config.hidden, 1.0);
        b.mlp("actor", config.hidden, &config.actor, 0.01);
        b.mlp("critic", 2 * config.hidden, &config.critic, 1.0);
        let (names, tensors) = (b.names, b.tensors);
        Ok(Self {
            config,
            names,
            tensors,
        })
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.index(name).map(|i| &self.tensors[i])
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors.iter().map(Matrix::shape).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }
}

/// Disjoint union of encoded graphs, with a self-arc added at every node.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub x: Matrix,
    pub src: Rc<[usize]>,
    pub dst: Rc<[usize]>,
    pub edge_attr: Matrix,
    pub node_graph: Rc<[usize]>,
    pub offsets: Vec<usize>,
}

impl GraphBatch {
    pub fn new(encodings: &[&StateEncoding]) -> Result<Self, NeuralError> {
        let total: usize = encodings.iter().map(|e| e.num_nodes).sum();
        let mut x = Vec::with_capacity(total * NODE_FEATURES);
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut attr = Vec::new();
        let mut node_graph = Vec::with_capacity(total);
        let mut offsets = Vec::with_capacity(encodings.len() + 1);
        let mut base = 0;
        for (g, enc) in encodings.iter().enumerate() {
            let n = enc.num_nodes;
            if n == 0 {
                return Err(NeuralError::Shape("empty graph".into()));
            }
            if enc.node_features.len() != n * NODE_FEATURES {
                return Err(NeuralError::Shape(format!(
                    "node features have {} entries, expected {n} x {NODE_FEATURES}",
                    enc.node_features.len()
                )));
            }
            if enc.edge_features.len() != enc.edge_index.len() {
                return Err(NeuralError::Shape(format!(
                    "{} arcs but {} arc feature rows",
                    enc.edge_index.len(),
                    enc.edge_features.len()
                )));
            }
            offsets.push(base);
            x.extend_from_slice(&enc.node_features);
            node_graph.extend(std::iter::repeat_n(g, n));
            let mut incoming = vec![([0.0; EDGE_FEATURES], 0usize); n];
            for (&(u, v), f) in enc.edge_index.iter().zip(&enc.edge_features) {
                if u >= n || v >= n {
                    return Err(NeuralError::Shape(format!("arc ({u}, {v}) outside {n} nodes")));
                }
                if u == v {
                    continue;
                }
                src.push(base + u);
                dst.push(base + v);
                attr.extend_from_slice(f);
                for k in 0..EDGE_FEATURES {
                    incoming[v].0[k] += f[k];
                }
                incoming[v].1 += 1;
            }
            for (v, (sum, count)) in incoming.into_iter().enumerate() {
                src.push(base + v);
                dst.push(base + v);
                attr.extend(sum.iter().map(|s| if count > 0 { s / count as f64 } else { 0.0 }));
            }
            base += n;
        }
        offsets.push(base);
        let arcs = src.len();
        Ok(Self {
            x: Matrix::from_vec(total, NODE_FEATURES, x),
            src: src.into(),
            dst: dst.into(),
            edge_attr: Matrix::from_vec(arcs, EDGE_FEATURES, attr),
            node_graph: node_graph.into(),
            offsets,
        })
    }

    pub fn graph_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.x.rows
    }
}

/// Tape handles for one forward pass over a batch.
pub struct Forward {
    /// `total_nodes x 1`.
    pub logits: Var,
    /// `graphs x 1`.
    pub values: Var,
    /// Attention weights per block, `arcs x heads`.
    pub attention: Vec<Var>,
}

/// Per-graph forward result.
#[derive(Debug, Clone, PartialEq)]
pub struct NetOutput {
    pub logits: Vec<f64>,
    pub value: f64,
}

/// Inverted dropout masks drawn from `rng` when `dropout > 0`.
pub struct Dropout<'r> {
    pub rate: f64,
    pub rng: &'r mut dyn rand::RngCore,
}

impl NetParams {
    /// Records the network on `tape`. Parameter `i` is bound to tape leaf
    /// index `i` so [`Tape::param_grads`] lines up with `tensors`.
    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, batch: &GraphBatch, mut dropout: Option<Dropout<'_>>) -> Forward {
        let cfg = &self.config;
        let p: Vec<Var> = self.tensors.iter().enumerate().map(|(i, t)| tape.param(t, i)).collect();
        let mut next = 0;
        let mut take = || {
            next += 1;
            p[next - 1]
        };
        let n = batch.node_count();
        let g = batch.graph_count();

        let x = tape.constant(batch.x.clone());
        let edge_attr = tape.constant(batch.edge_attr.clone());
        let (w, b) = (take(), take());
        let mut h = tape.matmul(x, w);
        h = tape.add_row(h, b);
        h = tape.tanh(h);

        let mut d_in = cfg.hidden;
        let mut outputs = Vec::with_capacity(cfg.widths.len());
        let mut attention = Vec::with_capacity(cfg.widths.len());
        for (&c, &heads) in cfg.widths.iter().zip(&cfg.heads) {
            let (ln_g, ln_b, att_w, att_we, att_a, bias) = (take(), take(), take(), take(), take(), take());
            let mut hn = tape.layer_norm(h);
            hn = tape.mul_row(hn, ln_g);
            hn = tape.add_row(hn, ln_b);
            let z = tape.matmul(hn, att_w);
            let zs = tape.gather(z, batch.src.clone());
            let zd = tape.gather(z, batch.dst.clone());
            let ze = tape.matmul(edge_attr, att_we);
            let mut s = tape.add(zs, zd);
            s = tape.add(s, ze);
            s = tape.leaky_relu(s, cfg.leaky_slope);
            let score = tape.head_dot(s, att_a, heads);
            let alpha = tape.segment_softmax(score, batch.dst.clone(), n);
            attention.push(alpha);
            let mut m = tape.aggregate(alpha, z, batch.src.clone(), batch.dst.clone(), n, heads);
            m = tape.add_row(m, bias);
            m = tape.tanh(m);
            if let Some(d) = dropout.as_mut().filter(|d| d.rate > 0.0) {
                let keep = 1.0 - d.rate;
                let mask = Matrix::from_vec(
                    n,
                    c,
                    (0..n * c)
                        .map(|_| if d.rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect(),
                );
                let mask = tape.constant(mask);
                m = tape.mul(m, mask);
            }
            let res = if d_in != c {
                let rw = take();
                tape.matmul(h, rw)
            } else {
                h
            };
            h = tape.add(m, res);
            outputs.push(h);
            d_in = c;
        }
        let cat = tape.concat_cols(outputs);
        let (jw, jb) = (take(), take());
        let mut emb = tape.matmul(cat, jw);
        emb = tape.add_row(emb, jb);

        let mut mlp = |tape: &mut Tape<'a>, mut v: Var, layers: usize| {
            for _ in 0..layers {
                let (w, b) = (take(), take());
                v = tape.matmul(v, w);
                v = tape.add_row(v, b);
                v = tape.tanh(v);
            }
            let (w, b) = (take(), take());
            v = tape.matmul(v, w);
            tape.add_row(v, b)
        };
        let logits = mlp(tape, emb, cfg.actor.len());
        let mean = tape.segment_mean(emb, batch.node_graph.clone(), g);
        let max = tape.segment_max(emb, batch.node_graph.clone(), g);
        let pooled = tape.concat_cols(vec![mean, max]);
        let values = mlp(tape, pooled, cfg.critic.len());
        debug_assert_eq!(next, p.len(), "every parameter consumed");
        Forward {
            logits,
            values,
            attention,
        }
    }

    /// Inference over several encodings at once.
    pub fn evaluate_batch(&self, encodings: &[&StateEncoding]) -> Result<Vec<NetOutput>, NeuralError> {
        let batch = GraphBatch::new(encodings)?;
        let mut tape = Tape::new();
        let f = self.forward(&mut tape, &batch, None);
        let logits = tape.value(f.logits);
        let values = tape.value(f.values);
        Ok((0..batch.graph_count())
            .map(|k| NetOutput {
                logits: logits.data[batch.offsets[k]..batch.offsets[k + 1]].to_vec(),
                value: values.data[k],
            })
            .collect())
    }

    pub fn evaluate(&self, encoding: &StateEncoding) -> Result<NetOutput, NeuralError> {
        Ok(self.evaluate_batch(&[encoding])?.remove(0))
    }
}
