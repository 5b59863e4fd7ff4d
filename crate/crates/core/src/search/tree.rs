use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::evaluator::Evaluator;
use super::{SearchConfig, SearchError};
use crate::designenv::{DesignEnv, DesignState, Transition};

/// `argmax_a Q(a) + c P(a) sqrt(1 + sum N) / (1 + N(a))`, first index on ties.
pub fn puct_select(priors: &[f64], visits: &[u32], value_sum: &[f64], c: f64) -> usize {
    let total: u32 = visits.iter().sum();
    let bonus = (1.0 + total as f64).sqrt();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for a in 0..priors.len() {
        let q = if visits[a] == 0 { 0.0 } else { value_sum[a] / visits[a] as f64 };
        let score = q + c * priors[a] * bonus / (1.0 + visits[a] as f64);
        if score > best_score {
            best = a;
            best_score = score;
        }
    }
    best
}

/// `(1 - eps) P + eps eta` with `eta ~ Dirichlet(alpha, ..., alpha)`.
pub fn apply_root_noise(priors: &[f64], alpha: f64, eps: f64, rng: &mut impl Rng) -> Vec<f64> {
    if eps == 0.0 || priors.is_empty() {
        return priors.to_vec();
    }
    let gamma = Gamma::new(alpha, 1.0).expect("positive concentration");
    let mut eta: Vec<f64> = priors.iter().map(|_| gamma.sample(rng)).collect();
    let total: f64 = eta.iter().sum();
    if total > 0.0 {
        eta.iter_mut().for_each(|x| *x /= total);
    } else {
        eta = vec![1.0 / priors.len() as f64; priors.len()];
    }
    let mixed: Vec<f64> = priors.iter().zip(&eta).map(|(p, e)| (1.0 - eps) * p + eps * e).collect();
    let s: f64 = mixed.iter().sum();
    mixed.into_iter().map(|x| x / s).collect()
}

/// `pi(a) ∝ N(a)^(1/tau)`, computed relative to the largest count.
pub fn root_policy(visits: &[u32], tau: f64) -> Vec<f64> {
    assert!(tau > 0.0, "temperature must be positive");
    let max = visits.iter().copied().max().unwrap_or(0);
    assert!(max > 0, "root policy needs at least one visit");
    let w: Vec<f64> = visits.iter().map(|&n| (n as f64 / max as f64).powf(1.0 / tau)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub state: DesignState,
    pub expanded: bool,
    /// Aligned with `state.candidates`.
    pub priors: Vec<f64>,
    pub visits: Vec<u32>,
    pub value_sum: Vec<f64>,
    pub children: Vec<Option<usize>>,
    /// Evaluator value of a complete design, computed once.
    pub terminal_value: Option<f64>,
}

impl SearchNode {
    fn new(state: DesignState) -> Self {
        Self {
            state,
            expanded: false,
            priors: Vec::new(),
            visits: Vec::new(),
            value_sum: Vec::new(),
            children: Vec::new(),
            terminal_value: None,
        }
    }

    pub fn q(&self, a: usize) -> f64 {
        if self.visits[a] == 0 {
            0.0
        } else {
            self.value_sum[a] / self.visits[a] as f64
        }
    }

    pub fn total_visits(&self) -> u32 {
        self.visits.iter().sum()
    }
}

/// Root statistics after a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub candidates: Vec<usize>,
    /// Priors used at the root (noised when noise was on).
    pub priors: Vec<f64>,
    pub visits: Vec<u32>,
    pub q: Vec<f64>,
    /// Simulations run by this call.
    pub simulations: usize,
}

/// Arena tree rooted at the current decision.
#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<SearchNode>,
    root: usize,
    root_priors: Option<Vec<f64>>,
}

impl SearchTree {
    pub fn new(state: DesignState) -> Self {
        Self {
            nodes: vec![SearchNode::new(state)],
            root: 0,
            root_priors: None,
        }
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[self.root]
    }

    pub fn node(&self, i: usize) -> &SearchNode {
        &self.nodes[i]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn expand(
        &mut self,
        idx: usize,
        env: &DesignEnv,
        evaluator: &mut dyn Evaluator,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64, SearchError> {
        let node = &self.nodes[idx];
        let ev = evaluator.evaluate(env, &node.state, rng).map_err(|e| SearchError::Evaluation {
            context: format!(
                "routes {:?} + current {:?}",
                node.state.partial.completed, node.state.partial.current
            ),
            source: Box::new(e),
        })?;
        let m = node.state.candidates.len();
        if ev.priors.len() != m {
            return Err(SearchError::PriorLength {
                expected: m,
                got: ev.priors.len(),
            });
        }
        let done = node.state.is_done();
        let node = &mut self.nodes[idx];
        node.expanded = true;
        if done {
            node.terminal_value = Some(ev.value);
        } else {
            node.priors = ev.priors;
            node.visits = vec![0; m];
            node.value_sum = vec![0.0; m];
            node.children = vec![None; m];
        }
        Ok(ev.value)
    }

    fn simulate(
        &mut self,
        env: &DesignEnv,
        evaluator: &mut dyn Evaluator,
        c: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), SearchError> {
        let mut path = Vec::new();
        let mut idx = self.root;
        let value = loop {
            let node = &self.nodes[idx];
            if let Some(v) = node.terminal_value {
                break v;
            }
            let priors = match (&self.root_priors, idx == self.root) {
                (Some(p), true) => p,
                _ => &node.priors,
            };
            let a = puct_select(priors, &node.visits, &node.value_sum, c);
            path.push((idx, a));
            match node.children[a] {
                Some(child) => idx = child,
                None => {
                    let next = env.transition(&node.state, node.state.candidates[a])?.state;
                    self.nodes.push(SearchNode::new(next));
                    let child = self.nodes.len() - 1;
                    self.nodes[idx].children[a] = Some(child);
                    break self.expand(child, env, evaluator, rng)?;
                }
            }
        };
        for (i, a) in path {
            let node = &mut self.nodes[i];
            node.visits[a] += 1;
            node.value_sum[a] += value;
        }
        Ok(())
    }

    /// Runs simulations until the root's visit total reaches
    /// `cfg.iterations`. Statistics kept from a previous decision count
    /// toward the budget.
    pub fn run(
        &mut self,
        env: &DesignEnv,
        evaluator: &mut dyn Evaluator,
        cfg: &SearchConfig,
        add_noise: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<SearchResult, SearchError> {
        cfg.validate()?;
        if self.root().state.is_done() {
            return Err(SearchError::TerminalRoot);
        }
        if !self.root().expanded {
            self.expand(self.root, env, evaluator, rng)?;
        }
        self.root_priors = add_noise.then(|| {
            apply_root_noise(&self.root().priors, cfg.dirichlet_alpha, cfg.noise_eps, rng)
        });
        let mut simulations = 0;
        while (self.root().total_visits() as usize) < cfg.iterations {
            self.simulate(env, evaluator, cfg.c_puct, rng)?;
            simulations += 1;
        }
        let root = self.root();
        Ok(SearchResult {
            candidates: root.state.candidates.clone(),
            priors: self.root_priors.clone().unwrap_or_else(|| root.priors.clone()),
            visits: root.visits.clone(),
            q: (0..root.visits.len()).map(|a| root.q(a)).collect(),
            simulations,
        })
    }

    /// Moves the root to the child reached by candidate index `a`, keeping
    /// its subtree. A forced route closure or an unexpanded child starts a
    /// fresh tree at the successor.
    pub fn reroot(&mut self, a: usize, transition: &Transition) {
        let child = self.root().children.get(a).copied().flatten();
        let keep = match child {
            Some(c) if transition.forced == 0 && self.nodes[c].expanded => c,
            _ => {
                *self = Self::new(transition.state.clone());
                return;
            }
        };
        debug_assert_eq!(self.nodes[keep].state, transition.state);
        let mut old: Vec<Option<SearchNode>> = std::mem::take(&mut self.nodes).into_iter().map(Some).collect();
        let mut order = vec![keep];
        let mut i = 0;
        while i < order.len() {
            let node = old[order[i]].as_ref().expect("tree node");
            order.extend(node.children.iter().flatten().copied());
            i += 1;
        }
        let mut remap = vec![usize::MAX; old.len()];
        for (new, &o) in order.iter().enumerate() {
            remap[o] = new;
        }
        self.nodes = order
            .iter()
            .map(|&o| {
                let mut n = old[o].take().expect("each node visited once");
                for c in n.children.iter_mut().flatten() {
                    *c = remap[*c];
                }
                n
            })
            .collect();
        self.root = 0;
        self.root_priors = None;
    }
}
