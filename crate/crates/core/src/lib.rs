//! Transit route network design.
//!
//! Routes are grown node by node from a transit-center hub on a road graph.
//! A design is scored by projecting bus frequencies from assigned segment
//! loads and running a deterministic mesoscopic bus/passenger simulation.
//! Designers include tree search guided by a graph-attention policy-value
//! network, an end-to-end PPO policy, a genetic algorithm, pure rollout
//! tree search and simple sampling heuristics.

pub mod baselines;
pub mod designenv;
pub mod fosproj;
pub mod learner;
pub mod netmodel;
pub mod neural;
pub mod routegraph;
pub mod search;
pub mod seed;
pub mod toy;
pub mod transitsim;
