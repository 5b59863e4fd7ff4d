use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use transit_core::baselines::{ga_optimize, heuristic_design, pure_mcts_design, HeuristicKind};
use transit_core::designenv::{DesignEnv, Evaluation};
use transit_core::learner::{design_with_network, Method};
use transit_core::neural::{Checkpoint, NetParams};
use transit_core::netmodel::Route;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMethod {
    Alphatransit,
    Ppo,
    PureMcts,
    Ga,
    Random,
    DemandCover,
    ShortestPath,
    RealRoutes,
}

impl DesignMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Alphatransit => "alphatransit",
            Self::Ppo => "ppo",
            Self::PureMcts => "pure-mcts",
            Self::Ga => "ga",
            Self::Random => "random",
            Self::DemandCover => "demand-cover",
            Self::ShortestPath => "shortest-path",
            Self::RealRoutes => "real-routes",
        }
    }

    pub fn learned(self) -> Option<Method> {
        match self {
            Self::Alphatransit => Some(Method::Alphatransit),
            Self::Ppo => Some(Method::Ppo),
            _ => None,
        }
    }
}

/// Network weights per learned method, loaded once.
#[derive(Default)]
pub struct Checkpoints {
    paths: BTreeMap<DesignMethod, PathBuf>,
    loaded: BTreeMap<DesignMethod, NetParams>,
}

impl Checkpoints {
    /// `arg` is `path` (used for every learned method) or `method=path`.
    pub fn add(&mut self, arg: &str) -> Result<()> {
        match arg.split_once('=') {
            Some((m, p)) => {
                let method = DesignMethod::from_str(m, true).map_err(|e| anyhow::anyhow!(e))?;
                if method.learned().is_none() {
                    bail!("method {m} does not use a checkpoint");
                }
                self.paths.insert(method, PathBuf::from(p));
            }
            None => {
                for m in [DesignMethod::Alphatransit, DesignMethod::Ppo] {
                    self.paths.entry(m).or_insert_with(|| PathBuf::from(arg));
                }
            }
        }
        Ok(())
    }

    pub fn params(&mut self, method: DesignMethod) -> Result<&NetParams> {
        if !self.loaded.contains_key(&method) {
            let path = self.paths.get(&method).with_context(|| {
                format!(
                    "method {} needs trained weights: pass --checkpoint <file> (produced by `transit-design train`)",
                    method.name()
                )
            })?;
            let ckpt = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
            self.loaded.insert(method, ckpt.params()?);
        }
        Ok(&self.loaded[&method])
    }
}

pub struct Designed {
    pub routes: Vec<Route>,
    pub evaluation: Evaluation,
    /// Search trace when the method produces one.
    pub trace: Option<serde_json::Value>,
}

/// Builds one design and evaluates it with `seed`.
pub fn design(
    method: DesignMethod,
    env: &DesignEnv,
    cfg: &RunConfig,
    checkpoints: &mut Checkpoints,
    seed: u64,
) -> Result<Designed> {
    let heuristic = |kind| -> Result<Designed> {
        let d = heuristic_design(kind, env, seed)?;
        Ok(Designed {
            routes: d.routes,
            evaluation: d.evaluation,
            trace: None,
        })
    };
    match method {
        DesignMethod::Alphatransit | DesignMethod::Ppo => {
            let params = checkpoints.params(method)?;
            let d = design_with_network(env, params, method.learned().expect("learned"), &cfg.search, seed)?;
            Ok(Designed {
                routes: d.routes,
                evaluation: d.evaluation,
                trace: d.trace.map(|t| serde_json::to_value(t).expect("trace serializes")),
            })
        }
        DesignMethod::PureMcts => {
            let out = pure_mcts_design(env, &cfg.search, cfg.workers, seed)?;
            Ok(Designed {
                routes: out.design.routes,
                evaluation: out.design.evaluation,
                trace: Some(serde_json::to_value(out.trace)?),
            })
        }
        DesignMethod::Ga => {
            let res = ga_optimize(env, &cfg.ga, seed, &mut |_, _| {})?;
            let evaluation = env.evaluate(&res.best.routes, seed)?;
            Ok(Designed {
                routes: res.best.routes,
                evaluation,
                trace: Some(serde_json::to_value(&res.history)?),
            })
        }
        DesignMethod::Random => heuristic(HeuristicKind::Random),
        DesignMethod::DemandCover => heuristic(HeuristicKind::DemandCover),
        DesignMethod::ShortestPath => heuristic(HeuristicKind::ShortestPath),
        DesignMethod::RealRoutes => {
            let routes = env
                .instance()
                .real_routes
                .clone()
                .context("real-routes needs a network file with a \"real_routes\" field")?;
            let evaluation = env.evaluate(&routes, seed)?;
            Ok(Designed {
                routes,
                evaluation,
                trace: None,
            })
        }
    }
}
