//! Python module `transit_design`.
//!
//! Structured results (evaluations, designs, configs) cross the boundary as
//! plain dicts built from their JSON form.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use transit_core::baselines::{ga_optimize, heuristic_design, pure_mcts_design, GaConfig, HeuristicKind};
use transit_core::designenv::{DesignEnv, DesignFile, DesignState, EnvConfig, Instance};
use transit_core::learner::{design_with_network, Method, TrainRunConfig, Trainer};
use transit_core::neural::{masked_policy as core_masked_policy, Checkpoint};
use transit_core::netmodel::synth::{generate_city, CityLayout, CityParams};
use transit_core::netmodel::{estimate_from_counts, Network as CoreNetwork, NetworkFile};
use transit_core::search::SearchConfig;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: Option<&Bound<'_, PyAny>>) -> PyResult<Option<T>> {
    let Some(obj) = obj else { return Ok(None) };
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map(Some).map_err(err)
}

/// Road graph, demand and optional reference routes.
#[pyclass(frozen, module = "transit_design")]
struct Network {
    file: NetworkFile,
    instance: Arc<Instance>,
}

impl Network {
    fn build(file: NetworkFile) -> PyResult<Self> {
        let net: CoreNetwork = file.clone().into_network().map_err(err)?;
        Ok(Self {
            file,
            instance: Arc::new(Instance::from_network(net)),
        })
    }
}

#[pymethods]
impl Network {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::build(NetworkFile::from_json(text).map_err(err)?)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(err)?;
        Self::from_json(&text)
    }

    /// Seeded grid city with `spacing`-meter blocks.
    #[staticmethod]
    #[pyo3(signature = (rows, cols, demand_pairs=30, seed=0, spacing=500.0))]
    fn grid(rows: usize, cols: usize, demand_pairs: usize, seed: u64, spacing: f64) -> PyResult<Self> {
        let file = generate_city(&CityParams {
            layout: CityLayout::Grid { rows, cols, spacing },
            demand_pairs,
            seed,
            ..CityParams::default()
        })
        .map_err(err)?;
        Self::build(file)
    }

    fn to_json(&self) -> String {
        self.file.to_json()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.instance.graph.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.instance.graph.edge_count()
    }

    /// Source id of the transit center.
    #[getter]
    fn transit_center(&self) -> i64 {
        let g = &self.instance.graph;
        g.source_id(g.transit_center())
    }

    fn __repr__(&self) -> String {
        format!("Network(nodes={}, edges={})", self.node_count(), self.edge_count())
    }
}

/// Partial design; node ids are dense indices.
#[pyclass(frozen, skip_from_py_object, module = "transit_design")]
#[derive(Clone)]
struct State {
    inner: DesignState,
}

#[pymethods]
impl State {
    #[getter]
    fn candidates(&self) -> Vec<usize> {
        self.inner.candidates.clone()
    }

    #[getter]
    fn completed(&self) -> Vec<Vec<usize>> {
        self.inner.partial.completed.clone()
    }

    #[getter]
    fn current(&self) -> Vec<usize> {
        self.inner.partial.current.clone()
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.is_done()
    }

    #[getter]
    fn env_steps(&self) -> usize {
        self.inner.env_steps()
    }

    fn __repr__(&self) -> String {
        format!(
            "State(completed={:?}, current={:?}, candidates={:?})",
            self.inner.partial.completed, self.inner.partial.current, self.inner.candidates
        )
    }
}

/// Sequential route-construction environment.
#[pyclass(frozen, module = "transit_design")]
struct Env {
    env: DesignEnv,
}

#[pymethods]
impl Env {
    /// `config` is an optional dict layered over the defaults; explicit
    /// keyword arguments win. `shaping` makes `step` report per-step
    /// shaping rewards.
    #[new]
    #[pyo3(signature = (network, routes=None, max_len=None, alpha=None, horizon=None, config=None, shaping=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        py: Python<'_>,
        network: &Network,
        routes: Option<usize>,
        max_len: Option<usize>,
        alpha: Option<f64>,
        horizon: Option<u32>,
        config: Option<&Bound<'_, PyAny>>,
        shaping: bool,
    ) -> PyResult<Self> {
        let mut cfg: EnvConfig = from_py(py, config)?.unwrap_or_default();
        if let Some(k) = routes {
            cfg.routes = k;
        }
        if let Some(l) = max_len {
            cfg.max_len = l;
        }
        if let Some(a) = alpha {
            cfg.alpha = a;
        }
        if let Some(h) = horizon {
            cfg.sim.horizon = h;
        }
        let mut env = DesignEnv::new(Arc::clone(&network.instance), cfg).map_err(err)?;
        env.shaping = shaping;
        Ok(Self { env })
    }

    #[getter]
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.env.config())
    }

    fn reset(&self) -> State {
        State { inner: self.env.reset() }
    }

    /// Returns `(next_state, done, shaping_reward, terminal_evaluation)`.
    fn step<'py>(
        &self,
        py: Python<'py>,
        state: &State,
        action: usize,
    ) -> PyResult<(State, bool, Option<f64>, Option<Bound<'py, PyAny>>)> {
        let out = self.env.step(&state.inner, action).map_err(err)?;
        let terminal = out.terminal.as_ref().map(|e| to_py(py, e)).transpose()?;
        Ok((State { inner: out.state }, out.episode_done, out.shaping_reward, terminal))
    }

    /// Full evaluation of a design given as dense node-index routes.
    #[pyo3(signature = (routes, seed=0))]
    fn evaluate<'py>(&self, py: Python<'py>, routes: Vec<Vec<usize>>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let e = py.detach(|| self.env.evaluate(&routes, seed)).map_err(err)?;
        to_py(py, &e)
    }

    /// Build a design with a baseline or a trained network.
    ///
    /// `method`: random | demand-cover | shortest-path | pure-mcts | ga |
    /// alphatransit | ppo. Learned methods need `checkpoint` (JSON text).
    #[pyo3(signature = (method, seed=0, iterations=None, workers=1, checkpoint=None, ga=None))]
    #[allow(clippy::too_many_arguments)]
    fn design<'py>(
        &self,
        py: Python<'py>,
        method: &str,
        seed: u64,
        iterations: Option<usize>,
        workers: usize,
        checkpoint: Option<&str>,
        ga: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let env = &self.env;
        let mut search = SearchConfig::for_alpha(env.config().alpha);
        if let Some(n) = iterations {
            search.iterations = n;
        }
        let ga_cfg: GaConfig = from_py(py, ga)?.unwrap_or_default();
        let heuristic = |k| heuristic_design(k, env, seed).map(|d| (d.routes, d.evaluation)).map_err(err);
        let (routes, evaluation) = match method {
            "random" => heuristic(HeuristicKind::Random)?,
            "demand-cover" => heuristic(HeuristicKind::DemandCover)?,
            "shortest-path" => heuristic(HeuristicKind::ShortestPath)?,
            "pure-mcts" => {
                let out = py.detach(|| pure_mcts_design(env, &search, workers, seed)).map_err(err)?;
                (out.design.routes, out.design.evaluation)
            }
            "ga" => {
                let res = py.detach(|| ga_optimize(env, &ga_cfg, seed, &mut |_, _| {})).map_err(err)?;
                let e = env.evaluate(&res.best.routes, seed).map_err(err)?;
                (res.best.routes, e)
            }
            "alphatransit" | "ppo" => {
                let text = checkpoint.ok_or_else(|| PyValueError::new_err(format!("{method} needs checkpoint=")))?;
                let params = Checkpoint::from_json(text).and_then(|c| c.params()).map_err(err)?;
                let m = if method == "ppo" { Method::Ppo } else { Method::Alphatransit };
                let d = py.detach(|| design_with_network(env, &params, m, &search, seed)).map_err(err)?;
                (d.routes, d.evaluation)
            }
            other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
        };
        let out = PyDict::new(py);
        out.set_item("routes", routes.clone())?;
        out.set_item("design", to_py(py, &DesignFile::from_routes(env.graph(), &routes, method, seed))?)?;
        out.set_item("evaluation", to_py(py, &evaluation)?)?;
        Ok(out.into_any())
    }

    /// Train a network and return the final checkpoint as JSON text.
    /// `config` overrides the training defaults for the env's alpha.
    #[pyo3(signature = (steps, seed=0, config=None, resume=None))]
    fn train(
        &self,
        py: Python<'_>,
        steps: u64,
        seed: u64,
        config: Option<&Bound<'_, PyAny>>,
        resume: Option<&str>,
    ) -> PyResult<String> {
        let mut base = serde_json::to_value(TrainRunConfig::for_alpha(self.env.config().alpha)).map_err(err)?;
        if let Some(over) = from_py::<serde_json::Value>(py, config)? {
            merge(&mut base, over);
        }
        let mut cfg: TrainRunConfig = serde_json::from_value(base).map_err(err)?;
        cfg.env_steps = steps;
        cfg.seed = seed;
        let env = self.env.clone();
        py.detach(move || {
            let mut trainer = match resume {
                Some(text) => {
                    let c = Checkpoint::from_json(text).map_err(err)?;
                    Trainer::resume(env, cfg, &c).map_err(err)?
                }
                None => Trainer::new(env, cfg).map_err(err)?,
            };
            trainer.run(&mut |_| {}, &mut |_| {}).map_err(err)?;
            Ok(trainer.checkpoint().to_json())
        })
    }
}

fn merge(base: &mut serde_json::Value, top: serde_json::Value) {
    match (base, top) {
        (serde_json::Value::Object(b), serde_json::Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Softmax restricted to `mask`; masked entries are exactly 0.
#[pyfunction]
fn masked_policy(logits: Vec<f64>, mask: Vec<bool>) -> PyResult<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(PyValueError::new_err("logits and mask differ in length"));
    }
    core_masked_policy(&logits, &mask).map_err(err)
}

/// Approximate search-space size from node/edge counts.
#[pyfunction]
#[pyo3(signature = (nodes, edges, routes=16, path_edges=13, hub_start=true))]
fn estimate_search_space<'py>(
    py: Python<'py>,
    nodes: usize,
    edges: usize,
    routes: usize,
    path_edges: u32,
    hub_start: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let e = estimate_from_counts(nodes, edges, routes, path_edges, hub_start);
    let d = PyDict::new(py);
    d.set_item("mean_degree", e.mean_degree)?;
    d.set_item("per_route", e.per_route)?;
    d.set_item("total_log10", e.total_log10)?;
    d.set_item("degenerate", e.degenerate)?;
    Ok(d.into_any())
}

#[pymodule]
pub fn transit_design(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<State>()?;
    m.add_class::<Env>()?;
    m.add_function(wrap_pyfunction!(masked_policy, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_search_space, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
