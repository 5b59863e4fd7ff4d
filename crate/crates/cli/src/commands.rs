use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use transit_core::designenv::{validate_design, DesignEnv, DesignFile, EpisodeTrace, Instance};
use transit_core::learner::{design_with_network, Trainer};
use transit_core::neural::Checkpoint;
use transit_core::netmodel::synth::{generate_city, CityLayout, CityParams};
use transit_core::netmodel::{estimate_from_counts, estimate_search_space, load_network};
use transit_core::search::SearchTrace;

use crate::config::{output_dir, parse_override, resolve, RunConfig};
use crate::designer::{design, Checkpoints, DesignMethod};
use crate::report::{ComparisonReport, MethodFailure, MethodReport, SeedResult};

#[derive(Debug, Parser)]
#[command(name = "transit-design", version, about = "Bus route network design and benchmarking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic city network file.
    Gen(GenArgs),
    /// Build a design with one method and evaluate it per seed.
    Design(DesignArgs),
    /// Train a policy-value network.
    Train(TrainArgs),
    /// Evaluate existing design files.
    Evaluate(EvaluateArgs),
    /// Evaluate several methods over several seeds.
    Compare(CompareArgs),
    /// Summarize a trace, design, checkpoint or network file.
    Inspect(InspectArgs),
    /// Estimate the size of the design search space.
    Space(SpaceArgs),
}

/// Flags shared by commands that build an environment.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Network file (JSON).
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// JSON config file layered over the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Modal split.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of routes.
    #[arg(long)]
    pub routes: Option<usize>,
    /// Maximum nodes per route.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Simulation horizon in steps.
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Search simulations per decision.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Parallel workers (search restarts or self-play episodes).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Generic override, e.g. `--set ga.generations=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Output directory (default: $TRANSIT_DESIGN_OUT/<command> or runs/<command>).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self, extra: &[(&str, Value)]) -> Result<RunConfig> {
        let mut overrides = Vec::new();
        let mut flag = |path: &str, v: Value| overrides.push((path.split('.').map(str::to_string).collect(), v));
        if let Some(p) = &self.network {
            flag("network", json!(p));
        }
        if let Some(a) = self.alpha {
            flag("env.alpha", json!(a));
        }
        if let Some(k) = self.routes {
            flag("env.routes", json!(k));
        }
        if let Some(l) = self.max_len {
            flag("env.max_len", json!(l));
        }
        if let Some(h) = self.horizon {
            flag("env.sim.horizon", json!(h));
        }
        if let Some(n) = self.iterations {
            flag("search.iterations", json!(n));
        }
        if let Some(w) = self.workers {
            flag("workers", json!(w));
            flag("train.workers", json!(w));
        }
        if let Some(s) = &self.seeds {
            flag("seeds", json!(s));
        }
        for (p, v) in extra {
            flag(p, v.clone());
        }
        for s in &self.sets {
            overrides.push(parse_override(s)?);
        }
        resolve(self.config.as_deref(), &overrides)
    }
}

fn build_env(cfg: &RunConfig) -> Result<DesignEnv> {
    let path = cfg.network.as_ref().context("a network file is required (--network or \"network\" in the config)")?;
    let net = load_network(path).with_context(|| format!("loading network {}", path.display()))?;
    Ok(DesignEnv::new(Arc::new(Instance::from_network(net)), cfg.env.clone())?)
}

fn prepare_out(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir.join("config.json"), &cfg.to_json())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Prints to stdout, ignoring a closed pipe (e.g. `| head`).
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Design(a) => cmd_design(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Space(a) => cmd_space(a),
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LayoutKind {
    Grid,
    RandomGeometric,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "grid")]
    pub layout: LayoutKind,
    #[arg(long, default_value_t = 3)]
    pub rows: usize,
    #[arg(long, default_value_t = 4)]
    pub cols: usize,
    /// Block length, meters (grid).
    #[arg(long, default_value_t = 500.0)]
    pub spacing: f64,
    /// Node count (random-geometric).
    #[arg(long, default_value_t = 12)]
    pub nodes: usize,
    /// Edge count (random-geometric).
    #[arg(long, default_value_t = 18)]
    pub edges: usize,
    /// Square side, meters (random-geometric).
    #[arg(long, default_value_t = 3000.0)]
    pub extent: f64,
    #[arg(long, default_value_t = 30)]
    pub demand_pairs: usize,
    #[arg(long, default_value_t = 40.0)]
    pub max_rate: f64,
    #[arg(long, default_value_t = 10.0)]
    pub free_speed: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let layout = match a.layout {
        LayoutKind::Grid => CityLayout::Grid {
            rows: a.rows,
            cols: a.cols,
            spacing: a.spacing,
        },
        LayoutKind::RandomGeometric => CityLayout::RandomGeometric {
            nodes: a.nodes,
            edges: a.edges,
            extent: a.extent,
        },
    };
    let file = generate_city(&CityParams {
        layout,
        free_speed: a.free_speed,
        demand_pairs: a.demand_pairs,
        max_rate: a.max_rate,
        seed: a.seed,
    })?;
    let text = file.to_json();
    match a.output {
        Some(p) => write(&p, &text),
        None => {
            emit(&text);
            Ok(())
        }
    }
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long, value_enum)]
    pub method: DesignMethod,
    /// Trained weights: `file` or `method=file`.
    #[arg(long)]
    pub checkpoint: Vec<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

fn cmd_design(a: DesignArgs) -> Result<()> {
    let cfg = a.run.resolve(&[])?;
    let env = build_env(&cfg)?;
    let mut ckpts = Checkpoints::default();
    for c in &a.checkpoint {
        ckpts.add(c)?;
    }
    if a.method.learned().is_some() {
        // Fail before creating any output.
        ckpts.params(a.method)?;
    }
    let dir = output_dir(a.run.out.as_deref(), "design");
    prepare_out(&dir, &cfg)?;
    let mut results = Vec::new();
    for &seed in &cfg.seeds {
        let d = design(a.method, &env, &cfg, &mut ckpts, seed)?;
        let file = DesignFile::from_routes(env.graph(), &d.routes, a.method.name(), seed);
        write(&dir.join(format!("design_{seed}.json")), &file.to_json())?;
        write(&dir.join(format!("evaluation_{seed}.json")), &pretty(&d.evaluation))?;
        if let Some(t) = &d.trace {
            write(&dir.join(format!("trace_{seed}.json")), &pretty(t))?;
        }
        results.push(SeedResult::new(&env, seed, &d.routes, &d.evaluation));
    }
    let summary = MethodReport::new(a.method.name(), results);
    write(&dir.join("summary.json"), &pretty(&summary))?;
    emit(&serde_json::to_string(&json!({"out": dir, "reward": summary.reward}))?);
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Learner: alphatransit or ppo.
    #[arg(long)]
    pub method: Option<String>,
    /// Environment-step budget.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Training seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(m) = &a.method {
        extra.push(("train.method", json!(m)));
    }
    if let Some(s) = a.steps {
        extra.push(("train.env_steps", json!(s)));
    }
    if let Some(s) = a.seed {
        extra.push(("train.seed", json!(s)));
    }
    let cfg = a.run.resolve(&extra)?;
    let env = build_env(&cfg)?;
    let mut trainer = match &a.resume {
        Some(p) => {
            let ckpt = Checkpoint::load(p).with_context(|| format!("loading checkpoint {}", p.display()))?;
            Trainer::resume(env.clone(), cfg.train.clone(), &ckpt)?
        }
        None => Trainer::new(env.clone(), cfg.train.clone())?,
    };
    let dir = output_dir(a.run.out.as_deref(), "train");
    prepare_out(&dir, &cfg)?;
    let log_path = dir.join("log.jsonl");
    let mut log = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .with_context(|| format!("opening {}", log_path.display()))?;
    let mut log_error: Option<anyhow::Error> = None;
    let mut ckpt_error: Option<anyhow::Error> = None;
    let ckpt_dir = dir.clone();
    trainer.run(
        &mut |rec| {
            if let Err(e) = writeln!(log, "{}", rec.to_json_line()) {
                log_error.get_or_insert(e.into());
            }
        },
        &mut |ckpt| {
            let name = format!("checkpoint_{:06}.json", ckpt_iteration(ckpt));
            for path in [ckpt_dir.join(name), ckpt_dir.join("latest.json")] {
                if let Err(e) = ckpt.save(&path) {
                    ckpt_error.get_or_insert(e.into());
                }
            }
        },
    )?;
    if let Some(e) = log_error.or(ckpt_error) {
        return Err(e);
    }
    let seed = cfg.seeds[0];
    let d = design_with_network(&env, trainer.params(), cfg.train.method, &cfg.search, seed)?;
    let summary = json!({
        "iterations": trainer.state().iteration,
        "env_steps": trainer.state().env_steps,
        "episodes": trainer.state().episodes,
        "final_design": DesignFile::from_routes(env.graph(), &d.routes, &format!("{:?}", cfg.train.method).to_lowercase(), seed),
        "final_reward": d.evaluation.reward,
        "final_metrics": d.evaluation.metrics,
    });
    write(&dir.join("summary.json"), &pretty(&summary))?;
    emit(&serde_json::to_string(&json!({"out": dir, "env_steps": trainer.state().env_steps}))?);
    Ok(())
}

fn ckpt_iteration(c: &Checkpoint) -> u64 {
    c.state.get("iteration").and_then(Value::as_u64).unwrap_or(0)
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Design files to evaluate.
    #[arg(long = "design", required = true)]
    pub designs: Vec<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = a.run.resolve(&[])?;
    let env = build_env(&cfg)?;
    let dir = output_dir(a.run.out.as_deref(), "evaluate");
    prepare_out(&dir, &cfg)?;
    let mut reports = Vec::new();
    for path in &a.designs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file = DesignFile::from_json(&text)?;
        let routes = file.to_routes(env.graph()).with_context(|| format!("design {}", path.display()))?;
        let runs = cfg
            .seeds
            .iter()
            .map(|&s| Ok(SeedResult::new(&env, s, &routes, &env.evaluate(&routes, s)?)))
            .collect::<Result<Vec<_>>>()?;
        let label = if file.method.is_empty() { path.display().to_string() } else { file.method.clone() };
        reports.push(MethodReport::new(&label, runs));
    }
    let report = ComparisonReport {
        seeds: cfg.seeds.clone(),
        methods: reports,
        failures: vec![],
    };
    write(&dir.join("evaluation.json"), &pretty(&report))?;
    write(&dir.join("evaluation.csv"), &report.to_csv())?;
    emit(&serde_json::to_string(&json!({"out": dir}))?);
    Ok(())
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Comma-separated methods.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub methods: Vec<DesignMethod>,
    /// Trained weights: `file` or `method=file`.
    #[arg(long)]
    pub checkpoint: Vec<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let cfg = a.run.resolve(&[])?;
    let env = build_env(&cfg)?;
    let mut ckpts = Checkpoints::default();
    for c in &a.checkpoint {
        ckpts.add(c)?;
    }
    let dir = output_dir(a.run.out.as_deref(), "compare");
    prepare_out(&dir, &cfg)?;
    let mut methods = Vec::new();
    let mut failures = Vec::new();
    for &m in &a.methods {
        let runs: Result<Vec<_>> = cfg
            .seeds
            .iter()
            .map(|&s| {
                let d = design(m, &env, &cfg, &mut ckpts, s)?;
                validate_design(env.graph(), &d.routes, None, false)?;
                Ok(SeedResult::new(&env, s, &d.routes, &d.evaluation))
            })
            .collect();
        match runs {
            Ok(runs) => methods.push(MethodReport::new(m.name(), runs)),
            Err(e) => failures.push(MethodFailure {
                method: m.name().to_string(),
                error: format!("{e:#}"),
            }),
        }
    }
    let report = ComparisonReport {
        seeds: cfg.seeds.clone(),
        methods,
        failures,
    };
    write(&dir.join("comparison.json"), &pretty(&report))?;
    write(&dir.join("comparison.csv"), &report.to_csv())?;
    for f in &report.failures {
        eprintln!("{}", json!({"warning": "method failed", "method": f.method, "message": f.error}));
    }
    if report.methods.is_empty() {
        bail!("every method failed");
    }
    emit(&serde_json::to_string(&json!({"out": dir, "failed": report.failures.len()}))?);
    Ok(())
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Search trace, episode trace, design, checkpoint or network file.
    pub file: PathBuf,
    /// Network used to resolve design node ids.
    #[arg(long)]
    pub network: Option<PathBuf>,
}

fn cmd_inspect(a: InspectArgs) -> Result<()> {
    let text = fs::read_to_string(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let v: Value = serde_json::from_str(&text).context("file is not JSON")?;
    let out = if v.get("decisions").is_some() {
        let t = SearchTrace::from_json(&text)?;
        json!({
            "kind": "search-trace",
            "decisions": t.decisions.len(),
            "reward": t.reward,
            "routes": t.design.routes,
            "steps": t.decisions.iter().map(|d| json!({
                "step": d.step,
                "route": d.route_index,
                "candidates": d.candidates,
                "visits": d.visits,
                "action": d.action,
            })).collect::<Vec<_>>(),
        })
    } else if v.get("steps").is_some() && v.get("design").is_some() {
        let t: EpisodeTrace = serde_json::from_value(v)?;
        json!({
            "kind": "episode-trace",
            "steps": t.steps.len(),
            "routes": t.design.routes,
            "reward": t.evaluation.map(|e| e.reward),
        })
    } else if v.get("format").is_some() {
        let c = Checkpoint::from_json(&text)?;
        json!({
            "kind": "checkpoint",
            "progress": c.progress,
            "tensors": c.params.len(),
            "parameters": c.params.iter().map(|t| t.values.len()).sum::<usize>(),
            "has_optimizer": c.optimizer.is_some(),
            "state": c.state,
        })
    } else if v.get("nodes").is_some() {
        let net = load_network(&a.file)?;
        json!({
            "kind": "network",
            "nodes": net.graph.node_count(),
            "edges": net.graph.edge_count(),
            "transit_center": net.graph.source_id(net.graph.transit_center()),
            "demand_total": net.demand.total(),
            "real_routes": net.real_routes.as_ref().map(Vec::len),
        })
    } else if v.get("routes").is_some() {
        let file = DesignFile::from_json(&text)?;
        let mut o = json!({
            "kind": "design",
            "method": file.method,
            "routes": file.routes.len(),
            "lengths": file.routes.iter().map(Vec::len).collect::<Vec<_>>(),
        });
        if let Some(p) = &a.network {
            let net = load_network(p)?;
            let routes = file.to_routes(&net.graph)?;
            o["valid"] = json!(true);
            o["total_km"] = json!(routes.iter().map(|r| net.graph.route_length(r)).sum::<f64>() / 1000.0);
        }
        o
    } else {
        bail!("unrecognized file: expected a trace, design, checkpoint or network");
    };
    emit(&pretty(&out));
    Ok(())
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    /// Network file; alternatively give --nodes and --edges.
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub edges: Option<usize>,
    #[arg(long, default_value_t = 16)]
    pub routes: usize,
    /// Edges per route.
    #[arg(long, default_value_t = 13)]
    pub path_edges: u32,
    /// Routes may start at any node instead of the transit center.
    #[arg(long)]
    pub random_start: bool,
}

fn cmd_space(a: SpaceArgs) -> Result<()> {
    let est = match (&a.network, a.nodes, a.edges) {
        (Some(p), _, _) => {
            let net = load_network(p)?;
            estimate_search_space(&net.graph, a.routes, a.path_edges, !a.random_start)
        }
        (None, Some(n), Some(e)) => estimate_from_counts(n, e, a.routes, a.path_edges, !a.random_start),
        _ => bail!("give --network or both --nodes and --edges"),
    };
    let total = if est.total_log10.is_finite() { json!(est.total_log10) } else { Value::Null };
    emit(&pretty(&json!({
        "mean_degree": est.mean_degree,
        "per_route": est.per_route,
        "total_log10": total,
        "degenerate": est.degenerate,
    })));
    Ok(())
}
