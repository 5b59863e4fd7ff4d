//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion over all of them. `ACCEPTANCE_ONLY=3,5` runs a subset.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transit_core::baselines::{ga_optimize, heuristic_design, GaConfig, HeuristicKind};
use transit_core::designenv::{terminal_reward, DesignState, validate_design, DesignEnv, EnvConfig, Instance, RewardTerms};
use transit_core::fosproj::{max_load_frequencies, segment_feasible, SegmentLoads};
use transit_core::learner::{design_with_network, normalize_value, temperature, Method, RewardStats, TrainRunConfig, Trainer};
use transit_core::netmodel::estimate_from_counts;
use transit_core::netmodel::synth::{generate_city, CityLayout, CityParams};
use transit_core::neural::{alphatransit_loss, masked_policy, NetConfig, NetParams, PolicyValueTarget};
use transit_core::search::{Evaluated, Evaluator, SearchConfig, SearchError, SearchTree};
use transit_core::toy::{grid_city, toy_env, toy_suite};
use transit_core::transitsim::{overlap_ratio, simulate_traced};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- 1

fn search_space() -> Outcome {
    let t = Instant::now();
    let hub = estimate_from_counts(143, 243, 16, 13, true);
    let any = estimate_from_counts(143, 243, 16, 13, false);
    let elapsed = t.elapsed();
    let per_route_err = (hub.per_route / 1.24e5 - 1.0).abs();
    let detail = format!(
        "per-route {:.4e} (rel err {:.4}), total log10 {:.3}, random-start log10 {:.3}, {:?}",
        hub.per_route, per_route_err, hub.total_log10, any.total_log10, elapsed
    );
    check(
        per_route_err <= 0.02
            && (hub.total_log10 - 81.5).abs() <= 0.05
            && (any.total_log10 - 116.0).abs() <= 0.2
            && elapsed < Duration::from_secs(1),
        detail,
    )
}

// ---------------------------------------------------------------- 2

fn frequency_minimality() -> Outcome {
    let t = Instant::now();
    let (capacity, delta) = (40.0, 1.0);
    let mut r = rng(2);
    let mut violations = 0;
    for _ in 0..500 {
        let k = r.random_range(1..=4);
        let per_route: Vec<BTreeMap<(usize, usize), f64>> = (0..k)
            .map(|_| {
                (0..r.random_range(1..=5))
                    .map(|s| ((s, s + 1), r.random_range(0.0..=200.0)))
                    .collect()
            })
            .collect();
        let loads = SegmentLoads { per_route };
        let proj = max_load_frequencies(&loads, capacity, delta).0;
        let feasible = |f: &[u32]| {
            (0..k).all(|i| loads.per_route[i].values().all(|&q| q <= delta * capacity * f[i] as f64))
        };
        // Every feasible vector in {1..6}^K must dominate the projection.
        let mut ok = feasible(&proj) && proj.iter().all(|&f| (1..=6).contains(&f));
        let mut f = vec![1u32; k];
        'enumerate: loop {
            if feasible(&f) && f.iter().zip(&proj).any(|(a, b)| a < b) {
                ok = false;
            }
            for slot in f.iter_mut() {
                if *slot < 6 {
                    *slot += 1;
                    continue 'enumerate;
                }
                *slot = 1;
            }
            break;
        }
        // Independent of the crate's own feasibility predicate.
        ok &= (0..k).all(|i| segment_feasible(loads.max_load(i), capacity, delta, proj[i]));
        if !ok {
            violations += 1;
        }
    }
    let elapsed = t.elapsed();
    check(
        violations == 0 && elapsed < Duration::from_secs(30),
        format!("500 instances, {violations} violations, {elapsed:?}"),
    )
}

// ---------------------------------------------------------------- 3

fn eight_node_target() -> (DesignEnv, transit_core::designenv::DesignState) {
    let file = generate_city(&CityParams {
        layout: CityLayout::RandomGeometric {
            nodes: 8,
            edges: 12,
            extent: 2000.0,
        },
        demand_pairs: 20,
        seed: 3,
        ..CityParams::default()
    })
    .unwrap();
    let env = toy_env(Arc::new(Instance::from_network(file.into_network().unwrap())), 2, 4, 1.0).unwrap();
    let mut state = env.reset();
    let mut r = rng(3);
    for _ in 0..2 {
        let a = state.candidates[r.random_range(0..state.candidates.len())];
        state = env.transition(&state, a).unwrap().state;
    }
    assert!(state.candidates.len() >= 2, "state must leave a real choice");
    (env, state)
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
}

fn gradient_check() -> Outcome {
    let t = Instant::now();
    let (env, state) = eight_node_target();
    let enc = env.encode(&state);
    let cands = state.candidates.clone();
    let mut r = rng(33);
    let raw: Vec<f64> = cands.iter().map(|_| r.random_range(0.1..1.0)).collect();
    let pi: Vec<f64> = raw.iter().map(|x| x / raw.iter().sum::<f64>()).collect();
    let target = [PolicyValueTarget {
        encoding: &enc,
        candidates: &cands,
        pi: &pi,
        z: 0.7,
    }];
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let (mut checked, mut retried) = (0usize, 0usize);
    // Every coordinate of a reduced-width network with every parameter kind,
    // then a strided sweep (plus the first entry of each tensor) over the
    // production-size network.
    for (config, stride) in [(NetConfig::small(), 1usize), (NetConfig::default(), 400)] {
        let mut params = NetParams::init(config, 5).unwrap();
        for tensor in &mut params.tensors {
            for x in &mut tensor.data {
                *x += r.random_range(-0.2..0.2);
            }
        }
        let base = alphatransit_loss(&params, &target).unwrap();
        let central = |params: &mut NetParams, i: usize, k: usize, h: f64| {
            let orig = params.tensors[i].data[k];
            params.tensors[i].data[k] = orig + h;
            let plus = alphatransit_loss(params, &target).unwrap().loss;
            params.tensors[i].data[k] = orig - h;
            let minus = alphatransit_loss(params, &target).unwrap().loss;
            params.tensors[i].data[k] = orig;
            (plus - minus) / (2.0 * h)
        };
        let mut flat = 0usize;
        for i in 0..params.tensors.len() {
            for k in 0..params.tensors[i].data.len() {
                flat += 1;
                if flat % stride != 0 && k != 0 {
                    continue;
                }
                let analytic = base.grads[i].data[k];
                let mut e = rel_err(analytic, central(&mut params, i, k, 1e-5));
                if e > 1e-4 {
                    // A LeakyReLU kink inside [-h, h] spoils the difference
                    // quotient; a narrower step avoids it unless the
                    // analytic value is wrong.
                    retried += 1;
                    e = rel_err(analytic, central(&mut params, i, k, 1e-7));
                }
                if e > worst {
                    worst = e;
                    worst_at = format!("{}[{k}]", params.names[i]);
                }
                checked += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    check(
        worst <= 1e-4 && elapsed < Duration::from_secs(120),
        format!("{checked} coordinates ({retried} re-checked at h=1e-7), max rel err {worst:.2e} at {worst_at}, {elapsed:?}"),
    )
}

// ---------------------------------------------------------------- 4

fn masked_policy_normalization() -> Outcome {
    let mut r = rng(4);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = r.random_range(1..=40);
        let scale = [1.0, 10.0, 300.0][r.random_range(0..3)];
        let logits: Vec<f64> = (0..n).map(|_| r.random_range(-scale..scale)).collect();
        let mut mask: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        let keep = r.random_range(0..n);
        mask[keep] = true;
        let p = masked_policy(&logits, &mask).unwrap();
        let sum: f64 = p.iter().sum();
        worst = worst.max((sum - 1.0).abs());
        let zeros = p.iter().zip(&mask).all(|(x, m)| *m || *x == 0.0);
        if (sum - 1.0).abs() > 1e-12 || !zeros || p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            failures += 1;
        }
    }
    check(failures == 0, format!("10000 cases, {failures} failures, max |sum-1| {worst:.1e}"))
}

// ---------------------------------------------------------------- 5

/// Reward of every complete design reachable from `state`, keyed by the
/// first action taken.
fn enumerate(env: &DesignEnv, state: &DesignState, out: &mut Vec<Vec<Vec<usize>>>) {
    if state.is_done() {
        out.push(state.partial.completed.clone());
        return;
    }
    for &a in &state.candidates {
        enumerate(env, &env.transition(state, a).unwrap().state, out);
    }
}

/// Exhaustive oracle built only from `enumerate` and `env.evaluate`: a leaf's
/// value is the best reward over all of its completions, z-scored against
/// the whole design population.
struct ExhaustiveOracle {
    mean: f64,
    std: f64,
}

impl ExhaustiveOracle {
    fn new(env: &DesignEnv) -> Self {
        let mut designs = Vec::new();
        enumerate(env, &env.reset(), &mut designs);
        let r: Vec<f64> = designs.iter().map(|d| env.evaluate(d, 0).unwrap().reward).collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let std = (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r.len() as f64).sqrt();
        Self { mean, std }
    }

    fn best(env: &DesignEnv, state: &DesignState) -> f64 {
        let mut designs = Vec::new();
        enumerate(env, state, &mut designs);
        designs
            .iter()
            .map(|d| env.evaluate(d, 0).unwrap().reward)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Evaluator for ExhaustiveOracle {
    fn evaluate(&mut self, env: &DesignEnv, state: &DesignState, _: &mut ChaCha8Rng) -> Result<Evaluated, SearchError> {
        let m = state.candidates.len();
        let z = (Self::best(env, state) - self.mean) / (self.std + 1e-8);
        Ok(Evaluated {
            priors: vec![1.0 / m.max(1) as f64; m],
            value: z.clamp(-3.0, 3.0),
        })
    }
}

fn optimal_first_actions(env: &DesignEnv) -> Vec<usize> {
    let root = env.reset();
    let values: Vec<(usize, f64)> = root
        .candidates
        .iter()
        .map(|&a| (a, ExhaustiveOracle::best(env, &env.transition(&root, a).unwrap().state)))
        .collect();
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    values.into_iter().filter(|v| v.1 >= best - 1e-9).map(|v| v.0).collect()
}

fn mcts_oracle() -> Outcome {
    let t = Instant::now();
    let (mut runs, mut hits) = (0, 0);
    let mut misses = Vec::new();
    for toy in toy_suite() {
        for (k, l) in [(1, 3), (2, 3), (1, 4), (2, 4)] {
            let env = toy_env(toy.instance.clone(), k, l, 1.0).unwrap();
            let best = optimal_first_actions(&env);
            let cfg = SearchConfig {
                iterations: 200,
                ..SearchConfig::default()
            };
            for seed in 0..5 {
                let mut tree = SearchTree::new(env.reset());
                let mut oracle = ExhaustiveOracle::new(&env);
                // Root Dirichlet noise on, so the seed actually matters.
                let res = tree.run(&env, &mut oracle, &cfg, true, &mut rng(seed)).unwrap();
                let top = (0..res.visits.len())
                    .max_by_key(|&a| (res.visits[a], std::cmp::Reverse(a)))
                    .unwrap();
                runs += 1;
                if best.contains(&res.candidates[top]) {
                    hits += 1;
                } else {
                    misses.push(format!("{}/K{k}/L{l}/s{seed}", toy.name));
                }
            }
        }
    }
    let rate = hits as f64 / runs as f64;
    let elapsed = t.elapsed();
    check(
        rate >= 0.95 && elapsed < Duration::from_secs(300),
        format!("{hits}/{runs} runs match ({:.1}%), misses {misses:?}, {elapsed:?}", 100.0 * rate),
    )
}

// ---------------------------------------------------------------- 6

fn simulator_conservation() -> Outcome {
    let t = Instant::now();
    let net = grid_city(3, 4, 40, 6);
    let instance = Arc::new(Instance::from_network(net));
    let env = DesignEnv::new(
        instance.clone(),
        EnvConfig {
            routes: 3,
            max_len: 6,
            alpha: 1.0,
            ..EnvConfig::default()
        },
    )
    .unwrap();
    let g = &instance.graph;
    let cfg = env.config();
    let (mut bad_steps, mut over_capacity, mut nondeterministic) = (0usize, 0usize, 0usize);
    let mut steps_checked = 0usize;
    for d in 0..100u64 {
        let design = heuristic_design(HeuristicKind::Random, &env, d).unwrap().routes;
        let e = env.evaluate(&design, d).unwrap();
        let sim = transit_core::transitsim::SimConfig {
            seed: d,
            ..cfg.sim.clone()
        };
        let run = || simulate_traced(g, &design, &e.frequencies, &e.fleet, &instance.demand, cfg.alpha, &sim).unwrap();
        let (report, trace) = run();
        let (again, trace2) = run();
        if serde_json::to_string(&report).unwrap() != serde_json::to_string(&again).unwrap() || trace != trace2 {
            nondeterministic += 1;
        }
        for s in &trace {
            steps_checked += 1;
            if s.spawned != s.completed + s.onboard + s.waiting {
                bad_steps += 1;
            }
            if s.max_occupancy > sim.bus_capacity {
                over_capacity += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    check(
        bad_steps == 0 && over_capacity == 0 && nondeterministic == 0 && elapsed < Duration::from_secs(300),
        format!(
            "100 designs, {steps_checked} steps: {bad_steps} conservation breaks, {over_capacity} over capacity, \
{nondeterministic} non-reproducible, {elapsed:?}"
        ),
    )
}

// ---------------------------------------------------------------- 7

fn reward_goldens() -> Outcome {
    let cfg = EnvConfig::default();
    let zero = RewardTerms {
        coverage: 0.0,
        service: 0.0,
        wait_minutes: 0.0,
        move_minutes: 0.0,
        overlap: 0.0,
        fleet: 0,
        routes: 1,
        utilization: 0.0,
    };
    let full = RewardTerms {
        coverage: 1.0,
        service: 1.0,
        utilization: 1.0,
        ..zero.clone()
    };
    let capped = RewardTerms {
        wait_minutes: 45.0,
        move_minutes: 80.0,
        ..zero.clone()
    };
    let mixed = RewardTerms {
        coverage: 0.5,
        service: 0.25,
        wait_minutes: 15.0,
        move_minutes: 20.0,
        overlap: 0.25,
        fleet: 8,
        routes: 4,
        utilization: 0.5,
    };
    let cases = [
        ("full score", terminal_reward(&full, &cfg), 117.0),
        ("wait and move caps", terminal_reward(&capped, &cfg), -20.0 - 10.0),
        ("zero", terminal_reward(&zero, &cfg), 0.0),
        ("mixed", terminal_reward(&mixed, &cfg), 30.0 + 11.25 - 10.0 - 5.0 - 2.5 - 4.0 + 6.0),
        ("overlap disjoint", overlap_ratio(&[vec![0, 1], vec![2, 3]]), 0.0),
        ("overlap quarter", overlap_ratio(&[vec![0, 1, 2, 3], vec![0, 1, 4]]), 0.25),
        ("overlap identical", overlap_ratio(&[vec![0, 1, 2], vec![2, 1, 0]]), 1.0),
    ];
    let wrong: Vec<String> = cases
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(name, got, want)| format!("{name}: {got} != {want}"))
        .collect();
    check(wrong.is_empty(), format!("{} cases exact; mismatches {wrong:?}", cases.len()))
}

// ---------------------------------------------------------------- 8

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn learning_signal() -> Outcome {
    let t = Instant::now();
    let instance = Arc::new(Instance::from_network(grid_city(3, 4, 30, 8)));
    let env = DesignEnv::new(
        instance,
        EnvConfig {
            routes: 3,
            max_len: 5,
            alpha: 1.0,
            ..EnvConfig::default()
        },
    )
    .unwrap();
    let mut cfg = TrainRunConfig::for_alpha(1.0);
    cfg.env_steps = 2_000;
    cfg.search.iterations = 50;
    cfg.seed = 8;
    // Desk-scale learner settings (see README).
    cfg.workers = 8;
    cfg.net = NetConfig {
        hidden: 32,
        widths: vec![32, 32],
        heads: vec![4, 4],
        actor: vec![64, 32],
        critic: vec![64, 32],
        ..NetConfig::default()
    };
    cfg.train_steps_per_iter = 40;
    cfg.batch_size = 64;
    cfg.lr = 1e-3;
    let mut trainer = Trainer::new(env.clone(), cfg.clone()).unwrap();
    trainer.run(&mut |_| {}, &mut |_| {}).unwrap();
    let trained: Vec<f64> = (0..20)
        .map(|s| design_with_network(&env, trainer.params(), Method::Alphatransit, &cfg.search, s).unwrap().evaluation.reward)
        .collect();
    let random: Vec<f64> = (0..20)
        .map(|s| heuristic_design(HeuristicKind::Random, &env, s).unwrap().evaluation.reward)
        .collect();
    let (ma, sa) = mean_std(&trained);
    let (mr, sr) = mean_std(&random);
    let pooled = ((sa * sa + sr * sr) / 2.0).sqrt();
    let gap = (ma - mr) / pooled.max(1e-12);
    let elapsed = t.elapsed();
    check(
        gap >= 0.5 && elapsed <= Duration::from_secs(600),
        format!(
            "trained {ma:.3}±{sa:.3} vs random {mr:.3}±{sr:.3}: gap {gap:.2} pooled std, {} env steps, {elapsed:?}",
            trainer.state().env_steps
        ),
    )
}

// ---------------------------------------------------------------- 9

fn schedule_and_clip() -> Outcome {
    let schedule = [(0.0, 1.0), (0.29, 1.0), (0.3, 0.7), (0.59, 0.7), (0.6, 0.5), (1.0, 0.5)];
    let bad_sched: Vec<_> = schedule.iter().filter(|(p, want)| temperature(*p) != *want).collect();
    let mut stats = RewardStats::default();
    for z in [0.0, 2.0] {
        stats.update(z);
    }
    // mean 1, population std 1
    let clips = [(100.0, 3.0), (-100.0, -3.0), (2.0, 1.0), (4.0, 3.0)];
    let bad_clip: Vec<_> = clips
        .iter()
        .filter(|(z, want)| (stats.normalize(*z) - want).abs() > 1e-7)
        .collect();
    let mut fresh = RewardStats::default();
    let first = normalize_value(5.0, &mut fresh);
    check(
        bad_sched.is_empty() && bad_clip.is_empty() && first.abs() <= 3.0,
        format!("schedule mismatches {bad_sched:?}, clip mismatches {bad_clip:?}"),
    )
}

// ---------------------------------------------------------------- 10

fn ga_invariants() -> Outcome {
    let t = Instant::now();
    let env = toy_env(toy_suite()[0].instance.clone(), 2, 4, 1.0).unwrap();
    let cfg = GaConfig {
        generations: 20,
        ..GaConfig::default()
    };
    let mut problems = Vec::new();
    let res = ga_optimize(&env, &cfg, 10, &mut |gen, pop| {
        for ind in pop {
            if validate_design(env.graph(), &ind.routes, Some((2, 4)), true).is_err() {
                problems.push(format!("gen {}: invalid {:?}", gen.generation, ind.routes));
            }
            if ind.routes.iter().any(|r| r.len() < 2) {
                problems.push(format!("gen {}: short route {:?}", gen.generation, ind.routes));
            }
        }
    })
    .unwrap();
    let monotone = res.history.windows(2).all(|w| w[1].best >= w[0].best);
    check(
        monotone && problems.is_empty() && res.history.len() == 21,
        format!(
            "best {:.3} -> {:.3} over {} generations, monotone {monotone}, problems {problems:?}, {:?}",
            res.history[0].best,
            res.history.last().unwrap().best,
            res.history.len() - 1,
            t.elapsed()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("search-space estimate", search_space),
        ("frequency-projection minimality", frequency_minimality),
        ("gradient correctness", gradient_check),
        ("masked-policy normalization", masked_policy_normalization),
        ("tree-search oracle agreement", mcts_oracle),
        ("simulator conservation", simulator_conservation),
        ("reward arithmetic goldens", reward_goldens),
        ("desk-scale learning signal", learning_signal),
        ("temperature schedule and value clip", schedule_and_clip),
        ("genetic-algorithm invariants", ga_invariants),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let line = match outcome {
            Ok(detail) => format!("PASS [{n:>2}] {name}: {detail}"),
            Err(detail) => {
                failed.push(n);
                format!("FAIL [{n:>2}] {name}: {detail}")
            }
        };
        // Straight to the handle: these lines should show even when the
        // harness captures output.
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
