use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::heuristics::{demand_scores, random_walk_from, HeuristicKind};
use super::BaselineError;
use crate::designenv::{validate_design, DesignEnv};
use crate::netmodel::Route;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub tournament: usize,
    pub generations: usize,
    pub min_route_len: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            crossover_rate: 0.8,
            mutation_rate: 0.4,
            elitism: 5,
            tournament: 3,
            generations: 100,
            min_route_len: 2,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let bad = |m: &'static str| Err(BaselineError::Config(m));
        if self.population < 2 || self.elitism >= self.population {
            return bad("population must be >= 2 and elitism < population");
        }
        if self.tournament == 0 {
            return bad("tournament size must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("rates must be in [0, 1]");
        }
        if self.min_route_len < 2 {
            return bad("min_route_len must be >= 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub routes: Vec<Route>,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct GaResult {
    pub best: Individual,
    pub history: Vec<GenerationStats>,
    pub population: Vec<Individual>,
}

/// Route built greedily: always extend to the highest demand-cover score
/// (first on ties).
fn greedy_route(env: &DesignEnv) -> Route {
    let mut state = env.reset();
    let hub = env.graph().transit_center();
    let mut route = vec![hub];
    while route.len() < env.config().max_len && !state.candidates.is_empty() {
        let scores = demand_scores(env, &state);
        let best = (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
        let a = state.candidates[best];
        route.push(a);
        state.partial.current.push(a);
        state.candidates = crate::netmodel::candidate_set(env.graph(), &state.partial);
    }
    route
}

/// Extends `route` by random walk until it has at least `min_len` nodes.
fn repair(env: &DesignEnv, route: Route, min_len: usize, rng: &mut impl Rng) -> Route {
    let mut r = route;
    let mut attempts = 0;
    while r.len() < min_len && attempts < 8 {
        let hub_only = vec![r[0]];
        r = random_walk_from(env, if r.len() > 1 { r } else { hub_only }, rng);
        attempts += 1;
    }
    r
}

fn random_design(env: &DesignEnv, rng: &mut impl Rng) -> Vec<Route> {
    let hub = env.graph().transit_center();
    (0..env.config().routes).map(|_| random_walk_from(env, vec![hub], rng)).collect()
}

fn demand_sampled_design(env: &DesignEnv, rng: &mut ChaCha8Rng) -> Result<Vec<Route>, BaselineError> {
    let mut state = env.reset();
    while !state.is_done() {
        let a = super::heuristics::heuristic_policy(HeuristicKind::DemandCover, env, &state, rng);
        state = env.transition(&state, a)?.state;
    }
    Ok(state.partial.completed)
}

/// Reference routes usable as an individual: they must start at the hub and
/// fit the shape; longer routes are truncated and missing ones grown.
fn warm_start(env: &DesignEnv, rng: &mut impl Rng) -> Option<Vec<Route>> {
    let real = env.instance().real_routes.as_ref()?;
    let hub = env.graph().transit_center();
    let cfg = env.config();
    let mut routes: Vec<Route> = real
        .iter()
        .filter(|r| r.first() == Some(&hub) && r.len() >= 2)
        .take(cfg.routes)
        .map(|r| r[..r.len().min(cfg.max_len)].to_vec())
        .collect();
    if routes.is_empty() {
        return None;
    }
    while routes.len() < cfg.routes {
        routes.push(random_walk_from(env, vec![hub], rng));
    }
    Some(routes)
}

/// Cuts one route at a random interior node and regrows it by random walk.
pub fn mutate(env: &DesignEnv, routes: &mut [Route], min_len: usize, rng: &mut impl Rng) {
    let k = rng.random_range(0..routes.len());
    let r = &routes[k];
    let keep = if r.len() > 2 { rng.random_range(1..r.len() - 1) + 1 } else { 1 };
    let regrown = random_walk_from(env, r[..keep].to_vec(), rng);
    routes[k] = repair(env, regrown, min_len, rng);
}

/// Each route index comes from either parent with equal probability.
pub fn crossover(a: &[Route], b: &[Route], rng: &mut impl Rng) -> Vec<Route> {
    a.iter()
        .zip(b)
        .map(|(x, y)| if rng.random_bool(0.5) { x.clone() } else { y.clone() })
        .collect()
}

fn tournament<'p>(pop: &'p [Individual], size: usize, rng: &mut impl Rng) -> &'p Individual {
    (0..size)
        .map(|_| &pop[rng.random_range(0..pop.len())])
        .fold(None, |best: Option<&Individual>, c| match best {
            Some(b) if b.fitness >= c.fitness => Some(b),
            _ => Some(c),
        })
        .expect("tournament size >= 1")
}

fn evaluate_all(env: &DesignEnv, designs: Vec<Vec<Route>>, eval_seed: u64) -> Result<Vec<Individual>, BaselineError> {
    designs
        .into_par_iter()
        .map(|routes| {
            let fitness = env.evaluate(&routes, eval_seed)?.reward;
            Ok(Individual { routes, fitness })
        })
        .collect()
}

fn sort_by_fitness(pop: &mut [Individual]) {
    pop.sort_by(|a, b| b.fitness.total_cmp(&a.fitness).then_with(|| a.routes.cmp(&b.routes)));
}

fn stats(generation: usize, pop: &[Individual]) -> GenerationStats {
    GenerationStats {
        generation,
        best: pop[0].fitness,
        mean: pop.iter().map(|i| i.fitness).sum::<f64>() / pop.len() as f64,
    }
}

/// Evolves complete designs with the simulator reward as fitness. The
/// population is sorted best-first after every generation.
pub fn ga_optimize(
    env: &DesignEnv,
    cfg: &GaConfig,
    seed_value: u64,
    on_generation: &mut dyn FnMut(&GenerationStats, &[Individual]),
) -> Result<GaResult, BaselineError> {
    cfg.validate()?;
    let mut rng = seed::child_rng(seed_value, 0x6761);
    let min_len = cfg.min_route_len.min(env.config().max_len);
    let greedy = greedy_route(env);
    let mut initial = vec![vec![greedy; env.config().routes]];
    if let Some(w) = warm_start(env, &mut rng) {
        initial.push(w);
    }
    while initial.len() < cfg.population {
        let d = if initial.len() % 2 == 0 {
            random_design(env, &mut rng)
        } else {
            demand_sampled_design(env, &mut rng)?
        };
        initial.push(d.into_iter().map(|r| repair(env, r, min_len, &mut rng)).collect());
    }
    let mut pop = evaluate_all(env, initial, seed_value)?;
    sort_by_fitness(&mut pop);
    let mut history = vec![stats(0, &pop)];
    on_generation(&history[0], &pop);

    for generation in 1..=cfg.generations {
        let mut children = Vec::with_capacity(cfg.population - cfg.elitism);
        while children.len() < cfg.population - cfg.elitism {
            let a = tournament(&pop, cfg.tournament, &mut rng);
            let b = tournament(&pop, cfg.tournament, &mut rng);
            let mut child = if rng.random_bool(cfg.crossover_rate) {
                crossover(&a.routes, &b.routes, &mut rng)
            } else {
                a.routes.clone()
            };
            if rng.random_bool(cfg.mutation_rate) {
                mutate(env, &mut child, min_len, &mut rng);
            }
            children.push(child);
        }
        let mut next: Vec<Individual> = pop[..cfg.elitism].to_vec();
        next.extend(evaluate_all(env, children, seed_value)?);
        sort_by_fitness(&mut next);
        pop = next;
        let s = stats(generation, &pop);
        on_generation(&s, &pop);
        history.push(s);
    }
    for ind in &pop {
        validate_design(env.graph(), &ind.routes, Some((env.config().routes, env.config().max_len)), true)?;
    }
    Ok(GaResult {
        best: pop[0].clone(),
        history,
        population: pop,
    })
}
