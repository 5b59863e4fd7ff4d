//! Seeded synthetic cities in the network file format.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DemandRecord, EdgeRecord, NetError, NetworkFile, NodeRecord};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CityLayout {
    /// Rectangular street grid.
    Grid {
        rows: usize,
        cols: usize,
        spacing: f64,
    },
    /// Uniform points in a square, joined by their Euclidean minimum spanning
    /// tree plus the shortest remaining pairs until `edges` is reached.
    RandomGeometric {
        nodes: usize,
        edges: usize,
        extent: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityParams {
    pub layout: CityLayout,
    /// Free-flow speed on every link, m/s.
    pub free_speed: f64,
    /// Number of distinct ordered OD pairs with positive demand.
    pub demand_pairs: usize,
    /// Rates are drawn uniformly from `[1, max_rate]` trips/hour.
    pub max_rate: f64,
    pub seed: u64,
}

impl Default for CityParams {
    fn default() -> Self {
        Self {
            layout: CityLayout::Grid {
                rows: 3,
                cols: 4,
                spacing: 500.0,
            },
            free_speed: 10.0,
            demand_pairs: 30,
            max_rate: 40.0,
            seed: 0,
        }
    }
}

fn invalid(field: &'static str, requirement: &'static str, value: f64) -> NetError {
    NetError::InvalidValue {
        record: "city parameters".into(),
        field,
        requirement,
        value,
    }
}

pub fn generate_city(params: &CityParams) -> Result<NetworkFile, NetError> {
    if !(params.free_speed.is_finite() && params.free_speed > 0.0) {
        return Err(invalid("free_speed", "> 0", params.free_speed));
    }
    if !(params.max_rate.is_finite() && params.max_rate >= 1.0) {
        return Err(invalid("max_rate", ">= 1", params.max_rate));
    }
    let mut rng = seed::child_rng(params.seed, 1);
    let (coords, pairs) = match params.layout {
        CityLayout::Grid {
            rows,
            cols,
            spacing,
        } => {
            if rows == 0 || cols == 0 {
                return Err(invalid("rows/cols", ">= 1", 0.0));
            }
            if !(spacing.is_finite() && spacing > 0.0) {
                return Err(invalid("spacing", "> 0", spacing));
            }
            grid(rows, cols, spacing)
        }
        CityLayout::RandomGeometric {
            nodes,
            edges,
            extent,
        } => {
            if nodes == 0 {
                return Err(invalid("nodes", ">= 1", 0.0));
            }
            let max_edges = nodes * (nodes - 1) / 2;
            if edges + 1 < nodes || edges > max_edges {
                return Err(invalid(
                    "edges",
                    "between nodes - 1 and nodes * (nodes - 1) / 2",
                    edges as f64,
                ));
            }
            if !(extent.is_finite() && extent > 0.0) {
                return Err(invalid("extent", "> 0", extent));
            }
            random_geometric(nodes, edges, extent, &mut rng)
        }
    };
    let n = coords.len();
    let dist = |a: usize, b: usize| {
        let (p, q): ((f64, f64), (f64, f64)) = (coords[a], coords[b]);
        (p.0 - q.0).hypot(p.1 - q.1)
    };

    let (cx, cy) = coords
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x / n as f64, sy + y / n as f64));
    let hub = (0..n)
        .min_by(|&a, &b| {
            let da = (coords[a].0 - cx).hypot(coords[a].1 - cy);
            let db = (coords[b].0 - cx).hypot(coords[b].1 - cy);
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .expect("at least one node");

    let ordered_pairs = n * n.saturating_sub(1);
    let wanted = params.demand_pairs.min(ordered_pairs);
    let mut demand_rng = seed::child_rng(params.seed, 2);
    let mut picked = if wanted > 0 {
        sample(&mut demand_rng, ordered_pairs, wanted).into_vec()
    } else {
        Vec::new()
    };
    picked.sort_unstable();
    let demand = picked
        .into_iter()
        .map(|k| {
            let o = k / (n - 1);
            let mut d = k % (n - 1);
            if d >= o {
                d += 1;
            }
            let rate: f64 = demand_rng.random_range(1.0..=params.max_rate);
            DemandRecord {
                o: o as i64,
                d: d as i64,
                rate: (rate * 10.0).round() / 10.0,
            }
        })
        .collect();

    Ok(NetworkFile {
        nodes: coords
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| NodeRecord { id: i as i64, x, y })
            .collect(),
        edges: pairs
            .into_iter()
            .map(|(u, v)| EdgeRecord {
                u: u as i64,
                v: v as i64,
                length: dist(u, v).max(1.0),
                free_speed: params.free_speed,
            })
            .collect(),
        transit_center: hub as i64,
        demand,
        real_routes: None,
    })
}

type Layout = (Vec<(f64, f64)>, Vec<(usize, usize)>);

fn grid(rows: usize, cols: usize, spacing: f64) -> Layout {
    let id = |r: usize, c: usize| r * cols + c;
    let mut coords = Vec::with_capacity(rows * cols);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            coords.push((c as f64 * spacing, r as f64 * spacing));
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    (coords, edges)
}

fn random_geometric(nodes: usize, edges: usize, extent: f64, rng: &mut impl Rng) -> Layout {
    let coords: Vec<(f64, f64)> = (0..nodes)
        .map(|_| {
            let x: f64 = rng.random_range(0.0..extent);
            let y: f64 = rng.random_range(0.0..extent);
            ((x * 10.0).round() / 10.0, (y * 10.0).round() / 10.0)
        })
        .collect();
    let dist = |a: usize, b: usize| (coords[a].0 - coords[b].0).hypot(coords[a].1 - coords[b].1);

    // Prim's algorithm on the complete Euclidean graph.
    let mut in_tree = vec![false; nodes];
    let mut best = vec![(f64::INFINITY, 0usize); nodes];
    let mut chosen = std::collections::BTreeSet::new();
    in_tree[0] = true;
    for v in 1..nodes {
        best[v] = (dist(0, v), 0);
    }
    for _ in 1..nodes {
        let v = (0..nodes)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0).then(a.cmp(&b)))
            .expect("a node outside the tree");
        in_tree[v] = true;
        let u = best[v].1;
        chosen.insert((u.min(v), u.max(v)));
        for w in 0..nodes {
            if !in_tree[w] {
                let d = dist(v, w);
                if d < best[w].0 {
                    best[w] = (d, v);
                }
            }
        }
    }
    let mut rest: Vec<(usize, usize)> = (0..nodes)
        .flat_map(|a| (a + 1..nodes).map(move |b| (a, b)))
        .filter(|p| !chosen.contains(p))
        .collect();
    rest.sort_by(|&(a, b), &(c, d)| dist(a, b).total_cmp(&dist(c, d)).then((a, b).cmp(&(c, d))));
    let extra = edges + 1 - nodes;
    chosen.extend(rest.into_iter().take(extra));
    (coords, chosen.into_iter().collect())
}
