use serde::{Deserialize, Serialize};

use super::{candidate_set, DemandMatrix, PartialDesign, RoadGraph};

pub const NODE_FEATURES: usize = 16;
pub const EDGE_FEATURES: usize = 2;

/// Column layout of [`StateEncoding::node_features`].
pub mod col {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const DEGREE: usize = 2;
    pub const DEMAND_OUT: usize = 3;
    pub const DEMAND_IN: usize = 4;
    pub const CAND_TO_CUR: usize = 5;
    pub const CAND_FROM_CUR: usize = 6;
    pub const CORE_TO_CORE: usize = 7;
    pub const CORE_FROM_CORE: usize = 8;
    pub const ALL_TO_CUR: usize = 9;
    pub const ALL_FROM_CUR: usize = 10;
    pub const ALL_TO_CMP: usize = 11;
    pub const ALL_FROM_CMP: usize = 12;
    pub const IN_CURRENT: usize = 13;
    pub const COMPLETED_FRACTION: usize = 14;
    pub const VALID_NEXT: usize = 15;
}

/// Graph observation fed to the policy-value network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEncoding {
    pub num_nodes: usize,
    /// Row-major `num_nodes x 16`.
    pub node_features: Vec<f64>,
    pub edge_index: Vec<(usize, usize)>,
    /// Min-max scaled `(length, free_speed)` per arc.
    pub edge_features: Vec<[f64; EDGE_FEATURES]>,
}

impl StateEncoding {
    pub fn feature(&self, node: usize, column: usize) -> f64 {
        self.node_features[node * NODE_FEATURES + column]
    }

    pub fn row(&self, node: usize) -> &[f64] {
        &self.node_features[node * NODE_FEATURES..(node + 1) * NODE_FEATURES]
    }
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    move |v| {
        let span = hi - lo;
        if span > 0.0 {
            (v - lo) / span
        } else {
            0.5
        }
    }
}

/// Caches the design-independent parts of the encoding for one network.
#[derive(Debug, Clone)]
pub struct StateEncoder {
    n: usize,
    static_cols: Vec<[f64; 5]>,
    edge_index: Vec<(usize, usize)>,
    edge_features: Vec<[f64; EDGE_FEATURES]>,
    /// Demand divided by the global reference scale, row-major.
    scaled_demand: Vec<f64>,
}

impl StateEncoder {
    pub fn new(graph: &RoadGraph, demand: &DemandMatrix) -> Self {
        let n = graph.node_count();
        let sx = min_max(graph.nodes().iter().map(|c| c.x));
        let sy = min_max(graph.nodes().iter().map(|c| c.y));
        let max_degree = (0..n).map(|i| graph.degree(i)).max().unwrap_or(0);
        let reference = demand.reference_scale();
        let scale = |v: f64| if reference > 0.0 { v / reference } else { 0.0 };

        let static_cols = (0..n)
            .map(|i| {
                let c = graph.nodes()[i];
                let degree = if max_degree > 0 {
                    graph.degree(i) as f64 / max_degree as f64
                } else {
                    0.0
                };
                [
                    sx(c.x),
                    sy(c.y),
                    degree,
                    scale(demand.row_sum(i)),
                    scale(demand.col_sum(i)),
                ]
            })
            .collect();

        let sl = min_max(graph.edges().iter().map(|e| e.length));
        let ss = min_max(graph.edges().iter().map(|e| e.free_speed));
        let edge_features = graph
            .edges()
            .iter()
            .flat_map(|e| {
                let f = [sl(e.length), ss(e.free_speed)];
                [f, f]
            })
            .collect();

        let mut scaled_demand = vec![0.0; n * n];
        for (o, d, r) in demand.entries() {
            scaled_demand[o * n + d] = scale(r);
        }

        Self {
            n,
            static_cols,
            edge_index: graph.arcs(),
            edge_features,
            scaled_demand,
        }
    }

    fn d(&self, i: usize, j: usize) -> f64 {
        self.scaled_demand[i * self.n + j]
    }

    pub fn encode(&self, partial: &PartialDesign, candidates: &[usize]) -> StateEncoding {
        let n = self.n;
        let mut in_cur = vec![false; n];
        for &v in &partial.current {
            in_cur[v] = true;
        }
        let mut completed_count = vec![0usize; n];
        for route in &partial.completed {
            for &v in route {
                completed_count[v] += 1;
            }
        }
        let cmp: Vec<usize> = (0..n).filter(|&v| completed_count[v] > 0).collect();
        let core: Vec<usize> = (0..n)
            .filter(|&v| in_cur[v] || completed_count[v] > 0)
            .collect();
        let mut valid = vec![false; n];
        for &c in candidates {
            valid[c] = true;
        }
        let total_completed = partial.completed.len();

        let mut x = vec![0.0; n * NODE_FEATURES];
        for i in 0..n {
            let row = &mut x[i * NODE_FEATURES..(i + 1) * NODE_FEATURES];
            row[..5].copy_from_slice(&self.static_cols[i]);

            let (to_cur, from_cur) = partial
                .current
                .iter()
                .fold((0.0, 0.0), |(a, b), &j| (a + self.d(i, j), b + self.d(j, i)));
            let (to_cmp, from_cmp) = cmp
                .iter()
                .fold((0.0, 0.0), |(a, b), &j| (a + self.d(i, j), b + self.d(j, i)));

            if valid[i] {
                row[col::CAND_TO_CUR] = to_cur;
                row[col::CAND_FROM_CUR] = from_cur;
            }
            if in_cur[i] || completed_count[i] > 0 {
                let (to_core, from_core) = core
                    .iter()
                    .fold((0.0, 0.0), |(a, b), &j| (a + self.d(i, j), b + self.d(j, i)));
                row[col::CORE_TO_CORE] = to_core;
                row[col::CORE_FROM_CORE] = from_core;
            }
            row[col::ALL_TO_CUR] = to_cur;
            row[col::ALL_FROM_CUR] = from_cur;
            row[col::ALL_TO_CMP] = to_cmp;
            row[col::ALL_FROM_CMP] = from_cmp;
            row[col::IN_CURRENT] = if in_cur[i] { 1.0 } else { 0.0 };
            row[col::COMPLETED_FRACTION] = if total_completed > 0 {
                completed_count[i] as f64 / total_completed as f64
            } else {
                0.0
            };
            row[col::VALID_NEXT] = if valid[i] { 1.0 } else { 0.0 };
        }
        StateEncoding {
            num_nodes: n,
            node_features: x,
            edge_index: self.edge_index.clone(),
            edge_features: self.edge_features.clone(),
        }
    }
}

/// Encodes a partial design as an `n x 16` feature matrix plus arc list.
pub fn encode_state(
    graph: &RoadGraph,
    demand: &DemandMatrix,
    partial: &PartialDesign,
    candidates: &[usize],
) -> StateEncoding {
    StateEncoder::new(graph, demand).encode(partial, candidates)
}

/// Encodes with the candidate set derived from `partial`.
pub fn encode_partial(graph: &RoadGraph, demand: &DemandMatrix, partial: &PartialDesign) -> StateEncoding {
    encode_state(graph, demand, partial, &candidate_set(graph, partial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::graph::tests::{edge, line_nodes, triangle};

    fn design(completed: Vec<Vec<usize>>, current: Vec<usize>) -> PartialDesign {
        PartialDesign {
            completed,
            current,
            routes_total: 10,
            max_len: 5,
        }
    }

    #[test]
    fn empty_demand_zeroes_demand_columns() {
        let g = triangle();
        let d = DemandMatrix::zeros(3);
        let p = design(vec![], vec![0]);
        let enc = encode_partial(&g, &d, &p);
        for i in 0..3 {
            for c in col::DEMAND_OUT..=col::ALL_FROM_CMP {
                assert_eq!(enc.feature(i, c), 0.0);
            }
        }
        assert_eq!(enc.feature(0, col::IN_CURRENT), 1.0);
        assert_eq!(enc.feature(1, col::VALID_NEXT), 1.0);
        assert_eq!(enc.feature(2, col::VALID_NEXT), 1.0);
    }

    #[test]
    fn current_route_nodes_are_not_valid_next() {
        let g = triangle();
        let d = DemandMatrix::from_entries(3, [(0, 1, 2.0), (2, 0, 1.0)]).unwrap();
        let p = design(vec![], vec![0, 1]);
        let enc = encode_partial(&g, &d, &p);
        for v in [0, 1] {
            assert_eq!(enc.feature(v, col::IN_CURRENT), 1.0);
            assert_eq!(enc.feature(v, col::VALID_NEXT), 0.0);
        }
        assert_eq!(enc.feature(2, col::VALID_NEXT), 1.0);
        // reference scale = max(row 2, col 0 ...) = 2; node 2 sends 1 to node 0.
        assert!((enc.feature(2, col::CAND_TO_CUR) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn completed_fraction_counts_routes() {
        let g = RoadGraph::new(line_nodes(3), vec![edge(0, 1, 1.0), edge(1, 2, 1.0)], 0).unwrap();
        let d = DemandMatrix::zeros(3);
        let mut completed = vec![vec![0, 1]; 4];
        completed.extend(vec![vec![0]; 4]);
        let p = design(completed, vec![0]);
        let enc = encode_partial(&g, &d, &p);
        assert_eq!(enc.feature(1, col::COMPLETED_FRACTION), 0.5);
        assert_eq!(enc.feature(0, col::COMPLETED_FRACTION), 1.0);
        assert_eq!(enc.feature(2, col::COMPLETED_FRACTION), 0.0);
    }

    #[test]
    fn degenerate_axis_maps_to_half() {
        let g = triangle();
        let enc = encode_partial(&g, &DemandMatrix::zeros(3), &design(vec![], vec![0]));
        // line_nodes puts every node at y = 0
        for i in 0..3 {
            assert_eq!(enc.feature(i, col::Y), 0.5);
        }
        assert_eq!(enc.edge_index.len(), 6);
        assert_eq!(enc.edge_features[0], [0.5, 0.5]);
    }
}
