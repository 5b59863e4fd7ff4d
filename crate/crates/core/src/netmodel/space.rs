use serde::Serialize;

use super::RoadGraph;

/// Approximate count of candidate route sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchSpaceEstimate {
    pub mean_degree: f64,
    /// Approximate number of simple paths per route.
    pub per_route: f64,
    /// `log10(per_route^K)`; `-inf` when the graph is degenerate.
    pub total_log10: f64,
    pub degenerate: bool,
}

/// Counts simple paths of `path_edges` edges as `d * (d - 1)^(path_edges - 1)`
/// with `d = 2|E|/|V|`, times `|V|` when routes may start anywhere, raised to
/// the number of routes.
pub fn estimate_from_counts(
    nodes: usize,
    edges: usize,
    routes: usize,
    path_edges: u32,
    hub_start: bool,
) -> SearchSpaceEstimate {
    let d = if nodes == 0 {
        0.0
    } else {
        2.0 * edges as f64 / nodes as f64
    };
    if d <= 1.0 || path_edges == 0 {
        log::warn!("degenerate graph for search-space estimate (mean degree {d:.3})");
        return SearchSpaceEstimate {
            mean_degree: d,
            per_route: 0.0,
            total_log10: f64::NEG_INFINITY,
            degenerate: true,
        };
    }
    let mut log_per_route = d.log10() + (path_edges - 1) as f64 * (d - 1.0).log10();
    if !hub_start {
        log_per_route += (nodes as f64).log10();
    }
    SearchSpaceEstimate {
        mean_degree: d,
        per_route: 10f64.powf(log_per_route),
        total_log10: routes as f64 * log_per_route,
        degenerate: false,
    }
}

pub fn estimate_search_space(
    graph: &RoadGraph,
    routes: usize,
    path_edges: u32,
    hub_start: bool,
) -> SearchSpaceEstimate {
    estimate_from_counts(graph.node_count(), graph.edge_count(), routes, path_edges, hub_start)
}
