use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::netmodel::RoadGraph;
use crate::routegraph::{BfsTree, RouteGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leg {
    pub route: usize,
    pub board: usize,
    pub alight: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Itinerary {
    pub legs: Vec<Leg>,
}

impl Itinerary {
    pub fn transfers(&self) -> usize {
        self.legs.len().saturating_sub(1)
    }

    pub fn origin(&self) -> usize {
        self.legs[0].board
    }

    pub fn destination(&self) -> usize {
        self.legs[self.legs.len() - 1].alight
    }
}

/// Minimum-hop path from `origin` to `destination` on the route graph, cut
/// into legs. Each leg rides one route as far along the path as it goes;
/// among routes reaching equally far the canonically smallest wins.
pub fn plan_itinerary(rg: &RouteGraph, origin: usize, destination: usize) -> Option<Itinerary> {
    plan_on_tree(rg, &rg.bfs(origin), destination)
}

fn plan_on_tree(rg: &RouteGraph, tree: &BfsTree, destination: usize) -> Option<Itinerary> {
    if tree.source == destination {
        return None;
    }
    let path = tree.path_to(destination)?;
    let last = path.len() - 1;
    let mut legs = Vec::new();
    let mut s = 0;
    while s < last {
        let (reach, route) = rg
            .members(path[s], path[s + 1])
            .iter()
            .map(|&r| {
                let mut e = s + 1;
                while e < last && rg.members(path[e], path[e + 1]).contains(&r) {
                    e += 1;
                }
                (e, r)
            })
            .max_by(|a, b| a.0.cmp(&b.0).then(rg.canonical_rank(b.1).cmp(&rg.canonical_rank(a.1))))
            .expect("path segments belong to some route");
        legs.push(Leg {
            route,
            board: path[s],
            alight: path[reach],
        });
        s = reach;
    }
    Some(Itinerary { legs })
}

/// Resolves demand endpoints to served stops within walking distance and
/// plans the ride between them.
///
/// Every served node within the radius of an endpoint (the endpoint itself
/// included, when served) is a possible stop. Among connected stop pairs the
/// one with the smallest total walking distance wins, then the fewest hops,
/// then the smallest ids. Shrinking the route set only removes options, so
/// a pair that becomes unreachable never comes back.
pub struct AccessMap<'a> {
    rg: &'a RouteGraph,
    options: Vec<Vec<(f64, usize)>>,
    component: Vec<Option<usize>>,
    trees: RefCell<HashMap<usize, BfsTree>>,
}

impl<'a> AccessMap<'a> {
    pub fn new(graph: &RoadGraph, rg: &'a RouteGraph, radius: f64) -> Self {
        let served = rg.served_nodes();
        let options = (0..graph.node_count())
            .map(|v| {
                let mut near: Vec<(f64, usize)> = served
                    .iter()
                    .map(|&s| (if s == v { 0.0 } else { graph.distance(v, s) }, s))
                    .filter(|&(d, _)| d <= radius)
                    .collect();
                near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                near
            })
            .collect();
        let mut component = rg.components();
        component.resize(graph.node_count(), None);
        Self {
            rg,
            options,
            component,
            trees: RefCell::new(HashMap::new()),
        }
    }

    fn hops(&self, a: usize, b: usize) -> usize {
        let mut trees = self.trees.borrow_mut();
        let tree = trees.entry(a).or_insert_with(|| self.rg.bfs(a));
        tree.hops[b].expect("same component")
    }

    /// Stops `(board, alight)` used for trips from `o` to `d`, if any.
    pub fn resolve(&self, o: usize, d: usize) -> Option<(usize, usize)> {
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for &(da, a) in &self.options[o] {
            for &(db, b) in &self.options[d] {
                if a == b || self.component[a].is_none() || self.component[a] != self.component[b] {
                    continue;
                }
                let walk = da + db;
                if let Some((w, ..)) = best {
                    if walk > w {
                        continue;
                    }
                }
                let key = (walk, self.hops(a, b), a, b);
                let better = match best {
                    None => true,
                    Some(cur) => key.0.total_cmp(&cur.0).then((key.1, key.2, key.3).cmp(&(cur.1, cur.2, cur.3))).is_lt(),
                };
                if better {
                    best = Some(key);
                }
            }
        }
        best.map(|(_, _, a, b)| (a, b))
    }

    pub fn itinerary(&self, o: usize, d: usize) -> Option<Itinerary> {
        let (a, b) = self.resolve(o, d)?;
        let mut trees = self.trees.borrow_mut();
        let tree = trees.entry(a).or_insert_with(|| self.rg.bfs(a));
        plan_on_tree(self.rg, tree, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_route_single_leg() {
        let rg = RouteGraph::build(&[vec![0, 1, 2]]);
        let it = plan_itinerary(&rg, 0, 2).unwrap();
        assert_eq!(it.legs, vec![Leg { route: 0, board: 0, alight: 2 }]);
        assert_eq!(it.transfers(), 0);
        let back = plan_itinerary(&rg, 2, 0).unwrap();
        assert_eq!(back.legs, vec![Leg { route: 0, board: 2, alight: 0 }]);
    }

    #[test]
    fn transfer_at_shared_node() {
        let rg = RouteGraph::build(&[vec![0, 1], vec![1, 2]]);
        let it = plan_itinerary(&rg, 0, 2).unwrap();
        assert_eq!(
            it.legs,
            vec![Leg { route: 0, board: 0, alight: 1 }, Leg { route: 1, board: 1, alight: 2 }]
        );
        assert_eq!(it.transfers(), 1);
    }

    #[test]
    fn disconnected_is_none() {
        let rg = RouteGraph::build(&[vec![0, 1], vec![2, 3]]);
        assert!(plan_itinerary(&rg, 0, 3).is_none());
        assert!(plan_itinerary(&rg, 1, 1).is_none());
    }

    #[test]
    fn prefers_route_that_reaches_furthest() {
        // Route 0 covers only the first hop; route 1 covers the whole trip.
        let rg = RouteGraph::build(&[vec![0, 1], vec![0, 1, 2, 3]]);
        let it = plan_itinerary(&rg, 0, 3).unwrap();
        assert_eq!(it.legs, vec![Leg { route: 1, board: 0, alight: 3 }]);
    }

    #[test]
    fn identical_routes_tie_break_canonically() {
        let rg = RouteGraph::build(&[vec![1, 2], vec![0, 1, 2], vec![1, 2]]);
        // Canonical order: [0,1,2] (idx 1), [1,2] (idx 0), [1,2] (idx 2).
        let it = plan_itinerary(&rg, 1, 2).unwrap();
        assert_eq!(it.legs[0].route, 1);
    }

    /// Legs always chain, never board and alight at the same node, and
    /// every leg's segments belong to its route.
    #[test]
    fn legs_are_consistent() {
        let routes = vec![vec![0, 1, 2, 3], vec![2, 5, 6], vec![6, 7, 3], vec![4, 5]];
        let rg = RouteGraph::build(&routes);
        for o in 0..8 {
            for d in 0..8 {
                let Some(it) = plan_itinerary(&rg, o, d) else {
                    assert_eq!(o, d);
                    continue;
                };
                assert_eq!(it.origin(), o);
                assert_eq!(it.destination(), d);
                for w in it.legs.windows(2) {
                    assert_eq!(w[0].alight, w[1].board);
                }
                for leg in &it.legs {
                    assert_ne!(leg.board, leg.alight);
                    let r = &routes[leg.route];
                    assert!(r.contains(&leg.board) && r.contains(&leg.alight));
                }
            }
        }
    }
}
