//! Graph induced by a set of routes, and the deterministic minimum-hop paths
//! shared by load assignment, itinerary planning and car assignment.

use std::collections::{BTreeMap, VecDeque};

use crate::netmodel::Route;

/// Unordered segment key with the smaller node first.
pub type Segment = (usize, usize);

pub fn segment(a: usize, b: usize) -> Segment {
    (a.min(b), a.max(b))
}

/// Undirected, unweighted graph on the nodes and consecutive pairs of a route set.
#[derive(Debug, Clone)]
pub struct RouteGraph {
    routes: Vec<Route>,
    rank: Vec<usize>,
    served: Vec<bool>,
    adjacency: Vec<Vec<usize>>,
    /// Segment -> indices of the routes containing it (ascending, no repeats).
    segments: BTreeMap<Segment, Vec<usize>>,
}

impl RouteGraph {
    pub fn build(routes: &[Route]) -> Self {
        let n = routes.iter().flatten().map(|&v| v + 1).max().unwrap_or(0);
        Self::with_node_count(routes, n)
    }

    pub fn with_node_count(routes: &[Route], n: usize) -> Self {
        let mut served = vec![false; n];
        let mut adjacency = vec![Vec::new(); n];
        let mut segments: BTreeMap<Segment, Vec<usize>> = BTreeMap::new();
        for (k, route) in routes.iter().enumerate() {
            for &v in route {
                served[v] = true;
            }
            for w in route.windows(2) {
                let members = segments.entry(segment(w[0], w[1])).or_default();
                if members.last() != Some(&k) {
                    members.push(k);
                }
            }
        }
        for &(a, b) in segments.keys() {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let mut rank = vec![0; routes.len()];
        for (r, k) in canonical_order(routes).into_iter().enumerate() {
            rank[k] = r;
        }
        Self {
            routes: routes.to_vec(),
            rank,
            served,
            adjacency,
            segments,
        }
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    /// Position of route `k` in [`canonical_order`].
    pub fn canonical_rank(&self, k: usize) -> usize {
        self.rank[k]
    }

    pub fn node_count(&self) -> usize {
        self.served.len()
    }

    pub fn is_served(&self, v: usize) -> bool {
        self.served.get(v).copied().unwrap_or(false)
    }

    pub fn served_nodes(&self) -> Vec<usize> {
        (0..self.served.len()).filter(|&v| self.served[v]).collect()
    }

    pub fn segments(&self) -> &BTreeMap<Segment, Vec<usize>> {
        &self.segments
    }

    /// Routes containing the segment `{a, b}`.
    pub fn members(&self, a: usize, b: usize) -> &[usize] {
        self.segments
            .get(&segment(a, b))
            .map_or(&[], |v| v.as_slice())
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn bfs(&self, source: usize) -> BfsTree {
        bfs_tree(self.node_count(), source, |v| self.adjacency[v].iter().copied())
    }

    /// Connected-component label per node; unserved nodes get `None`.
    pub fn components(&self) -> Vec<Option<usize>> {
        let mut label = vec![None; self.node_count()];
        let mut next = 0;
        for s in 0..self.node_count() {
            if !self.served[s] || label[s].is_some() {
                continue;
            }
            let mut queue = VecDeque::from([s]);
            label[s] = Some(next);
            while let Some(v) = queue.pop_front() {
                for &w in &self.adjacency[v] {
                    if label[w].is_none() {
                        label[w] = Some(next);
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

/// Route indices sorted by node sequence, then index. Anything that breaks
/// ties between routes or sums per-route quantities uses this order so
/// results do not depend on how the routes are numbered.
pub fn canonical_order(routes: &[Route]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..routes.len()).collect();
    order.sort_by(|&a, &b| routes[a].cmp(&routes[b]).then(a.cmp(&b)));
    order
}

/// Breadth-first search tree from one source.
#[derive(Debug, Clone)]
pub struct BfsTree {
    pub source: usize,
    pub hops: Vec<Option<usize>>,
    pub parent: Vec<Option<usize>>,
}

impl BfsTree {
    /// Node sequence from the source to `target`, inclusive.
    pub fn path_to(&self, target: usize) -> Option<Vec<usize>> {
        self.hops.get(target).copied().flatten()?;
        let mut path = vec![target];
        let mut v = target;
        while let Some(p) = self.parent[v] {
            path.push(p);
            v = p;
        }
        path.reverse();
        Some(path)
    }
}

/// BFS that expands neighbors in the order yielded by `neighbors`.
///
/// With neighbors in ascending id order, the path recorded for every node is
/// the lexicographically smallest among its minimum-hop paths: the FIFO queue
/// holds each level in lexicographic order of the recorded paths, so the first
/// parent to discover a node carries the smallest prefix.
pub fn bfs_tree<I>(n: usize, source: usize, neighbors: impl Fn(usize) -> I) -> BfsTree
where
    I: Iterator<Item = usize>,
{
    let mut hops = vec![None; n];
    let mut parent = vec![None; n];
    if source < n {
        hops[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let h = hops[v].unwrap_or(0);
            for w in neighbors(v) {
                if hops[w].is_none() {
                    hops[w] = Some(h + 1);
                    parent[w] = Some(v);
                    queue.push_back(w);
                }
            }
        }
    }
    BfsTree {
        source,
        hops,
        parent,
    }
}
