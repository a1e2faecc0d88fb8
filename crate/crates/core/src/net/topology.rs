//! Logical P2P overlay: adjacency matrix, per-edge bandwidth caps, seeded
//! generators and hop-count routing.

use std::collections::VecDeque;

use rand::Rng;

use super::{NetError, NodeId};

/// How the overlay is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKind {
    Ring,
    Line,
    Star { center: usize },
    Complete,
    RandomRegular { degree: usize },
    /// Neighbor list per node.
    Inline { adjacency: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyGraph {
    n: usize,
    adjacency: Vec<bool>,
    edge_cap: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl TopologyGraph {
    /// Build from an undirected edge list with one cap for every edge.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], cap: f64) -> Result<Self, NetError> {
        let mut g = Self::empty(n);
        for &(a, b) in edges {
            g.add_edge(a, b, cap)?;
        }
        g.finish();
        Ok(g)
    }

    /// Generate an overlay. Caps are uniform in `[cap_min, cap_max]`, drawn
    /// per edge in ascending `(i, j)` order; a degenerate range gives every
    /// edge `cap_min`.
    pub fn generate<R: Rng + ?Sized>(
        n: usize,
        kind: &TopologyKind,
        cap_min: f64,
        cap_max: f64,
        rng: &mut R,
    ) -> Result<Self, NetError> {
        if n == 0 {
            return Err(NetError::InvalidTopology("topology needs at least one node".into()));
        }
        if !(cap_min > 0.0) || !(cap_max >= cap_min) || !cap_max.is_finite() {
            return Err(NetError::InvalidTopology(format!(
                "edge caps must satisfy 0 < min <= max, got [{cap_min}, {cap_max}]"
            )));
        }
        let edges: Vec<(usize, usize)> = match kind {
            TopologyKind::Line => (1..n).map(|i| (i - 1, i)).collect(),
            TopologyKind::Ring => match n {
                1 => vec![],
                2 => vec![(0, 1)],
                _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            },
            TopologyKind::Star { center } => {
                if *center >= n {
                    return Err(NetError::InvalidTopology(format!(
                        "star center {center} out of range for {n} nodes"
                    )));
                }
                (0..n).filter(|&i| i != *center).map(|i| (*center, i)).collect()
            }
            TopologyKind::Complete => (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect(),
            TopologyKind::RandomRegular { degree } => random_regular_edges(n, *degree, rng)?,
            TopologyKind::Inline { adjacency } => inline_edges(n, adjacency)?,
        };
        let mut g = Self::empty(n);
        for (a, b) in edges {
            g.add_edge(a, b, cap_min)?;
        }
        if cap_max > cap_min {
            for i in 0..n {
                for j in (i + 1)..n {
                    if g.adjacency[i * n + j] {
                        let cap = rng.random_range(cap_min..=cap_max);
                        g.edge_cap[i * n + j] = cap;
                        g.edge_cap[j * n + i] = cap;
                    }
                }
            }
        }
        g.finish();
        Ok(g)
    }

    fn empty(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![false; n * n],
            edge_cap: vec![0.0; n * n],
            neighbors: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, a: usize, b: usize, cap: f64) -> Result<(), NetError> {
        let n = self.n;
        if a >= n || b >= n {
            return Err(NetError::InvalidTopology(format!(
                "edge ({a}, {b}) references a node outside 0..{n}"
            )));
        }
        if a == b {
            return Err(NetError::InvalidTopology(format!("self loop on node {a}")));
        }
        if !(cap > 0.0) {
            return Err(NetError::InvalidTopology(format!("edge ({a}, {b}) has nonpositive cap")));
        }
        self.adjacency[a * n + b] = true;
        self.adjacency[b * n + a] = true;
        self.edge_cap[a * n + b] = cap;
        self.edge_cap[b * n + a] = cap;
        Ok(())
    }

    fn finish(&mut self) {
        let n = self.n;
        for i in 0..n {
            self.neighbors[i] = (0..n).filter(|&j| self.adjacency[i * n + j]).collect();
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn is_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency[a.0 * self.n + b.0]
    }

    /// Bandwidth cap of edge `a–b`, if it exists.
    pub fn edge_cap(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.is_adjacent(a, b).then(|| self.edge_cap[a.0 * self.n + b.0])
    }

    /// Neighbors in ascending index order.
    pub fn neighbors(&self, node: NodeId) -> &[usize] {
        &self.neighbors[node.0]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.neighbors[node.0].len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Row-major copy of the adjacency matrix.
    pub fn adjacency_matrix(&self) -> Vec<Vec<bool>> {
        self.adjacency.chunks(self.n).map(<[bool]>::to_vec).collect()
    }

    /// First node pair `(0, v)` with no connecting path, if any.
    pub fn unreachable_pair(&self) -> Option<(NodeId, NodeId)> {
        if self.n <= 1 {
            return None;
        }
        let dist = self.hop_distances(NodeId(0));
        dist.iter()
            .position(Option::is_none)
            .map(|v| (NodeId(0), NodeId(v)))
    }

    pub fn is_connected(&self) -> bool {
        self.unreachable_pair().is_none()
    }

    /// BFS hop counts from `src`.
    pub fn hop_distances(&self, src: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[src.0] = Some(0);
        queue.push_back(src.0);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &self.neighbors[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Minimal-hop path from `src` to `dst`, both inclusive. Neighbors are
/// expanded in ascending index order, which makes the returned path the
/// lexicographically smallest among all shortest paths.
pub fn route(src: NodeId, dst: NodeId, graph: &TopologyGraph) -> Result<Vec<NodeId>, NetError> {
    let n = graph.node_count();
    if src == dst || src.0 >= n || dst.0 >= n {
        return Err(NetError::BadEndpoints {
            src: src.0,
            dst: dst.0,
            n,
        });
    }
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    seen[src.0] = true;
    queue.push_back(src.0);
    'search: while let Some(u) = queue.pop_front() {
        for &v in graph.neighbors(NodeId(u)) {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                if v == dst.0 {
                    break 'search;
                }
                queue.push_back(v);
            }
        }
    }
    if !seen[dst.0] {
        return Err(NetError::Unroutable {
            src: src.0,
            dst: dst.0,
        });
    }
    let mut path = vec![dst];
    let mut cur = dst.0;
    while let Some(p) = parent[cur] {
        path.push(NodeId(p));
        cur = p;
    }
    path.reverse();
    Ok(path)
}

fn inline_edges(n: usize, adjacency: &[Vec<usize>]) -> Result<Vec<(usize, usize)>, NetError> {
    if adjacency.len() != n {
        return Err(NetError::InvalidTopology(format!(
            "inline adjacency lists {} nodes but {n} devices are configured",
            adjacency.len()
        )));
    }
    let mut edges = Vec::new();
    for (i, row) in adjacency.iter().enumerate() {
        for &j in row {
            if j >= n {
                return Err(NetError::InvalidTopology(format!(
                    "node {i} lists neighbor {j} outside 0..{n}"
                )));
            }
            if j == i {
                return Err(NetError::InvalidTopology(format!("self loop on node {i}")));
            }
            if !adjacency[j].contains(&i) {
                return Err(NetError::InvalidTopology(format!(
                    "adjacency is not symmetric: {i} lists {j} but {j} does not list {i}"
                )));
            }
            if i < j {
                edges.push((i, j));
            }
        }
    }
    Ok(edges)
}

/// Uniform-ish random simple `degree`-regular connected graph.
///
/// Pairs free stubs at random, rejecting loops and duplicate edges, and
/// restarts when the remaining stubs cannot be paired or the result is
/// disconnected.
fn random_regular_edges<R: Rng + ?Sized>(n: usize, degree: usize, rng: &mut R) -> Result<Vec<(usize, usize)>, NetError> {
    if degree == 0 || degree >= n {
        return Err(NetError::InvalidTopology(format!(
            "random_regular degree must be in 1..{n}, got {degree}"
        )));
    }
    if !(n * degree).is_multiple_of(2) {
        return Err(NetError::InvalidTopology(format!(
            "random_regular needs n*degree even, got {n}*{degree}"
        )));
    }
    const MAX_RESTARTS: usize = 1000;
    for _ in 0..MAX_RESTARTS {
        if let Some(edges) = try_pairing(n, degree, rng) {
            let g = TopologyGraph::from_edges(n, &edges, 1.0)?;
            if g.is_connected() {
                return Ok(edges);
            }
        }
    }
    Err(NetError::InvalidTopology(format!(
        "could not generate a connected {degree}-regular graph on {n} nodes"
    )))
}

fn try_pairing<R: Rng + ?Sized>(n: usize, degree: usize, rng: &mut R) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    let mut adj = vec![false; n * n];
    let mut edges = Vec::with_capacity(n * degree / 2);
    while !stubs.is_empty() {
        let mut paired = false;
        for _ in 0..(50 * stubs.len()) {
            let i = rng.random_range(0..stubs.len());
            let j = rng.random_range(0..stubs.len());
            let (a, b) = (stubs[i], stubs[j]);
            if i != j && a != b && !adj[a * n + b] {
                adj[a * n + b] = true;
                adj[b * n + a] = true;
                edges.push((a.min(b), a.max(b)));
                let (hi, lo) = if i > j { (i, j) } else { (j, i) };
                stubs.swap_remove(hi);
                stubs.swap_remove(lo);
                paired = true;
                break;
            }
        }
        if !paired {
            return None;
        }
    }
    edges.sort_unstable();
    Some(edges)
}
