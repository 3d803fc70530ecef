//! Immutable undirected simple graphs in compressed adjacency form, with
//! BFS distances, r-balls and an exact bit-parallel diameter.

use std::fmt;

use thiserror::Error;

/// Hop distance between two vertices.
pub type Hops = u32;

/// Distance reported for vertices in different components. Larger than any
/// achievable hop count, so comparisons like `d >= k + 2` need no special case.
pub const UNREACHABLE: Hops = Hops::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
}

/// Undirected simple graph on vertices `0..n`.
///
/// Neighbour lists are sorted and stored back to back; `offsets[v]..offsets[v + 1]`
/// indexes the neighbours of `v`.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Graph {
    /// Builds a graph from an edge list, dropping duplicate and reversed copies.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        assert!(n <= u32::MAX as usize, "vertex count exceeds u32 range");
        let mut pairs = Vec::new();
        for (u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            pairs.push((u.min(v) as u32, u.max(v) as u32));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted_pairs(n, &pairs))
    }

    /// `pairs` must be sorted, deduplicated, with `u < v < n`.
    pub(crate) fn from_sorted_pairs(n: usize, pairs: &[(u32, u32)]) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v) in pairs {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0u32; 2 * pairs.len()];
        // Pairs are sorted by (u, v), so pushing v into u's list and u into v's
        // list keeps every list sorted.
        for &(u, v) in pairs {
            targets[fill[u as usize]] = v;
            fill[u as usize] += 1;
        }
        for &(u, v) in pairs {
            targets[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        for v in 0..n {
            targets[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Graph { offsets, targets }
    }

    pub fn empty(n: usize) -> Self {
        Graph { offsets: vec![0; n + 1], targets: Vec::new() }
    }

    pub fn complete(n: usize) -> Self {
        let pairs: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|u| (u + 1..n as u32).map(move |v| (u, v)))
            .collect();
        Self::from_sorted_pairs(n, &pairs)
    }

    pub fn path(n: usize) -> Self {
        let pairs: Vec<(u32, u32)> = (1..n as u32).map(|v| (v - 1, v)).collect();
        Self::from_sorted_pairs(n, &pairs)
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a cycle needs at least three vertices");
        Self::from_edges(n, (0..n).map(|v| (v, (v + 1) % n))).expect("valid cycle")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.targets.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = if self.degree(u) <= self.degree(v) { (u, v) } else { (v, u) };
        self.neighbors(a).binary_search(&(b as u32)).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .map(|&v| v as usize)
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    fn edge_pairs(&self) -> Vec<(u32, u32)> {
        self.edges().map(|(u, v)| (u as u32, v as u32)).collect()
    }

    fn check_pair(&self, u: usize, v: usize) -> Result<(), GraphError> {
        for w in [u, v] {
            if w >= self.n() {
                return Err(GraphError::VertexOutOfRange { vertex: w, n: self.n() });
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        Ok(())
    }

    /// A copy of this graph with `{u, v}` present.
    pub fn with_edge(&self, u: usize, v: usize) -> Result<Graph, GraphError> {
        self.check_pair(u, v)?;
        if self.has_edge(u, v) {
            return Ok(self.clone());
        }
        let key = (u.min(v) as u32, u.max(v) as u32);
        let mut pairs = self.edge_pairs();
        let at = pairs.binary_search(&key).unwrap_err();
        pairs.insert(at, key);
        Ok(Self::from_sorted_pairs(self.n(), &pairs))
    }

    /// A copy of this graph with `{u, v}` absent (`G \ e`, equal to `G` if `e` is not an edge).
    pub fn without_edge(&self, u: usize, v: usize) -> Result<Graph, GraphError> {
        self.check_pair(u, v)?;
        if !self.has_edge(u, v) {
            return Ok(self.clone());
        }
        let key = (u.min(v) as u32, u.max(v) as u32);
        let pairs: Vec<_> = self.edge_pairs().into_iter().filter(|&e| e != key).collect();
        Ok(Self::from_sorted_pairs(self.n(), &pairs))
    }

    /// Distances from `source` to every vertex.
    pub fn bfs_distances(&self, source: usize) -> DistanceVector {
        let mut bfs = Bfs::new(self.n());
        let mut dist = vec![UNREACHABLE; self.n()];
        bfs.fill(self, source, &mut dist);
        DistanceVector { source, dist }
    }

    /// The closed `r`-ball around `v`, sorted ascending.
    pub fn ball(&self, v: usize, r: Hops) -> Vec<usize> {
        let mut bfs = Bfs::new(self.n());
        let mut out: Vec<usize> = bfs.ball(self, v, r).iter().map(|&w| w as usize).collect();
        out.sort_unstable();
        out
    }

    /// Largest finite pairwise distance, or `Disconnected`.
    ///
    /// Runs 64 breadth-first searches at once, one bit per source, so each
    /// level costs a single pass over the adjacency arrays.
    pub fn diameter(&self) -> Diameter {
        let n = self.n();
        if n <= 1 {
            return Diameter::Finite(0);
        }
        let mut visited = vec![0u64; n];
        let mut frontier = vec![0u64; n];
        let mut next = vec![0u64; n];
        let mut best = 0;
        for start in (0..n).step_by(64) {
            let width = (n - start).min(64);
            let full = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
            visited.iter_mut().for_each(|w| *w = 0);
            frontier.iter_mut().for_each(|w| *w = 0);
            for i in 0..width {
                visited[start + i] |= 1 << i;
                frontier[start + i] |= 1 << i;
            }
            let mut level = 0;
            loop {
                let mut grew = false;
                for v in 0..n {
                    let mut acc = 0u64;
                    for &u in self.neighbors(v) {
                        acc |= frontier[u as usize];
                    }
                    let fresh = acc & !visited[v];
                    next[v] = fresh;
                    grew |= fresh != 0;
                }
                if !grew {
                    break;
                }
                level += 1;
                for v in 0..n {
                    visited[v] |= next[v];
                }
                std::mem::swap(&mut frontier, &mut next);
            }
            if visited.iter().any(|&w| w != full) {
                return Diameter::Disconnected;
            }
            best = best.max(level);
        }
        Diameter::Finite(best)
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.m() <= 32 {
            f.debug_struct("Graph")
                .field("n", &self.n())
                .field("edges", &self.edges().collect::<Vec<_>>())
                .finish()
        } else {
            f.debug_struct("Graph").field("n", &self.n()).field("m", &self.m()).finish()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diameter {
    Finite(Hops),
    Disconnected,
}

impl Diameter {
    pub fn finite(self) -> Option<Hops> {
        match self {
            Diameter::Finite(d) => Some(d),
            Diameter::Disconnected => None,
        }
    }
}

impl fmt::Display for Diameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diameter::Finite(d) => write!(f, "{d}"),
            Diameter::Disconnected => f.write_str("disconnected"),
        }
    }
}

/// Hop distances from one source; `UNREACHABLE` outside its component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceVector {
    pub source: usize,
    pub dist: Vec<Hops>,
}

impl DistanceVector {
    #[inline]
    pub fn get(&self, v: usize) -> Hops {
        self.dist[v]
    }
}

/// Reusable BFS scratch space. Keeps a distance array that is reset lazily
/// through the list of vertices touched by the previous run.
#[derive(Debug, Clone)]
pub struct Bfs {
    dist: Vec<Hops>,
    order: Vec<u32>,
}

impl Bfs {
    pub fn new(n: usize) -> Self {
        Bfs { dist: vec![UNREACHABLE; n], order: Vec::new() }
    }

    fn reset(&mut self, n: usize) {
        if self.dist.len() != n {
            self.dist = vec![UNREACHABLE; n];
            self.order.clear();
            return;
        }
        for &v in &self.order {
            self.dist[v as usize] = UNREACHABLE;
        }
        self.order.clear();
    }

    fn run(&mut self, g: &Graph, source: usize, radius: Hops) {
        self.reset(g.n());
        self.dist[source] = 0;
        self.order.push(source as u32);
        let mut head = 0;
        while head < self.order.len() {
            let v = self.order[head] as usize;
            head += 1;
            let dv = self.dist[v];
            if dv >= radius {
                continue;
            }
            for &u in g.neighbors(v) {
                let slot = &mut self.dist[u as usize];
                if *slot == UNREACHABLE {
                    *slot = dv + 1;
                    self.order.push(u);
                }
            }
        }
    }

    /// Full BFS from `source`, written into `out` (length `n`).
    pub fn fill(&mut self, g: &Graph, source: usize, out: &mut [Hops]) {
        self.run(g, source, UNREACHABLE);
        out.copy_from_slice(&self.dist);
    }

    /// Vertices within `radius` of `source`, in BFS order.
    pub fn ball(&mut self, g: &Graph, source: usize, radius: Hops) -> &[u32] {
        self.run(g, source, radius);
        &self.order
    }

    /// Distance of `v` from the source of the last run (`UNREACHABLE` if
    /// beyond the radius of that run).
    #[inline]
    pub fn dist(&self, v: usize) -> Hops {
        self.dist[v]
    }
}
