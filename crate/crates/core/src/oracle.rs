//! The distance-query oracle over a hidden graph and its exact query ledger.

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{Bfs, Graph, Hops, UNREACHABLE};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("query of a vertex against itself ({0})")]
    SamePair(usize),
    #[error("ledger line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cells of the dense ledger: 0 = not queried, `1..=DENSE_MAX` = distance,
/// `OVERFLOW` = distance kept in the side map, `INF` = unreachable.
const DENSE_MAX: u8 = 253;
const OVERFLOW: u8 = 254;
const INF: u8 = 255;

/// Largest `n` for which the ledger may switch to a dense triangular table.
const DENSE_N_LIMIT: usize = 1 << 15;

#[inline]
fn tri_index(u: usize, v: usize) -> usize {
    debug_assert!(u < v);
    v * (v - 1) / 2 + u
}

#[inline]
fn pair_key(u: usize, v: usize) -> u64 {
    ((u as u64) << 32) | v as u64
}

#[derive(Debug, Clone)]
enum Store {
    Sparse(HashMap<u64, Hops>),
    Dense { cells: Vec<u8>, overflow: HashMap<u64, Hops> },
}

/// The set of queried pairs with their answers.
///
/// Small query sets live in a hash map; once the set covers a sizeable
/// fraction of all pairs it moves to a byte-per-pair triangular table.
#[derive(Debug, Clone)]
pub struct QueryLedger {
    n: usize,
    count: usize,
    store: Store,
}

impl PartialEq for QueryLedger {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.count == other.count && self.iter().eq(other.iter())
    }
}

impl QueryLedger {
    pub fn new(n: usize) -> Self {
        QueryLedger { n, count: 0, store: Store::Sparse(HashMap::new()) }
    }

    /// Ledger holding the true distances of `g` on `pairs`.
    pub fn from_graph<I>(g: &Graph, pairs: I) -> Result<Self, OracleError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut oracle = DistanceOracle::new(g.clone());
        for (u, v) in pairs {
            oracle.query(u, v)?;
        }
        Ok(oracle.into_ledger())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.get(u, v).is_some()
    }

    pub fn get(&self, u: usize, v: usize) -> Option<Hops> {
        if u == v || u >= self.n || v >= self.n {
            return None;
        }
        let (a, b) = (u.min(v), u.max(v));
        match &self.store {
            Store::Sparse(map) => map.get(&pair_key(a, b)).copied(),
            Store::Dense { cells, overflow } => match cells[tri_index(a, b)] {
                0 => None,
                INF => Some(UNREACHABLE),
                OVERFLOW => overflow.get(&pair_key(a, b)).copied(),
                d => Some(d as Hops),
            },
        }
    }

    /// Records an answer; returns false if the pair was already present.
    pub fn insert(&mut self, u: usize, v: usize, answer: Hops) -> bool {
        debug_assert!(u != v && u < self.n && v < self.n);
        debug_assert!(answer != 0);
        let (a, b) = (u.min(v), u.max(v));
        let fresh = match &mut self.store {
            Store::Sparse(map) => map.insert(pair_key(a, b), answer).is_none(),
            Store::Dense { cells, overflow } => {
                let cell = &mut cells[tri_index(a, b)];
                if *cell != 0 {
                    false
                } else {
                    *cell = match answer {
                        UNREACHABLE => INF,
                        d if d <= DENSE_MAX as Hops => d as u8,
                        d => {
                            overflow.insert(pair_key(a, b), d);
                            OVERFLOW
                        }
                    };
                    true
                }
            }
        };
        if fresh {
            self.count += 1;
            self.maybe_densify();
        }
        fresh
    }

    fn maybe_densify(&mut self) {
        let Store::Sparse(map) = &self.store else { return };
        let all = self.n * self.n.saturating_sub(1) / 2;
        if self.n > DENSE_N_LIMIT || map.len() * 32 <= all {
            return;
        }
        let mut cells = vec![0u8; all];
        let mut overflow = HashMap::new();
        for (&key, &d) in map {
            let (a, b) = ((key >> 32) as usize, (key & 0xffff_ffff) as usize);
            cells[tri_index(a, b)] = match d {
                UNREACHABLE => INF,
                d if d <= DENSE_MAX as Hops => d as u8,
                d => {
                    overflow.insert(key, d);
                    OVERFLOW
                }
            };
        }
        self.store = Store::Dense { cells, overflow };
    }

    /// Entries `(u, v, answer)` with `u < v`, in ascending pair order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (usize, usize, Hops)> + '_> {
        match &self.store {
            Store::Sparse(map) => {
                let mut entries: Vec<_> = map
                    .iter()
                    .map(|(&k, &d)| ((k >> 32) as usize, (k & 0xffff_ffff) as usize, d))
                    .collect();
                entries.sort_unstable();
                Box::new(entries.into_iter())
            }
            Store::Dense { .. } => Box::new((0..self.n).flat_map(move |u| {
                (u + 1..self.n).filter_map(move |v| self.get(u, v).map(|d| (u, v, d)))
            })),
        }
    }

    /// Entries ordered by the larger endpoint; cheap for the dense layout.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, Hops)) {
        match &self.store {
            Store::Sparse(_) => self.iter().for_each(|(u, v, d)| f(u, v, d)),
            Store::Dense { cells, overflow } => {
                let mut idx = 0;
                for v in 1..self.n {
                    for u in 0..v {
                        match cells[idx] {
                            0 => {}
                            INF => f(u, v, UNREACHABLE),
                            OVERFLOW => f(u, v, overflow[&pair_key(u, v)]),
                            d => f(u, v, d as Hops),
                        }
                        idx += 1;
                    }
                }
            }
        }
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.iter().map(|(u, v, _)| (u, v)).collect()
    }

    /// CSV with header `u,v,d`; `INF` marks unreachable pairs.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,v,d")?;
        for (u, v, d) in self.iter() {
            if d == UNREACHABLE {
                writeln!(out, "{u},{v},INF")?;
            } else {
                writeln!(out, "{u},{v},{d}")?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(n: usize, input: R) -> Result<Self, OracleError> {
        let mut ledger = QueryLedger::new(n);
        let mut lines = input.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line?,
            None => String::new(),
        };
        if header.trim() != "u,v,d" {
            return Err(OracleError::Parse { line: 1, msg: "expected header u,v,d".into() });
        }
        for (i, line) in lines {
            let line = line?;
            let line_no = i + 1;
            let err = |msg: &str| OracleError::Parse { line: line_no, msg: msg.to_string() };
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 3 {
                return Err(err("expected three fields"));
            }
            let u: usize = fields[0].parse().map_err(|_| err("bad vertex"))?;
            let v: usize = fields[1].parse().map_err(|_| err("bad vertex"))?;
            let d: Hops = match fields[2] {
                "INF" => UNREACHABLE,
                s => s.parse().map_err(|_| err("bad distance"))?,
            };
            if u >= n || v >= n {
                return Err(err("vertex out of range"));
            }
            if u == v || d == 0 {
                return Err(err("pair of a vertex with itself"));
            }
            if !ledger.insert(u, v, d) {
                return Err(err("duplicate pair"));
            }
        }
        Ok(ledger)
    }
}

/// Default cache budget for memoised distance vectors.
const CACHE_BYTES: usize = 256 << 20;

/// Answers distance queries on a hidden graph and records every distinct pair.
///
/// Each answer comes from a BFS of the hidden graph. Distance vectors are
/// memoised per source in a small LRU cache, so querying one landmark against
/// many vertices costs a single BFS.
pub struct DistanceOracle {
    hidden: Graph,
    ledger: QueryLedger,
    cache: VecDeque<Arc<Vec<Hops>>>,
    cache_sources: VecDeque<usize>,
    cache_capacity: usize,
    bfs: Bfs,
    bfs_runs: usize,
}

impl DistanceOracle {
    pub fn new(hidden: Graph) -> Self {
        let n = hidden.n().max(1);
        let capacity = (CACHE_BYTES / (4 * n)).clamp(2, 4096);
        Self::with_cache_capacity(hidden, capacity)
    }

    pub fn with_cache_capacity(hidden: Graph, capacity: usize) -> Self {
        let n = hidden.n();
        DistanceOracle {
            hidden,
            ledger: QueryLedger::new(n),
            cache: VecDeque::new(),
            cache_sources: VecDeque::new(),
            cache_capacity: capacity.max(1),
            bfs: Bfs::new(n),
            bfs_runs: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.hidden.n()
    }

    /// Number of distinct pairs queried so far.
    pub fn queries_used(&self) -> usize {
        self.ledger.len()
    }

    /// Number of BFS runs performed (cache misses).
    pub fn bfs_runs(&self) -> usize {
        self.bfs_runs
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn ledger_snapshot(&self) -> QueryLedger {
        self.ledger.clone()
    }

    pub fn into_ledger(self) -> QueryLedger {
        self.ledger
    }

    fn check(&self, u: usize, v: usize) -> Result<(), OracleError> {
        let n = self.n();
        for w in [u, v] {
            if w >= n {
                return Err(OracleError::VertexOutOfRange { vertex: w, n });
            }
        }
        if u == v {
            return Err(OracleError::SamePair(u));
        }
        Ok(())
    }

    fn cached(&mut self, source: usize) -> Option<Arc<Vec<Hops>>> {
        let pos = self.cache_sources.iter().position(|&s| s == source)?;
        let vec = self.cache.remove(pos).unwrap();
        self.cache_sources.remove(pos);
        self.cache.push_back(Arc::clone(&vec));
        self.cache_sources.push_back(source);
        Some(vec)
    }

    fn distances_from(&mut self, source: usize) -> Arc<Vec<Hops>> {
        if let Some(v) = self.cached(source) {
            return v;
        }
        let mut dist = vec![UNREACHABLE; self.n()];
        self.bfs.fill(&self.hidden, source, &mut dist);
        self.bfs_runs += 1;
        let dist = Arc::new(dist);
        if self.cache.len() == self.cache_capacity {
            self.cache.pop_front();
            self.cache_sources.pop_front();
        }
        self.cache.push_back(Arc::clone(&dist));
        self.cache_sources.push_back(source);
        dist
    }

    fn has_cached(&self, source: usize) -> bool {
        self.cache_sources.contains(&source)
    }

    /// Distance between `u` and `v` in the hidden graph.
    pub fn query(&mut self, u: usize, v: usize) -> Result<Hops, OracleError> {
        self.check(u, v)?;
        if let Some(d) = self.ledger.get(u, v) {
            return Ok(d);
        }
        let source = if !self.has_cached(u) && self.has_cached(v) { v } else { u };
        let other = if source == u { v } else { u };
        let d = self.distances_from(source)[other];
        self.ledger.insert(u, v, d);
        Ok(d)
    }

    /// Queries `source` against every vertex of `targets`, answers in order.
    /// One BFS from `source` serves the whole batch.
    pub fn query_from(&mut self, source: usize, targets: &[usize]) -> Result<Vec<Hops>, OracleError> {
        for &t in targets {
            self.check(source, t)?;
        }
        let mut answers = Vec::with_capacity(targets.len());
        let mut dist: Option<Arc<Vec<Hops>>> = None;
        for &t in targets {
            if let Some(d) = self.ledger.get(source, t) {
                answers.push(d);
                continue;
            }
            let vec = dist.get_or_insert_with(|| self.distances_from(source));
            let d = vec[t];
            self.ledger.insert(source, t, d);
            answers.push(d);
        }
        Ok(answers)
    }

    /// Same semantics as repeated [`query`](Self::query); answers in input order.
    pub fn query_batch(&mut self, pairs: &[(usize, usize)]) -> Result<Vec<Hops>, OracleError> {
        for &(u, v) in pairs {
            self.check(u, v)?;
        }
        pairs.iter().map(|&(u, v)| self.query(u, v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{floyd_warshall, small_graph};
    use proptest::prelude::*;

    #[test]
    fn query_examples() {
        let mut o = DistanceOracle::new(Graph::path(4));
        assert_eq!(o.query(0, 3).unwrap(), 3);
        assert_eq!(o.queries_used(), 1);
        assert_eq!(o.query(3, 0).unwrap(), 3);
        assert_eq!(o.queries_used(), 1);

        let mut split = DistanceOracle::new(Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap());
        assert_eq!(split.query(1, 2).unwrap(), UNREACHABLE);
        assert!(matches!(split.query(2, 2), Err(OracleError::SamePair(2))));
        assert!(matches!(split.query(0, 9), Err(OracleError::VertexOutOfRange { .. })));
    }

    #[test]
    fn batch_examples() {
        let mut o = DistanceOracle::new(Graph::path(4));
        assert_eq!(o.query_batch(&[(0, 1), (0, 2), (0, 3)]).unwrap(), vec![1, 2, 3]);
        assert_eq!(o.query_batch(&[]).unwrap(), Vec::<Hops>::new());
        let mut o = DistanceOracle::new(Graph::path(4));
        assert_eq!(o.query_batch(&[(1, 3), (3, 1)]).unwrap(), vec![2, 2]);
        assert_eq!(o.queries_used(), 1);
        assert!(o.query_batch(&[(0, 1), (1, 1)]).is_err());
        assert_eq!(o.queries_used(), 1, "invalid batch rejected before any query");
    }

    #[test]
    fn query_from_uses_one_bfs() {
        let mut o = DistanceOracle::new(Graph::cycle(10));
        let targets: Vec<usize> = (1..10).collect();
        let d = o.query_from(0, &targets).unwrap();
        assert_eq!(d, vec![1, 2, 3, 4, 5, 4, 3, 2, 1]);
        assert_eq!(o.bfs_runs(), 1);
        assert_eq!(o.queries_used(), 9);
        // cached pairs do not trigger a BFS
        o.query_from(5, &[0]).unwrap();
        assert_eq!(o.bfs_runs(), 1);
    }

    #[test]
    fn snapshot_examples() {
        let mut o = DistanceOracle::new(Graph::cycle(6));
        assert_eq!(o.ledger_snapshot().len(), 0);
        o.query(0, 1).unwrap();
        o.query(0, 2).unwrap();
        o.query(3, 5).unwrap();
        let snap = o.ledger_snapshot();
        assert_eq!(snap.len(), 3);
        o.query(1, 4).unwrap();
        assert_eq!(snap.len(), 3);
        assert_eq!(o.queries_used(), 4);
        assert_eq!(snap.pairs(), vec![(0, 1), (0, 2), (3, 5)]);
    }

    #[test]
    fn csv_round_trip_with_inf() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let ledger = QueryLedger::from_graph(&g, [(0, 2), (2, 4), (3, 4)]).unwrap();
        let mut buf = Vec::new();
        ledger.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "u,v,d\n0,2,2\n2,4,INF\n3,4,1\n");
        let back = QueryLedger::read_csv(5, &buf[..]).unwrap();
        assert_eq!(back, ledger);
    }

    #[test]
    fn csv_rejects_malformed() {
        for bad in [
            "u,v\n",
            "u,v,d\n0,0,1\n",
            "u,v,d\n0,7,1\n",
            "u,v,d\n0,1,x\n",
            "u,v,d\n0,1,1\n1,0,1\n",
        ] {
            assert!(QueryLedger::read_csv(5, bad.as_bytes()).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn dense_store_matches_sparse() {
        // Long path: distances beyond the byte range exercise the overflow map.
        let n = 400;
        let g = Graph::path(n);
        let mut o = DistanceOracle::new(g.clone());
        let mut expected = Vec::new();
        for v in 1..n {
            let d = o.query(0, v).unwrap();
            expected.push((0, v, d));
        }
        for u in (1..n).step_by(3) {
            for v in (u + 1..n).step_by(2) {
                expected.push((u, v, o.query(u, v).unwrap()));
            }
        }
        assert!(matches!(o.ledger().store, Store::Dense { .. }));
        expected.sort_unstable();
        expected.dedup();
        let ledger = o.ledger_snapshot();
        assert_eq!(ledger.len(), expected.len());
        assert_eq!(ledger.iter().collect::<Vec<_>>(), expected);
        for &(u, v, d) in &expected {
            assert_eq!(d as usize, v - u);
            assert_eq!(ledger.get(v, u), Some(d));
        }
        let mut by_larger = Vec::new();
        ledger.for_each_entry(|u, v, d| by_larger.push((u, v, d)));
        by_larger.sort_unstable();
        assert_eq!(by_larger, expected);
    }

    #[test]
    fn tiny_cache_still_answers_correctly() {
        let g = Graph::cycle(12);
        let mut o = DistanceOracle::with_cache_capacity(g.clone(), 1);
        for u in 0..12 {
            for v in 0..12 {
                if u != v {
                    assert_eq!(o.query(u, v).unwrap(), g.bfs_distances(u).get(v));
                }
            }
        }
        assert_eq!(o.queries_used(), 66);
    }

    proptest! {
        #[test]
        fn answers_match_all_pairs_oracle(
            (n, edges) in small_graph(),
            picks in proptest::collection::vec((0usize..8, 0usize..8), 0..40),
        ) {
            let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
            let fw = floyd_warshall(n, &edges);
            let mut o = DistanceOracle::with_cache_capacity(g, 2);
            let mut last = 0;
            for (u, v) in picks {
                if u >= n || v >= n || u == v {
                    continue;
                }
                prop_assert_eq!(o.query(u, v).unwrap(), fw[u][v]);
                prop_assert!(o.queries_used() >= last);
                prop_assert!(o.queries_used() <= n * (n - 1) / 2);
                last = o.queries_used();
            }
            let ledger = o.ledger_snapshot();
            let entries: Vec<_> = ledger.iter().collect();
            prop_assert_eq!(entries.len(), ledger.len());
            for &(a, b, d) in &entries {
                prop_assert!(a < b);
                prop_assert!(d != 0);
                for &(c, e, d2) in &entries {
                    // triangle inequality across entries sharing a vertex
                    let shared = [(a, b, c, e), (b, a, c, e), (a, b, e, c), (b, a, e, c)];
                    for (x, y, z, w) in shared {
                        if x == z && y != w {
                            if let Some(d3) = ledger.get(y, w) {
                                if d != UNREACHABLE && d2 != UNREACHABLE {
                                    prop_assert!(d3 <= d + d2);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}
