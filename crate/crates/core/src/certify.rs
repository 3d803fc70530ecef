//! Witnesses that a query set does not determine the hidden graph.
//!
//! A certificate is a non-edge `{u1, u2}` outside `Q` whose addition leaves
//! every queried distance unchanged; its existence means some other graph
//! answers all queries identically. The combinatorial notions below screen
//! candidates cheaply and [`validate_certificate`] settles them by
//! recomputing every ledger distance on `g + {u1, u2}`.
//!
//! The "paths" in the undetectability definitions are read as walks: a pair
//! is detected through `{a, b}` when `d(u1, a) + d(b, u2)` (in either
//! orientation) is small enough. This can only declare more pairs detectable.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gnp::{bounds_table, rng_from_seed};
use crate::graph::{Bfs, Diameter, Graph, Hops, UNREACHABLE};
use crate::oracle::QueryLedger;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("diameter is {found}, expected k + 2 = {expected}")]
    DiameterMismatch { expected: Hops, found: Diameter },
    #[error("brute force is capped at n <= {cap}, got n = {n}")]
    CapExceeded { n: usize, cap: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Notion {
    Basic,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndetectableCertificate {
    pub u1: usize,
    pub u2: usize,
    pub notion: Notion,
    pub levels_checked: Vec<u32>,
    pub validated: bool,
}

impl UndetectableCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialises")
    }
}

#[inline]
fn add(a: Hops, b: Hops) -> Hops {
    a.saturating_add(b)
}

/// `min(d(u1,a) + d(b,u2), d(u1,b) + d(a,u2))`.
#[inline]
fn cross_sum(d1: &[Hops], d2: &[Hops], a: usize, b: usize) -> Hops {
    add(d1[a], d2[b]).min(add(d1[b], d2[a]))
}

fn check_pair(g: &Graph, u1: usize, u2: usize) -> Result<(), CertifyError> {
    if u1 >= g.n() || u2 >= g.n() || u1 == u2 {
        return Err(CertifyError::Invalid(format!("({u1}, {u2}) is not a pair of distinct vertices")));
    }
    Ok(())
}

/// Whether some `{a, b}` of `q` detects `{u1, u2}` in a graph of diameter
/// `d`: the pair is itself queried, or `d(u1,a) + d(b,u2) <= d - 2` for an
/// orientation of `{a, b}`.
pub fn is_detectable_basic(
    g: &Graph,
    q: &[(usize, usize)],
    u1: usize,
    u2: usize,
    d: Hops,
) -> Result<bool, CertifyError> {
    check_pair(g, u1, u2)?;
    if d < 3 {
        return Err(CertifyError::NotApplicable(format!("diameter {d} < 3")));
    }
    let key = (u1.min(u2), u1.max(u2));
    if q.iter().any(|&(a, b)| (a.min(b), a.max(b)) == key) {
        return Ok(true);
    }
    let d1 = g.bfs_distances(u1).dist;
    let d2 = g.bfs_distances(u2).dist;
    Ok(q.iter().any(|&(a, b)| cross_sum(&d1, &d2, a, b) <= d - 2))
}

/// Whether no queried `{a, b}` with `d(a, b) >= ell + 2` has
/// `d(u1,a) + d(b,u2) <= ell` in some orientation. Ledger answers are taken
/// as the distances in `g`.
pub fn is_ell_undetectable(g: &Graph, ledger: &QueryLedger, u1: usize, u2: usize, ell: Hops) -> Result<bool, CertifyError> {
    check_pair(g, u1, u2)?;
    if ell < 1 {
        return Err(CertifyError::Invalid("ell must be at least 1".into()));
    }
    let d1 = g.bfs_distances(u1).dist;
    let d2 = g.bfs_distances(u2).dist;
    let mut detected = false;
    ledger.for_each_entry(|a, b, ans| {
        if ans >= add(ell, 2) && cross_sum(&d1, &d2, a, b) <= ell {
            detected = true;
        }
    });
    Ok(!detected)
}

/// `{u1, u2}` is `ell`-undetectable for every `ell` in `1..=k` iff no
/// queried pair has cross sum `s <= k` and answer at least `max(s, 1) + 2`.
fn undetectable_all_levels(d1: &[Hops], d2: &[Hops], relevant: &[(usize, usize, Hops)], k: Hops) -> bool {
    relevant.iter().all(|&(a, b, ans)| {
        let s = cross_sum(d1, d2, a, b);
        s > k || ans < s.max(1) + 2
    })
}

/// True iff every ledger answer is reproduced by `g + {u1, u2}`.
pub fn validate_certificate(g: &Graph, ledger: &QueryLedger, u1: usize, u2: usize) -> bool {
    let Ok(h) = g.with_edge(u1, u2) else { return false };
    let mut bfs = Bfs::new(h.n());
    let mut dist = vec![UNREACHABLE; h.n()];
    let mut current = usize::MAX;
    let mut ok = true;
    for (a, b, ans) in ledger.iter() {
        if a != current {
            bfs.fill(&h, a, &mut dist);
            current = a;
        }
        if dist[b] != ans {
            ok = false;
            break;
        }
    }
    ok
}

fn certificate(g: &Graph, ledger: &QueryLedger, u1: usize, u2: usize, notion: Notion, levels: Hops) -> Option<UndetectableCertificate> {
    validate_certificate(g, ledger, u1, u2).then(|| UndetectableCertificate {
        u1: u1.min(u2),
        u2: u1.max(u2),
        notion,
        levels_checked: (1..=levels).collect(),
        validated: true,
    })
}

fn require_diameter(g: &Graph, k: Hops) -> Result<(), CertifyError> {
    let found = g.diameter();
    if found != Diameter::Finite(k + 2) {
        return Err(CertifyError::DiameterMismatch { expected: k + 2, found });
    }
    Ok(())
}

/// A basic-notion certificate for the given pair, if it is undetectable at
/// the measured diameter and passes validation.
pub fn certify_basic(g: &Graph, ledger: &QueryLedger, u1: usize, u2: usize) -> Result<Option<UndetectableCertificate>, CertifyError> {
    check_pair(g, u1, u2)?;
    let d = match g.diameter() {
        Diameter::Finite(d) if d >= 3 => d,
        other => return Err(CertifyError::NotApplicable(format!("diameter {other}"))),
    };
    if g.has_edge(u1, u2) || ledger.contains(u1, u2) {
        return Ok(None);
    }
    if is_detectable_basic(g, &ledger.pairs(), u1, u2, d)? {
        return Ok(None);
    }
    Ok(certificate(g, ledger, u1, u2, Notion::Basic, d - 2))
}

/// First non-edge outside the ledger, in ascending pair order, that is
/// `ell`-undetectable for all `ell` in `1..=k` and passes validation.
pub fn find_undetectable_exhaustive(g: &Graph, ledger: &QueryLedger, k: Hops) -> Result<Option<UndetectableCertificate>, CertifyError> {
    if k < 1 {
        return Err(CertifyError::Invalid("k must be at least 1".into()));
    }
    require_diameter(g, k)?;
    let n = g.n();
    // Only answers of 3 or more can detect anything.
    let mut relevant: Vec<(usize, usize, Hops)> = ledger.iter().filter(|&(_, _, d)| d >= 3).collect();
    let mut endpoints: Vec<usize> = relevant.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    endpoints.sort_unstable();
    endpoints.dedup();
    let mut row_of = vec![usize::MAX; n];
    let mut rows: Vec<u8> = vec![0; endpoints.len() * n];
    let mut bfs = Bfs::new(n);
    let mut dist = vec![UNREACHABLE; n];
    for (i, &e) in endpoints.iter().enumerate() {
        row_of[e] = i;
        bfs.fill(g, e, &mut dist);
        for (cell, &d) in rows[i * n..(i + 1) * n].iter_mut().zip(&dist) {
            *cell = d.min(255) as u8;
        }
    }
    for t in relevant.iter_mut() {
        t.0 = row_of[t.0];
        t.1 = row_of[t.1];
    }
    let at = |row: usize, v: usize| rows[row * n + v] as Hops;

    let mut near: Vec<(usize, usize, Hops)> = Vec::new();
    for u1 in 0..n {
        near.clear();
        near.extend(relevant.iter().copied().filter(|&(a, b, _)| at(a, u1).min(at(b, u1)) <= k));
        for u2 in u1 + 1..n {
            if g.has_edge(u1, u2) || ledger.contains(u1, u2) {
                continue;
            }
            let detected = near.iter().any(|&(a, b, ans)| {
                let s = (at(a, u1) + at(b, u2)).min(at(b, u1) + at(a, u2));
                s <= k && ans >= s.max(1) + 2
            });
            if !detected {
                if let Some(c) = certificate(g, ledger, u1, u2, Notion::Refined, k) {
                    return Ok(Some(c));
                }
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallPairStats {
    /// Queried pairs `{v1, v2}` with `v1` in `N_k'(u1)` and `v2` in `N_{k-k'}(u2)`.
    pub cross_count: usize,
    /// `7 (k+1) (np)^k N / n^2`, with `p` estimated as `m / C(n,2)`.
    pub m_threshold: f64,
    pub cond2_violations: usize,
    pub cond3_violations: usize,
}

impl SmallPairStats {
    pub fn is_small(&self) -> bool {
        self.cross_count as f64 <= self.m_threshold && self.cond2_violations == 0 && self.cond3_violations == 0
    }
}

/// `7 (k+1) (np)^k N / n^2` with `p = m / C(n,2)`.
pub fn small_pair_threshold(g: &Graph, k: Hops, budget_n: f64) -> f64 {
    let n = g.n() as f64;
    let p = if g.n() < 2 { 0.0 } else { g.m() as f64 / (n * (n - 1.0) / 2.0) };
    7.0 * (k as f64 + 1.0) * (n * p).powi(k as i32) * budget_n / (n * n)
}

/// Default `N`: `floor(e^lambda ln n / (8 (k+1)^2 n^(k-2) p^k))` at `p = m / C(n,2)`.
pub fn default_query_budget(g: &Graph, k: Hops) -> Result<f64, CertifyError> {
    let n = g.n();
    if n < 3 || g.m() == 0 || k < 1 {
        return Err(CertifyError::NotApplicable("graph too small or empty".into()));
    }
    let p = g.m() as f64 / (n as f64 * (n as f64 - 1.0) / 2.0);
    if p >= 1.0 {
        return Err(CertifyError::NotApplicable("complete graph".into()));
    }
    bounds_table(n, p, k, 1.0, 1.0)
        .map(|b| b.nonadaptive_lower.floor())
        .map_err(|e| CertifyError::NotApplicable(e.to_string()))
}

fn small_stats_from(d1: &[Hops], d2: &[Hops], q: impl Iterator<Item = (usize, usize)>, k: Hops, threshold: f64) -> SmallPairStats {
    let mut stats = SmallPairStats { cross_count: 0, m_threshold: threshold, cond2_violations: 0, cond3_violations: 0 };
    for (a, b) in q {
        let s = cross_sum(d1, d2, a, b);
        if s <= k {
            stats.cross_count += 1;
        }
        if k >= 1 && s < k {
            stats.cond2_violations += 1;
        }
        // an orientation (v1, v2) inside the k-balls with v2 near u1 or v1 near u2
        let straddles = |v1: usize, v2: usize| add(d1[v1], d2[v2]) <= k && (d1[v2] <= k || d2[v1] <= k);
        if straddles(a, b) || straddles(b, a) {
            stats.cond3_violations += 1;
        }
    }
    stats
}

/// Evaluates the three small-pair conditions for `{u1, u2}`; `budget_n` is
/// the `N` of the threshold.
pub fn is_small_pair(
    g: &Graph,
    q: &[(usize, usize)],
    u1: usize,
    u2: usize,
    k: Hops,
    budget_n: f64,
) -> Result<(bool, SmallPairStats), CertifyError> {
    check_pair(g, u1, u2)?;
    if k < 1 || !(budget_n > 0.0) {
        return Err(CertifyError::Invalid("need k >= 1 and N > 0".into()));
    }
    let d1 = g.bfs_distances(u1).dist;
    let d2 = g.bfs_distances(u2).dist;
    let stats = small_stats_from(&d1, &d2, q.iter().copied(), k, small_pair_threshold(g, k, budget_n));
    Ok((stats.is_small(), stats))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizedOptions {
    /// Number of sampling steps.
    pub tau: usize,
    /// Keep sampling after `tau` steps until fewer than two vertices are unconsidered.
    pub extend: bool,
    /// `N` of the small-pair threshold; `None` uses [`default_query_budget`].
    pub budget_n: Option<f64>,
}

/// `floor(n^(1/(k+1)) / ln n)`, at least 1.
pub fn default_tau(n: usize, k: Hops) -> usize {
    let n = n.max(3) as f64;
    ((n.powf(1.0 / (k as f64 + 1.0)) / n.ln()).floor() as usize).max(1)
}

impl RandomizedOptions {
    pub fn new(n: usize, k: Hops) -> Self {
        RandomizedOptions { tau: default_tau(n, k), extend: false, budget_n: None }
    }
}

/// Outcome of the randomized search.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedSearch {
    pub certificate: Option<UndetectableCertificate>,
    pub steps: usize,
    pub small_pairs_seen: usize,
}

/// Samples pairs of unconsidered vertices, marks their `k`-balls considered,
/// and returns the first small non-adjacent pair that is `ell`-undetectable
/// for every `ell` in `1..=k` and passes validation.
pub fn find_undetectable_randomized(
    g: &Graph,
    ledger: &QueryLedger,
    k: Hops,
    options: RandomizedOptions,
    seed: u64,
) -> Result<RandomizedSearch, CertifyError> {
    if k < 1 {
        return Err(CertifyError::Invalid("k must be at least 1".into()));
    }
    require_diameter(g, k)?;
    let n = g.n();
    let budget_n = match options.budget_n {
        Some(b) if b > 0.0 => b,
        Some(b) => return Err(CertifyError::Invalid(format!("N = {b} must be positive"))),
        None => default_query_budget(g, k)?,
    };
    let threshold = small_pair_threshold(g, k, budget_n);
    let entries: Vec<(usize, usize, Hops)> = ledger.iter().collect();
    let relevant: Vec<(usize, usize, Hops)> = entries.iter().copied().filter(|&(_, _, d)| d >= 3).collect();

    let mut rng = rng_from_seed(seed);
    // unconsidered vertices with their positions, for O(1) removal
    let mut pool: Vec<usize> = (0..n).collect();
    let mut pos: Vec<usize> = (0..n).collect();
    let mut remove = |v: usize, pool: &mut Vec<usize>| {
        let i = pos[v];
        if i == usize::MAX {
            return;
        }
        let last = *pool.last().expect("non-empty");
        pool.swap_remove(i);
        if last != v {
            pos[last] = i;
        }
        pos[v] = usize::MAX;
    };
    let mut bfs = Bfs::new(n);
    let mut d1 = vec![UNREACHABLE; n];
    let mut d2 = vec![UNREACHABLE; n];
    let mut steps = 0;
    let mut small_pairs_seen = 0;
    while pool.len() >= 2 && (options.extend || steps < options.tau) {
        steps += 1;
        let i = rng.random_range(0..pool.len());
        let mut j = rng.random_range(0..pool.len() - 1);
        if j >= i {
            j += 1;
        }
        let (u1, u2) = (pool[i], pool[j]);
        for u in [u1, u2] {
            for &v in bfs.ball(g, u, k) {
                remove(v as usize, &mut pool);
            }
        }
        if g.has_edge(u1, u2) || ledger.contains(u1, u2) {
            continue;
        }
        bfs.fill(g, u1, &mut d1);
        bfs.fill(g, u2, &mut d2);
        let stats = small_stats_from(&d1, &d2, entries.iter().map(|&(a, b, _)| (a, b)), k, threshold);
        if !stats.is_small() {
            continue;
        }
        small_pairs_seen += 1;
        if undetectable_all_levels(&d1, &d2, &relevant, k) {
            if let Some(c) = certificate(g, ledger, u1, u2, Notion::Refined, k) {
                return Ok(RandomizedSearch { certificate: Some(c), steps, small_pairs_seen });
            }
        }
    }
    Ok(RandomizedSearch { certificate: None, steps, small_pairs_seen })
}

/// `((n choose 2) - m) / ((d - 1 + eps) * Delta^(d-2))` and its ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    pub value: BigRational,
    pub ceiling: BigInt,
    pub diameter: Hops,
    pub max_degree: usize,
}

impl LowerBound {
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }
}

/// Evaluated exactly; `eps` enters as the exact binary value of the `f64`.
pub fn deterministic_lower_bound(g: &Graph, eps: f64) -> Result<LowerBound, CertifyError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CertifyError::Invalid(format!("eps = {eps} must be positive")));
    }
    let d = match g.diameter() {
        Diameter::Finite(d) if d >= 3 => d,
        other => return Err(CertifyError::NotApplicable(format!("diameter {other}, need at least 3"))),
    };
    let n = BigInt::from(g.n());
    let pairs = &n * (&n - 1) / 2;
    let missing = BigRational::from_integer(pairs - BigInt::from(g.m()));
    let eps = BigRational::from_f64(eps).expect("finite eps");
    let delta = g.max_degree();
    let mut power = BigInt::one();
    for _ in 0..d - 2 {
        power *= delta;
    }
    let denom = (BigRational::from_integer(BigInt::from(d - 1)) + eps) * BigRational::from_integer(power);
    debug_assert!(!denom.is_zero());
    let value = missing / denom;
    let ceiling = value.ceil().to_integer();
    Ok(LowerBound { value, ceiling, diameter: d, max_degree: delta })
}

pub const BRUTEFORCE_CAP: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub enum Reconstructibility {
    Unique,
    /// A graph other than the hidden one with the same answers on `Q`.
    Ambiguous(Graph),
}

/// Distances from `s` in a graph on at most 8 vertices given by neighbour bitmasks.
fn mask_distances(adj: &[u8], s: usize) -> [Hops; 8] {
    let mut dist = [UNREACHABLE; 8];
    dist[s] = 0;
    let mut seen = 1u8 << s;
    let mut frontier = seen;
    let mut level = 0;
    while frontier != 0 {
        level += 1;
        let mut next = 0u8;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= adj[v];
        }
        next &= !seen;
        seen |= next;
        let mut f = next;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            dist[v] = level;
        }
        frontier = next;
    }
    dist
}

/// Enumerates every graph on `n <= 7` labelled vertices and reports whether
/// `g` is the only one matching all ledger answers.
pub fn bruteforce_is_reconstructible(g: &Graph, ledger: &QueryLedger) -> Result<Reconstructibility, CertifyError> {
    let n = g.n();
    if n > BRUTEFORCE_CAP {
        return Err(CertifyError::CapExceeded { n, cap: BRUTEFORCE_CAP });
    }
    if ledger.n() != n {
        return Err(CertifyError::Invalid("ledger is over a different vertex set".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    // Answers of 1 force an edge and larger answers forbid one; only the
    // remaining pairs are enumerated.
    let mut fixed = vec![Some(false); pairs.len()];
    for (i, &(u, v)) in pairs.iter().enumerate() {
        fixed[i] = ledger.get(u, v).map(|d| d == 1);
    }
    let free: Vec<usize> = (0..pairs.len()).filter(|&i| fixed[i].is_none()).collect();
    let mut by_source: Vec<Vec<(usize, Hops)>> = vec![Vec::new(); n];
    for (a, b, d) in ledger.iter() {
        if d != 1 {
            by_source[a].push((b, d));
        }
    }
    let hidden: u32 = pairs.iter().enumerate().filter(|(_, &(u, v))| g.has_edge(u, v)).map(|(i, _)| 1u32 << i).sum();
    let mut base = 0u32;
    for (i, f) in fixed.iter().enumerate() {
        if *f == Some(true) {
            base |= 1 << i;
        }
    }
    let mut adj = [0u8; 8];
    for assignment in 0u32..(1u32 << free.len()) {
        let mut bits = base;
        for (j, &i) in free.iter().enumerate() {
            if assignment >> j & 1 == 1 {
                bits |= 1 << i;
            }
        }
        if bits == hidden {
            continue;
        }
        adj[..n].fill(0);
        for (i, &(u, v)) in pairs.iter().enumerate() {
            if bits >> i & 1 == 1 {
                adj[u] |= 1 << v;
                adj[v] |= 1 << u;
            }
        }
        let consistent = by_source.iter().enumerate().all(|(a, targets)| {
            if targets.is_empty() {
                return true;
            }
            let dist = mask_distances(&adj[..n], a);
            targets.iter().all(|&(b, d)| dist[b] == d)
        });
        if consistent {
            let edges = pairs.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, &e)| e);
            return Ok(Reconstructibility::Ambiguous(Graph::from_edges(n, edges).expect("valid pairs")));
        }
    }
    Ok(Reconstructibility::Unique)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnp::{sample_gnp, GnpParams};
    use crate::graph::tests::floyd_warshall;
    use rand::seq::SliceRandom;

    fn ledger(g: &Graph, pairs: &[(usize, usize)]) -> QueryLedger {
        QueryLedger::from_graph(g, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn basic_detectability_examples() {
        let p4 = Graph::path(4);
        assert!(is_detectable_basic(&p4, &[(0, 1)], 0, 2, 3).unwrap());
        assert!(!is_detectable_basic(&p4, &[(0, 1)], 0, 3, 3).unwrap());
        assert!(is_detectable_basic(&p4, &[(3, 0)], 0, 3, 3).unwrap());
        assert!(is_detectable_basic(&p4, &[], 0, 3, 2).is_err());
    }

    #[test]
    fn ell_undetectable_examples() {
        let p5 = Graph::path(5);
        let l = ledger(&p5, &[(0, 4)]);
        assert!(!is_ell_undetectable(&p5, &l, 1, 3, 2).unwrap());
        assert!(is_ell_undetectable(&p5, &l, 1, 3, 1).unwrap());
        let empty = QueryLedger::new(5);
        for ell in 1..4 {
            assert!(is_ell_undetectable(&p5, &empty, 1, 3, ell).unwrap());
        }
    }

    #[test]
    fn validation_examples() {
        let p4 = Graph::path(4);
        assert!(validate_certificate(&p4, &ledger(&p4, &[(0, 1)]), 0, 3));
        let p5 = Graph::path(5);
        assert!(!validate_certificate(&p5, &ledger(&p5, &[(0, 4)]), 1, 3));
        assert!(validate_certificate(&p5, &QueryLedger::new(5), 0, 4));
    }

    #[test]
    fn exhaustive_examples() {
        let p4 = Graph::path(4);
        let q = ledger(&p4, &[(0, 1)]);
        let c = find_undetectable_exhaustive(&p4, &q, 1).unwrap().unwrap();
        // {0, 2} precedes {0, 3}: the only answer is 1, too short to detect anything
        assert_eq!((c.u1, c.u2, c.validated, c.notion), (0, 2, true, Notion::Refined));
        assert_eq!(c.levels_checked, vec![1]);
        assert!(is_ell_undetectable(&p4, &q, 0, 3, 1).unwrap());
        assert!(validate_certificate(&p4, &q, 0, 3));

        let k5 = Graph::complete(5);
        assert!(matches!(
            find_undetectable_exhaustive(&k5, &QueryLedger::new(5), 1),
            Err(CertifyError::DiameterMismatch { expected: 3, .. })
        ));

        let all: Vec<_> = (0..4).flat_map(|u| (u + 1..4).map(move |v| (u, v))).collect();
        assert_eq!(find_undetectable_exhaustive(&p4, &ledger(&p4, &all), 1).unwrap(), None);
    }

    #[test]
    fn certificate_json_fields() {
        let c = UndetectableCertificate { u1: 0, u2: 3, notion: Notion::Refined, levels_checked: vec![1], validated: true };
        let v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(v["u1"], 0);
        assert_eq!(v["notion"], "Refined");
        assert_eq!(v["levels_checked"], serde_json::json!([1]));
        assert_eq!(v["validated"], true);
        assert_eq!(v.as_object().unwrap().len(), 5);
    }

    /// Ball-based reading of the three conditions, straight from the definition.
    fn small_by_balls(g: &Graph, q: &[(usize, usize)], u1: usize, u2: usize, k: Hops) -> (usize, usize, usize) {
        let ball = |v: usize, r: i64| -> Vec<usize> { if r < 0 { vec![] } else { g.ball(v, r as Hops) } };
        let kk = k as i64;
        let mut c1 = 0;
        let mut c2 = 0;
        let mut c3 = 0;
        for &(a, b) in q {
            let mut hit1 = false;
            let mut hit2 = false;
            let mut hit3 = false;
            for (v1, v2) in [(a, b), (b, a)] {
                for kp in 0..=kk {
                    if ball(u1, kp).contains(&v1) && ball(u2, kk - kp).contains(&v2) {
                        hit1 = true;
                        if ball(u1, kk).contains(&v2) || ball(u2, kk).contains(&v1) {
                            hit3 = true;
                        }
                    }
                }
                for kp in 0..kk {
                    if ball(u1, kp).contains(&v1) && ball(u2, kk - 1 - kp).contains(&v2) {
                        hit2 = true;
                    }
                }
            }
            c1 += hit1 as usize;
            c2 += hit2 as usize;
            c3 += hit3 as usize;
        }
        (c1, c2, c3)
    }

    #[test]
    fn small_pair_matches_ball_enumeration() {
        let p4 = Graph::path(4);
        let (small, stats) = is_small_pair(&p4, &[], 0, 3, 1, 10.0).unwrap();
        assert!(small);
        assert_eq!((stats.cross_count, stats.cond2_violations, stats.cond3_violations), (0, 0, 0));

        let (_, stats) = is_small_pair(&p4, &[(0, 1)], 0, 3, 1, 10.0).unwrap();
        let expected = small_by_balls(&p4, &[(0, 1)], 0, 3, 1);
        assert_eq!((stats.cross_count, stats.cond2_violations, stats.cond3_violations), expected);

        for seed in 0..40u64 {
            let g = sample_gnp(&GnpParams::new(40, 0.08, seed).unwrap());
            let mut rng = rng_from_seed(seed);
            let q: Vec<(usize, usize)> = (0..30)
                .map(|_| {
                    let a = rng.random_range(0..40);
                    let b = (a + rng.random_range(1..40)) % 40;
                    (a, b)
                })
                .collect();
            for k in 1..=3 {
                let (u1, u2) = (rng.random_range(0..20), rng.random_range(20..40));
                let (_, stats) = is_small_pair(&g, &q, u1, u2, k, 50.0).unwrap();
                assert_eq!(
                    (stats.cross_count, stats.cond2_violations, stats.cond3_violations),
                    small_by_balls(&g, &q, u1, u2, k),
                    "seed {seed} k {k}"
                );
            }
        }
    }

    #[test]
    fn planted_close_query_breaks_smallness() {
        let g = sample_gnp(&GnpParams::new(200, 0.1, 5).unwrap());
        let (u1, u2) = (3, 150);
        let d1 = g.bfs_distances(u1).dist;
        let d2 = g.bfs_distances(u2).dist;
        // k = 2: a queried pair {v1, v2} with v1 in N_0(u1), v2 in N_1(u2)
        let v2 = (0..200).find(|&v| d2[v] == 1 && v != u1 && d1[v] > 0).unwrap();
        let (small, stats) = is_small_pair(&g, &[(u1, v2)], u1, u2, 2, 1e9).unwrap();
        assert!(!small);
        assert_eq!(stats.cond2_violations, 1);
        assert_eq!(small_by_balls(&g, &[(u1, v2)], u1, u2, 2).1, 1);
    }

    #[test]
    fn randomized_examples() {
        let c6 = Graph::cycle(6);
        let found = find_undetectable_randomized(&c6, &QueryLedger::new(6), 1, RandomizedOptions { tau: 100, extend: true, budget_n: Some(1.0) }, 3).unwrap();
        let c = found.certificate.expect("empty Q admits a certificate");
        assert!(c.validated && !c6.has_edge(c.u1, c.u2));

        let k4 = Graph::complete(4);
        assert!(find_undetectable_randomized(&k4, &QueryLedger::new(4), 1, RandomizedOptions::new(4, 1), 1).is_err());
        assert_eq!(default_tau(2000, 1), 5);
    }

    #[test]
    fn lower_bound_examples() {
        let lb = deterministic_lower_bound(&Graph::path(4), 0.5).unwrap();
        assert_eq!(lb.value, BigRational::new(3.into(), 5.into()));
        assert_eq!(lb.ceiling, BigInt::from(1));
        let lb = deterministic_lower_bound(&Graph::cycle(6), 0.5).unwrap();
        assert_eq!(lb.value, BigRational::new(9.into(), 5.into()));
        assert_eq!(lb.ceiling, BigInt::from(2));
        assert!(matches!(deterministic_lower_bound(&Graph::complete(4), 0.5), Err(CertifyError::NotApplicable(_))));
        assert!(deterministic_lower_bound(&Graph::from_edges(4, [(0, 1)]).unwrap(), 0.5).is_err());
    }

    #[test]
    fn bruteforce_examples() {
        let p4 = Graph::path(4);
        let all: Vec<_> = (0..4).flat_map(|u| (u + 1..4).map(move |v| (u, v))).collect();
        assert_eq!(bruteforce_is_reconstructible(&p4, &ledger(&p4, &all)).unwrap(), Reconstructibility::Unique);
        match bruteforce_is_reconstructible(&p4, &ledger(&p4, &[(0, 1)])).unwrap() {
            Reconstructibility::Ambiguous(w) => {
                assert_ne!(w, p4);
                assert_eq!(w.bfs_distances(0).get(1), 1);
            }
            other => panic!("{other:?}"),
        }
        let k3 = Graph::complete(3);
        assert!(matches!(
            bruteforce_is_reconstructible(&k3, &ledger(&k3, &[(0, 1), (0, 2)])).unwrap(),
            Reconstructibility::Ambiguous(_)
        ));
        assert!(matches!(
            bruteforce_is_reconstructible(&Graph::path(8), &QueryLedger::new(8)),
            Err(CertifyError::CapExceeded { n: 8, .. })
        ));
    }

    #[test]
    fn mask_distances_match_floyd_warshall() {
        for seed in 0..200u64 {
            let g = sample_gnp(&GnpParams::new(7, 0.35, seed).unwrap());
            let mut adj = [0u8; 7];
            for (u, v) in g.edges() {
                adj[u] |= 1 << v;
                adj[v] |= 1 << u;
            }
            let fw = floyd_warshall(7, &g.edges().collect::<Vec<_>>());
            for s in 0..7 {
                assert_eq!(&mask_distances(&adj, s)[..7], &fw[s][..]);
            }
        }
    }

    fn random_q(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
        let mut all: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        all.shuffle(rng);
        let take = rng.random_range(0..=all.len());
        all.truncate(take);
        all
    }

    #[test]
    fn basic_undetectable_pairs_validate() {
        let mut checked = 0;
        for seed in 0..400u64 {
            let n = 5 + (seed % 3) as usize;
            let g = sample_gnp(&GnpParams::new(n, 0.45, seed).unwrap());
            let Some(d) = g.diameter().finite().filter(|&d| d >= 3) else { continue };
            let mut rng = rng_from_seed(seed);
            let q = random_q(n, &mut rng);
            let l = ledger(&g, &q);
            for u1 in 0..n {
                for u2 in u1 + 1..n {
                    if g.has_edge(u1, u2) || l.contains(u1, u2) {
                        continue;
                    }
                    if !is_detectable_basic(&g, &q, u1, u2, d).unwrap() {
                        checked += 1;
                        assert!(validate_certificate(&g, &l, u1, u2));
                        // refinement: basic undetectability implies every level
                        for ell in 1..=d - 2 {
                            assert!(is_ell_undetectable(&g, &l, u1, u2, ell).unwrap());
                        }
                        let c = certify_basic(&g, &l, u1, u2).unwrap().unwrap();
                        assert_eq!(c.notion, Notion::Basic);
                    }
                }
            }
        }
        assert!(checked > 50, "only {checked} pairs exercised");
    }

    #[test]
    fn enlarging_q_keeps_detected_pairs_detected() {
        for seed in 0..200u64 {
            let n = 6;
            let g = sample_gnp(&GnpParams::new(n, 0.4, seed).unwrap());
            let Some(d) = g.diameter().finite().filter(|&d| d >= 3) else { continue };
            let mut rng = rng_from_seed(seed);
            let big = random_q(n, &mut rng);
            let small = &big[..big.len() / 2];
            let (lb, ls) = (ledger(&g, &big), ledger(&g, small));
            for u1 in 0..n {
                for u2 in u1 + 1..n {
                    if g.has_edge(u1, u2) {
                        continue;
                    }
                    if is_detectable_basic(&g, small, u1, u2, d).unwrap() {
                        assert!(is_detectable_basic(&g, &big, u1, u2, d).unwrap());
                    }
                    for ell in 1..=d - 2 {
                        if !ls.contains(u1, u2) && !lb.contains(u1, u2) && !is_ell_undetectable(&g, &ls, u1, u2, ell).unwrap() {
                            assert!(!is_ell_undetectable(&g, &lb, u1, u2, ell).unwrap());
                        }
                    }
                }
            }
        }
    }
}
