//! Adaptive and non-adaptive reconstruction from distance queries.
//!
//! Both algorithms query a landmark set `X` against (part of) the vertex set
//! and then decide every remaining pair with one rule: a landmark `x` whose
//! answers to `v1` and `v2` differ by two or more proves `{v1, v2}` is not an
//! edge. Pairs with no such evidence are declared edges.
//!
//! Answers are mirrored into two byte tables per landmark part, one indexed by
//! landmark (rows of length `n`) and one by vertex (rows of length `|part|`),
//! so the decision phase scans contiguous memory. Only oracle answers are ever
//! written into them.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gnp::{lambda_of, rng_from_seed};
use crate::graph::{Bfs, Graph, Hops, UNREACHABLE};
use crate::oracle::{DistanceOracle, OracleError, QueryLedger};

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("landmark schedule infeasible: {parts} parts of size {part_size} exceed n = {n}")]
    ScheduleInfeasible { n: usize, parts: usize, part_size: usize },
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("oracle is over {oracle} vertices but the plan is for {plan}")]
    RangeMismatch { oracle: usize, plan: usize },
    #[error("oracle already answered {0} queries; reconstruction needs a fresh oracle")]
    OracleNotFresh(usize),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    NonAdjacent,
    NoEvidence,
}

/// Outcome of checking one pair against the landmarks queried with both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairEvidence {
    pub verdict: Verdict,
    pub witness: Option<usize>,
}

/// Answers `d1 = d(v1, x)` and `d2 = d(v2, x)` from one landmark `x` prove
/// `v1` and `v2` non-adjacent iff they differ by at least two.
/// `UNREACHABLE` behaves as infinity; two unreachable answers prove nothing.
pub fn classify_pair(d1: Hops, d2: Hops) -> Verdict {
    let gap = match (d1 == UNREACHABLE, d2 == UNREACHABLE) {
        (true, true) => 0,
        (true, false) | (false, true) => Hops::MAX,
        (false, false) => d1.abs_diff(d2),
    };
    if gap >= 2 {
        Verdict::NonAdjacent
    } else {
        Verdict::NoEvidence
    }
}

/// First landmark in `answers` (as `(x, d(v1,x), d(v2,x))`) giving non-adjacency evidence.
pub fn pair_evidence<I>(answers: I) -> PairEvidence
where
    I: IntoIterator<Item = (usize, Hops, Hops)>,
{
    for (x, d1, d2) in answers {
        if classify_pair(d1, d2) == Verdict::NonAdjacent {
            return PairEvidence { verdict: Verdict::NonAdjacent, witness: Some(x) };
        }
    }
    PairEvidence { verdict: Verdict::NoEvidence, witness: None }
}

/// When the landmark parts are queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// All of `X` is fixed and queried pairwise before the first round.
    Upfront,
    /// Part `X_i` is queried (against earlier landmarks and the uncovered
    /// vertices) only when round `i` starts; unused parts cost nothing.
    Incremental,
}

/// Landmark set `X`, its ordered partition and the coverage constants.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSchedule {
    pub n: usize,
    pub k: u32,
    pub c: f64,
    /// Coverage threshold: a vertex is covered once `m` landmarks lie within distance `k`.
    pub m: usize,
    pub part_size: usize,
    /// `ceil(log2 n)`, the nominal number of parts.
    pub nu: usize,
    pub parts: Vec<Vec<usize>>,
    pub activation: Activation,
}

/// `ceil(log2 n)` for `n >= 2`, else 1.
pub fn ceil_log2(n: usize) -> usize {
    if n <= 2 {
        1
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

// Relative slack when flooring formula values that are integers in exact arithmetic.
fn floor_snapped(x: f64) -> f64 {
    (x * (1.0 + 1e-12)).floor()
}

/// `floor(C / (2 n^(k-1) p^k))`, at least 1.
pub fn landmark_part_size(n: usize, p: f64, k: u32, c: f64) -> usize {
    let denom = 2.0 * (n as f64).powi(k as i32 - 1) * p.powi(k as i32);
    floor_snapped(c / denom).max(1.0) as usize
}

fn check_schedule_params(n: usize, p: f64, k: u32, c: f64, m: usize) -> Result<(), ReconstructError> {
    if k < 1 {
        return Err(ReconstructError::Invalid("k must be at least 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(ReconstructError::Invalid(format!("p = {p} must lie in (0, 1)")));
    }
    if !(c > 0.0) || m == 0 {
        return Err(ReconstructError::Invalid("C and M must be positive".into()));
    }
    if n < 2 {
        return Err(ReconstructError::Invalid("n must be at least 2".into()));
    }
    Ok(())
}

fn draw_parts(n: usize, parts: usize, part_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng_from_seed(seed);
    let chosen = sample(&mut rng, n, parts * part_size).into_vec();
    chosen.chunks(part_size).map(|c| c.to_vec()).collect()
}

/// `X` of size `nu * s` drawn uniformly without replacement, split into `nu`
/// consecutive parts of size `s`. Fails if `nu * s > n`.
pub fn build_schedule(
    n: usize,
    p: f64,
    k: u32,
    c: f64,
    m: usize,
    seed: u64,
) -> Result<LandmarkSchedule, ReconstructError> {
    check_schedule_params(n, p, k, c, m)?;
    let part_size = landmark_part_size(n, p, k, c);
    let nu = ceil_log2(n);
    if nu.saturating_mul(part_size) > n {
        return Err(ReconstructError::ScheduleInfeasible { n, parts: nu, part_size });
    }
    Ok(LandmarkSchedule {
        n,
        k,
        c,
        m,
        part_size,
        nu,
        parts: draw_parts(n, nu, part_size, seed),
        activation: Activation::Upfront,
    })
}

/// Like [`build_schedule`] but with parts activated round by round. Keeps as
/// many of the `nu` parts as fit into `n` vertices; fails only if a single
/// part does not fit.
pub fn build_incremental_schedule(
    n: usize,
    p: f64,
    k: u32,
    c: f64,
    m: usize,
    seed: u64,
) -> Result<LandmarkSchedule, ReconstructError> {
    check_schedule_params(n, p, k, c, m)?;
    let part_size = landmark_part_size(n, p, k, c);
    let nu = ceil_log2(n);
    if part_size > n {
        return Err(ReconstructError::ScheduleInfeasible { n, parts: 1, part_size });
    }
    let parts = nu.min(n / part_size);
    Ok(LandmarkSchedule {
        n,
        k,
        c,
        m,
        part_size,
        nu,
        parts: draw_parts(n, parts, part_size, seed),
        activation: Activation::Incremental,
    })
}

impl LandmarkSchedule {
    /// A schedule with explicitly chosen parts.
    pub fn from_parts(
        n: usize,
        k: u32,
        m: usize,
        parts: Vec<Vec<usize>>,
        activation: Activation,
    ) -> Result<Self, ReconstructError> {
        if k < 1 || m == 0 {
            return Err(ReconstructError::Invalid("k and M must be positive".into()));
        }
        let mut seen = vec![false; n];
        for &v in parts.iter().flatten() {
            if v >= n || std::mem::replace(&mut seen[v], true) {
                return Err(ReconstructError::Invalid(format!("landmark {v} repeated or out of range")));
            }
        }
        if parts.iter().any(|p| p.is_empty()) {
            return Err(ReconstructError::Invalid("empty landmark part".into()));
        }
        let part_size = parts.iter().map(Vec::len).max().unwrap_or(0);
        Ok(LandmarkSchedule {
            n,
            k,
            c: f64::NAN,
            m,
            part_size,
            nu: parts.len(),
            parts,
            activation,
        })
    }

    pub fn landmarks(&self) -> Vec<usize> {
        let mut x: Vec<usize> = self.parts.iter().flatten().copied().collect();
        x.sort_unstable();
        x
    }

    pub fn landmark_count(&self) -> usize {
        self.parts.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Success,
    CoverageFailure,
    QueryBudgetExceeded,
    Mismatch,
}

/// How many pairs each decision rule settled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionCounts {
    /// Pairs queried directly (adjacent iff the answer is 1).
    pub direct: usize,
    /// Unqueried pairs with a landmark witness of non-adjacency.
    pub evidence_non_adjacent: usize,
    /// Unqueried pairs without evidence, declared adjacent.
    pub default_adjacent: usize,
}

impl DecisionCounts {
    pub fn total(&self) -> usize {
        self.direct + self.evidence_non_adjacent + self.default_adjacent
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub status: Status,
    pub n: usize,
    pub k: u32,
    /// Present on `Success` (and on `Mismatch`, for inspection).
    pub graph: Option<Graph>,
    pub rounds_used: usize,
    pub queries_used: usize,
    /// `|V_1|, |V_2|, ...`
    pub coverage_per_round: Vec<usize>,
    /// Vertices left uncovered on `CoverageFailure`.
    pub uncovered: Vec<usize>,
    /// Queried pairs whose answer the output graph does not reproduce
    /// (first `MAX_REPORTED_MISMATCHES`, ascending).
    pub mismatches: Vec<(usize, usize)>,
    pub landmarks_used: usize,
    pub decisions: DecisionCounts,
}

pub const MAX_REPORTED_MISMATCHES: usize = 1000;

#[derive(Serialize, Deserialize)]
struct ReportJson {
    status: Status,
    n: usize,
    k: u32,
    rounds_used: usize,
    queries_used: usize,
    coverage_per_round: Vec<usize>,
    mismatches: Vec<(usize, usize)>,
}

impl ReconstructionReport {
    /// `{status, n, k, rounds_used, queries_used, coverage_per_round, mismatches}`
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ReportJson {
            status: self.status,
            n: self.n,
            k: self.k,
            rounds_used: self.rounds_used,
            queries_used: self.queries_used,
            coverage_per_round: self.coverage_per_round.clone(),
            mismatches: self.mismatches.clone(),
        })
        .expect("report serialises")
    }

    fn unfinished(status: Status, n: usize, k: u32, oracle: &DistanceOracle) -> Self {
        ReconstructionReport {
            status,
            n,
            k,
            graph: None,
            rounds_used: 0,
            queries_used: oracle.queries_used(),
            coverage_per_round: Vec::new(),
            uncovered: Vec::new(),
            mismatches: Vec::new(),
            landmarks_used: 0,
            decisions: DecisionCounts::default(),
        }
    }
}

// Table cells: exact distances up to CELL_MAX, then markers.
const CELL_MAX: Hops = 252;
const CELL_SAT: u8 = 253;
const CELL_INF: u8 = 254;
const CELL_UNKNOWN: u8 = 255;

#[inline]
fn cell_of(d: Hops) -> u8 {
    match d {
        UNREACHABLE => CELL_INF,
        d if d <= CELL_MAX => d as u8,
        _ => CELL_SAT,
    }
}

/// Answer tables of one landmark part.
struct PartTables {
    members: Vec<usize>,
    /// `members.len() x n`, row per landmark.
    by_landmark: Vec<u8>,
    /// `n x members.len()`, row per vertex.
    by_vertex: Vec<u8>,
}

const NO_SLOT: u32 = u32::MAX;

/// All answers gathered so far, indexed for the decision phase.
struct AnswerTables {
    n: usize,
    parts: Vec<PartTables>,
    /// `(part, index)` of each landmark, packed as `part << 24 | index`.
    slot: Vec<u32>,
    /// Some finite answer exceeded `CELL_MAX`.
    saturated: bool,
}

impl AnswerTables {
    fn new(n: usize) -> Self {
        AnswerTables { n, parts: Vec::new(), slot: vec![NO_SLOT; n], saturated: false }
    }

    fn add_part(&mut self, members: &[usize]) -> usize {
        let id = self.parts.len();
        let s = members.len();
        assert!(id < 255 && s < (1 << 24), "landmark table limits exceeded");
        let mut by_landmark = vec![CELL_UNKNOWN; s * self.n];
        let mut by_vertex = vec![CELL_UNKNOWN; self.n * s];
        for (i, &x) in members.iter().enumerate() {
            by_landmark[i * self.n + x] = 0;
            by_vertex[x * s + i] = 0;
            self.slot[x] = ((id as u32) << 24) | i as u32;
        }
        self.parts.push(PartTables { members: members.to_vec(), by_landmark, by_vertex });
        id
    }

    #[inline]
    fn slot_of(&self, v: usize) -> Option<(usize, usize)> {
        let s = self.slot[v];
        (s != NO_SLOT).then_some(((s >> 24) as usize, (s & 0xff_ffff) as usize))
    }

    #[inline]
    fn put(&mut self, part: usize, idx: usize, v: usize, cell: u8) {
        let n = self.n;
        let t = &mut self.parts[part];
        let s = t.members.len();
        t.by_landmark[idx * n + v] = cell;
        t.by_vertex[v * s + idx] = cell;
    }

    /// Records `d(x, v)` for landmark `x`, mirrored if `v` is a landmark too.
    fn record(&mut self, x: usize, v: usize, d: Hops) {
        let cell = cell_of(d);
        if cell == CELL_SAT {
            self.saturated = true;
        }
        if let Some((p, i)) = self.slot_of(x) {
            self.put(p, i, v, cell);
        }
        if let Some((p, i)) = self.slot_of(v) {
            self.put(p, i, x, cell);
        }
    }

    #[inline]
    fn row_by_landmark(&self, part: usize, idx: usize) -> &[u8] {
        &self.parts[part].by_landmark[idx * self.n..(idx + 1) * self.n]
    }

    #[inline]
    fn row_by_vertex(&self, part: usize, v: usize) -> &[u8] {
        let s = self.parts[part].members.len();
        &self.parts[part].by_vertex[v * s..(v + 1) * s]
    }
}

/// Which landmark answers count as non-adjacency evidence.
#[derive(Debug, Clone, Copy)]
enum EvidenceRule {
    /// `|d1 - d2| >= 2`.
    Gap,
    /// `|d1 - d2| >= 2` and `min(d1, d2) <= k`.
    GapWithinReach(u8),
}

impl EvidenceRule {
    fn answers_prove(self, d1: Hops, d2: Hops) -> bool {
        let gap = classify_pair(d1, d2) == Verdict::NonAdjacent;
        match self {
            EvidenceRule::Gap => gap,
            EvidenceRule::GapWithinReach(k) => gap && d1.min(d2) <= k as Hops,
        }
    }

    #[inline]
    fn rows_prove(self, a: &[u8], b: &[u8]) -> bool {
        match self {
            EvidenceRule::Gap => a.iter().zip(b).any(|(&x, &y)| x.abs_diff(y) >= 2),
            EvidenceRule::GapWithinReach(k) => {
                a.iter().zip(b).any(|(&x, &y)| x.abs_diff(y) >= 2 && x.min(y) <= k)
            }
        }
    }
}

/// The pairs `{v1, v2}` to be settled by evidence: for each `v1`, the
/// landmark parts its answers may be compared on and the vertices `v2` that
/// pair with it.
trait RulePairs {
    fn prefix(&self, v1: usize) -> usize;
    fn pairs_with(&self, v1: usize, v2: usize) -> bool;
}

/// Decides every rule pair; returns the pairs declared adjacent.
fn decide_by_evidence(
    tables: &AnswerTables,
    ledger: &QueryLedger,
    firsts: &[usize],
    pairs: &impl RulePairs,
    rule: EvidenceRule,
    k: u32,
) -> Vec<(u32, u32)> {
    let n = tables.n;
    let mut adjacent = Vec::new();
    let mut candidates: Vec<u32> = Vec::with_capacity(n);
    for &v1 in firsts {
        let prefix = pairs.prefix(v1);
        if tables.saturated {
            decide_exactly(tables, ledger, v1, prefix, pairs, rule, &mut adjacent);
            continue;
        }
        // Landmarks within distance k of v1 filter candidates cheaply: any v2
        // whose answer differs from v1's by two or more is already excluded.
        let mut filters = Vec::new();
        for part in 0..prefix {
            for (idx, &c) in tables.row_by_vertex(part, v1).iter().enumerate() {
                if (c as Hops) <= k {
                    filters.push((part, idx, c));
                }
            }
        }
        candidates.clear();
        match filters.split_first() {
            Some((&(part, idx, c0), rest)) => {
                let row = tables.row_by_landmark(part, idx);
                for (v2, &c) in row.iter().enumerate() {
                    if c.abs_diff(c0) <= 1 && pairs.pairs_with(v1, v2) {
                        candidates.push(v2 as u32);
                    }
                }
                for &(part, idx, c0) in rest {
                    let row = tables.row_by_landmark(part, idx);
                    candidates.retain(|&v2| row[v2 as usize].abs_diff(c0) <= 1);
                }
            }
            None => candidates.extend((0..n).filter(|&v2| pairs.pairs_with(v1, v2)).map(|v| v as u32)),
        }
        for &v2 in &candidates {
            let proved = (0..prefix).any(|part| {
                rule.rows_prove(tables.row_by_vertex(part, v1), tables.row_by_vertex(part, v2 as usize))
            });
            if !proved {
                let v2 = v2 as usize;
                adjacent.push((v1.min(v2) as u32, v1.max(v2) as u32));
            }
        }
    }
    adjacent
}

/// Slow path used when some answer does not fit a table cell.
fn decide_exactly(
    tables: &AnswerTables,
    ledger: &QueryLedger,
    v1: usize,
    prefix: usize,
    pairs: &impl RulePairs,
    rule: EvidenceRule,
    adjacent: &mut Vec<(u32, u32)>,
) {
    let answer = |x: usize, v: usize| if x == v { 0 } else { ledger.get(x, v).expect("queried pair") };
    for v2 in 0..tables.n {
        if !pairs.pairs_with(v1, v2) {
            continue;
        }
        let proved = tables.parts[..prefix].iter().flat_map(|t| t.members.iter()).any(|&x| {
            rule.answers_prove(answer(x, v1), answer(x, v2))
        });
        if !proved {
            adjacent.push((v1.min(v2) as u32, v1.max(v2) as u32));
        }
    }
}

fn assemble(n: usize, ledger: &QueryLedger, default_edges: &[(u32, u32)]) -> Graph {
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(default_edges.len());
    ledger.for_each_entry(|u, v, d| {
        if d == 1 {
            edges.push((u as u32, v as u32));
        }
    });
    edges.extend_from_slice(default_edges);
    edges.sort_unstable();
    debug_assert!(edges.windows(2).all(|w| w[0] != w[1]), "pair decided twice");
    Graph::from_sorted_pairs(n, &edges)
}

fn all_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Pairs decided by evidence in the adaptive procedure. Every vertex has a
/// key: `2r` for a non-landmark covered in round `r`, `2j - 1` for a landmark
/// in part `j`. `v2` pairs with a non-landmark `v1` of round `i` when it
/// comes later: key above `2i`, or key `2i` and larger index.
struct AdaptivePairs<'a> {
    key: &'a [u32],
}

impl RulePairs for AdaptivePairs<'_> {
    #[inline]
    fn prefix(&self, v1: usize) -> usize {
        (self.key[v1] / 2) as usize
    }
    #[inline]
    fn pairs_with(&self, v1: usize, v2: usize) -> bool {
        let (k1, k2) = (self.key[v1], self.key[v2]);
        k2 > k1 || (k2 == k1 && v2 > v1)
    }
}

/// Runs the round-based adaptive procedure on a fresh oracle.
///
/// Round `i` queries part `X_i` against the still uncovered non-landmark
/// vertices; `V_i` collects those that now have at least `M` landmarks of
/// `X_1 .. X_i` within distance `k`. The rounds stop once every non-landmark
/// is covered. A pair `{v1, v2}` with `v1 in V_i` and `v2` covered no earlier
/// (or a landmark of a later part) is then compared on `X_1 .. X_i`.
/// The output is re-checked against every answer; any disagreement gives
/// `Mismatch`.
pub fn adaptive_reconstruct(
    oracle: &mut DistanceOracle,
    schedule: &LandmarkSchedule,
) -> Result<ReconstructionReport, ReconstructError> {
    adaptive_reconstruct_with_budget(oracle, schedule, None)
}

/// [`adaptive_reconstruct`] that stops with `QueryBudgetExceeded` as soon as
/// more than `budget` distinct pairs have been queried.
pub fn adaptive_reconstruct_with_budget(
    oracle: &mut DistanceOracle,
    schedule: &LandmarkSchedule,
    budget: Option<usize>,
) -> Result<ReconstructionReport, ReconstructError> {
    let n = schedule.n;
    if oracle.n() != n {
        return Err(ReconstructError::RangeMismatch { oracle: oracle.n(), plan: n });
    }
    if oracle.queries_used() != 0 {
        return Err(ReconstructError::OracleNotFresh(oracle.queries_used()));
    }
    let k = schedule.k;
    let over_budget = |o: &DistanceOracle| budget.is_some_and(|b| o.queries_used() > b);

    let mut tables = AnswerTables::new(n);
    let mut close = vec![0usize; n];
    // 0 = not yet covered
    let mut round_of = vec![0u32; n];
    let mut activated: Vec<usize> = Vec::new();
    let mut coverage = Vec::new();

    if schedule.activation == Activation::Upfront {
        for part in &schedule.parts {
            tables.add_part(part);
        }
        let x = schedule.parts.iter().flatten().copied().collect::<Vec<_>>();
        for (i, &a) in x.iter().enumerate() {
            let later = &x[i + 1..];
            for (&b, d) in later.iter().zip(oracle.query_from(a, later)?) {
                tables.record(a, b, d);
            }
            if over_budget(oracle) {
                return Ok(ReconstructionReport::unfinished(Status::QueryBudgetExceeded, n, k, oracle));
            }
        }
        activated = x;
    }
    let mut pool: Vec<usize> = (0..n).filter(|&v| tables.slot_of(v).is_none()).collect();

    let mut rounds_used = 0;
    for (i, part) in schedule.parts.iter().enumerate() {
        if pool.is_empty() {
            break;
        }
        let round = i as u32 + 1;
        if schedule.activation == Activation::Incremental {
            tables.add_part(part);
            pool.retain(|&v| tables.slot_of(v).is_none());
            for (j, &a) in part.iter().enumerate() {
                let mut targets = activated.clone();
                targets.extend_from_slice(&part[j + 1..]);
                for (&b, d) in targets.iter().zip(oracle.query_from(a, &targets)?) {
                    tables.record(a, b, d);
                }
            }
            activated.extend_from_slice(part);
            if over_budget(oracle) {
                return Ok(ReconstructionReport::unfinished(Status::QueryBudgetExceeded, n, k, oracle));
            }
        }
        for &x in part {
            for (&v, d) in pool.iter().zip(oracle.query_from(x, &pool)?) {
                tables.record(x, v, d);
                if d <= k {
                    close[v] += 1;
                }
            }
            if over_budget(oracle) {
                return Ok(ReconstructionReport::unfinished(Status::QueryBudgetExceeded, n, k, oracle));
            }
        }
        let before = pool.len();
        pool.retain(|&v| {
            if close[v] >= schedule.m {
                round_of[v] = round;
                false
            } else {
                true
            }
        });
        coverage.push(before - pool.len());
        rounds_used = i + 1;
    }

    if !pool.is_empty() {
        let mut report = ReconstructionReport::unfinished(Status::CoverageFailure, n, k, oracle);
        report.rounds_used = rounds_used;
        report.coverage_per_round = coverage;
        report.uncovered = pool;
        report.landmarks_used = activated.len();
        return Ok(report);
    }

    let key: Vec<u32> = (0..n)
        .map(|v| match tables.slot_of(v) {
            Some((part, _)) => 2 * part as u32 + 1,
            None => 2 * round_of[v],
        })
        .collect();
    let firsts: Vec<usize> = (0..n).filter(|&v| tables.slot_of(v).is_none()).collect();
    let ledger = oracle.ledger();
    let adjacent = decide_by_evidence(&tables, ledger, &firsts, &AdaptivePairs { key: &key }, EvidenceRule::Gap, k);
    let direct = ledger.len();
    let decisions = DecisionCounts {
        direct,
        evidence_non_adjacent: all_pairs(n) - direct - adjacent.len(),
        default_adjacent: adjacent.len(),
    };
    let graph = assemble(n, ledger, &adjacent);
    // every query touches a landmark, so this re-checks the whole ledger
    let mismatches = mismatches_on_landmarks(&graph, ledger, &activated);
    Ok(ReconstructionReport {
        status: if mismatches.is_empty() { Status::Success } else { Status::Mismatch },
        n,
        k,
        graph: Some(graph),
        rounds_used,
        queries_used: oracle.queries_used(),
        coverage_per_round: coverage,
        uncovered: Vec::new(),
        mismatches,
        landmarks_used: activated.len(),
        decisions,
    })
}

/// Number of rule pairs in an adaptive run; equals `C(n,2) - |Q|` when every
/// pair is decided exactly once.
pub fn adaptive_rule_pair_count(report: &ReconstructionReport) -> usize {
    report.decisions.evidence_non_adjacent + report.decisions.default_adjacent
}

/// Landmark set and query set `Q = X x ([n] \ X)  ∪  (X choose 2)` of the
/// non-adaptive algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct NonadaptivePlan {
    pub n: usize,
    /// Sorted landmark set `X`.
    pub landmarks: Vec<usize>,
    /// Unclamped value of the size formula.
    pub formula_size: f64,
    /// The formula exceeded `n / 2` (or fell below 1) and was clamped.
    pub clamped: bool,
}

impl NonadaptivePlan {
    pub fn from_landmarks(n: usize, mut landmarks: Vec<usize>) -> Result<Self, ReconstructError> {
        landmarks.sort_unstable();
        landmarks.dedup();
        if landmarks.is_empty() || landmarks.last().is_some_and(|&x| x >= n) {
            return Err(ReconstructError::Invalid("landmarks must be a non-empty subset of [n]".into()));
        }
        let size = landmarks.len() as f64;
        Ok(NonadaptivePlan { n, landmarks, formula_size: size, clamped: false })
    }

    /// `|Q| = |X| (n - |X|) + |X| (|X| - 1) / 2`.
    pub fn query_count(&self) -> usize {
        let x = self.landmarks.len();
        x * (self.n - x) + x * x.saturating_sub(1) / 2
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        u != v && (self.landmarks.binary_search(&u).is_ok() || self.landmarks.binary_search(&v).is_ok())
    }

    /// The pairs of `Q` as `(u, v)` with `u < v`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| (u + 1..self.n).filter(move |&v| self.contains(u, v)).map(move |v| (u, v)))
    }
}

/// Draws `X` of size `floor(c_scale * 3 e^lambda ln n / (n^(k-1) p^k))`,
/// clamped to `[1, n/2]`; `c_scale = 1` is the unscaled constant.
pub fn nonadaptive_queryset(
    n: usize,
    p: f64,
    k: u32,
    c_scale: f64,
    seed: u64,
) -> Result<NonadaptivePlan, ReconstructError> {
    if k < 1 || n < 2 {
        return Err(ReconstructError::Invalid("need k >= 1 and n >= 2".into()));
    }
    if !(p > 0.0 && p < 1.0) || !(c_scale > 0.0) {
        return Err(ReconstructError::Invalid("need 0 < p < 1 and c_scale > 0".into()));
    }
    let lambda = lambda_of(n, p, k);
    let formula = c_scale * 3.0 * lambda.exp() * (n as f64).ln()
        / ((n as f64).powi(k as i32 - 1) * p.powi(k as i32));
    let upper = n / 2;
    let floored = floor_snapped(formula);
    let (size, clamped) = if !floored.is_finite() || floored > upper as f64 {
        (upper.max(1), true)
    } else if floored < 1.0 {
        (1, true)
    } else {
        (floored as usize, false)
    };
    let mut rng = rng_from_seed(seed);
    let mut landmarks = sample(&mut rng, n, size).into_vec();
    landmarks.sort_unstable();
    Ok(NonadaptivePlan { n, landmarks, formula_size: formula, clamped })
}

struct NonadaptivePairs<'a> {
    is_landmark: &'a [bool],
}

impl RulePairs for NonadaptivePairs<'_> {
    #[inline]
    fn prefix(&self, _v1: usize) -> usize {
        1
    }
    #[inline]
    fn pairs_with(&self, v1: usize, v2: usize) -> bool {
        v2 > v1 && !self.is_landmark[v2]
    }
}

/// Queries exactly `Q` and decides the pairs outside it: `{v1, v2}` is a
/// non-edge iff some landmark is within distance `k` of one end and at least
/// two further from the other. The output is then checked against every
/// answer; any disagreement yields `Mismatch`.
pub fn nonadaptive_reconstruct(
    oracle: &mut DistanceOracle,
    plan: &NonadaptivePlan,
    k: u32,
) -> Result<ReconstructionReport, ReconstructError> {
    let n = plan.n;
    if oracle.n() != n {
        return Err(ReconstructError::RangeMismatch { oracle: oracle.n(), plan: n });
    }
    if oracle.queries_used() != 0 {
        return Err(ReconstructError::OracleNotFresh(oracle.queries_used()));
    }
    if !(1..=CELL_MAX).contains(&k) {
        return Err(ReconstructError::Invalid(format!("k = {k} out of range")));
    }
    let mut tables = AnswerTables::new(n);
    tables.add_part(&plan.landmarks);
    let mut is_landmark = vec![false; n];
    for &x in &plan.landmarks {
        is_landmark[x] = true;
    }
    for &x in &plan.landmarks {
        let targets: Vec<usize> = (0..n).filter(|&v| v != x).collect();
        for (&v, d) in targets.iter().zip(oracle.query_from(x, &targets)?) {
            tables.record(x, v, d);
        }
    }
    debug_assert_eq!(oracle.queries_used(), plan.query_count());

    let firsts: Vec<usize> = (0..n).filter(|&v| !is_landmark[v]).collect();
    let ledger = oracle.ledger();
    let adjacent = decide_by_evidence(
        &tables,
        ledger,
        &firsts,
        &NonadaptivePairs { is_landmark: &is_landmark },
        EvidenceRule::GapWithinReach(k as u8),
        k,
    );
    let direct = ledger.len();
    let decisions = DecisionCounts {
        direct,
        evidence_non_adjacent: all_pairs(n) - direct - adjacent.len(),
        default_adjacent: adjacent.len(),
    };
    let graph = assemble(n, ledger, &adjacent);
    let mismatches = mismatches_on_landmarks(&graph, ledger, &plan.landmarks);
    Ok(ReconstructionReport {
        status: if mismatches.is_empty() { Status::Success } else { Status::Mismatch },
        n,
        k,
        graph: Some(graph),
        rounds_used: 1,
        queries_used: oracle.queries_used(),
        coverage_per_round: Vec::new(),
        uncovered: Vec::new(),
        mismatches,
        landmarks_used: plan.landmarks.len(),
        decisions,
    })
}

/// Ledger pairs (all incident to `landmarks`) whose answer differs from the
/// distance in `g`.
fn mismatches_on_landmarks(g: &Graph, ledger: &QueryLedger, landmarks: &[usize]) -> Vec<(usize, usize)> {
    let mut bfs = Bfs::new(g.n());
    let mut dist = vec![UNREACHABLE; g.n()];
    let mut out = Vec::new();
    for &x in landmarks {
        bfs.fill(g, x, &mut dist);
        for (v, &d) in dist.iter().enumerate() {
            if v != x {
                if let Some(ans) = ledger.get(x, v) {
                    if ans != d {
                        out.push((x.min(v), x.max(v)));
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out.truncate(MAX_REPORTED_MISMATCHES);
    out
}

/// Every ledger pair whose answer differs from its distance in `g`.
pub fn verify_against_ledger(g: &Graph, ledger: &QueryLedger) -> Vec<(usize, usize)> {
    let mut sources: Vec<usize> = ledger.iter().map(|(u, _, _)| u).collect();
    sources.dedup();
    let mut bfs = Bfs::new(g.n());
    let mut dist = vec![UNREACHABLE; g.n()];
    let mut out = Vec::new();
    let mut entries = ledger.iter().peekable();
    for u in sources {
        bfs.fill(g, u, &mut dist);
        while let Some(&(a, b, d)) = entries.peek() {
            if a != u {
                break;
            }
            if dist[b] != d {
                out.push((a, b));
            }
            entries.next();
        }
    }
    out
}
