//! Experiment sweeps over `(n, p)` grids and scaling fits.
//!
//! Trial `t` at grid point `g` (the index into `n_list`) runs on the seed
//! `child_seed(base_seed, g, t)`; the hidden graph is sampled from that seed
//! and the algorithm's own randomness (landmarks, query sets, the certificate
//! search) from `mix64` of it. Any single row can be replayed from its
//! `seed` column alone.

use std::io::{Read, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{
    bruteforce_is_reconstructible, default_tau, find_undetectable_randomized, CertifyError, RandomizedOptions,
    Reconstructibility, BRUTEFORCE_CAP,
};
use crate::gnp::{alpha_of, bounds_table, child_seed, mix64, regime_from, rng_from_seed, sample_gnp, BoundsTable, GnpParams, RegimeError};
use crate::graph::{Diameter, Graph};
use crate::oracle::{DistanceOracle, QueryLedger};
use crate::reconstruct::{
    adaptive_reconstruct, build_incremental_schedule, build_schedule, nonadaptive_queryset, nonadaptive_reconstruct,
    Activation, ReconstructError, ReconstructionReport, Status,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need at least two distinct n with positive q, got {0}")]
    InsufficientData(usize),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Adaptive,
    Nonadaptive,
    Certify,
    Bruteforce,
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PRule {
    Fixed(f64),
    /// `p = n^(-alpha)`.
    Alpha(f64),
}

impl PRule {
    pub fn p_for(self, n: usize) -> f64 {
        match self {
            PRule::Fixed(p) => p,
            PRule::Alpha(a) => (n as f64).powf(-a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constants {
    /// Coverage threshold of the adaptive algorithm.
    pub m: usize,
    /// Landmark size constant of the adaptive algorithm.
    pub c: f64,
    /// Multiplier of the non-adaptive landmark count.
    pub c_scale: f64,
    pub eps: f64,
    /// Steps of the certificate search; `None` picks `floor(n^(1/(k+1)) / ln n)`.
    pub tau: Option<usize>,
    /// Keep searching past `tau` until every vertex has been considered.
    pub extend: bool,
    /// Regime boundary tolerance.
    pub delta: f64,
    /// Use this `k` instead of the one derived from `(n, p)`.
    pub k_override: Option<u32>,
    pub activation: Activation,
    /// Certify mode: `|Q|` as a fraction of the adaptive lower bound.
    /// Bruteforce mode: `|Q|` as a fraction of all pairs.
    pub query_fraction: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            m: 4,
            c: 16.0,
            c_scale: 1.0,
            eps: 0.1,
            tau: None,
            extend: false,
            delta: crate::gnp::DEFAULT_DELTA,
            k_override: None,
            activation: Activation::Incremental,
            query_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub n_list: Vec<usize>,
    pub p_rule: PRule,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub constants: Constants,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Invalid("trials must be at least 1".into()));
        }
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| n < 3) {
            return Err(HarnessError::Invalid("n_list must be non-empty with every n >= 3".into()));
        }
        let ok = match self.p_rule {
            PRule::Fixed(p) => p > 0.0 && p < 1.0,
            PRule::Alpha(a) => a > 0.0 && a.is_finite(),
        };
        if !ok {
            return Err(HarnessError::Invalid(format!("bad p rule {:?}", self.p_rule)));
        }
        let c = &self.constants;
        if c.m == 0 || !(c.c > 0.0) || !(c.c_scale > 0.0) || !(c.eps > 0.0) || !(c.query_fraction >= 0.0) {
            return Err(HarnessError::Invalid("M, C, c_scale and eps must be positive".into()));
        }
        Ok(())
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    pub k: Option<u32>,
    pub seed: u64,
    pub mode: Mode,
    pub status: String,
    pub queries_used: u64,
    pub adaptive_upper: Option<f64>,
    pub adaptive_lower: Option<f64>,
    pub nonadaptive_upper: Option<f64>,
    pub nonadaptive_lower: Option<f64>,
    /// A hop count, `disconnected`, or empty when not measured.
    pub measured_diameter: Option<String>,
    pub runtime_ms: f64,
}

pub const CSV_HEADER: &str = "n,p,alpha,k,seed,mode,status,queries_used,adaptive_upper,adaptive_lower,nonadaptive_upper,nonadaptive_lower,measured_diameter,runtime_ms";

impl TrialRecord {
    fn blank(n: usize, p: f64, seed: u64, mode: Mode) -> Self {
        TrialRecord {
            n,
            p,
            alpha: alpha_of(n, p),
            k: None,
            seed,
            mode,
            status: String::new(),
            queries_used: 0,
            adaptive_upper: None,
            adaptive_lower: None,
            nonadaptive_upper: None,
            nonadaptive_lower: None,
            measured_diameter: None,
            runtime_ms: 0.0,
        }
    }

    fn set_bounds(&mut self, b: &BoundsTable) {
        self.adaptive_upper = Some(b.adaptive_upper);
        self.adaptive_lower = Some(b.adaptive_lower);
        self.nonadaptive_upper = Some(b.nonadaptive_upper);
        self.nonadaptive_lower = Some(b.nonadaptive_lower);
    }

    pub fn succeeded(&self) -> bool {
        self.status == "success"
    }
}

fn regime_status(e: &RegimeError) -> &'static str {
    match e {
        RegimeError::DenseRegime { .. } => "dense_regime",
        RegimeError::SparseRegime { .. } => "sparse_regime",
        _ => "invalid",
    }
}

fn diameter_label(d: Diameter) -> String {
    match d {
        Diameter::Finite(d) => d.to_string(),
        Diameter::Disconnected => "disconnected".into(),
    }
}

/// Status of a reconstruction checked against the hidden graph.
pub fn reconstruction_status(report: &ReconstructionReport, hidden: &Graph) -> &'static str {
    match report.status {
        Status::Success if report.graph.as_ref() == Some(hidden) => "success",
        Status::Success => "inexact",
        Status::CoverageFailure => "coverage_failure",
        Status::QueryBudgetExceeded => "budget_exceeded",
        Status::Mismatch => "mismatch",
    }
}

/// Seed of the algorithm's own randomness in a trial with seed `seed`.
pub fn algorithm_seed(seed: u64) -> u64 {
    mix64(seed ^ 0x5E_ED0F_A160)
}

/// `count` distinct pairs drawn uniformly from all pairs of `[n]`.
pub fn random_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = n * (n - 1) / 2;
    let mut rng = rng_from_seed(seed);
    let mut idx = sample(&mut rng, total, count.min(total)).into_vec();
    idx.sort_unstable();
    // pair index i -> (u, v) in row-major order over u < v
    let mut out = Vec::with_capacity(idx.len());
    let (mut u, mut row_start) = (0usize, 0usize);
    for i in idx {
        while i >= row_start + (n - 1 - u) {
            row_start += n - 1 - u;
            u += 1;
        }
        out.push((u, u + 1 + (i - row_start)));
    }
    out
}

/// Runs one trial in isolation.
pub fn run_trial(spec: &ExperimentSpec, n: usize, seed: u64) -> TrialRecord {
    let p = spec.p_rule.p_for(n);
    let mut record = TrialRecord::blank(n, p, seed, spec.mode);
    let c = spec.constants;
    let k = match (c.k_override, regime_from(n, p, c.delta)) {
        (Some(k), _) => k,
        (None, Ok(r)) => r.k,
        (None, Err(e)) => {
            record.status = regime_status(&e).into();
            return record;
        }
    };
    record.k = Some(k);
    match bounds_table(n, p, k, c.c, c.eps) {
        Ok(b) => record.set_bounds(&b),
        Err(_) if spec.mode == Mode::Bounds => {
            record.status = "invalid".into();
            return record;
        }
        Err(_) => {}
    }
    if spec.mode == Mode::Bounds {
        record.status = "bounds".into();
        return record;
    }

    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| execute(spec.mode, &c, n, p, k, seed)));
    record.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(o) => {
            record.status = o.status;
            record.queries_used = o.queries as u64;
            record.measured_diameter = o.diameter;
        }
        Err(_) => record.status = "panic".into(),
    }
    record
}

struct Outcome {
    status: String,
    queries: usize,
    diameter: Option<String>,
}

fn execute(mode: Mode, c: &Constants, n: usize, p: f64, k: u32, seed: u64) -> Outcome {
    let hidden = sample_gnp(&GnpParams::new(n, p, seed).expect("validated"));
    let diameter = hidden.diameter();
    let mut out = Outcome { status: String::new(), queries: 0, diameter: Some(diameter_label(diameter)) };
    let aseed = algorithm_seed(seed);
    match mode {
        Mode::Adaptive => {
            let schedule = match c.activation {
                Activation::Upfront => build_schedule(n, p, k, c.c, c.m, aseed),
                Activation::Incremental => build_incremental_schedule(n, p, k, c.c, c.m, aseed),
            };
            let schedule = match schedule {
                Ok(s) => s,
                Err(ReconstructError::ScheduleInfeasible { .. }) => {
                    out.status = "schedule_infeasible".into();
                    return out;
                }
                Err(e) => panic!("{e}"),
            };
            let mut oracle = DistanceOracle::new(hidden.clone());
            let report = adaptive_reconstruct(&mut oracle, &schedule).expect("fresh oracle");
            out.status = reconstruction_status(&report, &hidden).into();
            out.queries = report.queries_used;
        }
        Mode::Nonadaptive => {
            let plan = nonadaptive_queryset(n, p, k, c.c_scale, aseed).expect("validated");
            let mut oracle = DistanceOracle::new(hidden.clone());
            let report = nonadaptive_reconstruct(&mut oracle, &plan, k).expect("fresh oracle");
            out.status = reconstruction_status(&report, &hidden).into();
            out.queries = report.queries_used;
        }
        Mode::Certify => {
            let lower = bounds_table(n, p, k, c.c, c.eps).map(|b| b.adaptive_lower).unwrap_or(0.0);
            let count = (c.query_fraction * lower).floor() as usize;
            let pairs = random_pairs(n, count, aseed);
            let ledger = QueryLedger::from_graph(&hidden, pairs).expect("valid pairs");
            out.queries = ledger.len();
            let options = RandomizedOptions {
                tau: c.tau.unwrap_or_else(|| default_tau(n, k)),
                extend: c.extend,
                budget_n: Some(ledger.len().max(1) as f64),
            };
            out.status = match find_undetectable_randomized(&hidden, &ledger, k, options, mix64(aseed)) {
                Ok(s) if s.certificate.is_some() => "certified",
                Ok(_) => "no_certificate",
                Err(CertifyError::DiameterMismatch { .. }) => "diameter_mismatch",
                Err(_) => "invalid",
            }
            .into();
        }
        Mode::Bruteforce => {
            if n > BRUTEFORCE_CAP {
                out.status = "cap_exceeded".into();
                return out;
            }
            let count = (c.query_fraction * (n * (n - 1) / 2) as f64).floor() as usize;
            let ledger = QueryLedger::from_graph(&hidden, random_pairs(n, count, aseed)).expect("valid pairs");
            out.queries = ledger.len();
            out.status = match bruteforce_is_reconstructible(&hidden, &ledger) {
                Ok(Reconstructibility::Unique) => "unique",
                Ok(Reconstructibility::Ambiguous(_)) => "ambiguous",
                Err(_) => "invalid",
            }
            .into();
        }
        Mode::Bounds => unreachable!("handled without sampling"),
    }
    out
}

/// All trials of the grid, in `(n_list index, trial)` order.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>, HarnessError> {
    spec.validate()?;
    let mut records = Vec::with_capacity(spec.n_list.len() * spec.trials);
    for (point, &n) in spec.n_list.iter().enumerate() {
        for t in 0..spec.trials {
            let seed = child_seed(spec.base_seed, point as u64, t as u64);
            records.push(run_trial(spec, n, seed));
        }
    }
    Ok(records)
}

pub fn write_records<W: Write>(records: &[TrialRecord], format: OutputFormat, mut out: W) -> Result<(), HarnessError> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
            w.write_record(CSV_HEADER.split(','))?;
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, records)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(HarnessError::Invalid(format!("unexpected header {}", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `ln q` against `ln n`.
pub fn fit_scaling_exponent(points: &[(f64, f64)]) -> Result<ScalingFit, HarnessError> {
    if points.iter().any(|&(n, q)| !(n > 0.0 && q > 0.0)) {
        return Err(HarnessError::Invalid("every n and q must be positive".into()));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(HarnessError::InsufficientData(distinct.len()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(ScalingFit { slope, intercept, r_squared })
}

/// `(n, mean queries_used)` over successful records, one point per `n`.
pub fn mean_successful_queries(records: &[TrialRecord]) -> Vec<(f64, f64)> {
    let mut ns: Vec<usize> = records.iter().filter(|r| r.succeeded()).map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let qs: Vec<f64> = records.iter().filter(|r| r.n == n && r.succeeded()).map(|r| r.queries_used as f64).collect();
            (n as f64, qs.iter().sum::<f64>() / qs.len() as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(mode: Mode, n_list: Vec<usize>, p_rule: PRule, trials: usize) -> ExperimentSpec {
        ExperimentSpec { mode, n_list, p_rule, trials, base_seed: 42, constants: Constants::default() }
    }

    #[test]
    fn sweep_is_deterministic() {
        let s = spec(Mode::Adaptive, vec![64], PRule::Fixed(0.3), 2);
        let a = run_sweep(&s).unwrap();
        let b = run_sweep(&s).unwrap();
        assert_eq!(a.len(), 2);
        let strip = |v: &[TrialRecord]| v.iter().map(|r| (r.seed, r.status.clone(), r.queries_used)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        assert_ne!(a[0].seed, a[1].seed);
        assert!(a.iter().all(|r| !r.status.is_empty() && r.queries_used <= 64 * 63 / 2));
    }

    #[test]
    fn bounds_mode_skips_sampling() {
        let s = spec(Mode::Bounds, vec![16384], PRule::Fixed(0.005), 1);
        let r = &run_sweep(&s).unwrap()[0];
        assert_eq!(r.status, "bounds");
        assert_eq!(r.queries_used, 0);
        assert_eq!(r.measured_diameter, None);
        let b = bounds_table(16384, 0.005, 1, 16.0, 0.1).unwrap();
        assert_eq!(r.adaptive_upper, Some(b.adaptive_upper));
        assert_eq!(r.nonadaptive_lower, Some(b.nonadaptive_lower));
    }

    #[test]
    fn regime_failures_are_recorded() {
        let s = spec(Mode::Adaptive, vec![100, 200], PRule::Fixed(0.5), 2);
        let r = run_sweep(&s).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.iter().all(|r| r.status == "dense_regime" && r.queries_used == 0 && r.k.is_none()));
        assert!(run_sweep(&spec(Mode::Adaptive, vec![100], PRule::Fixed(0.5), 0)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut records = run_sweep(&spec(Mode::Bounds, vec![100, 1000], PRule::Alpha(0.6), 1)).unwrap();
        records.extend(run_sweep(&spec(Mode::Adaptive, vec![10], PRule::Fixed(0.5), 1)).unwrap());
        records[0].measured_diameter = Some("disconnected".into());
        records[0].runtime_ms = 0.1 + 0.2;
        let mut buf = Vec::new();
        write_records(&records, OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(read_records_csv(&buf[..]).unwrap(), records);
    }

    #[test]
    fn json_output_parses() {
        let records = run_sweep(&spec(Mode::Bounds, vec![100], PRule::Alpha(0.6), 1)).unwrap();
        let mut buf = Vec::new();
        write_records(&records, OutputFormat::Json, &mut buf).unwrap();
        let back: Vec<TrialRecord> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn fit_examples() {
        let exact: Vec<_> = [1024.0f64, 4096.0, 16384.0].iter().map(|&n| (n, n.powf(1.5))).collect();
        let f = fit_scaling_exponent(&exact).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(matches!(fit_scaling_exponent(&[(1024.0, 5.0)]), Err(HarnessError::InsufficientData(1))));
        assert!(matches!(fit_scaling_exponent(&[(1024.0, 5.0), (1024.0, 6.0)]), Err(HarnessError::InsufficientData(1))));
    }

    #[test]
    fn random_pairs_are_distinct_and_valid() {
        let pairs = random_pairs(50, 300, 1);
        assert_eq!(pairs.len(), 300);
        let mut sorted = pairs.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 300);
        assert!(pairs.iter().all(|&(u, v)| u < v && v < 50));
        assert_eq!(random_pairs(5, 100, 1).len(), 10);
    }

    #[test]
    fn certify_and_bruteforce_modes() {
        let s = spec(Mode::Bruteforce, vec![6], PRule::Fixed(0.3), 3);
        let r = run_sweep(&s).unwrap();
        assert!(r.iter().all(|r| r.status == "unique" || r.status == "ambiguous" || r.status == "invalid"));
        let s = spec(Mode::Bruteforce, vec![9], PRule::Fixed(0.3), 1);
        assert_eq!(run_sweep(&s).unwrap()[0].status, "cap_exceeded");
    }
}
