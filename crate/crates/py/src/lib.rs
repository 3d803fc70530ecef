//! Python bindings: graphs, the distance oracle, both reconstruction
//! algorithms, certificates and experiment sweeps. Query sets are passed as
//! lists of `(u, v)` pairs and answered from the hidden graph.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use distrecon::certify::{
    bruteforce_is_reconstructible, deterministic_lower_bound, find_undetectable_exhaustive,
    find_undetectable_randomized, validate_certificate, RandomizedOptions, Reconstructibility,
    UndetectableCertificate,
};
use distrecon::harness::{run_sweep, write_records, ExperimentSpec, OutputFormat};
use distrecon::reconstruct::{ReconstructionReport, Status};
use distrecon::{
    adaptive_reconstruct, bounds_table, build_incremental_schedule, build_schedule, nonadaptive_queryset,
    nonadaptive_reconstruct, regime_from, sample_gnp, DistanceOracle, GnpParams, QueryLedger, UNREACHABLE,
};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An undirected simple graph on vertices `0..n`.
#[pyclass(name = "Graph", module = "pydistrecon", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: distrecon::Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(PyGraph { inner: distrecon::Graph::from_edges(n, edges).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.inner.n() && v < self.inner.n() && self.inner.has_edge(u, v)
    }

    fn degree(&self, v: usize) -> PyResult<usize> {
        self.check(v)?;
        Ok(self.inner.degree(v))
    }

    /// Hop distances from `source`; `None` for unreachable vertices.
    fn distances(&self, source: usize) -> PyResult<Vec<Option<u32>>> {
        self.check(source)?;
        let d = self.inner.bfs_distances(source);
        Ok((0..self.inner.n()).map(|v| Some(d.get(v)).filter(|&x| x != UNREACHABLE)).collect())
    }

    fn ball(&self, v: usize, r: u32) -> PyResult<Vec<usize>> {
        self.check(v)?;
        Ok(self.inner.ball(v, r))
    }

    /// `None` when disconnected.
    fn diameter(&self) -> Option<u32> {
        self.inner.diameter().finite()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

impl PyGraph {
    fn check(&self, v: usize) -> PyResult<()> {
        if v < self.inner.n() {
            Ok(())
        } else {
            Err(err(format!("vertex {v} out of range for n = {}", self.inner.n())))
        }
    }
}

/// Sample G(n, p).
#[pyfunction]
fn gnp(n: usize, p: f64, seed: u64) -> PyResult<PyGraph> {
    Ok(PyGraph { inner: sample_gnp(&GnpParams::new(n, p, seed).map_err(err)?) })
}

/// Regime parameters `(k, alpha, lambda, expected_diameter, boundary_flag)`.
#[pyfunction]
#[pyo3(signature = (n, p, delta = 0.02))]
fn regime(n: usize, p: f64, delta: f64) -> PyResult<(u32, f64, f64, u32, bool)> {
    let r = regime_from(n, p, delta).map_err(err)?;
    Ok((r.k, r.alpha, r.lambda, r.expected_diameter, r.boundary_flag))
}

/// The four closed-form bounds as a JSON object.
#[pyfunction]
#[pyo3(signature = (n, p, k, c = 16.0, eps = 0.1))]
fn bounds(n: usize, p: f64, k: u32, c: f64, eps: f64) -> PyResult<String> {
    serde_json::to_string(&bounds_table(n, p, k, c, eps).map_err(err)?).map_err(err)
}

/// Answers distance queries on a hidden graph and counts distinct pairs.
#[pyclass(name = "Oracle", module = "pydistrecon")]
struct PyOracle {
    inner: DistanceOracle,
}

#[pymethods]
impl PyOracle {
    #[new]
    fn new(hidden: &PyGraph) -> Self {
        PyOracle { inner: DistanceOracle::new(hidden.inner.clone()) }
    }

    /// `None` for an unreachable pair.
    fn query(&mut self, u: usize, v: usize) -> PyResult<Option<u32>> {
        let d = self.inner.query(u, v).map_err(err)?;
        Ok(Some(d).filter(|&x| x != UNREACHABLE))
    }

    #[getter]
    fn queries_used(&self) -> usize {
        self.inner.queries_used()
    }

    /// Every distinct pair asked so far as `(u, v, d)` with `u < v`.
    fn ledger(&self) -> Vec<(usize, usize, Option<u32>)> {
        self.inner.ledger().iter().map(|(u, v, d)| (u, v, Some(d).filter(|&x| x != UNREACHABLE))).collect()
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Success => "Success",
        Status::CoverageFailure => "CoverageFailure",
        Status::QueryBudgetExceeded => "QueryBudgetExceeded",
        Status::Mismatch => "Mismatch",
    }
}

/// Outcome of a reconstruction run.
#[pyclass(name = "Report", module = "pydistrecon", frozen)]
struct PyReport {
    #[pyo3(get)]
    status: &'static str,
    #[pyo3(get)]
    queries_used: usize,
    #[pyo3(get)]
    rounds_used: usize,
    #[pyo3(get)]
    graph: Option<PyGraph>,
    #[pyo3(get)]
    exact: bool,
    json: String,
}

#[pymethods]
impl PyReport {
    fn to_json(&self) -> String {
        self.json.clone()
    }

    fn __repr__(&self) -> String {
        format!("Report(status={}, queries_used={}, exact={})", self.status, self.queries_used, self.exact)
    }
}

fn report(r: ReconstructionReport, hidden: &distrecon::Graph) -> PyReport {
    PyReport {
        status: status_name(r.status),
        queries_used: r.queries_used,
        rounds_used: r.rounds_used,
        exact: r.status == Status::Success && r.graph.as_ref() == Some(hidden),
        json: r.to_json(),
        graph: r.graph.map(|inner| PyGraph { inner }),
    }
}

/// Adaptive landmark reconstruction of `hidden`.
#[pyfunction]
#[pyo3(signature = (hidden, p, k, seed, c = 16.0, m = 4, incremental = true))]
fn adaptive(hidden: &PyGraph, p: f64, k: u32, seed: u64, c: f64, m: usize, incremental: bool) -> PyResult<PyReport> {
    let g = &hidden.inner;
    let schedule = if incremental {
        build_incremental_schedule(g.n(), p, k, c, m, seed)
    } else {
        build_schedule(g.n(), p, k, c, m, seed)
    }
    .map_err(err)?;
    let mut oracle = DistanceOracle::new(g.clone());
    Ok(report(adaptive_reconstruct(&mut oracle, &schedule).map_err(err)?, g))
}

/// Non-adaptive reconstruction with a random landmark set.
#[pyfunction]
#[pyo3(signature = (hidden, p, k, seed, c_scale = 1.0))]
fn nonadaptive(hidden: &PyGraph, p: f64, k: u32, seed: u64, c_scale: f64) -> PyResult<PyReport> {
    let g = &hidden.inner;
    let plan = nonadaptive_queryset(g.n(), p, k, c_scale, seed).map_err(err)?;
    let mut oracle = DistanceOracle::new(g.clone());
    Ok(report(nonadaptive_reconstruct(&mut oracle, &plan, k).map_err(err)?, g))
}

fn ledger(g: &PyGraph, pairs: Vec<(usize, usize)>) -> PyResult<QueryLedger> {
    QueryLedger::from_graph(&g.inner, pairs).map_err(err)
}

fn certificate(c: Option<UndetectableCertificate>) -> Option<String> {
    c.map(|c| c.to_json())
}

/// Whether adding `{u1, u2}` to `g` keeps every answer to `pairs`.
#[pyfunction]
fn validate(g: &PyGraph, pairs: Vec<(usize, usize)>, u1: usize, u2: usize) -> PyResult<bool> {
    Ok(validate_certificate(&g.inner, &ledger(g, pairs)?, u1, u2))
}

/// First undetectable pair in ascending order, as certificate JSON.
#[pyfunction]
fn certify_exhaustive(g: &PyGraph, pairs: Vec<(usize, usize)>, k: u32) -> PyResult<Option<String>> {
    Ok(certificate(find_undetectable_exhaustive(&g.inner, &ledger(g, pairs)?, k).map_err(err)?))
}

/// Randomized search for a small undetectable pair.
#[pyfunction]
#[pyo3(signature = (g, pairs, k, seed, tau = None, extend = false))]
fn certify_randomized(
    g: &PyGraph,
    pairs: Vec<(usize, usize)>,
    k: u32,
    seed: u64,
    tau: Option<usize>,
    extend: bool,
) -> PyResult<Option<String>> {
    let q = ledger(g, pairs)?;
    let mut options = RandomizedOptions::new(g.inner.n(), k);
    options.extend = extend;
    options.budget_n = Some(q.len().max(1) as f64);
    if let Some(t) = tau {
        options.tau = t;
    }
    Ok(certificate(find_undetectable_randomized(&g.inner, &q, k, options, seed).map_err(err)?.certificate))
}

/// Exact deterministic lower bound as `(numerator, denominator, ceiling)` strings.
#[pyfunction]
fn lower_bound(g: &PyGraph, eps: f64) -> PyResult<(String, String, String)> {
    let lb = deterministic_lower_bound(&g.inner, eps).map_err(err)?;
    Ok((lb.value.numer().to_string(), lb.value.denom().to_string(), lb.ceiling.to_string()))
}

/// `True` when the answers to `pairs` determine `g` (n <= 7).
#[pyfunction]
fn is_reconstructible(g: &PyGraph, pairs: Vec<(usize, usize)>) -> PyResult<bool> {
    let verdict = bruteforce_is_reconstructible(&g.inner, &ledger(g, pairs)?).map_err(err)?;
    Ok(matches!(verdict, Reconstructibility::Unique))
}

/// Runs an experiment grid given as JSON; returns the records as CSV.
#[pyfunction]
fn sweep(spec_json: &str) -> PyResult<String> {
    let spec: ExperimentSpec = serde_json::from_str(spec_json).map_err(err)?;
    let records = run_sweep(&spec).map_err(err)?;
    let mut out = Vec::new();
    write_records(&records, OutputFormat::Csv, &mut out).map_err(err)?;
    String::from_utf8(out).map_err(err)
}

#[pymodule]
fn pydistrecon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyOracle>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(gnp, m)?)?;
    m.add_function(wrap_pyfunction!(regime, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive, m)?)?;
    m.add_function(wrap_pyfunction!(nonadaptive, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(certify_exhaustive, m)?)?;
    m.add_function(wrap_pyfunction!(certify_randomized, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(is_reconstructible, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
