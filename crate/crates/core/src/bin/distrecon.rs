use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use distrecon::certify::{
    bruteforce_is_reconstructible, deterministic_lower_bound, find_undetectable_exhaustive,
    find_undetectable_randomized, RandomizedOptions, Reconstructibility,
};
use distrecon::edgelist::{read_edge_list, write_edge_list};
use distrecon::gnp::{alpha_of, bounds_table, regime_from, sample_gnp, GnpParams, DEFAULT_DELTA};
use distrecon::harness::{
    algorithm_seed, random_pairs, reconstruction_status, run_sweep, write_records, Constants, ExperimentSpec,
    Mode, OutputFormat, PRule,
};
use distrecon::reconstruct::{
    adaptive_reconstruct, build_incremental_schedule, build_schedule, nonadaptive_queryset, nonadaptive_reconstruct,
    Activation, Status,
};
use distrecon::{DistanceOracle, Graph, QueryLedger};

/// Reconstruct hidden graphs from distance queries.
#[derive(Parser)]
#[command(name = "distrecon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample G(n,p) and write it as an edge list.
    Gen(GenArgs),
    /// Run the adaptive landmark algorithm against a hidden graph.
    Adaptive(ReconArgs),
    /// Run the non-adaptive algorithm against a hidden graph.
    Nonadaptive(ReconArgs),
    /// Search for an undetectable pair certifying that Q is insufficient.
    Certify(CertifyArgs),
    /// Decide by enumeration whether Q determines a graph on at most 7 vertices.
    Bruteforce(BruteArgs),
    /// Print the regime and the closed-form bounds at (n, p).
    Bounds(BoundsArgs),
    /// Run a seeded experiment grid and write one record per trial.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct Point {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, conflicts_with = "alpha")]
    p: Option<f64>,
    /// Use p = n^(-alpha).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Regime index; derived from (n, p) when omitted.
    #[arg(long)]
    k: Option<u32>,
    /// Regime boundary tolerance.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    point: Point,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Landmarks {
    Upfront,
    Incremental,
}

#[derive(Args)]
struct ReconArgs {
    #[command(flatten)]
    point: Point,
    /// Hidden graph as an edge list instead of a sampled one.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long = "M", default_value_t = 4)]
    m: usize,
    #[arg(long = "C", default_value_t = 16.0)]
    c: f64,
    #[arg(long = "c-scale", default_value_t = 1.0)]
    c_scale: f64,
    #[arg(long, value_enum, default_value_t = Landmarks::Incremental)]
    landmarks: Landmarks,
    /// Report JSON destination (stdout by default).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the reconstructed graph as an edge list.
    #[arg(long)]
    edges_out: Option<PathBuf>,
    /// Write the query ledger as CSV.
    #[arg(long)]
    ledger_out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    point: Point,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Query ledger CSV (u,v,d); otherwise random pairs are drawn.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Number of random query pairs; defaults to half the adaptive lower bound.
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    tau: Option<usize>,
    /// Keep sampling past tau until every vertex has been considered.
    #[arg(long)]
    extend: bool,
    /// Scan all pairs in order instead of sampling.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BruteArgs {
    #[command(flatten)]
    point: Point,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Fraction of all pairs queried when no ledger is given.
    #[arg(long, default_value_t = 0.5)]
    query_fraction: f64,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    point: Point,
    #[arg(long = "C", default_value_t = 16.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Adaptive,
    Nonadaptive,
    Certify,
    Bruteforce,
    Bounds,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    mode: SweepMode,
    /// Comma-separated vertex counts.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, conflicts_with = "alpha")]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long = "M", default_value_t = 4)]
    m: usize,
    #[arg(long = "C", default_value_t = 16.0)]
    c: f64,
    #[arg(long = "c-scale", default_value_t = 1.0)]
    c_scale: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long)]
    extend: bool,
    #[arg(long, value_enum, default_value_t = Landmarks::Incremental)]
    landmarks: Landmarks,
    #[arg(long, default_value_t = 0.5)]
    query_fraction: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Reconstruction or certification did not succeed.
    Outcome(String),
    /// Bad parameters or unreadable input.
    Invalid(String),
}

type Outcome = Result<(), Failure>;

fn invalid<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Invalid(e.to_string())
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(invalid)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(path: &Option<PathBuf>, text: &str) -> Outcome {
    let mut w = sink(path)?;
    writeln!(w, "{text}").map_err(invalid)?;
    w.flush().map_err(invalid)
}

impl Point {
    fn n(&self) -> Result<usize, Failure> {
        self.n.ok_or_else(|| invalid("--n is required"))
    }

    fn p(&self, n: usize) -> Result<f64, Failure> {
        match (self.p, self.alpha) {
            (Some(p), _) => Ok(p),
            (None, Some(a)) => Ok((n as f64).powf(-a)),
            (None, None) => Err(invalid("one of --p or --alpha is required")),
        }
    }

    fn k(&self, n: usize, p: f64) -> Result<u32, Failure> {
        match self.k {
            Some(k) => Ok(k),
            None => regime_from(n, p, self.delta).map(|r| r.k).map_err(invalid),
        }
    }

    /// Hidden graph from `file`, or sampled at `(n, p, seed)`; with the `p` to plan for.
    fn hidden(&self, file: &Option<PathBuf>) -> Result<(Graph, f64), Failure> {
        match file {
            Some(path) => {
                let g = read_edge_list(BufReader::new(File::open(path).map_err(invalid)?)).map_err(invalid)?;
                let n = g.n();
                let p = match (self.p, self.alpha) {
                    (None, None) if n >= 2 => g.m() as f64 / (n as f64 * (n as f64 - 1.0) / 2.0),
                    _ => self.p(n)?,
                };
                Ok((g, p))
            }
            None => {
                let n = self.n()?;
                let p = self.p(n)?;
                let params = GnpParams::new(n, p, self.seed).map_err(invalid)?;
                Ok((sample_gnp(&params), p))
            }
        }
    }
}

fn read_ledger(path: &PathBuf, n: usize) -> Result<QueryLedger, Failure> {
    QueryLedger::read_csv(n, BufReader::new(File::open(path).map_err(invalid)?)).map_err(invalid)
}

fn gen(args: GenArgs) -> Outcome {
    let (g, _) = args.point.hidden(&None)?;
    let mut w = sink(&args.out)?;
    write_edge_list(&g, &mut w).map_err(invalid)?;
    w.flush().map_err(invalid)
}

fn reconstruct(args: ReconArgs, adaptive: bool) -> Outcome {
    let (hidden, p) = args.point.hidden(&args.graph)?;
    let n = hidden.n();
    let k = args.point.k(n, p)?;
    let seed = algorithm_seed(args.point.seed);
    let mut oracle = DistanceOracle::new(hidden.clone());
    let report = if adaptive {
        let schedule = match args.landmarks {
            Landmarks::Upfront => build_schedule(n, p, k, args.c, args.m, seed),
            Landmarks::Incremental => build_incremental_schedule(n, p, k, args.c, args.m, seed),
        }
        .map_err(invalid)?;
        adaptive_reconstruct(&mut oracle, &schedule).map_err(invalid)?
    } else {
        let plan = nonadaptive_queryset(n, p, k, args.c_scale, seed).map_err(invalid)?;
        if plan.clamped {
            eprintln!("warning: landmark count {:.0} clamped to {}", plan.formula_size, plan.landmarks.len());
        }
        nonadaptive_reconstruct(&mut oracle, &plan, k).map_err(invalid)?
    };
    emit(&args.out, &report.to_json())?;
    if let (Some(path), Some(g)) = (&args.edges_out, &report.graph) {
        let mut w = BufWriter::new(File::create(path).map_err(invalid)?);
        write_edge_list(g, &mut w).map_err(invalid)?;
        w.flush().map_err(invalid)?;
    }
    if let Some(path) = &args.ledger_out {
        let mut w = BufWriter::new(File::create(path).map_err(invalid)?);
        oracle.ledger().write_csv(&mut w).map_err(invalid)?;
        w.flush().map_err(invalid)?;
    }
    let verdict = reconstruction_status(&report, &hidden);
    eprintln!("{verdict}: {} queries of {} pairs", report.queries_used, n * (n - 1) / 2);
    match (report.status, verdict) {
        (Status::Success, "success") => Ok(()),
        _ => Err(Failure::Outcome(verdict.to_string())),
    }
}

fn certify(args: CertifyArgs) -> Outcome {
    let (g, p) = args.point.hidden(&args.graph)?;
    let n = g.n();
    let k = args.point.k(n, p)?;
    let ledger = match &args.ledger {
        Some(path) => read_ledger(path, n)?,
        None => {
            let count = match args.queries {
                Some(q) => q,
                None => (bounds_table(n, p, k, 16.0, args.eps).map_err(invalid)?.adaptive_lower / 2.0).floor() as usize,
            };
            let pairs = random_pairs(n, count, algorithm_seed(args.point.seed));
            QueryLedger::from_graph(&g, pairs).map_err(invalid)?
        }
    };
    let found = if args.exhaustive {
        find_undetectable_exhaustive(&g, &ledger, k).map_err(invalid)?
    } else {
        let mut options = RandomizedOptions::new(n, k);
        options.extend = args.extend;
        options.budget_n = Some(ledger.len().max(1) as f64);
        if let Some(t) = args.tau {
            options.tau = t;
        }
        find_undetectable_randomized(&g, &ledger, k, options, algorithm_seed(args.point.seed ^ 1))
            .map_err(invalid)?
            .certificate
    };
    if let Ok(lb) = deterministic_lower_bound(&g, args.eps) {
        eprintln!("|Q| = {}, deterministic lower bound ceiling {}", ledger.len(), lb.ceiling);
    }
    match found {
        Some(c) => emit(&args.out, &c.to_json()),
        None => {
            emit(&args.out, "null")?;
            Err(Failure::Outcome("no certificate found".into()))
        }
    }
}

fn bruteforce(args: BruteArgs) -> Outcome {
    let (g, _) = args.point.hidden(&args.graph)?;
    let n = g.n();
    let ledger = match &args.ledger {
        Some(path) => read_ledger(path, n)?,
        None => {
            let count = (args.query_fraction * (n * (n.max(1) - 1) / 2) as f64).floor() as usize;
            QueryLedger::from_graph(&g, random_pairs(n, count, algorithm_seed(args.point.seed))).map_err(invalid)?
        }
    };
    match bruteforce_is_reconstructible(&g, &ledger).map_err(invalid)? {
        Reconstructibility::Unique => emit(&None, r#"{"result": "unique"}"#),
        Reconstructibility::Ambiguous(w) => {
            let edges: Vec<(usize, usize)> = w.edges().collect();
            let json = serde_json::json!({ "result": "ambiguous", "witness_edges": edges });
            emit(&None, &json.to_string())?;
            Err(Failure::Outcome("ambiguous".into()))
        }
    }
}

fn bounds(args: BoundsArgs) -> Outcome {
    let n = args.point.n()?;
    let p = args.point.p(n)?;
    let regime = regime_from(n, p, args.point.delta);
    let k = match (args.point.k, &regime) {
        (Some(k), _) => k,
        (None, Ok(r)) => r.k,
        (None, Err(e)) => return Err(invalid(e)),
    };
    let table = bounds_table(n, p, k, args.c, args.eps).map_err(invalid)?;
    let json = serde_json::json!({
        "n": n,
        "p": p,
        "alpha": alpha_of(n, p),
        "k": k,
        "boundary_flag": regime.as_ref().map(|r| r.boundary_flag).unwrap_or(false),
        "bounds": table,
    });
    emit(&None, &serde_json::to_string_pretty(&json).map_err(invalid)?)
}

fn sweep(args: SweepArgs) -> Outcome {
    let p_rule = match (args.p, args.alpha) {
        (Some(p), _) => PRule::Fixed(p),
        (None, Some(a)) => PRule::Alpha(a),
        (None, None) => return Err(invalid("one of --p or --alpha is required")),
    };
    let spec = ExperimentSpec {
        mode: match args.mode {
            SweepMode::Adaptive => Mode::Adaptive,
            SweepMode::Nonadaptive => Mode::Nonadaptive,
            SweepMode::Certify => Mode::Certify,
            SweepMode::Bruteforce => Mode::Bruteforce,
            SweepMode::Bounds => Mode::Bounds,
        },
        n_list: args.n,
        p_rule,
        trials: args.trials,
        base_seed: args.seed,
        constants: Constants {
            m: args.m,
            c: args.c,
            c_scale: args.c_scale,
            eps: args.eps,
            tau: args.tau,
            extend: args.extend,
            delta: args.delta,
            k_override: args.k,
            activation: match args.landmarks {
                Landmarks::Upfront => Activation::Upfront,
                Landmarks::Incremental => Activation::Incremental,
            },
            query_fraction: args.query_fraction,
        },
    };
    let records = run_sweep(&spec).map_err(invalid)?;
    let format = match args.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let mut w = sink(&args.out)?;
    write_records(&records, format, &mut w).map_err(invalid)?;
    w.flush().map_err(invalid)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Adaptive(a) => reconstruct(a, true),
        Command::Nonadaptive(a) => reconstruct(a, false),
        Command::Certify(a) => certify(a),
        Command::Bruteforce(a) => bruteforce(a),
        Command::Bounds(a) => bounds(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Outcome(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
