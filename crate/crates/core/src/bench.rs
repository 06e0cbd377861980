//! Benchmark commands behind the `qaoa-sim` binary.
//!
//! Every command returns typed rows; [`render`] turns them into JSON lines
//! (canonical) or CSV with a fixed column order.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{expectation, BackendKind, CircuitError, LayerProfile, QaoaParams, Simulator};
use crate::cost::{BatchWidth, Popcount, DEFAULT_BATCH_WIDTH};
use crate::graph::{Graph, GraphError, DEFAULT_BRUTE_FORCE_LIMIT};
use crate::optimizer::{
    approximation_ratio, InitStrategy, OptimizeError, OptimizeReport, Optimizer,
};
use crate::state::StateVector;

/// Largest componentwise amplitude difference accepted between backends.
pub const EQUIVALENCE_TOL: f64 = 1e-10;

/// Column order of CSV output for [`BenchRecord`].
pub const RECORD_COLUMNS: [&str; 12] = [
    "qubits",
    "p",
    "backend",
    "threads",
    "batch_width",
    "init_time_ns",
    "cost_time_ns",
    "mixer_time_ns",
    "total_time_ns",
    "expectation",
    "approx_ratio",
    "seed",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(
        "backend {backend} diverges from baseline at {qubits} qubits (max |diff| = {diff:e}); \
         refusing to report speedups"
    )]
    NotEquivalent {
        qubits: usize,
        backend: BackendKind,
        diff: f64,
    },
    #[error("could not build a thread pool: {0}")]
    ThreadPool(String),
}

fn usage(msg: impl Into<String>) -> BenchError {
    BenchError::Usage(msg.into())
}

/// One timing / quality measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub qubits: usize,
    pub p: usize,
    pub backend: BackendKind,
    pub threads: usize,
    /// Strip width of the bitwise kernel; 0 for the other backends.
    pub batch_width: usize,
    pub init_time_ns: u64,
    pub cost_time_ns: u64,
    pub mixer_time_ns: u64,
    pub total_time_ns: u64,
    pub expectation: Option<f64>,
    pub approx_ratio: Option<f64>,
    pub seed: u64,
}

/// A [`BenchRecord`] with its total time relative to the sweep's reference run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    #[serde(flatten)]
    pub record: BenchRecord,
    pub normalized_time: f64,
}

/// One backend at one qubit count, measured against baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub qubits: usize,
    pub edges: usize,
    pub p: usize,
    pub backend: BackendKind,
    pub threads: usize,
    pub cost_time_ns: u64,
    pub total_time_ns: u64,
    pub cost_speedup: f64,
    pub total_speedup: f64,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    U3r,
    W3r,
    Complete,
    Cycle,
}

/// Graph generator spec such as `u3r:n=10,seed=3` or `complete:n=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSpec {
    pub kind: GenKind,
    pub n: Option<usize>,
    pub seed: u64,
}

impl GenSpec {
    pub fn weighted(&self) -> bool {
        self.kind == GenKind::W3r
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn build(&self) -> Result<Graph, BenchError> {
        let n = self
            .n
            .ok_or_else(|| usage("generator spec needs n=<nodes> (or pass --qubits)"))?;
        Ok(match self.kind {
            GenKind::U3r => Graph::random_regular(n, 3, false, self.seed)?,
            GenKind::W3r => Graph::random_regular(n, 3, true, self.seed)?,
            GenKind::Complete => Graph::complete(n)?,
            GenKind::Cycle => Graph::cycle(n)?,
        })
    }
}

impl FromStr for GenSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let kind = match name.trim().to_ascii_lowercase().as_str() {
            "u3r" => GenKind::U3r,
            "w3r" => GenKind::W3r,
            "complete" => GenKind::Complete,
            "cycle" => GenKind::Cycle,
            other => {
                return Err(usage(format!(
                    "unknown generator {other:?}; expected u3r, w3r, complete or cycle"
                )))
            }
        };
        let mut spec = GenSpec {
            kind,
            n: None,
            seed: 0,
        };
        for kv in rest.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (key, value) = kv.split_once('=').ok_or_else(|| {
                usage(format!("expected key=value in generator spec, got {kv:?}"))
            })?;
            let bad = || usage(format!("invalid value {value:?} for {key}"));
            match key.trim() {
                "n" => spec.n = Some(value.trim().parse().map_err(|_| bad())?),
                "seed" => spec.seed = value.trim().parse().map_err(|_| bad())?,
                other => return Err(usage(format!("unknown generator parameter {other:?}"))),
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSource {
    File(PathBuf),
    Gen(GenSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(usage(format!(
                "unknown format {other:?}; expected json or csv"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Compare,
    SweepP,
    Optimize,
}

/// Fully resolved options shared by the commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub source: Option<GraphSource>,
    pub qubits: Vec<usize>,
    pub p: Vec<usize>,
    /// Empty means every backend the graph supports.
    pub backends: Vec<BackendKind>,
    pub threads: usize,
    pub batch_width: BatchWidth,
    pub popcount: Popcount,
    pub launch_control: bool,
    pub budget: usize,
    pub init: InitStrategy,
    pub ratio: bool,
    pub seed: u64,
    pub format: OutputFormat,
    pub reps: usize,
    pub warmup: usize,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            source: None,
            qubits: Vec::new(),
            p: vec![5],
            backends: Vec::new(),
            threads: default_threads(),
            batch_width: DEFAULT_BATCH_WIDTH,
            popcount: Popcount::Native,
            launch_control: true,
            budget: 500,
            init: InitStrategy::LinearRamp,
            ratio: false,
            seed: 0,
            format: OutputFormat::Json,
            reps: 1,
            warmup: 1,
        }
    }

    fn simulator(&self, backend: BackendKind) -> Simulator {
        Simulator::new(backend)
            .launch_control(self.launch_control)
            .batch_width(Some(self.batch_width))
            .popcount(self.popcount)
    }

    fn batch_width_for(&self, backend: BackendKind) -> usize {
        match backend {
            BackendKind::Bitwise => self.batch_width.lanes(),
            _ => 0,
        }
    }

    /// Loads or generates the graph, overriding the generator size with `n`.
    fn graph(&self, n: Option<usize>) -> Result<Graph, BenchError> {
        let source = self
            .source
            .as_ref()
            .ok_or_else(|| usage("a graph is required: pass --graph PATH or --gen SPEC"))?;
        match source {
            GraphSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
                    path: path.clone(),
                    source,
                })?;
                let g = Graph::parse_edge_list(&text)?;
                if let Some(n) = n.filter(|&n| n != g.n()) {
                    return Err(usage(format!(
                        "--qubits {n} conflicts with the {} nodes of {}",
                        g.n(),
                        path.display()
                    )));
                }
                Ok(g)
            }
            GraphSource::Gen(spec) => match n {
                Some(n) => spec.with_n(n).build(),
                None => spec.build(),
            },
        }
    }

    fn single_qubits(&self) -> Result<Option<usize>, BenchError> {
        match self.qubits.as_slice() {
            [] => Ok(None),
            [n] => Ok(Some(*n)),
            _ => Err(usage("this command takes a single --qubits value")),
        }
    }

    fn single_p(&self) -> Result<usize, BenchError> {
        match self.p.as_slice() {
            [p] if *p >= 1 => Ok(*p),
            [_] => Err(usage("--p must be at least 1")),
            _ => Err(usage("this command takes a single --p value")),
        }
    }

    /// Requested backends, checked against the graph.
    fn backends_for(&self, g: &Graph) -> Result<Vec<BackendKind>, BenchError> {
        if self.backends.is_empty() {
            return Ok(BackendKind::ALL
                .into_iter()
                .filter(|b| b.supports(g))
                .collect());
        }
        if let Some(b) = self.backends.iter().find(|b| !b.supports(g)) {
            return Err(usage(format!(
                "backend {b} needs an unweighted graph, but this graph has weights"
            )));
        }
        Ok(self.backends.clone())
    }
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Parses `5`, `1,5,10`, `10..14` or `10-14` (ranges inclusive).
pub fn parse_list(s: &str) -> Result<Vec<usize>, BenchError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || usage(format!("invalid number or range {part:?}"));
        let range = part.split_once("..").or_else(|| part.split_once('-'));
        match range {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b
                    .trim()
                    .trim_start_matches('=')
                    .parse()
                    .map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(usage(format!("empty list {s:?}")));
    }
    Ok(out)
}

pub fn parse_backends(s: &str) -> Result<Vec<BackendKind>, BenchError> {
    s.split(',')
        .map(str::trim)
        .filter(|b| !b.is_empty())
        .map(|b| b.parse::<BackendKind>().map_err(BenchError::from))
        .collect()
}

fn median(mut xs: Vec<u64>) -> u64 {
    xs.sort_unstable();
    xs[xs.len() / 2]
}

fn timed_runs(
    sim: &Simulator,
    g: &Graph,
    params: &QaoaParams,
    warmup: usize,
    reps: usize,
) -> Result<(StateVector, Vec<LayerProfile>), BenchError> {
    for _ in 0..warmup {
        sim.run(g, params)?;
    }
    let mut profiles = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps.max(1) {
        let (state, profile) = sim.run_profiled(g, params)?;
        profiles.push(profile);
        last = Some(state);
    }
    Ok((last.expect("at least one repetition"), profiles))
}

fn median_profile(profiles: &[LayerProfile]) -> LayerProfile {
    let pick = |f: fn(&LayerProfile) -> u64| median(profiles.iter().map(f).collect());
    LayerProfile {
        init_ns: pick(|p| p.init_ns),
        cost_ns: pick(|p| p.cost_ns),
        mixer_ns: pick(|p| p.mixer_ns),
        total_ns: pick(|p| p.total_ns),
        ..profiles[0].clone()
    }
}

/// Runs the circuit `reps` times on one graph and emits one record per run.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<BenchRecord>, BenchError> {
    let g = cfg.graph(cfg.single_qubits()?)?;
    let p = cfg.single_p()?;
    let backend = match cfg.backends.as_slice() {
        [] => BackendKind::Compressed,
        [b] => *b,
        _ => return Err(usage("simulate takes a single --backend")),
    };
    if !backend.supports(&g) {
        return Err(usage(format!(
            "backend {backend} needs an unweighted graph; the selected graph has weights"
        )));
    }
    let params = QaoaParams::random(p, cfg.seed)?;
    let sim = cfg.simulator(backend);
    let (state, profiles) = timed_runs(&sim, &g, &params, cfg.warmup, cfg.reps)?;
    let exp = expectation(&g, &state)?;
    let ratio = if g.n() <= DEFAULT_BRUTE_FORCE_LIMIT {
        Some(approximation_ratio(&g, exp)?)
    } else {
        None
    };
    Ok(profiles
        .into_iter()
        .map(|prof| BenchRecord {
            qubits: g.n(),
            p,
            backend,
            threads: rayon::current_num_threads(),
            batch_width: cfg.batch_width_for(backend),
            init_time_ns: prof.init_ns,
            cost_time_ns: prof.cost_ns,
            mixer_time_ns: prof.mixer_ns,
            total_time_ns: prof.total_ns,
            expectation: Some(exp),
            approx_ratio: ratio,
            seed: cfg.seed,
        })
        .collect())
}

/// Times every backend on the same graph and angles for each qubit count,
/// checking state equivalence against baseline before reporting speedups.
pub fn cmd_compare(cfg: &RunConfig) -> Result<Vec<CompareRow>, BenchError> {
    let p = cfg.single_p()?;
    let sizes: Vec<Option<usize>> = if cfg.qubits.is_empty() {
        vec![None]
    } else {
        cfg.qubits.iter().copied().map(Some).collect()
    };
    let params = QaoaParams::random(p, cfg.seed)?;
    let mut rows = Vec::new();
    for n in sizes {
        let g = cfg.graph(n)?;
        let mut backends = cfg.backends_for(&g)?;
        backends.retain(|&b| b != BackendKind::Baseline);
        backends.insert(0, BackendKind::Baseline);

        let mut measured = Vec::with_capacity(backends.len());
        for &backend in &backends {
            let (state, profiles) =
                timed_runs(&cfg.simulator(backend), &g, &params, cfg.warmup, cfg.reps)?;
            measured.push((backend, state, median_profile(&profiles)));
        }
        let reference = &measured[0].1;
        let mut diffs = Vec::with_capacity(measured.len());
        for (backend, state, _) in &measured {
            let diff = reference.max_abs_diff(state).map_err(CircuitError::from)?;
            if diff > EQUIVALENCE_TOL {
                return Err(BenchError::NotEquivalent {
                    qubits: g.n(),
                    backend: *backend,
                    diff,
                });
            }
            diffs.push(diff);
        }
        let base = &measured[0].2;
        for ((backend, _, prof), diff) in measured.iter().zip(diffs) {
            rows.push(CompareRow {
                qubits: g.n(),
                edges: g.edge_count(),
                p,
                backend: *backend,
                threads: rayon::current_num_threads(),
                cost_time_ns: prof.cost_ns,
                total_time_ns: prof.total_ns,
                cost_speedup: ratio_of(base.cost_ns, prof.cost_ns),
                total_speedup: ratio_of(base.total_ns, prof.total_ns),
                max_abs_diff: diff,
            });
        }
    }
    Ok(rows)
}

fn ratio_of(num: u64, den: u64) -> f64 {
    num as f64 / den.max(1) as f64
}

/// Median timings per level count and backend, normalized to the smallest
/// level count on the first backend (baseline when requested).
pub fn cmd_sweep_p(cfg: &RunConfig) -> Result<Vec<SweepRecord>, BenchError> {
    let g = cfg.graph(cfg.single_qubits()?)?;
    let mut backends = cfg.backends_for(&g)?;
    if let Some(pos) = backends.iter().position(|&b| b == BackendKind::Baseline) {
        backends.swap(0, pos);
    }
    let mut levels = cfg.p.clone();
    levels.sort_unstable();
    levels.dedup();
    if levels.first() == Some(&0) {
        return Err(usage("--p values must be at least 1"));
    }
    let mut records = Vec::new();
    for &p in &levels {
        let params = QaoaParams::random(p, cfg.seed)?;
        for &backend in &backends {
            let (_, profiles) =
                timed_runs(&cfg.simulator(backend), &g, &params, cfg.warmup, cfg.reps)?;
            let prof = median_profile(&profiles);
            records.push(BenchRecord {
                qubits: g.n(),
                p,
                backend,
                threads: rayon::current_num_threads(),
                batch_width: cfg.batch_width_for(backend),
                init_time_ns: prof.init_ns,
                cost_time_ns: prof.cost_ns,
                mixer_time_ns: prof.mixer_ns,
                total_time_ns: prof.total_ns,
                expectation: None,
                approx_ratio: None,
                seed: cfg.seed,
            });
        }
    }
    let reference = records[0].total_time_ns;
    Ok(records
        .into_iter()
        .map(|record| SweepRecord {
            normalized_time: ratio_of(record.total_time_ns, reference),
            record,
        })
        .collect())
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<OptimizeReport, BenchError> {
    let g = cfg.graph(cfg.single_qubits()?)?;
    let p = cfg.single_p()?;
    if cfg.ratio && g.n() > DEFAULT_BRUTE_FORCE_LIMIT {
        return Err(OptimizeError::RatioUnavailable {
            n: g.n(),
            limit: DEFAULT_BRUTE_FORCE_LIMIT,
        }
        .into());
    }
    let backend = match cfg.backends.as_slice() {
        [] if g.is_unweighted() => BackendKind::Bitwise,
        [] => BackendKind::Compressed,
        [b] => *b,
        _ => return Err(usage("optimize takes a single --backend")),
    };
    if !backend.supports(&g) {
        return Err(usage(format!(
            "backend {backend} needs an unweighted graph"
        )));
    }
    Ok(Optimizer::new(backend, p)
        .simulator(cfg.simulator(backend))
        .budget(cfg.budget)
        .seed(cfg.seed)
        .init(cfg.init)
        .run(&g)?)
}

pub fn cmd_gen(spec: &GenSpec) -> Result<Graph, BenchError> {
    spec.build()
}

/// Serializable command output.
pub enum Output {
    Records(Vec<BenchRecord>),
    Sweep(Vec<SweepRecord>),
    Compare(Vec<CompareRow>),
    Report(OptimizeReport),
}

/// Runs a command on a dedicated pool of `cfg.threads` workers.
pub fn execute(cfg: &RunConfig) -> Result<Output, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| BenchError::ThreadPool(e.to_string()))?;
    pool.install(|| match cfg.command {
        Command::Simulate => cmd_simulate(cfg).map(Output::Records),
        Command::Compare => cmd_compare(cfg).map(Output::Compare),
        Command::SweepP => cmd_sweep_p(cfg).map(Output::Sweep),
        Command::Optimize => cmd_optimize(cfg).map(Output::Report),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn record_csv_fields(r: &BenchRecord) -> Vec<String> {
    vec![
        r.qubits.to_string(),
        r.p.to_string(),
        r.backend.to_string(),
        r.threads.to_string(),
        r.batch_width.to_string(),
        r.init_time_ns.to_string(),
        r.cost_time_ns.to_string(),
        r.mixer_time_ns.to_string(),
        r.total_time_ns.to_string(),
        opt(r.expectation),
        opt(r.approx_ratio),
        r.seed.to_string(),
    ]
}

fn json_lines<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("rows serialize"));
        out.push('\n');
    }
    out
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn render(output: &Output, format: OutputFormat) -> String {
    match (output, format) {
        (Output::Records(r), OutputFormat::Json) => json_lines(r),
        (Output::Sweep(r), OutputFormat::Json) => json_lines(r),
        (Output::Compare(r), OutputFormat::Json) => json_lines(r),
        (Output::Report(r), OutputFormat::Json) => {
            let mut s = serde_json::to_string(r).expect("report serializes");
            s.push('\n');
            s
        }
        (Output::Records(r), OutputFormat::Csv) => {
            csv(&RECORD_COLUMNS, r.iter().map(record_csv_fields))
        }
        (Output::Sweep(r), OutputFormat::Csv) => {
            let mut header = RECORD_COLUMNS.to_vec();
            header.push("normalized_time");
            csv(
                &header,
                r.iter().map(|s| {
                    let mut row = record_csv_fields(&s.record);
                    row.push(s.normalized_time.to_string());
                    row
                }),
            )
        }
        (Output::Compare(r), OutputFormat::Csv) => csv(
            &[
                "qubits",
                "edges",
                "p",
                "backend",
                "threads",
                "cost_time_ns",
                "total_time_ns",
                "cost_speedup",
                "total_speedup",
                "max_abs_diff",
            ],
            r.iter().map(|c| {
                vec![
                    c.qubits.to_string(),
                    c.edges.to_string(),
                    c.p.to_string(),
                    c.backend.to_string(),
                    c.threads.to_string(),
                    c.cost_time_ns.to_string(),
                    c.total_time_ns.to_string(),
                    format!("{:.3}", c.cost_speedup),
                    format!("{:.3}", c.total_speedup),
                    format!("{:e}", c.max_abs_diff),
                ]
            }),
        ),
        (Output::Report(r), OutputFormat::Csv) => {
            // CSV is lossy here: only the evaluation trace.
            let mut out = String::from("evaluation,expectation\n");
            for h in &r.history {
                let _ = writeln!(out, "{},{}", h.evaluation, h.expectation);
            }
            out
        }
    }
}
