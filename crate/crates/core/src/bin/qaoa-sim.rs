use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qaoa_sim::bench::{
    self, parse_backends, parse_list, BenchError, Command, GenSpec, GraphSource, OutputFormat,
    RunConfig,
};
use qaoa_sim::{BatchWidth, InitStrategy, Popcount};

#[derive(Parser)]
#[command(
    name = "qaoa-sim",
    version,
    about = "QAOA max-cut state-vector simulator and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one circuit and report timings and the expected cut.
    Simulate(Common),
    /// Time every backend per qubit count and report speedups over baseline.
    Compare(Common),
    /// Time the circuit over a range of level counts.
    SweepP(Common),
    /// Tune the circuit angles to maximize the expected cut.
    Optimize(Common),
    /// Write a generated graph as an edge list.
    Gen {
        /// u3r:n=N,seed=S | w3r:n=N,seed=S | complete:n=N | cycle:n=N
        spec: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum PopcountArg {
    Native,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    LinearRamp,
    Random,
}

#[derive(Args)]
struct Common {
    /// Edge-list file.
    #[arg(long, conflicts_with = "gen")]
    graph: Option<PathBuf>,
    /// Generator spec, e.g. u3r:n=10,seed=3.
    #[arg(long)]
    gen: Option<String>,
    /// Qubit count, list or inclusive range (10..14); overrides the generator size.
    #[arg(long)]
    qubits: Option<String>,
    /// Level count, list or range.
    #[arg(long, default_value = "5")]
    p: String,
    /// baseline, compressed, bitwise, or a comma-separated list.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    /// Strip width for the bitwise kernel.
    #[arg(long, value_parser = ["1", "2", "4", "8"], default_value = "8")]
    batch_width: String,
    #[arg(long, value_enum, default_value = "native")]
    popcount: PopcountArg,
    #[arg(long, value_enum, default_value = "on")]
    launch_control: OnOff,
    /// Objective evaluations for optimize.
    #[arg(long, default_value_t = 500)]
    budget: usize,
    #[arg(long, value_enum, default_value = "linear-ramp")]
    init: InitArg,
    /// Require the approximation ratio (fails above the brute-force guard).
    #[arg(long)]
    ratio: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Untimed runs before measuring.
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn into_config(self, command: Command) -> Result<(RunConfig, Option<PathBuf>), BenchError> {
        let mut cfg = RunConfig::new(command);
        cfg.source = match (self.graph, self.gen) {
            (Some(path), _) => Some(GraphSource::File(path)),
            (None, Some(spec)) => Some(GraphSource::Gen(spec.parse()?)),
            (None, None) => None,
        };
        if let Some(q) = &self.qubits {
            cfg.qubits = parse_list(q)?;
        }
        cfg.p = parse_list(&self.p)?;
        if let Some(b) = &self.backend {
            cfg.backends = parse_backends(b)?;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        cfg.batch_width = self
            .batch_width
            .parse::<BatchWidth>()
            .map_err(|e| BenchError::Usage(e.to_string()))?;
        cfg.popcount = match self.popcount {
            PopcountArg::Native => Popcount::Native,
            PopcountArg::Table => Popcount::Table,
        };
        cfg.launch_control = matches!(self.launch_control, OnOff::On);
        cfg.budget = self.budget;
        cfg.init = match self.init {
            InitArg::LinearRamp => InitStrategy::LinearRamp,
            InitArg::Random => InitStrategy::Random,
        };
        cfg.ratio = self.ratio;
        cfg.seed = self.seed;
        cfg.format = match self.format {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        };
        cfg.reps = self.reps;
        cfg.warmup = self.warmup;
        Ok((cfg, self.out))
    }
}

fn write_out(text: &str, out: Option<PathBuf>) -> Result<(), BenchError> {
    match out {
        Some(path) => std::fs::write(&path, text).map_err(|source| BenchError::Io { path, source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    let (common, command) = match cli.command {
        Cmd::Gen { spec, out } => {
            let g = bench::cmd_gen(&spec.parse::<GenSpec>()?)?;
            return write_out(&g.to_edge_list(), out);
        }
        Cmd::Simulate(c) => (c, Command::Simulate),
        Cmd::Compare(c) => (c, Command::Compare),
        Cmd::SweepP(c) => (c, Command::SweepP),
        Cmd::Optimize(c) => (c, Command::Optimize),
    };
    let (cfg, out) = common.into_config(command)?;
    let output = bench::execute(&cfg)?;
    write_out(&bench::render(&output, cfg.format), out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ BenchError::Usage(_)) => {
            eprintln!("qaoa-sim: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("qaoa-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
