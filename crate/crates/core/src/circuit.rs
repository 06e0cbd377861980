//! p-level QAOA circuits for max-cut.
//!
//! A run prepares the uniform superposition (either by N Hadamard gates or
//! by writing the amplitudes directly), then for each level applies the cost
//! layer `exp(-i gamma_k C)` and the mixer `prod_q RX(2 beta_k)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{BatchWidth, CostError, CostPlan, Popcount, DEFAULT_BATCH_WIDTH};
use crate::graph::{Graph, GraphError};
use crate::state::{Exec, StateError, StateVector, DEFAULT_MAX_QUBITS, PAR_BLOCK};

pub const GAMMA_PERIOD: f64 = 2.0 * PI;
pub const BETA_PERIOD: f64 = PI;

/// Norm deviation tolerated by [`sample`].
const SAMPLE_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("invalid QAOA parameters: {0}")]
    InvalidParams(String),
    #[error("the bitwise backend needs an unweighted graph; use baseline or compressed")]
    BitwiseOnWeighted,
    #[error("state has {state} qubits but the graph has {graph} nodes")]
    SizeMismatch { state: usize, graph: usize },
    #[error("at least one shot is required")]
    NoShots,
    #[error("state is not normalized (norm^2 = {0})")]
    Unnormalized(f64),
    #[error("unknown backend {0:?}; expected baseline, compressed or bitwise")]
    UnknownBackend(String),
}

/// Angles of a p-level circuit: `gamma` in `[0, 2pi)`, `beta` in `[0, pi)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaoaParams {
    p: usize,
    gamma: Vec<f64>,
    beta: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gamma: Vec<f64>, beta: Vec<f64>) -> Result<Self, CircuitError> {
        if gamma.len() != beta.len() {
            return Err(CircuitError::InvalidParams(format!(
                "{} gamma angles but {} beta angles",
                gamma.len(),
                beta.len()
            )));
        }
        if gamma.is_empty() {
            return Err(CircuitError::InvalidParams(
                "at least one level is required".into(),
            ));
        }
        if let Some(g) = gamma.iter().find(|g| !(0.0..GAMMA_PERIOD).contains(*g)) {
            return Err(CircuitError::InvalidParams(format!(
                "gamma {g} outside [0, 2pi)"
            )));
        }
        if let Some(b) = beta.iter().find(|b| !(0.0..BETA_PERIOD).contains(*b)) {
            return Err(CircuitError::InvalidParams(format!(
                "beta {b} outside [0, pi)"
            )));
        }
        Ok(Self {
            p: gamma.len(),
            gamma,
            beta,
        })
    }

    /// Like [`QaoaParams::new`] but first wraps every angle into its domain.
    pub fn wrapped(gamma: &[f64], beta: &[f64]) -> Result<Self, CircuitError> {
        if let Some(x) = gamma.iter().chain(beta).find(|x| !x.is_finite()) {
            return Err(CircuitError::InvalidParams(format!("non-finite angle {x}")));
        }
        Self::new(
            gamma.iter().map(|&g| wrap(g, GAMMA_PERIOD)).collect(),
            beta.iter().map(|&b| wrap(b, BETA_PERIOD)).collect(),
        )
    }

    /// Uniformly random angles.
    pub fn random(p: usize, seed: u64) -> Result<Self, CircuitError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = (0..p).map(|_| rng.gen_range(0.0..GAMMA_PERIOD)).collect();
        let beta = (0..p).map(|_| rng.gen_range(0.0..BETA_PERIOD)).collect();
        Self::new(gamma, beta)
    }

    /// Annealing-like schedule: gamma rises and beta falls linearly over the levels.
    pub fn linear_ramp(p: usize) -> Result<Self, CircuitError> {
        const GAMMA_MAX: f64 = 0.8;
        const BETA_MAX: f64 = 0.8;
        let frac = |k: usize| (k as f64 + 0.5) / p as f64;
        let gamma = (0..p).map(|k| GAMMA_MAX * frac(k)).collect();
        let beta = (0..p).map(|k| BETA_MAX * (1.0 - frac(k))).collect();
        Self::new(gamma, beta)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

/// Maps `x` into `[0, period)`.
pub fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    // rem_euclid can round up to `period` for tiny negative inputs.
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Cost-layer implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// One RZZ gate per edge.
    Baseline,
    /// Single pass with per-amplitude accumulated rotation.
    Compressed,
    /// Single pass with popcount cut counting; unweighted graphs only.
    Bitwise,
}

impl BackendKind {
    pub const ALL: [BackendKind; 3] = [
        BackendKind::Baseline,
        BackendKind::Compressed,
        BackendKind::Bitwise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Baseline => "baseline",
            BackendKind::Compressed => "compressed",
            BackendKind::Bitwise => "bitwise",
        }
    }

    pub fn supports(self, g: &Graph) -> bool {
        self != BackendKind::Bitwise || g.is_unweighted()
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendKind {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(BackendKind::Baseline),
            "compressed" => Ok(BackendKind::Compressed),
            "bitwise" => Ok(BackendKind::Bitwise),
            other => Err(CircuitError::UnknownBackend(other.to_string())),
        }
    }
}

/// `2^n` amplitudes all equal to `(1/sqrt 2)^n`, written directly.
pub fn init_uniform(n: usize) -> Result<StateVector, StateError> {
    init_uniform_with_limit(n, DEFAULT_MAX_QUBITS)
}

pub fn init_uniform_with_limit(n: usize, max_qubits: usize) -> Result<StateVector, StateError> {
    // Power-of-two scaling keeps this the correctly rounded (1/sqrt 2)^n.
    let halves = 0.5f64.powi((n / 2) as i32);
    let amp = if n.is_multiple_of(2) {
        halves
    } else {
        FRAC_1_SQRT_2 * halves
    };
    StateVector::filled(n, max_qubits, Complex64::new(amp, 0.0))
}

/// Wall-clock split and amplitude-write counts of one simulation.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LayerProfile {
    pub init_ns: u64,
    pub cost_ns: u64,
    pub mixer_ns: u64,
    pub total_ns: u64,
    pub init_writes: u64,
    /// One entry per level.
    pub cost_writes: Vec<u64>,
    pub mixer_writes: u64,
}

/// Configurable QAOA circuit runner.
#[derive(Debug, Clone)]
pub struct Simulator {
    backend: BackendKind,
    launch_control: bool,
    batch_width: Option<BatchWidth>,
    popcount: Popcount,
    max_qubits: usize,
    exec: Option<Exec>,
}

impl Simulator {
    pub fn new(backend: BackendKind) -> Self {
        Self {
            backend,
            launch_control: true,
            batch_width: Some(DEFAULT_BATCH_WIDTH),
            popcount: Popcount::Native,
            max_qubits: DEFAULT_MAX_QUBITS,
            exec: None,
        }
    }

    pub fn launch_control(mut self, on: bool) -> Self {
        self.launch_control = on;
        self
    }

    /// Strip width of the bitwise kernel; `None` selects the one-index-at-a-time
    /// kernel. Ignored by the other backends.
    pub fn batch_width(mut self, width: Option<BatchWidth>) -> Self {
        self.batch_width = width;
        self
    }

    pub fn popcount(mut self, popcount: Popcount) -> Self {
        self.popcount = popcount;
        self
    }

    pub fn max_qubits(mut self, max: usize) -> Self {
        self.max_qubits = max;
        self
    }

    /// Forces sequential or parallel kernels; by default chosen from the size.
    pub fn exec(mut self, exec: Exec) -> Self {
        self.exec = Some(exec);
        self
    }

    pub fn backend(&self) -> BackendKind {
        self.backend
    }

    pub fn run(&self, g: &Graph, params: &QaoaParams) -> Result<StateVector, CircuitError> {
        self.run_profiled(g, params).map(|(s, _)| s)
    }

    pub fn run_profiled(
        &self,
        g: &Graph,
        params: &QaoaParams,
    ) -> Result<(StateVector, LayerProfile), CircuitError> {
        if !self.backend.supports(g) {
            return Err(CircuitError::BitwiseOnWeighted);
        }
        let n = g.n();
        let plan = CostPlan::new(g);
        let mut profile = LayerProfile::default();
        let start = Instant::now();

        let mut state = if self.launch_control {
            let s = init_uniform_with_limit(n, self.max_qubits)?;
            profile.init_writes = s.len() as u64;
            s
        } else {
            let mut s = StateVector::zero_with_limit(n, self.max_qubits)?;
            if let Some(exec) = self.exec {
                s.set_exec(exec);
            }
            for q in 0..n {
                profile.init_writes += s.apply_h(q)?;
            }
            s
        };
        if let Some(exec) = self.exec {
            state.set_exec(exec);
        }
        profile.init_ns = elapsed_ns(start);

        for (&gamma, &beta) in params.gamma.iter().zip(&params.beta) {
            let t = Instant::now();
            let writes = match self.backend {
                BackendKind::Baseline => {
                    let mut w = 0;
                    for e in g.edges() {
                        w += state.apply_rzz(e.i, e.j, e.weight * gamma)?;
                    }
                    w
                }
                BackendKind::Compressed => plan.apply_compressed(&mut state, gamma)?,
                BackendKind::Bitwise => match self.batch_width {
                    Some(width) => plan.apply_batched(&mut state, gamma, width, self.popcount)?,
                    None => plan.apply_bitwise(&mut state, gamma)?,
                },
            };
            profile.cost_writes.push(writes);
            profile.cost_ns += elapsed_ns(t);

            let t = Instant::now();
            for q in 0..n {
                profile.mixer_writes += state.apply_rx(q, 2.0 * beta)?;
            }
            profile.mixer_ns += elapsed_ns(t);
        }
        profile.total_ns = elapsed_ns(start);
        Ok((state, profile))
    }
}

fn elapsed_ns(since: Instant) -> u64 {
    since.elapsed().as_nanos().min(u64::MAX as u128) as u64
}

/// Runs the circuit with default options and the given backend.
pub fn simulate(
    g: &Graph,
    params: &QaoaParams,
    backend: BackendKind,
    launch_control: bool,
) -> Result<StateVector, CircuitError> {
    Simulator::new(backend)
        .launch_control(launch_control)
        .run(g, params)
}

/// Exact expected cut value `sum_b |amp_b|^2 C(b)`.
///
/// Fixed-size blocks are summed sequentially and the block sums combined by a
/// pairwise tree, so the result does not depend on the thread count.
pub fn expectation(g: &Graph, state: &StateVector) -> Result<f64, CircuitError> {
    if state.n() != g.n() {
        return Err(CircuitError::SizeMismatch {
            state: state.n(),
            graph: g.n(),
        });
    }
    let block_sum = |(blk, chunk): (usize, &[Complex64])| {
        let base = blk * PAR_BLOCK;
        chunk
            .iter()
            .enumerate()
            .map(|(k, a)| a.norm_sqr() * g.cut_value((base + k) as u64))
            .sum::<f64>()
    };
    let amps = state.amplitudes();
    let partial: Vec<f64> = match state.exec() {
        Exec::Sequential => amps.chunks(PAR_BLOCK).enumerate().map(block_sum).collect(),
        Exec::Parallel => amps
            .par_chunks(PAR_BLOCK)
            .enumerate()
            .map(block_sum)
            .collect(),
    };
    Ok(pairwise_sum(&partial))
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        len => {
            let (a, b) = xs.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Draws `shots` basis states with probability `|amp_b|^2`.
pub fn sample(state: &StateVector, shots: usize, seed: u64) -> Result<Vec<u64>, CircuitError> {
    if shots == 0 {
        return Err(CircuitError::NoShots);
    }
    let mut cdf = Vec::with_capacity(state.len());
    let mut acc = 0.0;
    for a in state.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    if (acc - 1.0).abs() > SAMPLE_NORM_TOL {
        return Err(CircuitError::Unnormalized(acc));
    }
    let last_nonzero = state
        .amplitudes()
        .iter()
        .rposition(|a| a.norm_sqr() > 0.0)
        .unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..shots)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(last_nonzero) as u64
        })
        .collect())
}

/// Gate totals of a p-level circuit without launch control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GateCounts {
    pub h: usize,
    pub rzz: usize,
    pub rx: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.h + self.rzz + self.rx
    }

    /// Fraction of all gates that are RZZ.
    pub fn rzz_share(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.rzz as f64 / t as f64,
        }
    }
}

pub fn gate_counts(g: &Graph, p: usize) -> GateCounts {
    GateCounts {
        h: g.n(),
        rzz: p * g.edge_count(),
        rx: p * g.n(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::unweighted(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn basis(n: usize, b: usize) -> StateVector {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[b] = Complex64::new(1.0, 0.0);
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(QaoaParams::new(vec![0.1], vec![0.2, 0.3]).is_err());
        assert!(QaoaParams::new(vec![], vec![]).is_err());
        assert!(QaoaParams::new(vec![7.0], vec![0.1]).is_err());
        assert!(QaoaParams::new(vec![0.1], vec![-0.1]).is_err());
        let p = QaoaParams::wrapped(&[-0.5, 7.0], &[4.0, -1e-300]).unwrap();
        assert!((p.gamma()[0] - (2.0 * PI - 0.5)).abs() < 1e-12);
        assert!((p.gamma()[1] - (7.0 - 2.0 * PI)).abs() < 1e-12);
        assert!((p.beta()[0] - (4.0 - PI)).abs() < 1e-12);
        assert!(p.beta()[1] < PI);
    }

    #[test]
    fn linear_ramp_is_monotone() {
        let p = QaoaParams::linear_ramp(5).unwrap();
        assert!(p.gamma().windows(2).all(|w| w[0] < w[1]));
        assert!(p.beta().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn backend_parsing() {
        assert_eq!("Bitwise".parse::<BackendKind>(), Ok(BackendKind::Bitwise));
        assert!("quest".parse::<BackendKind>().is_err());
        assert_eq!(
            serde_json::to_string(&BackendKind::Compressed).unwrap(),
            "\"compressed\""
        );
    }

    #[test]
    fn uniform_init() {
        let s = init_uniform(2).unwrap();
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| *a == Complex64::new(0.5, 0.0)));
        let s = init_uniform(3).unwrap();
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| (a.re - 0.353_553_390_593_273_8).abs() < 1e-15));
        assert!(init_uniform(40).is_err());
    }

    #[test]
    fn zero_angles_leave_uniform_state() {
        let g = triangle();
        let params = QaoaParams::new(vec![0.0], vec![0.0]).unwrap();
        for backend in BackendKind::ALL {
            let s = simulate(&g, &params, backend, true).unwrap();
            assert_eq!(s, init_uniform(3).unwrap());
        }
    }

    #[test]
    fn bitwise_on_weighted_is_rejected() {
        let g = Graph::weighted(2, &[(0, 1, 0.5)]).unwrap();
        let params = QaoaParams::new(vec![0.1], vec![0.1]).unwrap();
        assert_eq!(
            simulate(&g, &params, BackendKind::Bitwise, true),
            Err(CircuitError::BitwiseOnWeighted)
        );
    }

    #[test]
    fn expectation_examples() {
        let g = triangle();
        assert!((expectation(&g, &init_uniform(3).unwrap()).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(expectation(&g, &basis(3, 0)).unwrap(), 0.0);
        let edge = Graph::unweighted(2, &[(0, 1)]).unwrap();
        assert_eq!(expectation(&edge, &basis(2, 0b01)).unwrap(), 1.0);
        assert!(matches!(
            expectation(&edge, &basis(3, 0)),
            Err(CircuitError::SizeMismatch { state: 3, graph: 2 })
        ));
    }

    #[test]
    fn sampling() {
        let s = basis(2, 0b10);
        assert!(sample(&s, 50, 1).unwrap().iter().all(|&b| b == 0b10));
        assert_eq!(sample(&s, 0, 1), Err(CircuitError::NoShots));
        let uneven = StateVector::from_amplitudes(vec![Complex64::new(1.0, 0.0); 2]).unwrap();
        assert!(matches!(
            sample(&uneven, 1, 1),
            Err(CircuitError::Unnormalized(_))
        ));

        let u = init_uniform(1).unwrap();
        let shots = sample(&u, 10_000, 42).unwrap();
        let zeros = shots.iter().filter(|&&b| b == 0).count() as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&zeros), "{zeros}");
        assert_eq!(shots, sample(&u, 10_000, 42).unwrap());
    }

    #[test]
    fn gate_count_examples() {
        let k10 = Graph::complete(10).unwrap();
        let c = gate_counts(&k10, 1);
        assert_eq!(
            c,
            GateCounts {
                h: 10,
                rzz: 45,
                rx: 10
            }
        );
        assert!((c.rzz_share() - 45.0 / 65.0).abs() < 1e-12);
        let k30 = gate_counts(&Graph::complete(30).unwrap(), 1);
        assert_eq!(
            k30,
            GateCounts {
                h: 30,
                rzz: 435,
                rx: 30
            }
        );
        assert!((k30.rzz_share() * 100.0 - 87.9).abs() < 0.1);
        assert_eq!(
            gate_counts(&k10, 0),
            GateCounts {
                h: 10,
                rzz: 0,
                rx: 0
            }
        );
    }

    #[test]
    fn profile_counts_writes() {
        let g = triangle();
        let params = QaoaParams::new(vec![0.3, 0.4], vec![0.1, 0.2]).unwrap();
        let (_, base) = Simulator::new(BackendKind::Baseline)
            .launch_control(false)
            .run_profiled(&g, &params)
            .unwrap();
        assert_eq!(base.init_writes, 3 * 8);
        assert_eq!(base.cost_writes, vec![3 * 8, 3 * 8]);
        assert_eq!(base.mixer_writes, 2 * 3 * 8);
        let (_, comp) = Simulator::new(BackendKind::Compressed)
            .run_profiled(&g, &params)
            .unwrap();
        assert_eq!(comp.init_writes, 8);
        assert_eq!(comp.cost_writes, vec![8, 8]);
    }

    #[test]
    fn pairwise_sum_shapes() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0]), 6.0);
    }
}
