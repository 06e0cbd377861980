//! Classical outer loop: Nelder-Mead over the 2p circuit angles.
//!
//! The search runs in unconstrained coordinates and maps every trial point
//! into `[0, 2pi)^p x [0, pi)^p` before simulating it, so the objective seen
//! by the simplex is the periodic extension of the expected cut value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{
    expectation, BackendKind, CircuitError, QaoaParams, Simulator, BETA_PERIOD, GAMMA_PERIOD,
};
use crate::graph::{Graph, GraphError, DEFAULT_BRUTE_FORCE_LIMIT};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const DEFAULT_STEP: f64 = 0.3;
/// Convergence: spread of objective values and simplex diameter.
const F_TOL: f64 = 1e-12;
const X_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("evaluation budget must be at least 1")]
    ZeroBudget,
    #[error("level count must be at least 1")]
    ZeroLevels,
    #[error(
        "approximation ratio needs the exact optimum, but {n} nodes exceed the brute-force \
         guard of {limit}; skip ratio reporting for this graph"
    )]
    RatioUnavailable { n: usize, limit: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    #[default]
    LinearRamp,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryEntry {
    pub evaluation: usize,
    pub expectation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeReport {
    pub best_params: QaoaParams,
    pub best_expectation: f64,
    /// Every objective evaluation in order.
    pub history: Vec<HistoryEntry>,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx_ratio: Option<f64>,
}

impl OptimizeReport {
    /// Running maximum of the history.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.history
            .iter()
            .scan(f64::NEG_INFINITY, |best, h| {
                *best = best.max(h.expectation);
                Some(*best)
            })
            .collect()
    }
}

/// Maximizes the expected cut of a p-level circuit.
#[derive(Debug, Clone)]
pub struct Optimizer {
    simulator: Simulator,
    p: usize,
    budget: usize,
    seed: u64,
    init: InitStrategy,
    step: f64,
}

impl Optimizer {
    pub fn new(backend: BackendKind, p: usize) -> Self {
        Self {
            simulator: Simulator::new(backend),
            p,
            budget: 500,
            seed: 0,
            init: InitStrategy::LinearRamp,
            step: DEFAULT_STEP,
        }
    }

    pub fn simulator(mut self, simulator: Simulator) -> Self {
        self.simulator = simulator;
        self
    }

    pub fn budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn init(mut self, init: InitStrategy) -> Self {
        self.init = init;
        self
    }

    /// Edge length of the initial simplex, in radians.
    pub fn initial_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn run(&self, g: &Graph) -> Result<OptimizeReport, OptimizeError> {
        if self.budget == 0 {
            return Err(OptimizeError::ZeroBudget);
        }
        if self.p == 0 {
            return Err(OptimizeError::ZeroLevels);
        }
        if !self.simulator.backend().supports(g) {
            return Err(CircuitError::BitwiseOnWeighted.into());
        }
        let p = self.p;
        let start = match self.init {
            InitStrategy::LinearRamp => QaoaParams::linear_ramp(p)?,
            InitStrategy::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let gamma: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..GAMMA_PERIOD)).collect();
                let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..BETA_PERIOD)).collect();
                QaoaParams::new(gamma, beta)?
            }
        };
        let x0: Vec<f64> = start.gamma().iter().chain(start.beta()).copied().collect();

        let mut objective = Objective {
            g,
            simulator: &self.simulator,
            p,
            budget: self.budget,
            history: Vec::new(),
            best: None,
        };
        nelder_mead(&mut objective, x0, self.step)?;

        let (best_expectation, best_params) = objective.best.expect("budget >= 1");
        let approx_ratio = match approximation_ratio(g, best_expectation) {
            Ok(r) => Some(r),
            Err(OptimizeError::RatioUnavailable { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(OptimizeReport {
            best_params,
            best_expectation,
            evaluations: objective.history.len(),
            history: objective.history,
            approx_ratio,
        })
    }
}

/// Convenience wrapper around [`Optimizer`].
pub fn optimize(
    g: &Graph,
    p: usize,
    backend: BackendKind,
    budget: usize,
    seed: u64,
    init: InitStrategy,
) -> Result<OptimizeReport, OptimizeError> {
    Optimizer::new(backend, p)
        .budget(budget)
        .seed(seed)
        .init(init)
        .run(g)
}

/// `expectation / max-cut`, with the optimum found by exhaustive search.
/// A graph without edges has ratio 1.
pub fn approximation_ratio(g: &Graph, expectation: f64) -> Result<f64, OptimizeError> {
    if g.n() > DEFAULT_BRUTE_FORCE_LIMIT {
        return Err(OptimizeError::RatioUnavailable {
            n: g.n(),
            limit: DEFAULT_BRUTE_FORCE_LIMIT,
        });
    }
    let best = g.brute_force_max_cut()?.value;
    if best == 0.0 {
        return Ok(1.0);
    }
    Ok(expectation / best)
}

struct Objective<'a> {
    g: &'a Graph,
    simulator: &'a Simulator,
    p: usize,
    budget: usize,
    history: Vec<HistoryEntry>,
    best: Option<(f64, QaoaParams)>,
}

impl Objective<'_> {
    /// Negated expectation at `x`, or `None` once the budget is spent.
    fn eval(&mut self, x: &[f64]) -> Result<Option<f64>, OptimizeError> {
        if self.history.len() >= self.budget {
            return Ok(None);
        }
        let params = QaoaParams::wrapped(&x[..self.p], &x[self.p..])?;
        let state = self.simulator.run(self.g, &params)?;
        let value = expectation(self.g, &state)?;
        self.history.push(HistoryEntry {
            evaluation: self.history.len(),
            expectation: value,
        });
        if self.best.as_ref().is_none_or(|(b, _)| value > *b) {
            self.best = Some((value, params));
        }
        Ok(Some(-value))
    }
}

/// Minimizes `objective` until convergence or budget exhaustion.
fn nelder_mead(
    objective: &mut Objective<'_>,
    x0: Vec<f64>,
    step: f64,
) -> Result<(), OptimizeError> {
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let Some(f0) = objective.eval(&x0)? else {
        return Ok(());
    };
    simplex.push((x0.clone(), f0));
    for k in 0..dim {
        let mut x = x0.clone();
        x[k] += step;
        let Some(f) = objective.eval(&x)? else {
            return Ok(());
        };
        simplex.push((x, f));
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = simplex[0].1;
        let f_worst = simplex[dim].1;
        let f_second = simplex[dim - 1].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| max_dist(x, &simplex[0].0))
            .fold(0.0, f64::max);
        if (f_worst - f_best).abs() <= F_TOL && diameter <= X_TOL {
            return Ok(());
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].0.clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let Some(fr) = objective.eval(&xr)? else {
            return Ok(());
        };
        if fr < f_best {
            let xe = along(REFLECT * EXPAND);
            let Some(fe) = objective.eval(&xe)? else {
                return Ok(());
            };
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, limit) = if fr < f_worst {
            (along(REFLECT * CONTRACT), fr)
        } else {
            (along(-CONTRACT), f_worst)
        };
        let Some(fc) = objective.eval(&xc)? else {
            return Ok(());
        };
        if fc < limit {
            simplex[dim] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(a, v)| a + SHRINK * (v - a))
                .collect();
            let Some(f) = objective.eval(&x)? else {
                return Ok(());
            };
            *vertex = (x, f);
        }
    }
}

fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
