//! State-vector simulation of QAOA for max-cut.
//!
//! The cost layer can be run three ways: one RZZ gate per edge
//! ([`BackendKind::Baseline`]), a single pass accumulating each amplitude's
//! total rotation ([`BackendKind::Compressed`]), or a single pass counting cut
//! edges with popcounts over per-node adjacency masks
//! ([`BackendKind::Bitwise`], unweighted graphs only). All three produce the
//! same state, including global phase.

pub mod bench;
pub mod circuit;
pub mod cost;
pub mod graph;
pub mod optimizer;
pub mod state;
pub mod trig;

pub use circuit::{
    expectation, gate_counts, init_uniform, sample, simulate, BackendKind, CircuitError,
    GateCounts, LayerProfile, QaoaParams, Simulator,
};
pub use cost::{BatchWidth, CostError, CostPlan, Popcount, DEFAULT_BATCH_WIDTH};
pub use graph::{Cut, Edge, Graph, GraphError};
pub use optimizer::{
    approximation_ratio, optimize, InitStrategy, OptimizeError, OptimizeReport, Optimizer,
};
pub use state::{Exec, StateError, StateVector};
