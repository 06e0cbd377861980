//! Single-pass cost-layer kernels.
//!
//! The max-cut cost layer is a product of commuting diagonal RZZ gates, so it
//! collapses to one phase per amplitude:
//!
//! ```text
//! amp[b] *= exp(-i/2 * gamma * t(b)),   t(b) = sum_{(i,j)} w_ij * (-1)^(b_i xor b_j)
//! ```
//!
//! [`CostPlan::apply_compressed`] accumulates `t(b)` edge by edge for weighted
//! graphs. For unit weights `t(b) = |E| - 2 * cut(b)`, and the cut count comes
//! from one popcount per adjacency row ([`CostPlan::apply_bitwise`],
//! [`CostPlan::apply_batched`]). Each kernel writes every amplitude exactly
//! once and returns the number of writes.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::Graph;
use crate::state::{Exec, StateVector, PAR_BLOCK};
use crate::trig;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("the bitwise kernel requires an unweighted graph")]
    Weighted,
    #[error("state has {state} qubits but the graph has {graph} nodes")]
    SizeMismatch { state: usize, graph: usize },
    #[error("unsupported batch width {0}; expected 1, 2, 4 or 8")]
    UnsupportedBatchWidth(usize),
}

/// Number of basis indices processed per inner-loop iteration of
/// [`CostPlan::apply_batched`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchWidth {
    #[default]
    W1,
    W2,
    W4,
    W8,
}

/// Strip width the bitwise backend uses unless told otherwise.
pub const DEFAULT_BATCH_WIDTH: BatchWidth = BatchWidth::W8;

impl BatchWidth {
    pub fn lanes(self) -> usize {
        match self {
            BatchWidth::W1 => 1,
            BatchWidth::W2 => 2,
            BatchWidth::W4 => 4,
            BatchWidth::W8 => 8,
        }
    }
}

impl TryFrom<usize> for BatchWidth {
    type Error = CostError;

    fn try_from(w: usize) -> Result<Self, Self::Error> {
        match w {
            1 => Ok(BatchWidth::W1),
            2 => Ok(BatchWidth::W2),
            4 => Ok(BatchWidth::W4),
            8 => Ok(BatchWidth::W8),
            other => Err(CostError::UnsupportedBatchWidth(other)),
        }
    }
}

impl FromStr for BatchWidth {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<usize>()
            .map_err(|_| CostError::UnsupportedBatchWidth(0))
            .and_then(BatchWidth::try_from)
    }
}

impl fmt::Display for BatchWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.lanes())
    }
}

/// Popcount implementation used by the batched kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Popcount {
    /// `u64::count_ones`, a single instruction where the target has one.
    #[default]
    Native,
    /// 8-bit lookup table, for targets without a native popcount.
    Table,
}

const POPCOUNT_TABLE: [u8; 256] = {
    let mut t = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        t[i] = (i as u32).count_ones() as u8;
        i += 1;
    }
    t
};

/// Popcount through the byte lookup table.
#[inline]
pub fn popcount_lut(x: u64) -> u32 {
    x.to_le_bytes()
        .iter()
        .map(|&b| POPCOUNT_TABLE[b as usize] as u32)
        .sum()
}

trait CountOnes {
    fn count(x: u64) -> u32;
    fn count32(x: u32) -> u32;
}

struct NativeCount;
struct TableCount;

impl CountOnes for NativeCount {
    #[inline(always)]
    fn count(x: u64) -> u32 {
        x.count_ones()
    }

    #[inline(always)]
    fn count32(x: u32) -> u32 {
        x.count_ones()
    }
}

impl CountOnes for TableCount {
    #[inline(always)]
    fn count(x: u64) -> u32 {
        popcount_lut(x)
    }

    #[inline(always)]
    fn count32(x: u32) -> u32 {
        x.to_le_bytes()
            .iter()
            .map(|&b| POPCOUNT_TABLE[b as usize] as u32)
            .sum()
    }
}

/// Spreads a single bit (0 or 1) over the whole word: 0 -> 0, 1 -> all ones.
#[inline(always)]
pub fn spread_bit(bit: u64) -> u64 {
    (!bit).wrapping_add(1)
}

/// Bit `i` of `b` spread over the whole word.
#[inline(always)]
pub fn broadcast_bit(b: u64, i: u32) -> u64 {
    spread_bit((b >> i) & 1)
}

/// Intermediate values of one adjacency-row step of the bitwise cut count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowStep {
    pub broadcast: u64,
    pub flipped: u64,
    pub masked: u64,
    pub count: u32,
}

/// One row of the bitwise cut count: the neighbours of a node whose bit is
/// `bit` that sit on the other side of `b`.
pub fn row_step(b: u64, row_mask: u64, bit: u64) -> RowStep {
    let broadcast = spread_bit(bit & 1);
    let flipped = broadcast ^ b;
    let masked = row_mask & flipped;
    RowStep {
        broadcast,
        flipped,
        masked,
        count: masked.count_ones(),
    }
}

/// Word the strip kernel computes in. `u32` halves the vector width needed
/// per lane and is used whenever every basis index fits.
trait Lane: Copy + Default {
    fn from_index(b: u64) -> Self;
    fn rows<'a>(plan: &'a CostPlan<'_>) -> &'a [(u32, Self)];
    /// Cut edges of row `i` for basis index `self`.
    fn row_cut<P: CountOnes>(self, i: u32, mask: Self) -> u32;
}

impl Lane for u64 {
    #[inline(always)]
    fn from_index(b: u64) -> Self {
        b
    }

    #[inline(always)]
    fn rows<'a>(plan: &'a CostPlan<'_>) -> &'a [(u32, Self)] {
        &plan.active_rows
    }

    #[inline(always)]
    fn row_cut<P: CountOnes>(self, i: u32, mask: Self) -> u32 {
        P::count(mask & (broadcast_bit(self, i) ^ self))
    }
}

impl Lane for u32 {
    #[inline(always)]
    fn from_index(b: u64) -> Self {
        b as u32
    }

    #[inline(always)]
    fn rows<'a>(plan: &'a CostPlan<'_>) -> &'a [(u32, Self)] {
        &plan.active_rows32
    }

    #[inline(always)]
    fn row_cut<P: CountOnes>(self, i: u32, mask: Self) -> u32 {
        let broadcast = (!((self >> i) & 1)).wrapping_add(1);
        P::count32(mask & (broadcast ^ self))
    }
}

#[derive(Debug, Clone, Copy)]
struct WeightedPair {
    i: u32,
    j: u32,
    weight: f64,
}

impl WeightedPair {
    /// `+w` if the endpoints agree in `b`, `-w` if the edge is cut. Flipping
    /// the sign bit gives exactly the value `total - w` would subtract.
    #[inline(always)]
    fn signed(&self, b: u64) -> f64 {
        let cut = ((b >> self.i) ^ (b >> self.j)) & 1;
        f64::from_bits(self.weight.to_bits() ^ (cut << 63))
    }
}

/// Precomputed tables for the single-pass cost kernels of one graph.
#[derive(Debug, Clone)]
pub struct CostPlan<'g> {
    graph: &'g Graph,
    row_masks: Vec<u64>,
    /// Non-empty rows only; empty rows contribute no cut edges.
    active_rows: Vec<(u32, u64)>,
    /// `active_rows` narrowed to 32 bits; empty when the graph has more nodes.
    active_rows32: Vec<(u32, u32)>,
    edge_count: u32,
    pairs: Vec<WeightedPair>,
    unweighted: bool,
}

impl<'g> CostPlan<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        let row_masks = graph.row_masks().to_vec();
        let active_rows: Vec<(u32, u64)> = row_masks
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0)
            .map(|(i, &m)| (i as u32, m))
            .collect();
        let active_rows32 = if graph.n() <= 32 {
            active_rows.iter().map(|&(i, m)| (i, m as u32)).collect()
        } else {
            Vec::new()
        };
        let pairs = graph
            .edges()
            .iter()
            .map(|e| WeightedPair {
                i: e.i as u32,
                j: e.j as u32,
                weight: e.weight,
            })
            .collect();
        Self {
            graph,
            row_masks,
            active_rows,
            active_rows32,
            edge_count: graph.edge_count() as u32,
            pairs,
            unweighted: graph.is_unweighted(),
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn row_masks(&self) -> &[u64] {
        &self.row_masks
    }

    pub fn edge_count(&self) -> u32 {
        self.edge_count
    }

    /// `sum_e w_e * (-1)^(b_i xor b_j)`: uncut edges add their weight, cut
    /// edges subtract it. Accumulated in row-major edge order.
    pub fn total_rotation_weighted(&self, b: u64) -> f64 {
        let mut total = 0.0;
        for p in &self.pairs {
            total += p.signed(b);
        }
        total
    }

    /// Number of cut edges of an unweighted graph, one popcount per row.
    pub fn cut_edge_count_bitwise(&self, b: u64) -> Result<u32, CostError> {
        self.require_unweighted()?;
        Ok(self.cut_count::<NativeCount>(b))
    }

    /// `|E| - 2 * cut(b)` for an unweighted graph.
    pub fn total_rotation_unweighted(&self, b: u64) -> Result<i64, CostError> {
        let cut = self.cut_edge_count_bitwise(b)? as i64;
        let uncut = self.edge_count as i64 - cut;
        Ok(uncut - cut)
    }

    #[inline(always)]
    fn cut_count<P: CountOnes>(&self, b: u64) -> u32 {
        let mut cut = 0;
        for &(i, mask) in &self.active_rows {
            cut += P::count(mask & (broadcast_bit(b, i) ^ b));
        }
        cut
    }

    fn require_unweighted(&self) -> Result<(), CostError> {
        if self.unweighted {
            Ok(())
        } else {
            Err(CostError::Weighted)
        }
    }

    fn require_size(&self, state: &StateVector) -> Result<(), CostError> {
        if state.n() != self.graph.n() {
            return Err(CostError::SizeMismatch {
                state: state.n(),
                graph: self.graph.n(),
            });
        }
        Ok(())
    }

    /// Weighted single-pass cost layer.
    pub fn apply_compressed(&self, state: &mut StateVector, gamma: f64) -> Result<u64, CostError> {
        self.require_size(state)?;
        let isa = Isa::detect();
        Ok(for_each_block(state, |offset, chunk| {
            isa.run(
                #[inline(always)]
                || self.compressed_block(offset, chunk, gamma),
            )
        }))
    }

    /// Eight amplitudes share each pass over the edge list; per lane the
    /// arithmetic is exactly that of the scalar path.
    #[inline(always)]
    fn compressed_block(&self, offset: usize, chunk: &mut [Complex64], gamma: f64) -> u64 {
        const W: usize = 8;
        let split = chunk.len() / W * W;
        let (body, tail) = chunk.split_at_mut(split);
        for (s, strip) in body.chunks_exact_mut(W).enumerate() {
            let base = (offset + s * W) as u64;
            let mut total = [0.0f64; W];
            for p in &self.pairs {
                for (k, t) in total.iter_mut().enumerate() {
                    *t += p.signed(base + k as u64);
                }
            }
            let mut sin = [0.0f64; W];
            let mut cos = [0.0f64; W];
            let mut wide = false;
            for k in 0..W {
                let angle = -0.5 * gamma * total[k];
                (sin[k], cos[k]) = trig::sin_cos_poly(angle);
                wide |= angle.abs() > trig::FAST_LIMIT;
            }
            if wide {
                for k in 0..W {
                    (sin[k], cos[k]) = trig::sin_cos(-0.5 * gamma * total[k]);
                }
            }
            for k in 0..W {
                strip[k] *= Complex64::new(cos[k], sin[k]);
            }
        }
        for (k, amp) in tail.iter_mut().enumerate() {
            *amp *= phase(
                gamma,
                self.total_rotation_weighted((offset + split + k) as u64),
            );
        }
        chunk.len() as u64
    }

    /// Unweighted single-pass cost layer using popcounts and a phase table.
    pub fn apply_bitwise(&self, state: &mut StateVector, gamma: f64) -> Result<u64, CostError> {
        self.require_unweighted()?;
        self.require_size(state)?;
        let table = self.phase_table(gamma);
        let isa = Isa::detect();
        Ok(for_each_block(state, |offset, chunk| {
            isa.run(
                #[inline(always)]
                || self.scalar_block::<NativeCount>(offset, chunk, &table),
            )
        }))
    }

    /// Strip-mined variant of [`CostPlan::apply_bitwise`]: `width` consecutive
    /// basis indices share each pass over the adjacency rows.
    pub fn apply_batched(
        &self,
        state: &mut StateVector,
        gamma: f64,
        width: BatchWidth,
        popcount: Popcount,
    ) -> Result<u64, CostError> {
        self.require_unweighted()?;
        self.require_size(state)?;
        let table = self.phase_table(gamma);
        let table = table.as_slice();
        let narrow = state.n() <= 32;
        let isa = Isa::detect();
        Ok(for_each_block(state, |offset, chunk| {
            isa.run(
                #[inline(always)]
                || {
                    if narrow {
                        self.batched_for::<u32>(width, popcount, offset, chunk, table)
                    } else {
                        self.batched_for::<u64>(width, popcount, offset, chunk, table)
                    }
                },
            )
        }))
    }

    #[inline(always)]
    fn scalar_block<P: CountOnes>(
        &self,
        offset: usize,
        chunk: &mut [Complex64],
        table: &[Complex64],
    ) -> u64 {
        let e = self.edge_count as usize;
        let mut writes = 0;
        for (k, amp) in chunk.iter_mut().enumerate() {
            let cut = self.cut_count::<P>((offset + k) as u64) as usize;
            *amp *= table[2 * (e - cut)];
            writes += 1;
        }
        writes
    }

    #[inline(always)]
    fn batched_for<L: Lane>(
        &self,
        width: BatchWidth,
        popcount: Popcount,
        offset: usize,
        chunk: &mut [Complex64],
        table: &[Complex64],
    ) -> u64 {
        match (width, popcount) {
            (BatchWidth::W1, Popcount::Native) => {
                self.batched_block::<1, NativeCount, L>(offset, chunk, table)
            }
            (BatchWidth::W2, Popcount::Native) => {
                self.batched_block::<2, NativeCount, L>(offset, chunk, table)
            }
            (BatchWidth::W4, Popcount::Native) => {
                self.batched_block::<4, NativeCount, L>(offset, chunk, table)
            }
            (BatchWidth::W8, Popcount::Native) => {
                self.batched_block::<8, NativeCount, L>(offset, chunk, table)
            }
            (BatchWidth::W1, Popcount::Table) => {
                self.batched_block::<1, TableCount, L>(offset, chunk, table)
            }
            (BatchWidth::W2, Popcount::Table) => {
                self.batched_block::<2, TableCount, L>(offset, chunk, table)
            }
            (BatchWidth::W4, Popcount::Table) => {
                self.batched_block::<4, TableCount, L>(offset, chunk, table)
            }
            (BatchWidth::W8, Popcount::Table) => {
                self.batched_block::<8, TableCount, L>(offset, chunk, table)
            }
        }
    }

    #[inline(always)]
    fn batched_block<const W: usize, P: CountOnes, L: Lane>(
        &self,
        offset: usize,
        chunk: &mut [Complex64],
        table: &[Complex64],
    ) -> u64 {
        let e = self.edge_count as usize;
        let mut writes = 0;
        let tail_start = chunk.len() / W * W;
        let (body, tail) = chunk.split_at_mut(tail_start);
        for (s, strip) in body.chunks_exact_mut(W).enumerate() {
            let base = (offset + s * W) as u64;
            let mut idx = [L::default(); W];
            for (k, slot) in idx.iter_mut().enumerate() {
                *slot = L::from_index(base + k as u64);
            }
            let mut cut = [0u32; W];
            for &(i, mask) in L::rows(self) {
                for k in 0..W {
                    cut[k] += idx[k].row_cut::<P>(i, mask);
                }
            }
            for k in 0..W {
                strip[k] *= table[2 * (e - cut[k] as usize)];
            }
            writes += W as u64;
        }
        writes + self.scalar_block::<P>(offset + tail_start, tail, table)
    }

    /// `table[t + |E|]` is the phase for integer rotation `t` in `[-|E|, |E|]`.
    fn phase_table(&self, gamma: f64) -> Vec<Complex64> {
        let e = self.edge_count as i64;
        (-e..=e).map(|t| phase(gamma, t as f64)).collect()
    }
}

/// `exp(-i/2 * gamma * rotation)`.
#[inline(always)]
pub fn phase(gamma: f64, rotation: f64) -> Complex64 {
    let (sin, cos) = trig::sin_cos(-0.5 * gamma * rotation);
    Complex64::new(cos, sin)
}

/// Widest instruction set the kernels are compiled for on this CPU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Isa {
    Generic,
    #[cfg(target_arch = "x86_64")]
    Popcnt,
    #[cfg(target_arch = "x86_64")]
    Avx2,
    #[cfg(target_arch = "x86_64")]
    Avx512,
}

impl Isa {
    fn detect() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            use std::is_x86_feature_detected as has;
            if !has!("popcnt") {
                return Isa::Generic;
            }
            if !(has!("avx2") && has!("fma")) {
                return Isa::Popcnt;
            }
            if has!("avx512f") && has!("avx512vpopcntdq") {
                return Isa::Avx512;
            }
            return Isa::Avx2;
        }
        #[allow(unreachable_code)]
        Isa::Generic
    }

    /// Calls `f` from a function compiled with this instruction set enabled,
    /// so the kernel inlined into it may use those instructions.
    #[inline(always)]
    fn run<R>(self, f: impl FnOnce() -> R) -> R {
        // SAFETY: every variant other than `Generic` comes from `detect`,
        // which checked the matching CPU features.
        match self {
            Isa::Generic => f(),
            #[cfg(target_arch = "x86_64")]
            Isa::Popcnt => unsafe { isa_popcnt(f) },
            #[cfg(target_arch = "x86_64")]
            Isa::Avx2 => unsafe { isa_avx2(f) },
            #[cfg(target_arch = "x86_64")]
            Isa::Avx512 => unsafe { isa_avx512(f) },
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt")]
unsafe fn isa_popcnt<R>(f: impl FnOnce() -> R) -> R {
    f()
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt,avx2,fma")]
unsafe fn isa_avx2<R>(f: impl FnOnce() -> R) -> R {
    f()
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt,avx2,fma,avx512f,avx512vpopcntdq")]
unsafe fn isa_avx512<R>(f: impl FnOnce() -> R) -> R {
    f()
}

/// Runs `kernel(first_index, chunk)` over the amplitudes, in parallel when
/// the state asks for it, and sums the returned write counts.
fn for_each_block<F>(state: &mut StateVector, kernel: F) -> u64
where
    F: Fn(usize, &mut [Complex64]) -> u64 + Sync,
{
    match state.exec() {
        Exec::Sequential => kernel(0, state.amplitudes_mut()),
        Exec::Parallel => state
            .amplitudes_mut()
            .par_chunks_mut(PAR_BLOCK)
            .enumerate()
            .map(|(blk, chunk)| kernel(blk * PAR_BLOCK, chunk))
            .sum(),
    }
}
