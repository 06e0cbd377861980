//! State vector and the H / RX / RZZ gate kernels.
//!
//! Amplitude `b` holds the coefficient of basis state `|b>`, with bit `q` of
//! `b` being the value of qubit `q`. Rotation conventions:
//! `RX(t) = exp(-i t X / 2)` and `RZZ(t) = exp(-i t Z⊗Z / 2)`.
//!
//! Every kernel returns the number of amplitude writes it performed.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Default qubit limit for allocating a state vector (16 GiB of amplitudes).
pub const DEFAULT_MAX_QUBITS: usize = 30;

/// States with at least this many qubits use the parallel kernels by default.
pub const PARALLEL_THRESHOLD_QUBITS: usize = 14;

/// Amplitudes per work item in parallel sweeps.
pub(crate) const PAR_BLOCK: usize = 1 << 12;

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("{n} qubits need {bytes} bytes of amplitudes, above the {max}-qubit guard")]
    TooManyQubits { n: usize, max: usize, bytes: u128 },
    #[error("a state needs at least one qubit")]
    NoQubits,
    #[error("could not allocate {bytes} bytes for a {n}-qubit state")]
    Allocation { n: usize, bytes: u128 },
    #[error("qubit {q} out of range for a {n}-qubit state")]
    QubitOutOfRange { q: usize, n: usize },
    #[error("two-qubit gate needs distinct qubits, got {0} twice")]
    SameQubit(usize),
    #[error("size mismatch: {0} vs {1} qubits")]
    SizeMismatch(usize, usize),
}

/// How gate kernels sweep the amplitude array. Both modes produce
/// bit-identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Exec {
    pub fn for_qubits(n: usize) -> Self {
        if n >= PARALLEL_THRESHOLD_QUBITS {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
    exec: Exec,
}

impl StateVector {
    /// `|0...0>` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self, StateError> {
        Self::zero_with_limit(n, DEFAULT_MAX_QUBITS)
    }

    pub fn zero_with_limit(n: usize, max_qubits: usize) -> Result<Self, StateError> {
        let mut s = Self::filled(n, max_qubits, Complex64::new(0.0, 0.0))?;
        s.amps[0] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// Allocates `2^n` copies of `value`, refusing sizes above the guard.
    pub(crate) fn filled(
        n: usize,
        max_qubits: usize,
        value: Complex64,
    ) -> Result<Self, StateError> {
        let bytes = required_bytes(n);
        if n == 0 {
            return Err(StateError::NoQubits);
        }
        if n > max_qubits || n >= usize::BITS as usize {
            return Err(StateError::TooManyQubits {
                n,
                max: max_qubits,
                bytes,
            });
        }
        let len = 1usize << n;
        let mut amps = Vec::new();
        amps.try_reserve_exact(len)
            .map_err(|_| StateError::Allocation { n, bytes })?;
        amps.resize(len, value);
        Ok(Self {
            n,
            amps,
            exec: Exec::for_qubits(n),
        })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, StateError> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(StateError::NoQubits);
        }
        let n = len.trailing_zeros() as usize;
        Ok(Self {
            n,
            amps,
            exec: Exec::for_qubits(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn set_exec(&mut self, exec: Exec) {
        self.exec = exec;
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_qubit(&self, q: usize) -> Result<(), StateError> {
        if q >= self.n {
            Err(StateError::QubitOutOfRange { q, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Hadamard on qubit `q`.
    pub fn apply_h(&mut self, q: usize) -> Result<u64, StateError> {
        self.check_qubit(q)?;
        let s = FRAC_1_SQRT_2;
        Ok(self.pair_sweep(q, |a, b| ((a + b) * s, (a - b) * s)))
    }

    /// `exp(-i theta X / 2)` on qubit `q`.
    pub fn apply_rx(&mut self, q: usize, theta: f64) -> Result<u64, StateError> {
        self.check_qubit(q)?;
        let (sin, cos) = (theta / 2.0).sin_cos();
        let c = Complex64::new(cos, 0.0);
        let ms = Complex64::new(0.0, -sin);
        Ok(self.pair_sweep(q, |a, b| (c * a + ms * b, ms * a + c * b)))
    }

    /// `exp(-i theta Z⊗Z / 2)` on qubits `q1`, `q2`: phase `exp(-i theta/2)`
    /// where the two bits agree and `exp(+i theta/2)` where they differ.
    pub fn apply_rzz(&mut self, q1: usize, q2: usize, theta: f64) -> Result<u64, StateError> {
        self.check_qubit(q1)?;
        self.check_qubit(q2)?;
        if q1 == q2 {
            return Err(StateError::SameQubit(q1));
        }
        let (sin, cos) = (theta / 2.0).sin_cos();
        let phases = [Complex64::new(cos, -sin), Complex64::new(cos, sin)];
        let kernel = |offset: usize, chunk: &mut [Complex64]| {
            let mut writes = 0u64;
            for (k, amp) in chunk.iter_mut().enumerate() {
                let b = offset + k;
                *amp *= phases[((b >> q1) ^ (b >> q2)) & 1];
                writes += 1;
            }
            writes
        };
        Ok(match self.exec {
            Exec::Sequential => kernel(0, &mut self.amps),
            Exec::Parallel => self
                .amps
                .par_chunks_mut(PAR_BLOCK)
                .enumerate()
                .map(|(blk, chunk)| kernel(blk * PAR_BLOCK, chunk))
                .sum(),
        })
    }

    /// Applies `f` to every amplitude pair `(b, b | 1<<q)` with bit `q` of `b` clear.
    fn pair_sweep<F>(&mut self, q: usize, f: F) -> u64
    where
        F: Fn(Complex64, Complex64) -> (Complex64, Complex64) + Sync,
    {
        let half = 1usize << q;
        let update = |lo: &mut [Complex64], hi: &mut [Complex64]| {
            let mut writes = 0u64;
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                (*a, *b) = f(*a, *b);
                writes += 2;
            }
            writes
        };
        match self.exec {
            Exec::Sequential => self
                .amps
                .chunks_mut(2 * half)
                .map(|c| {
                    let (lo, hi) = c.split_at_mut(half);
                    update(lo, hi)
                })
                .sum(),
            Exec::Parallel if half >= PAR_BLOCK => self
                .amps
                .chunks_mut(2 * half)
                .map(|c| {
                    let (lo, hi) = c.split_at_mut(half);
                    lo.par_chunks_mut(PAR_BLOCK)
                        .zip(hi.par_chunks_mut(PAR_BLOCK))
                        .map(|(l, h)| update(l, h))
                        .sum::<u64>()
                })
                .sum(),
            Exec::Parallel => {
                let stride = (2 * half).max(PAR_BLOCK);
                self.amps
                    .par_chunks_mut(stride)
                    .map(|block| {
                        block
                            .chunks_mut(2 * half)
                            .map(|c| {
                                let (lo, hi) = c.split_at_mut(half);
                                update(lo, hi)
                            })
                            .sum::<u64>()
                    })
                    .sum()
            }
        }
    }

    /// Largest componentwise distance. Global phase is not factored out.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64, StateError> {
        if self.n != other.n {
            return Err(StateError::SizeMismatch(self.n, other.n));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Debug dump, one `index real imag` line per amplitude.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (b, a) in self.amps.iter().enumerate() {
            let _ = writeln!(out, "{b} {:e} {:e}", a.re, a.im);
        }
        out
    }
}

fn required_bytes(n: usize) -> u128 {
    (1u128 << n.min(100)) * std::mem::size_of::<Complex64>() as u128
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_close(a: &[Complex64], b: &[Complex64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).norm() <= tol, "{x} vs {y}");
        }
    }

    fn random_state(n: usize, seed: u64) -> StateVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<Complex64> = (0..1usize << n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn zero_state() {
        assert_eq!(
            StateVector::zero(1).unwrap().amplitudes(),
            &[c(1.0, 0.0), c(0.0, 0.0)]
        );
        let s = StateVector::zero(2).unwrap();
        assert_eq!(s.amplitudes()[0], c(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| *a == c(0.0, 0.0)));
    }

    #[test]
    fn zero_state_guard() {
        match StateVector::zero(40) {
            Err(StateError::TooManyQubits { n: 40, bytes, .. }) => assert_eq!(bytes, 16 << 40),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(StateVector::zero(0), Err(StateError::NoQubits));
    }

    #[test]
    fn hadamard() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply_h(0).unwrap();
        assert_close(
            s.amplitudes(),
            &[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
            1e-15,
        );
        s.apply_h(0).unwrap();
        assert_close(s.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)], 1e-15);

        let mut s = StateVector::zero(2).unwrap();
        s.apply_h(0).unwrap();
        s.apply_h(1).unwrap();
        assert_close(s.amplitudes(), &[c(0.5, 0.0); 4], 1e-15);
        assert_eq!(
            s.apply_h(2),
            Err(StateError::QubitOutOfRange { q: 2, n: 2 })
        );
    }

    #[test]
    fn rx() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply_rx(0, PI).unwrap();
        assert_close(s.amplitudes(), &[c(0.0, 0.0), c(0.0, -1.0)], 1e-15);

        let mut s = StateVector::zero(1).unwrap();
        s.apply_rx(0, PI / 2.0).unwrap();
        assert_close(
            s.amplitudes(),
            &[c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)],
            1e-15,
        );

        let mut s = random_state(3, 1);
        let before = s.clone();
        s.apply_rx(1, 0.0).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn rzz() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply_rzz(0, 1, PI).unwrap();
        assert_close(&s.amplitudes()[..1], &[c(0.0, -1.0)], 1e-15);

        let mut amps = vec![c(0.0, 0.0); 4];
        amps[0b01] = c(1.0, 0.0);
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        s.apply_rzz(0, 1, PI).unwrap();
        assert_close(&s.amplitudes()[1..2], &[c(0.0, 1.0)], 1e-15);

        let mut s = StateVector::from_amplitudes(vec![c(0.5, 0.0); 4]).unwrap();
        s.apply_rzz(1, 0, 1.234).unwrap();
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| (a.norm() - 0.5).abs() < 1e-15));

        assert_eq!(s.apply_rzz(1, 1, 0.1), Err(StateError::SameQubit(1)));
        assert_eq!(
            s.apply_rzz(0, 2, 0.1),
            Err(StateError::QubitOutOfRange { q: 2, n: 2 })
        );
    }

    #[test]
    fn max_abs_diff() {
        let a = StateVector::from_amplitudes(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let b = StateVector::from_amplitudes(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(a.max_abs_diff(&a).unwrap(), 0.0);
        assert_eq!(a.max_abs_diff(&b).unwrap(), 1.0);
        let phi = 0.7;
        let rotated =
            StateVector::from_amplitudes(vec![Complex64::from_polar(1.0, phi), c(0.0, 0.0)])
                .unwrap();
        let expected = (c(1.0, 0.0) - Complex64::from_polar(1.0, phi)).norm();
        assert!((a.max_abs_diff(&rotated).unwrap() - expected).abs() < 1e-15);
        let big = StateVector::zero(2).unwrap();
        assert_eq!(a.max_abs_diff(&big), Err(StateError::SizeMismatch(1, 2)));
    }

    #[test]
    fn write_counts() {
        let mut s = StateVector::zero(5).unwrap();
        assert_eq!(s.apply_h(3).unwrap(), 32);
        assert_eq!(s.apply_rx(0, 0.3).unwrap(), 32);
        assert_eq!(s.apply_rzz(0, 4, 0.3).unwrap(), 32);
        s.set_exec(Exec::Parallel);
        assert_eq!(s.apply_h(4).unwrap(), 32);
        assert_eq!(s.apply_rzz(0, 4, 0.3).unwrap(), 32);
    }

    #[test]
    fn dump_format() {
        let s = StateVector::zero(1).unwrap();
        assert_eq!(s.dump(), "0 1e0 0e0\n1 0e0 0e0\n");
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        // 16 qubits crosses PAR_BLOCK for the high qubits.
        for q in [0, 5, 11, 12, 15] {
            let base = random_state(16, q as u64);
            let mut seq = base.clone().with_exec(Exec::Sequential);
            let mut par = base.with_exec(Exec::Parallel);
            for s in [&mut seq, &mut par] {
                s.apply_h(q).unwrap();
                s.apply_rx(q, 0.77).unwrap();
                s.apply_rzz(q, (q + 3) % 16, -1.1).unwrap();
            }
            assert_eq!(seq.amplitudes(), par.amplitudes(), "qubit {q}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gates_preserve_norm(n in 1usize..=10, seed: u64, q_raw: usize, q2_raw: usize, theta in -10.0f64..10.0) {
            let q = q_raw % n;
            let base = random_state(n, seed);
            let mut s = base.clone();
            s.apply_h(q).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            let mut s = base.clone();
            s.apply_rx(q, theta).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            if n > 1 {
                let q2 = (q + 1 + q2_raw % (n - 1)) % n;
                let mut s = base;
                s.apply_rzz(q, q2, theta).unwrap();
                prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn h_is_involution(n in 1usize..=8, seed: u64, q_raw: usize) {
            let q = q_raw % n;
            let base = random_state(n, seed);
            let mut s = base.clone();
            s.apply_h(q).unwrap();
            s.apply_h(q).unwrap();
            prop_assert!(s.max_abs_diff(&base).unwrap() <= 1e-12);
        }

        #[test]
        fn rzz_inverse_and_commutation(
            n in 2usize..=8, seed: u64, a: (usize, usize), b: (usize, usize),
            t1 in -7.0f64..7.0, t2 in -7.0f64..7.0,
        ) {
            let pair = |(x, y): (usize, usize)| {
                let q1 = x % n;
                (q1, (q1 + 1 + y % (n - 1)) % n)
            };
            let (p1, p2) = (pair(a), pair(b));
            let base = random_state(n, seed);
            let mut s = base.clone();
            s.apply_rzz(p1.0, p1.1, t1).unwrap();
            s.apply_rzz(p1.0, p1.1, -t1).unwrap();
            prop_assert!(s.max_abs_diff(&base).unwrap() <= 1e-12);

            let mut ab = base.clone();
            ab.apply_rzz(p1.0, p1.1, t1).unwrap();
            ab.apply_rzz(p2.0, p2.1, t2).unwrap();
            let mut ba = base;
            ba.apply_rzz(p2.0, p2.1, t2).unwrap();
            ba.apply_rzz(p1.0, p1.1, t1).unwrap();
            prop_assert!(ab.max_abs_diff(&ba).unwrap() <= 1e-12);
        }
    }
}
