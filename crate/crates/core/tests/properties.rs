//! Property tests over the public API.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qaoa_sim::{
    approximation_ratio, expectation, simulate, BackendKind, Graph, QaoaParams, StateVector,
};

fn random_graph(n: usize, weighted: bool, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.5) {
                let w = if weighted {
                    rng.gen_range(0.05..3.0)
                } else {
                    1.0
                };
                edges.push((i, j, w));
            }
        }
    }
    Graph::weighted(n, &edges).unwrap()
}

fn random_state(n: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(amps).unwrap()
}

/// Moves bit `i` of `b` to bit `perm[i]`.
fn permute_bits(b: u64, perm: &[usize]) -> u64 {
    perm.iter()
        .enumerate()
        .fold(0, |acc, (i, &to)| acc | (((b >> i) & 1) << to))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn row_masks_count_every_edge_once(n in 1usize..=16, weighted: bool, seed: u64) {
        let g = random_graph(n, weighted, seed);
        let total: u32 = g.row_masks().iter().map(|m| m.count_ones()).sum();
        prop_assert_eq!(total as usize, g.edge_count());
    }

    #[test]
    fn regular_graphs_count_every_edge_once(half in 2usize..=12, seed: u64, weighted: bool) {
        let g = Graph::random_regular(2 * half, 3, weighted, seed).unwrap();
        let total: u32 = g.row_masks().iter().map(|m| m.count_ones()).sum();
        prop_assert_eq!(total as usize, 3 * half);
    }

    #[test]
    fn cut_is_complement_symmetric(n in 1usize..=16, weighted: bool, seed: u64, x: u64) {
        let g = random_graph(n, weighted, seed);
        let x = x & g.node_mask();
        prop_assert_eq!(g.cut_value(x), g.cut_value(!x & g.node_mask()));
    }

    #[test]
    fn brute_force_dominates_random_cuts(n in 1usize..=12, weighted: bool, seed: u64) {
        let g = random_graph(n, weighted, seed);
        let best = g.brute_force_max_cut().unwrap();
        prop_assert_eq!(best.value, g.cut_value(best.assignment));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..100 {
            let x = rng.gen::<u64>() & g.node_mask();
            prop_assert!(best.value >= g.cut_value(x));
        }
    }

    #[test]
    fn unweighted_cuts_are_integral(n in 1usize..=16, seed: u64, x: u64) {
        let g = random_graph(n, false, seed);
        let v = g.cut_value(x & g.node_mask());
        prop_assert_eq!(v, v.trunc());
    }

    #[test]
    fn expectation_is_bounded_by_total_weight(n in 1usize..=10, weighted: bool, seed: u64) {
        let g = random_graph(n, weighted, seed);
        let e = expectation(&g, &random_state(n, seed)).unwrap();
        prop_assert!(e >= 0.0 && e <= g.total_weight() * (1.0 + 1e-12));
    }

    #[test]
    fn approximation_ratio_is_a_fraction(n in 2usize..=10, weighted: bool, seed: u64, p in 1usize..=3) {
        let g = random_graph(n, weighted, seed);
        let params = QaoaParams::random(p, seed).unwrap();
        let state = simulate(&g, &params, BackendKind::Compressed, true).unwrap();
        let r = approximation_ratio(&g, expectation(&g, &state).unwrap()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r), "ratio {}", r);
    }

    #[test]
    fn relabeling_qubits_permutes_the_state(n in 2usize..=6, weighted: bool, seed: u64, p in 1usize..=3) {
        let g = random_graph(n, weighted, seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let relabeled: Vec<(usize, usize, f64)> =
            g.edges().iter().map(|e| (perm[e.i], perm[e.j], e.weight)).collect();
        let h = Graph::weighted(n, &relabeled).unwrap();
        let params = QaoaParams::random(p, seed ^ 1).unwrap();
        for backend in BackendKind::ALL.into_iter().filter(|b| b.supports(&g)) {
            let a = simulate(&g, &params, backend, true).unwrap();
            let b = simulate(&h, &params, backend, true).unwrap();
            let ea = expectation(&g, &a).unwrap();
            let eb = expectation(&h, &b).unwrap();
            prop_assert!((ea - eb).abs() <= 1e-12, "{} vs {}", ea, eb);
            for (x, amp) in a.amplitudes().iter().enumerate() {
                let y = permute_bits(x as u64, &perm) as usize;
                prop_assert!((amp - b.amplitudes()[y]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn single_edge_follows_two_qubit_enumeration(gamma in 0.0..2.0 * std::f64::consts::PI, beta in 0.0..std::f64::consts::PI) {
        // Enumerating the 4x4 circuit with RZZ(gamma) and RX(2 beta) gives
        // 1/2 (1 - sin(4 beta) sin(gamma)).
        let edge = Graph::unweighted(2, &[(0, 1)]).unwrap();
        let params = QaoaParams::new(vec![gamma], vec![beta]).unwrap();
        let expected = 0.5 * (1.0 - (4.0 * beta).sin() * gamma.sin());
        for backend in BackendKind::ALL {
            let e = expectation(&edge, &simulate(&edge, &params, backend, true).unwrap()).unwrap();
            prop_assert!((e - expected).abs() <= 1e-9);
        }
    }
}
