//! Max-cut problem instances.
//!
//! A [`Graph`] stores its edges in strict upper-triangular, row-major order
//! together with one connectivity bitmask per node: bit `j` of `row_mask(i)`
//! is set iff the edge `(i, j)` with `i < j` exists. The bitwise cost kernel
//! consumes these masks directly.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Width of a connectivity mask. Graphs may not have more nodes than this.
pub const MASK_BITS: usize = u64::BITS as usize;

/// Default node limit for exhaustive max-cut enumeration.
pub const DEFAULT_BRUTE_FORCE_LIMIT: usize = 24;

/// Attempts made by the pairing model before giving up.
const PAIRING_RETRIES: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({i}, {j}) references a node outside 0..{n}")]
    NodeOutOfRange { i: usize, j: usize, n: usize },
    #[error("edge ({0}, {1}) has a non-finite weight")]
    BadWeight(usize, usize),
    #[error("graph has {0} nodes; at most {MASK_BITS} are supported")]
    TooManyNodes(usize),
    #[error("node index {index} out of range for a graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error(
        "exhaustive max-cut over {n} nodes exceeds the enumeration guard of {limit}; \
         raise the guard explicitly if this is intended"
    )]
    TooLargeForBruteForce { n: usize, limit: usize },
    #[error("no {d}-regular graph on {n} nodes: {reason}")]
    Infeasible {
        n: usize,
        d: usize,
        reason: &'static str,
    },
    #[error("pairing model failed to produce a simple graph after {0} attempts")]
    RetriesExhausted(usize),
    #[error("edge list contains no edges")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// An undirected, simple, optionally weighted graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    row_masks: Vec<u64>,
    unweighted: bool,
}

/// A partition of the nodes together with its cut value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cut {
    /// Bit `i` is the side of node `i`.
    pub assignment: u64,
    pub value: f64,
}

impl Graph {
    /// Builds a graph on `n` nodes. Endpoints are normalized so that `i < j`
    /// and edges are sorted row-major.
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self, GraphError> {
        if n > MASK_BITS {
            return Err(GraphError::TooManyNodes(n));
        }
        let mut normalized = Vec::new();
        for e in edges {
            let (i, j) = if e.i <= e.j { (e.i, e.j) } else { (e.j, e.i) };
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if j >= n {
                return Err(GraphError::NodeOutOfRange { i, j, n });
            }
            if !e.weight.is_finite() {
                return Err(GraphError::BadWeight(i, j));
            }
            normalized.push(Edge {
                i,
                j,
                weight: e.weight,
            });
        }
        normalized.sort_by_key(|e| (e.i, e.j));
        let mut row_masks = vec![0u64; n];
        for e in &normalized {
            let bit = 1u64 << e.j;
            if row_masks[e.i] & bit != 0 {
                return Err(GraphError::DuplicateEdge(e.i, e.j));
            }
            row_masks[e.i] |= bit;
        }
        let unweighted = normalized.iter().all(|e| e.weight == 1.0);
        Ok(Self {
            n,
            edges: normalized,
            row_masks,
            unweighted,
        })
    }

    /// Unit-weight graph from endpoint pairs.
    pub fn unweighted(n: usize, pairs: &[(usize, usize)]) -> Result<Self, GraphError> {
        Self::new(n, pairs.iter().map(|&(i, j)| Edge { i, j, weight: 1.0 }))
    }

    pub fn weighted(n: usize, triples: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        Self::new(
            n,
            triples.iter().map(|&(i, j, weight)| Edge { i, j, weight }),
        )
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let pairs: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::unweighted(n, &pairs)
    }

    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        if n < 3 {
            return Err(GraphError::Infeasible {
                n,
                d: 2,
                reason: "a cycle needs at least 3 nodes",
            });
        }
        let pairs: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::unweighted(n, &pairs)
    }

    /// Parses a whitespace-separated edge list: one `i j` or `i j w` per line,
    /// `#` starts a comment line. The node count is one more than the largest id.
    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut max_node = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r').trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| GraphError::Parse { line: line_no, msg };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 2 && tokens.len() != 3 {
                return Err(err(format!(
                    "expected \"i j\" or \"i j w\", got {} fields",
                    tokens.len()
                )));
            }
            let node = |t: &str| {
                t.parse::<usize>()
                    .map_err(|_| err(format!("invalid node id {t:?}")))
            };
            let a = node(tokens[0])?;
            let b = node(tokens[1])?;
            let weight = match tokens.get(2) {
                Some(t) => t
                    .parse::<f64>()
                    .map_err(|_| err(format!("invalid weight {t:?}")))?,
                None => 1.0,
            };
            if !weight.is_finite() {
                return Err(err(format!("weight {weight} is not finite")));
            }
            if a == b {
                return Err(err(format!("self-loop on node {a}")));
            }
            let (i, j) = (a.min(b), a.max(b));
            if j >= MASK_BITS {
                return Err(err(format!(
                    "node id {j} exceeds the {MASK_BITS}-node limit"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(err(format!("duplicate edge ({i}, {j})")));
            }
            max_node = Some(max_node.map_or(j, |m: usize| m.max(j)));
            edges.push(Edge { i, j, weight });
        }
        let n = max_node.ok_or(GraphError::Empty)? + 1;
        Self::new(n, edges)
    }

    /// Serializes as an edge list accepted by [`Graph::parse_edge_list`].
    /// Weights are omitted for unweighted graphs. Isolated trailing nodes are
    /// not representable in this format.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            if self.unweighted {
                let _ = writeln!(out, "{} {}", e.i, e.j);
            } else {
                let _ = writeln!(out, "{} {} {}", e.i, e.j, e.weight);
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn row_masks(&self) -> &[u64] {
        &self.row_masks
    }

    pub fn row_mask(&self, i: usize) -> Result<u64, GraphError> {
        self.row_masks
            .get(i)
            .copied()
            .ok_or(GraphError::IndexOutOfRange {
                index: i,
                n: self.n,
            })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_unweighted(&self) -> bool {
        self.unweighted
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Mask with the low `n` bits set.
    pub fn node_mask(&self) -> u64 {
        if self.n == MASK_BITS {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }

    /// Sum of the weights of edges whose endpoints lie on opposite sides.
    pub fn cut_value(&self, assignment: u64) -> f64 {
        self.edges
            .iter()
            .filter(|e| ((assignment >> e.i) ^ (assignment >> e.j)) & 1 == 1)
            .map(|e| e.weight)
            .sum()
    }

    pub fn cut(&self, assignment: u64) -> Cut {
        Cut {
            assignment,
            value: self.cut_value(assignment),
        }
    }

    pub fn brute_force_max_cut(&self) -> Result<Cut, GraphError> {
        self.brute_force_max_cut_with_limit(DEFAULT_BRUTE_FORCE_LIMIT)
    }

    /// Exhaustive max-cut. Ties resolve to the numerically smallest assignment,
    /// independent of how the enumeration is split across threads.
    pub fn brute_force_max_cut_with_limit(&self, limit: usize) -> Result<Cut, GraphError> {
        if self.n > limit || self.n >= MASK_BITS {
            return Err(GraphError::TooLargeForBruteForce { n: self.n, limit });
        }
        const BLOCK: u64 = 1 << 12;
        let total = 1u64 << self.n;
        let blocks = total.div_ceil(BLOCK);
        let best = (0..blocks)
            .into_par_iter()
            .map(|blk| {
                let start = blk * BLOCK;
                let end = (start + BLOCK).min(total);
                let mut best = self.cut(start);
                for x in start + 1..end {
                    let v = self.cut_value(x);
                    if v > best.value {
                        best = Cut {
                            assignment: x,
                            value: v,
                        };
                    }
                }
                best
            })
            .reduce_with(better_cut)
            .expect("at least one assignment");
        Ok(best)
    }

    /// Simple `d`-regular graph from the pairing (configuration) model,
    /// retrying until no self-loops or parallel edges occur. Weighted graphs
    /// draw weights uniformly from (0, 1].
    pub fn random_regular(
        n: usize,
        d: usize,
        weighted: bool,
        seed: u64,
    ) -> Result<Self, GraphError> {
        if !(n * d).is_multiple_of(2) {
            return Err(GraphError::Infeasible {
                n,
                d,
                reason: "n*d must be even",
            });
        }
        if d >= n {
            return Err(GraphError::Infeasible {
                n,
                d,
                reason: "degree must be below the node count",
            });
        }
        if n > MASK_BITS {
            return Err(GraphError::TooManyNodes(n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
        'attempt: for _ in 0..PAIRING_RETRIES {
            points.shuffle(&mut rng);
            let mut masks = vec![0u64; n];
            let mut pairs = Vec::with_capacity(points.len() / 2);
            for pair in points.chunks_exact(2) {
                let (i, j) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if i == j || masks[i] & (1 << j) != 0 {
                    continue 'attempt;
                }
                masks[i] |= 1 << j;
                pairs.push((i, j));
            }
            let edges = pairs.into_iter().map(|(i, j)| Edge { i, j, weight: 1.0 });
            // Weights are drawn in sorted edge order.
            let mut g = Self::new(n, edges)?;
            if weighted {
                for e in &mut g.edges {
                    e.weight = 1.0 - rng.gen::<f64>();
                }
                g.unweighted = g.edges.iter().all(|e| e.weight == 1.0);
            }
            return Ok(g);
        }
        Err(GraphError::RetriesExhausted(PAIRING_RETRIES))
    }
}

fn better_cut(a: Cut, b: Cut) -> Cut {
    if b.value > a.value || (b.value == a.value && b.assignment < a.assignment) {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::parse_edge_list("0 1\n1 2\n0 2").unwrap()
    }

    #[test]
    fn parses_triangle() {
        let g = triangle();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 3);
        assert!(g.is_unweighted());
    }

    #[test]
    fn parse_swaps_endpoints() {
        let g = Graph::parse_edge_list("2 0 1.5").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(
            g.edges(),
            &[Edge {
                i: 0,
                j: 2,
                weight: 1.5
            }]
        );
        assert!(!g.is_unweighted());
    }

    #[test]
    fn parse_errors_name_the_line() {
        match Graph::parse_edge_list("0 0 1") {
            Err(GraphError::Parse { line: 1, msg }) => assert!(msg.contains("self-loop")),
            other => panic!("unexpected {other:?}"),
        }
        match Graph::parse_edge_list("# c\n0 1\n1 0\n") {
            Err(GraphError::Parse { line: 3, msg }) => assert!(msg.contains("duplicate")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Graph::parse_edge_list("0 x"),
            Err(GraphError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Graph::parse_edge_list("0 1 abc"),
            Err(GraphError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn parse_accepts_comments_and_crlf() {
        let g = Graph::parse_edge_list("# header\r\n0 1\r\n\r\n1 2 2.0\r\n").unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.edges()[1].weight, 2.0);
    }

    #[test]
    fn row_masks() {
        let g = triangle();
        assert_eq!(g.row_mask(0).unwrap(), 0b110);
        assert_eq!(g.row_mask(2).unwrap(), 0);
        let path = Graph::unweighted(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(path.row_mask(1).unwrap(), 0b100);
        assert!(matches!(
            g.row_mask(3),
            Err(GraphError::IndexOutOfRange { index: 3, n: 3 })
        ));
    }

    #[test]
    fn cut_values() {
        let g = triangle();
        assert_eq!(g.cut_value(0b011), 2.0);
        assert_eq!(g.cut_value(0), 0.0);
        let single = Graph::weighted(2, &[(0, 1, 2.5)]).unwrap();
        assert_eq!(single.cut_value(0b01), 2.5);
    }

    #[test]
    fn brute_force() {
        assert_eq!(triangle().brute_force_max_cut().unwrap().value, 2.0);
        let c4 = Graph::cycle(4).unwrap();
        let best = c4.brute_force_max_cut().unwrap();
        assert_eq!(best.value, 4.0);
        assert_eq!(best.assignment, 0b0101);
        let lone = Graph::new(1, []).unwrap();
        assert_eq!(
            lone.brute_force_max_cut().unwrap(),
            Cut {
                assignment: 0,
                value: 0.0
            }
        );
    }

    #[test]
    fn brute_force_tie_breaks_to_smallest() {
        // Triangle optimum 2 is first reached at assignment 001.
        assert_eq!(triangle().brute_force_max_cut().unwrap().assignment, 0b001);
    }

    #[test]
    fn brute_force_guard() {
        let g = Graph::cycle(26).unwrap();
        assert!(matches!(
            g.brute_force_max_cut(),
            Err(GraphError::TooLargeForBruteForce { n: 26, limit: 24 })
        ));
    }

    #[test]
    fn regular_graphs() {
        let k4 = Graph::random_regular(4, 3, false, 0).unwrap();
        assert_eq!(k4, Graph::complete(4).unwrap());
        let a = Graph::random_regular(8, 3, false, 7).unwrap();
        let b = Graph::random_regular(8, 3, false, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.edge_count(), 12);
        assert!(matches!(
            Graph::random_regular(5, 3, false, 0),
            Err(GraphError::Infeasible { .. })
        ));
        let w = Graph::random_regular(10, 3, true, 3).unwrap();
        assert!(!w.is_unweighted());
        assert!(w.edges().iter().all(|e| e.weight > 0.0 && e.weight <= 1.0));
        for v in 0..10 {
            let deg = w.edges().iter().filter(|e| e.i == v || e.j == v).count();
            assert_eq!(deg, 3);
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let w = Graph::random_regular(10, 3, true, 11).unwrap();
        assert_eq!(Graph::parse_edge_list(&w.to_edge_list()).unwrap(), w);
    }
}
