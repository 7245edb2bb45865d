//! Undirected simple graphs and the generators used by the experiments.
//!
//! Vertices are always `0..n`. Grid vertices are additionally addressed by
//! 1-based coordinates `(row, col)` with `row, col ∈ 1..=side`; the linear
//! index of `(row, col)` is `(row - 1) * side + (col - 1)`. This mapping is
//! stable and part of the public contract because corrupted sets such as the
//! diagonal are specified in coordinates.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Rejection budget of the configuration-model generator.
pub const REGULAR_RETRY_BUDGET: usize = 1000;

/// Largest vertex count accepted by the brute-force expansion routine.
pub const EXPANSION_MAX_VERTICES: usize = 20;

/// Where a graph came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub params: Vec<(String, String)>,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(generator: &str, params: &[(&str, String)], seed: Option<u64>) -> Self {
        Self {
            generator: generator.to_string(),
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            seed,
        }
    }
}

/// Undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    provenance: Provenance,
    complete: bool,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicate edges and self-loops are
    /// rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], provenance: Provenance) -> Result<Self> {
        let mut sets = vec![BTreeSet::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return invalid(format!("edge ({u}, {v}) out of range for n = {n}"));
            }
            if u == v {
                return invalid(format!("self-loop at vertex {u}"));
            }
            if !sets[u].insert(v) {
                return invalid(format!("parallel edge ({u}, {v})"));
            }
            sets[v].insert(u);
        }
        let adjacency: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let complete = adjacency.iter().all(|a| a.len() + 1 == n);
        Ok(Self {
            adjacency,
            provenance,
            complete,
        })
    }

    /// Graph with explicit edges and an "edges" provenance tag.
    pub fn with_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(n, edges, Provenance::new("edges", &[("n", n.to_string())], None))
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, adj)| adj.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// True for `K_n` (every vertex adjacent to every other one).
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Writes the plain-text edge list format: `n m` then one `u v` line per
    /// edge with `u < v`.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.n(), self.edge_count())?;
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n(), self.edge_count());
        for (u, v) in self.edges() {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    /// Parses the edge list format produced by [`Graph::write_edge_list`].
    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in input.lines() {
            let line = line?;
            for tok in line.split_whitespace() {
                let value: usize = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("not a nonnegative integer: `{tok}`")))?;
                tokens.push(value);
            }
        }
        if tokens.len() < 2 {
            return Err(Error::Parse("missing `n m` header".into()));
        }
        let (n, m) = (tokens[0], tokens[1]);
        let body = &tokens[2..];
        if body.len() != 2 * m {
            return Err(Error::Parse(format!(
                "header declares {m} edges but {} endpoint values follow",
                body.len()
            )));
        }
        let mut edges = Vec::with_capacity(m);
        for pair in body.chunks(2) {
            let (u, v) = (pair[0], pair[1]);
            if u >= v {
                return Err(Error::Parse(format!("edge `{u} {v}` must satisfy u < v")));
            }
            edges.push((u, v));
        }
        Self::from_edges(n, &edges, Provenance::new("file", &[("n", n.to_string())], None))
    }
}

/// `side × side` square lattice `[side]²` with nearest-neighbour edges.
pub fn generate_grid(side: usize) -> Result<Graph> {
    if side == 0 {
        return invalid("grid side must be at least 1");
    }
    let mut edges = Vec::with_capacity(2 * side * side);
    for row in 1..=side {
        for col in 1..=side {
            let v = grid_index(side, row, col);
            if col < side {
                edges.push((v, grid_index(side, row, col + 1)));
            }
            if row < side {
                edges.push((v, grid_index(side, row + 1, col)));
            }
        }
    }
    Graph::from_edges(
        side * side,
        &edges,
        Provenance::new("grid", &[("side", side.to_string())], None),
    )
}

/// `rows × cols` rectangular lattice; vertex `(r, c)` (1-based) has index
/// `(r−1)·cols + (c−1)`.
pub fn generate_grid_rect(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return invalid("grid dimensions must be at least 1");
    }
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    Graph::from_edges(
        rows * cols,
        &edges,
        Provenance::new("grid_rect", &[("rows", rows.to_string()), ("cols", cols.to_string())], None),
    )
}

/// Linear index of grid coordinate `(row, col)`, both 1-based.
pub fn grid_index(side: usize, row: usize, col: usize) -> usize {
    debug_assert!((1..=side).contains(&row) && (1..=side).contains(&col));
    (row - 1) * side + (col - 1)
}

/// Inverse of [`grid_index`].
pub fn grid_coords(side: usize, index: usize) -> (usize, usize) {
    (index / side + 1, index % side + 1)
}

/// The diagonal `{(i, i) : i ∈ [side]}`.
pub fn grid_diagonal(side: usize) -> Vec<usize> {
    (1..=side).map(|i| grid_index(side, i, i)).collect()
}

/// The `4·side − 4` vertices on the outer boundary (all of them when
/// `side ≤ 2`), ascending.
pub fn grid_boundary(side: usize) -> Vec<usize> {
    (0..side * side)
        .filter(|&v| {
            let (r, c) = grid_coords(side, v);
            r == 1 || c == 1 || r == side || c == side
        })
        .collect()
}

pub fn generate_complete(n: usize) -> Result<Graph> {
    if n == 0 {
        return invalid("complete graph needs at least one vertex");
    }
    let edges: Vec<_> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect();
    Graph::from_edges(n, &edges, Provenance::new("complete", &[("n", n.to_string())], None))
}

/// Path `0 − 1 − … − (n−1)`.
pub fn generate_path(n: usize) -> Result<Graph> {
    if n == 0 {
        return invalid("path needs at least one vertex");
    }
    let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
    Graph::from_edges(n, &edges, Provenance::new("path", &[("n", n.to_string())], None))
}

/// Star `K_{1,leaves}` with the centre at vertex 0.
pub fn generate_star(leaves: usize) -> Result<Graph> {
    let edges: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
    Graph::from_edges(
        leaves + 1,
        &edges,
        Provenance::new("star", &[("leaves", leaves.to_string())], None),
    )
}

/// Uniform-ish simple `d`-regular graph by the configuration model: stubs
/// are shuffled and paired, and the pairing is rejected if it creates a loop
/// or a parallel edge. Deterministic for a fixed seed.
pub fn generate_random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return invalid("random regular graph needs at least one vertex");
    }
    if d >= n {
        return invalid(format!("degree {d} must be smaller than n = {n}"));
    }
    if (n * d) % 2 == 1 {
        return invalid(format!("n·d = {} is odd", n * d));
    }
    let provenance = Provenance::new(
        "random_regular",
        &[("n", n.to_string()), ("d", d.to_string())],
        Some(seed),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    'attempt: for _ in 0..REGULAR_RETRY_BUDGET {
        stubs.shuffle(&mut rng);
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(n * d / 2);
        for pair in stubs.chunks(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !seen.insert((u, v)) {
                continue 'attempt;
            }
            edges.push((u, v));
        }
        return Graph::from_edges(n, &edges, provenance);
    }
    Err(Error::GenerationFailure {
        retries: REGULAR_RETRY_BUDGET,
        reason: format!("no simple pairing found for n = {n}, d = {d}"),
    })
}

/// Exact edge expansion `min |∂S| / |S|` over nonempty `S` with `|S| ≤ n/2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Expansion {
    /// `|∂S|` of the minimizer.
    pub boundary: usize,
    /// `|S|` of the minimizer.
    pub size: usize,
    /// One minimizing set, ascending.
    pub witness: Vec<usize>,
}

impl Expansion {
    pub fn value(&self) -> f64 {
        self.boundary as f64 / self.size as f64
    }
}

/// Brute force over all `2^n` subsets; limited to `n ≤ 20`. Larger graphs
/// should use [`spectral_bound`], which gives a lower bound only.
pub fn edge_expansion(graph: &Graph) -> Result<Expansion> {
    let n = graph.n();
    if n > EXPANSION_MAX_VERTICES {
        return Err(Error::SizeLimit(format!(
            "edge expansion is brute-forced only up to {EXPANSION_MAX_VERTICES} vertices (got {n}); \
             use spectral_bound for a Cheeger lower bound"
        )));
    }
    let half = n / 2;
    if half == 0 {
        return invalid("no nonempty vertex set with |S| ≤ n/2");
    }
    let masks: Vec<u32> = (0..n)
        .map(|v| graph.neighbors(v).iter().fold(0u32, |m, &u| m | (1 << u)))
        .collect();
    let mut best: Option<(usize, usize, u32)> = None;
    for set in 1u32..(1u32 << n) {
        let size = set.count_ones() as usize;
        if size > half {
            continue;
        }
        let boundary: usize = (0..n)
            .filter(|&v| set & (1 << v) != 0)
            .map(|v| (masks[v] & !set).count_ones() as usize)
            .sum();
        let better = match best {
            None => true,
            Some((b, s, _)) => boundary * s < b * size,
        };
        if better {
            best = Some((boundary, size, set));
        }
    }
    let (boundary, size, set) = best.expect("at least one admissible subset");
    Ok(Expansion {
        boundary,
        size,
        witness: (0..n).filter(|&v| set & (1 << v) != 0).collect(),
    })
}

/// Spectral information for a regular graph: `λ₂` of the adjacency matrix,
/// the gap `d − λ₂`, and the Cheeger lower bound `(d − λ₂)/2 ≤ α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralBound {
    pub lambda2: f64,
    pub gap: f64,
    pub cheeger_lower_bound: f64,
}

pub fn spectral_bound(graph: &Graph) -> Result<SpectralBound> {
    let n = graph.n();
    if n < 2 {
        return invalid("spectral bound needs at least two vertices");
    }
    let d = graph.max_degree();
    if graph.min_degree() != d {
        return invalid("spectral bound is reported for regular graphs only");
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (u, v) in graph.edges() {
        a[(u, v)] = 1.0;
        a[(v, u)] = 1.0;
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    let lambda2 = eig[1];
    let gap = d as f64 - lambda2;
    Ok(SpectralBound {
        lambda2,
        gap,
        cheeger_lower_bound: gap / 2.0,
    })
}
