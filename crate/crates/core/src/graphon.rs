//! Step graphons, W-random graph sampling and graph features.
//!
//! A [`StepGraphon`] is constant on the `n × n` equal cells of the unit
//! square. Node `a` of a sampled graph gets a latent position `u_a`; the
//! pair `{a, b}` is an edge with probability `heights[cell(u_a)][cell(u_b)]`
//! where `cell(u) = min(floor(u·n), n−1)`.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Tolerance used when checking symmetry of loaded or constructed matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Default merge tolerance for [`GraphFeature::BlockCount`].
pub const DEFAULT_BLOCK_TOL: f64 = 0.05;

/// Symmetric grid of edge probabilities on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGraphon {
    n: usize,
    heights: Vec<f64>,
}

impl StepGraphon {
    /// Builds a graphon from row-major heights. Entries within
    /// [`SYMMETRY_TOL`] of their mirror are snapped to the upper-triangle
    /// value so the stored matrix is exactly symmetric.
    pub fn new(n: usize, mut heights: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "resolution must be at least 1"));
        }
        if heights.len() != n * n {
            return Err(Error::param(
                "heights",
                format!("expected {} entries, got {}", n * n, heights.len()),
            ));
        }
        for i in 0..n {
            for j in i..n {
                let a = heights[i * n + j];
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::HeightOutOfRange { row: i, col: j, value: a });
                }
                let b = heights[j * n + i];
                if (a - b).abs() > SYMMETRY_TOL || b.is_nan() {
                    return Err(Error::Asymmetric { row: i, col: j, a, b });
                }
                heights[j * n + i] = a;
            }
        }
        Ok(StepGraphon { n, heights })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::param(
                "heights",
                format!("row of length {} in a {n}-row matrix", bad.len()),
            ));
        }
        Self::new(n, rows.concat())
    }

    /// Builds a graphon from its free cells (upper triangle plus diagonal,
    /// row-major), mirroring into the lower triangle.
    pub fn from_free_cells(n: usize, free: &[f64]) -> Result<Self> {
        if free.len() != free_cell_count(n) {
            return Err(Error::param(
                "free",
                format!("expected {} free cells, got {}", free_cell_count(n), free.len()),
            ));
        }
        let mut heights = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                heights[i * n + j] = free[k];
                heights[j * n + i] = free[k];
                k += 1;
            }
        }
        Self::new(n, heights)
    }

    /// Erdős–Rényi graphon: every cell at `p`.
    pub fn flat(n: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("p", format!("{p} is outside [0, 1]")));
        }
        Self::new(n, vec![p; n * n])
    }

    /// Stochastic block model with `K` equal blocks expanded onto an `n × n` grid.
    pub fn sbm(block_probs: &[Vec<f64>], n: usize) -> Result<Self> {
        let k = block_probs.len();
        if k == 0 {
            return Err(Error::param("block_probs", "empty block matrix"));
        }
        if n == 0 || !n.is_multiple_of(k) {
            return Err(Error::param(
                "n",
                format!("{k} blocks do not divide resolution {n}"),
            ));
        }
        // validates squareness, symmetry and range of the block matrix itself
        let blocks = Self::from_rows(block_probs)?;
        let side = n / k;
        let heights = (0..n * n)
            .map(|idx| blocks.get((idx / n) / side, (idx % n) / side))
            .collect();
        Self::new(n, heights)
    }

    /// Empirical graphon of a graph: resolution `N`, heights equal to the
    /// adjacency entries, zero diagonal.
    pub fn empirical(graph: &AdjacencyMatrix) -> Self {
        let n = graph.node_count();
        let heights = (0..n * n)
            .map(|idx| if graph.has_edge(idx / n, idx % n) { 1.0 } else { 0.0 })
            .collect();
        StepGraphon { n, heights }
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.heights[i * self.n + j]
    }

    /// Row-major heights.
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.heights[i * self.n..(i + 1) * self.n]
    }

    /// Upper-triangle-plus-diagonal heights, row-major.
    pub fn free_cells(&self) -> Vec<f64> {
        let n = self.n;
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).collect()
    }

    /// Grid cell containing latent coordinate `u`.
    #[inline]
    pub fn cell_of(&self, u: f64) -> usize {
        ((u * self.n as f64) as usize).min(self.n - 1)
    }

    /// Mean height over the unit square.
    pub fn density(&self) -> f64 {
        self.heights.iter().sum::<f64>() / (self.n * self.n) as f64
    }

    /// Row means `d(i) = ∫ W(x, y) dy` for `x` in cell `i`.
    pub fn row_means(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().sum::<f64>() / self.n as f64)
            .collect()
    }

    /// L∞ distance between two graphons on the same grid.
    pub fn max_abs_diff(&self, other: &StepGraphon) -> Result<f64> {
        check_same_resolution(self, other)?;
        Ok(self
            .heights
            .iter()
            .zip(&other.heights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Number of row classes under greedy merging at tolerance `tol`.
    pub fn block_count(&self, tol: f64) -> usize {
        let rows: Vec<&[f64]> = (0..self.n).map(|i| self.row(i)).collect();
        count_row_classes(&rows, tol)
    }

    /// Graphon functional for `feature`. `n_nodes` is only read by
    /// [`GraphFeature::AverageDegree`].
    pub fn model_feature(&self, feature: GraphFeature, n_nodes: usize) -> Result<f64> {
        feature.validate()?;
        Ok(match feature {
            GraphFeature::Density => self.density(),
            GraphFeature::AverageDegree => {
                if n_nodes == 0 {
                    return Err(Error::param("n_nodes", "average degree needs a node count"));
                }
                (n_nodes - 1) as f64 * self.density()
            }
            GraphFeature::BlockCount { tol } => self.block_count(tol) as f64,
        })
    }

    /// Draws a W-random graph on `n_nodes` nodes from seed `seed`.
    pub fn sample_graph(&self, n_nodes: usize, seed: u64) -> Result<(AdjacencyMatrix, LatentPositions)> {
        self.sample_graph_with(n_nodes, &mut seed::rng(seed))
    }

    /// Latent positions are drawn first, then one uniform per unordered pair
    /// in row-major `(a, b), a < b` order.
    pub fn sample_graph_with<R: Rng + ?Sized>(
        &self,
        n_nodes: usize,
        rng: &mut R,
    ) -> Result<(AdjacencyMatrix, LatentPositions)> {
        if n_nodes == 0 {
            return Err(Error::param("n_nodes", "need at least one node"));
        }
        let latent = LatentPositions::sample(n_nodes, rng);
        let graph = self.sample_edges(&latent, rng);
        Ok((graph, latent))
    }

    /// Samples edges conditional on fixed latent positions.
    pub fn sample_edges<R: Rng + ?Sized>(&self, latent: &LatentPositions, rng: &mut R) -> AdjacencyMatrix {
        let cells: Vec<usize> = latent.0.iter().map(|&u| self.cell_of(u)).collect();
        let n_nodes = cells.len();
        let mut graph = AdjacencyMatrix::empty(n_nodes);
        for a in 0..n_nodes {
            let row = self.row(cells[a]);
            for b in a + 1..n_nodes {
                if rng.random::<f64>() < row[cells[b]] {
                    graph.set_edge(a, b);
                }
            }
        }
        graph
    }

    /// Edge count of a graph sampled conditional on `latent`, without
    /// materializing the adjacency matrix. Consumes the same uniforms, in the
    /// same order, as [`StepGraphon::sample_edges`].
    pub fn sample_edge_count<R: Rng + ?Sized>(&self, cells: &[usize], rng: &mut R) -> usize {
        let mut count = 0;
        for (a, &ca) in cells.iter().enumerate() {
            let row = self.row(ca);
            for &cb in &cells[a + 1..] {
                if rng.random::<f64>() < row[cb] {
                    count += 1;
                }
            }
        }
        count
    }

    /// Plain-text form: `n`, then `n` lines of `n` space-separated decimals.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for i in 0..self.n {
            let line: Vec<String> = self.row(i).iter().map(|h| format!("{h}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty graphon file".into(),
        })?;
        let n: usize = first.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("expected resolution, found `{first}`"),
        })?;
        let mut heights = Vec::with_capacity(n * n);
        for _ in 0..n {
            let (line_no, line) = lines.next().ok_or(Error::Parse {
                line: line_no + 1,
                message: format!("expected {n} rows"),
            })?;
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("bad number `{tok}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != n {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {n} values, found {}", row.len()),
                });
            }
            heights.extend(row);
        }
        if let Some((line_no, _)) = lines.next() {
            return Err(Error::Parse {
                line: line_no,
                message: "trailing data after matrix".into(),
            });
        }
        Self::new(n, heights)
    }
}

/// Number of free cells (upper triangle plus diagonal) of an `n × n` grid.
pub fn free_cell_count(n: usize) -> usize {
    n * (n + 1) / 2
}

pub(crate) fn check_same_resolution(a: &StepGraphon, b: &StepGraphon) -> Result<()> {
    if a.resolution() != b.resolution() {
        return Err(Error::ResolutionMismatch {
            left: a.resolution(),
            right: b.resolution(),
        });
    }
    Ok(())
}

/// Greedy row-merging: each row joins the first existing class whose
/// representative (first member) is within `tol` in max-abs distance.
fn count_row_classes(rows: &[&[f64]], tol: f64) -> usize {
    let mut reps: Vec<&[f64]> = Vec::new();
    for &row in rows {
        let joins = reps.iter().any(|rep| {
            rep.iter().zip(row).all(|(a, b)| (a - b).abs() <= tol)
        });
        if !joins {
            reps.push(row);
        }
    }
    reps.len()
}

/// Undirected simple graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    edges: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        AdjacencyMatrix { n, edges: vec![false; n * n] }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for a in 0..n {
            for b in a + 1..n {
                g.set_edge(a, b);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::param("edges", format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a == b {
                return Err(Error::param("edges", format!("self-loop at node {a}")));
            }
            g.set_edge(a, b);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges[a * self.n + b]
    }

    fn set_edge(&mut self, a: usize, b: usize) {
        self.edges[a * self.n + b] = true;
        self.edges[b * self.n + a] = true;
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count() / 2
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n)
            .map(|a| self.edges[a * self.n..(a + 1) * self.n].iter().filter(|&&e| e).count())
            .collect()
    }

    /// Edges as `(a, b)` pairs with `a < b`, in row-major order.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.has_edge(a, b))
            .collect()
    }

    /// Relabels node `a` as `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if perm.len() != self.n || perm.iter().any(|&p| p >= self.n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::param("perm", "not a permutation of the node set"));
        }
        let mut g = Self::empty(self.n);
        for (a, b) in self.edge_list() {
            g.set_edge(perm[a], perm[b]);
        }
        Ok(g)
    }

    /// Block-averages the empirical graphon onto `resolution` blocks after
    /// ordering nodes by degree. Node `a` goes to block
    /// `floor(r(a)·n / N)` where `r(a)` counts nodes of strictly larger
    /// degree, so tied nodes always share a block and the result does not
    /// depend on node labels. Empty blocks are dropped; the returned matrix is
    /// `k × k` with `k ≤ resolution`.
    pub fn coarsened(&self, resolution: usize) -> Vec<Vec<f64>> {
        let n_nodes = self.n;
        let degrees = self.degrees();
        let mut sorted = degrees.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let block: Vec<usize> = degrees
            .iter()
            .map(|d| {
                let larger = sorted.partition_point(|s| s > d);
                larger * resolution / n_nodes
            })
            .collect();
        let mut size = vec![0usize; resolution];
        for &b in &block {
            size[b] += 1;
        }
        let mut sums = vec![0.0f64; resolution * resolution];
        for (a, b) in self.edge_list() {
            let (ba, bb) = (block[a], block[b]);
            sums[ba * resolution + bb] += 1.0;
            sums[bb * resolution + ba] += 1.0;
        }
        let live: Vec<usize> = (0..resolution).filter(|&b| size[b] > 0).collect();
        live.iter()
            .map(|&r| {
                live.iter()
                    .map(|&c| sums[r * resolution + c] / (size[r] * size[c]) as f64)
                    .collect()
            })
            .collect()
    }

    /// Estimator of `feature` on this realized graph. `resolution` is the
    /// analysis grid used by [`GraphFeature::BlockCount`].
    pub fn graph_feature(&self, feature: GraphFeature, resolution: usize) -> Result<f64> {
        feature.validate()?;
        match feature {
            GraphFeature::Density => {
                let pairs = self.pair_count()?;
                Ok(self.edge_count() as f64 / pairs)
            }
            GraphFeature::AverageDegree => {
                self.pair_count()?;
                Ok(2.0 * self.edge_count() as f64 / self.n as f64)
            }
            GraphFeature::BlockCount { tol } => {
                if resolution == 0 {
                    return Err(Error::param("resolution", "must be at least 1"));
                }
                let coarse = self.coarsened(resolution);
                let rows: Vec<&[f64]> = coarse.iter().map(Vec::as_slice).collect();
                Ok(count_row_classes(&rows, tol) as f64)
            }
        }
    }

    fn pair_count(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::param("graph", "density needs at least two nodes"));
        }
        Ok((self.n * (self.n - 1) / 2) as f64)
    }

    /// Edge-list form: `N`, then one `a b` line per edge, `a < b`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for (a, b) in self.edge_list() {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty edge list".into(),
        })?;
        let n: usize = first.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("expected node count, found `{first}`"),
        })?;
        let mut edges = Vec::new();
        for (line_no, line) in lines {
            let parsed: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse { line: line_no, message: format!("bad edge `{line}`") })?;
            match parsed[..] {
                [a, b] if a < b && b < n => edges.push((a, b)),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected `a b` with a < b < {n}, found `{line}`"),
                    })
                }
            }
        }
        Self::from_edges(n, &edges)
    }
}

/// Latent node positions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPositions(Vec<f64>);

impl LatentPositions {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if let Some(bad) = u.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::param("u", format!("latent position {bad} outside [0, 1]")));
        }
        Ok(LatentPositions(u))
    }

    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        LatentPositions((0..n).map(|_| rng.random::<f64>()).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Graph features whose inference is scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphFeature {
    Density,
    BlockCount { tol: f64 },
    AverageDegree,
}

impl GraphFeature {
    pub fn block_count() -> Self {
        GraphFeature::BlockCount { tol: DEFAULT_BLOCK_TOL }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GraphFeature::Density => "density",
            GraphFeature::BlockCount { .. } => "blocks",
            GraphFeature::AverageDegree => "average_degree",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GraphFeature::BlockCount { tol } if !(tol >= 0.0) => {
                Err(Error::param("tol", format!("block tolerance {tol} must be non-negative")))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> AdjacencyMatrix {
        AdjacencyMatrix::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn path3() -> AdjacencyMatrix {
        AdjacencyMatrix::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn flat_constructors() {
        let w = StepGraphon::flat(20, 0.5).unwrap();
        assert_eq!(w.resolution(), 20);
        assert!(w.heights().iter().all(|&h| h == 0.5));
        assert!(StepGraphon::flat(1, 0.0).unwrap().heights() == [0.0]);
        assert!(StepGraphon::flat(3, 1.0).unwrap().heights().iter().all(|&h| h == 1.0));
        assert!(StepGraphon::flat(0, 0.5).is_err());
        assert!(StepGraphon::flat(2, 1.5).is_err());
        assert!(StepGraphon::flat(2, -0.1).is_err());
        assert!(StepGraphon::flat(2, f64::NAN).is_err());
    }

    #[test]
    fn sbm_expansion() {
        let w = StepGraphon::sbm(&[vec![0.5]], 4).unwrap();
        assert_eq!(w, StepGraphon::flat(4, 0.5).unwrap());

        let w = StepGraphon::sbm(&[vec![0.9, 0.1], vec![0.1, 0.9]], 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if (i < 2) == (j < 2) { 0.9 } else { 0.1 };
                assert_eq!(w.get(i, j), expected, "cell ({i},{j})");
            }
        }
        assert!(StepGraphon::sbm(&[vec![0.9, 0.2], vec![0.1, 0.9]], 4).is_err());
        assert!(StepGraphon::sbm(&[vec![0.9, 0.1], vec![0.1, 0.9]], 5).is_err());
    }

    #[test]
    fn sbm_density_is_block_mean() {
        let blocks = vec![vec![0.7, 0.2, 0.1], vec![0.2, 0.4, 0.3], vec![0.1, 0.3, 0.9]];
        let w = StepGraphon::sbm(&blocks, 6).unwrap();
        let mean: f64 = blocks.iter().flatten().sum::<f64>() / 9.0;
        assert!((w.density() - mean).abs() < 1e-15);
    }

    #[test]
    fn empirical_graphon_transcribes_adjacency() {
        let w = StepGraphon::empirical(&triangle());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(w.get(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
        let w = StepGraphon::empirical(&AdjacencyMatrix::empty(4));
        assert!(w.heights().iter().all(|&h| h == 0.0));

        let w = StepGraphon::empirical(&path3());
        let ones = [(0, 1), (1, 0), (1, 2), (2, 1)];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(w.get(i, j), if ones.contains(&(i, j)) { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn model_features() {
        let flat = StepGraphon::flat(5, 0.5).unwrap();
        assert_eq!(flat.model_feature(GraphFeature::Density, 0).unwrap(), 0.5);
        assert_eq!(flat.model_feature(GraphFeature::BlockCount { tol: 0.0 }, 0).unwrap(), 1.0);
        assert_eq!(flat.model_feature(GraphFeature::AverageDegree, 11).unwrap(), 5.0);
        assert!(flat.model_feature(GraphFeature::AverageDegree, 0).is_err());
        assert!(flat.model_feature(GraphFeature::BlockCount { tol: -1.0 }, 0).is_err());

        let sbm = StepGraphon::sbm(&[vec![0.9, 0.1], vec![0.1, 0.9]], 4).unwrap();
        assert_eq!(sbm.model_feature(GraphFeature::BlockCount { tol: 0.05 }, 0).unwrap(), 2.0);
        // a tolerance wider than the block contrast merges everything
        assert_eq!(sbm.block_count(0.8), 1);
    }

    #[test]
    fn graph_features() {
        assert_eq!(AdjacencyMatrix::complete(4).graph_feature(GraphFeature::Density, 1).unwrap(), 1.0);
        assert!((path3().graph_feature(GraphFeature::Density, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(AdjacencyMatrix::empty(10).graph_feature(GraphFeature::AverageDegree, 1).unwrap(), 0.0);
        assert_eq!(triangle().graph_feature(GraphFeature::AverageDegree, 1).unwrap(), 2.0);
        assert!(AdjacencyMatrix::empty(1).graph_feature(GraphFeature::Density, 1).is_err());
    }

    #[test]
    fn empirical_density_relation() {
        // mean of empirical-graphon heights = 2E/N², graph density = 2E/(N(N-1))
        let g = AdjacencyMatrix::from_edges(5, &[(0, 1), (1, 2), (3, 4), (0, 4)]).unwrap();
        let e = g.edge_count() as f64;
        let n = 5.0;
        let emp = StepGraphon::empirical(&g).density();
        assert!((emp - 2.0 * e / (n * n)).abs() < 1e-15);
        let dens = g.graph_feature(GraphFeature::Density, 5).unwrap();
        assert!((dens - 2.0 * e / (n * (n - 1.0))).abs() < 1e-15);
        assert!((emp - dens * (n - 1.0) / n).abs() < 1e-15);
    }

    #[test]
    fn block_count_on_two_cliques() {
        // two disjoint 4-cliques: degree ties keep each clique whole
        let mut edges = Vec::new();
        for base in [0, 4] {
            for a in 0..4 {
                for b in a + 1..4 {
                    edges.push((base + a, base + b));
                }
            }
        }
        let g = AdjacencyMatrix::from_edges(8, &edges).unwrap();
        // all degrees equal, so everything lands in one block
        assert_eq!(g.graph_feature(GraphFeature::BlockCount { tol: 0.05 }, 2).unwrap(), 1.0);
        // a star has a hub of distinct degree
        let star = AdjacencyMatrix::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let coarse = star.coarsened(5);
        assert_eq!(coarse.len(), 2);
        assert_eq!(star.graph_feature(GraphFeature::BlockCount { tol: 0.05 }, 5).unwrap(), 2.0);
    }

    #[test]
    fn sampling_extremes() {
        let (g, u) = StepGraphon::flat(3, 1.0).unwrap().sample_graph(5, 9).unwrap();
        assert_eq!(g, AdjacencyMatrix::complete(5));
        assert_eq!(u.as_slice().len(), 5);
        let (g, _) = StepGraphon::flat(3, 0.0).unwrap().sample_graph(5, 9).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert!(StepGraphon::flat(3, 0.5).unwrap().sample_graph(0, 1).is_err());
    }

    #[test]
    fn cell_of_clamps_upper_boundary() {
        let w = StepGraphon::flat(4, 0.5).unwrap();
        assert_eq!(w.cell_of(0.0), 0);
        assert_eq!(w.cell_of(0.25), 1);
        assert_eq!(w.cell_of(0.9999), 3);
        assert_eq!(w.cell_of(1.0), 3);
    }

    #[test]
    fn edge_count_path_matches_materialized_sampling() {
        let w = StepGraphon::sbm(&[vec![0.8, 0.3], vec![0.3, 0.6]], 4).unwrap();
        let mut r1 = crate::seed::rng(5);
        let mut r2 = crate::seed::rng(5);
        let latent = LatentPositions::sample(30, &mut r1);
        let _ = LatentPositions::sample(30, &mut r2);
        let cells: Vec<usize> = latent.as_slice().iter().map(|&u| w.cell_of(u)).collect();
        let g = w.sample_edges(&latent, &mut r1);
        assert_eq!(g.edge_count(), w.sample_edge_count(&cells, &mut r2));
    }

    #[test]
    fn text_formats_roundtrip_and_reject_bad_input() {
        let w = StepGraphon::sbm(&[vec![0.123456789, 0.1], vec![0.1, 0.9]], 4).unwrap();
        assert_eq!(StepGraphon::from_text(&w.to_text()).unwrap(), w);
        assert!(matches!(
            StepGraphon::from_text("2\n0.1 0.2\n0.3 0.4\n"),
            Err(Error::Asymmetric { .. })
        ));
        assert!(matches!(StepGraphon::from_text("2\n0.1 0.2\n"), Err(Error::Parse { .. })));
        assert!(matches!(StepGraphon::from_text("1\n1.5\n"), Err(Error::HeightOutOfRange { .. })));

        let g = path3();
        assert_eq!(g.to_text(), "3\n0 1\n1 2\n");
        assert_eq!(AdjacencyMatrix::from_text(&g.to_text()).unwrap(), g);
        assert!(AdjacencyMatrix::from_text("3\n1 0\n").is_err());
        assert!(AdjacencyMatrix::from_text("3\n0 3\n").is_err());
    }

    #[test]
    fn permutation_validation() {
        let g = path3();
        assert!(g.permuted(&[0, 0, 1]).is_err());
        let p = g.permuted(&[2, 1, 0]).unwrap();
        assert_eq!(p.edge_list(), vec![(0, 1), (1, 2)]);
    }
}
