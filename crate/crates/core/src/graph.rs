//! Undirected weighted graphs stored as dense symmetric adjacency matrices.
//!
//! Degree convention: `d_i = Σ_j a_ij`, with a self-loop weight `a_ii` counted
//! once. Under this convention the plain Laplacian `D − A` has zero row sums
//! even with loops, and the loopy Laplacian `D − A + 2·diag(A)` has row sums
//! `2·a_ii`, which is what lets the loop weights be recovered after Kron
//! reduction.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Edge weights at or below this are treated as absent by traversal code.
pub const EDGE_TOL: f64 = 1e-15;

const GRAPH_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Matrix,
}

impl Graph {
    pub fn new(adjacency: Matrix) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::InvalidGraph(format!(
                "adjacency must be square, got {:?}",
                adjacency.shape()
            )));
        }
        if !adjacency.is_finite() {
            return Err(Error::InvalidGraph("non-finite weight".into()));
        }
        if adjacency.data().iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidGraph("negative weight".into()));
        }
        let asym = adjacency.asymmetry();
        if asym > GRAPH_SYMMETRY_TOL * adjacency.max_abs().max(1.0) {
            return Err(Error::InvalidGraph(format!("asymmetric adjacency ({asym:e})")));
        }
        Ok(Graph { adjacency })
    }

    pub fn empty(n: usize) -> Self {
        Graph {
            adjacency: Matrix::zeros(n, n),
        }
    }

    /// Builds a graph from undirected edges; repeated pairs accumulate weight.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut a = Matrix::zeros(n, n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidGraph(format!("bad weight {w} on ({i}, {j})")));
            }
            a[(i, j)] += w;
            if i != j {
                a[(j, i)] += w;
            }
        }
        Graph::new(a)
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn into_adjacency(self) -> Matrix {
        self.adjacency
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    /// Edges `(i, j, w)` with `i < j` and `w > 0`, row-major order. Self-loops
    /// are not included.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for (j, &w) in self.adjacency.row(i).iter().enumerate().skip(i + 1) {
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|i| self.adjacency.row(i)[i + 1..].iter().filter(|&&w| w > 0.0).count())
            .sum()
    }

    /// `Σ_ij a_ij` over all ordered pairs (each undirected edge twice, loops once).
    pub fn total_weight(&self) -> f64 {
        self.adjacency.data().iter().sum()
    }

    pub fn has_edges(&self) -> bool {
        self.adjacency.data().iter().any(|&w| w > 0.0)
    }

    pub fn has_self_loops(&self) -> bool {
        self.adjacency.diag().iter().any(|&w| w != 0.0)
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.adjacency.row(i).iter().sum()).collect()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency
            .row(i)
            .iter()
            .enumerate()
            .filter(move |&(j, &w)| j != i && w > EDGE_TOL)
            .map(|(j, _)| j)
    }

    /// Same graph with every weight multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Graph> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {c}")));
        }
        Graph::new(self.adjacency.scale(c))
    }

    /// Relabels nodes so that new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n() {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        Graph::new(self.adjacency.select(perm, perm))
    }
}

/// `L = D − A`.
pub fn laplacian(g: &Graph) -> Matrix {
    let mut l = g.adjacency().scale(-1.0);
    for (i, d) in g.degrees().into_iter().enumerate() {
        l[(i, i)] += d;
    }
    l
}

/// `D^{-1/2} A D^{-1/2}`, with zero-degree nodes normalized by 1.
pub fn normalized_adjacency(g: &Graph) -> Matrix {
    let inv_sqrt: Vec<f64> = g
        .degrees()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 })
        .collect();
    let n = g.n();
    let mut out = g.adjacency().clone();
    for i in 0..n {
        let row = out.row_mut(i);
        for (j, x) in row.iter_mut().enumerate() {
            *x *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    out
}

/// `L_s = I − D^{-1/2} A D^{-1/2}`. Isolated nodes get a diagonal entry of 1.
pub fn sym_laplacian(g: &Graph) -> Matrix {
    let mut ls = normalized_adjacency(g).scale(-1.0);
    for i in 0..g.n() {
        ls[(i, i)] += 1.0;
    }
    ls.symmetrized()
}

/// `Q = D − A + 2·diag(A)`.
pub fn loopy_laplacian(g: &Graph) -> Matrix {
    let mut q = laplacian(g);
    for i in 0..g.n() {
        q[(i, i)] += 2.0 * g.weight(i, i);
    }
    q
}

/// Connected-component label per node, labels assigned in order of first node.
pub fn components(g: &Graph) -> (usize, Vec<usize>) {
    let n = g.n();
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for v in g.neighbors(u) {
                if label[v] == usize::MAX {
                    label[v] = count;
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    (count, label)
}

pub fn component_count(g: &Graph) -> usize {
    components(g).0
}

/// True iff the graph has a single connected component. The empty graph on
/// zero nodes counts as connected.
pub fn is_connected(g: &Graph) -> bool {
    component_count(g) <= 1
}

/// Proper 2-colouring (`true`/`false` per node) if one exists.
pub fn two_coloring(g: &Graph) -> Option<Vec<bool>> {
    let n = g.n();
    let mut color: Vec<Option<bool>> = vec![None; n];
    let mut queue = VecDeque::new();
    for start in 0..n {
        if color[start].is_some() {
            continue;
        }
        color[start] = Some(true);
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            let cu = color[u].expect("coloured before enqueue");
            if g.weight(u, u) > EDGE_TOL {
                return None;
            }
            for v in g.neighbors(u) {
                match color[v] {
                    None => {
                        color[v] = Some(!cu);
                        queue.push_back(v);
                    }
                    Some(cv) if cv == cu => return None,
                    Some(_) => {}
                }
            }
        }
    }
    Some(color.into_iter().map(|c| c.expect("all visited")).collect())
}

pub fn is_bipartite(g: &Graph) -> bool {
    two_coloring(g).is_some()
}

/// Result of [`disjoint_union`]: block-diagonal graph, stacked features and
/// node offsets (`offsets[k]..offsets[k + 1]` are the nodes of graph `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct Union {
    pub graph: Graph,
    pub features: Matrix,
    pub offsets: Vec<usize>,
}

pub fn disjoint_union(graphs: &[Graph], features: &[Matrix]) -> Result<Union> {
    if graphs.len() != features.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} graphs but {} feature matrices",
            graphs.len(),
            features.len()
        )));
    }
    let width = features.first().map_or(0, Matrix::cols);
    let mut offsets = Vec::with_capacity(graphs.len() + 1);
    offsets.push(0);
    for (g, x) in graphs.iter().zip(features) {
        if x.rows() != g.n() {
            return Err(Error::DimensionMismatch(format!(
                "feature rows {} for a graph of {} nodes",
                x.rows(),
                g.n()
            )));
        }
        if x.cols() != width {
            return Err(Error::DimensionMismatch(format!(
                "feature width {} differs from {width}",
                x.cols()
            )));
        }
        offsets.push(offsets.last().unwrap() + g.n());
    }
    let total = *offsets.last().unwrap();
    let mut a = Matrix::zeros(total, total);
    let mut data = Vec::with_capacity(total * width);
    for (k, (g, x)) in graphs.iter().zip(features).enumerate() {
        let off = offsets[k];
        for i in 0..g.n() {
            a.row_mut(off + i)[off..off + g.n()].copy_from_slice(g.adjacency().row(i));
        }
        data.extend_from_slice(x.data());
    }
    Ok(Union {
        graph: Graph::new(a)?,
        features: Matrix::from_vec(total, width, data)?,
        offsets,
    })
}
