//! Seeded random and structured graph families, plus the densification and
//! threshold sweeps built on top of them.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::cut::{lambda_s_max, random_partition, spectral_partition, TREVISAN_TAU};
use crate::error::{Error, Result};
use crate::graph::{is_bipartite, is_connected, laplacian, Graph};
use crate::kron::{sparsify, spectral_distance_from_spectra};
use crate::linalg::{jacobi_eigvals, Matrix};
use crate::rng::{derive_seed, seeded};

/// Random draws averaged per densification step.
pub const RANDOM_CUT_DRAWS: u64 = 10;

const EPSILON_GRID_MIN: f64 = 1e-4;
const EPSILON_GRID_MAX: f64 = 1.0;

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn unit_graph(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Graph> {
    let mut a = Matrix::zeros(n, n);
    for (i, j) in edges {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    Graph::new(a)
}

/// `rows × cols` 4-neighbour lattice with unit weights; node `r·cols + c`.
pub fn gen_grid(rows: usize, cols: usize) -> Result<Graph> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs both sides ≥ 2, got {rows}×{cols}"
        )));
    }
    let mut edges = Vec::new();
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
    unit_graph(rows * cols, edges)
}

/// Cycle on `n` nodes. `n = 2` gives a single edge.
pub fn gen_ring(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("ring needs n ≥ 2, got {n}")));
    }
    unit_graph(n, (0..n).map(|i| (i, (i + 1) % n)).filter(|(i, j)| i != j))
}

/// Stochastic block model: each pair is joined with probability `p_in`
/// inside a block and `p_out` across blocks.
pub fn gen_sbm(block_sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> Result<Graph> {
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return Err(Error::InvalidArgument("blocks must be non-empty".into()));
    }
    check_probability("p_in", p_in)?;
    check_probability("p_out", p_out)?;
    let block: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = block.len();
    let mut r = seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block[i] == block[j] { p_in } else { p_out };
            if r.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    unit_graph(n, edges)
}

/// `G(n, p)`.
pub fn gen_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_probability("p", p)?;
    let mut r = seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    unit_graph(n, edges)
}

/// Equal-size communities (sizes differ by at most one), each made connected
/// by a random spanning tree, then densified like an SBM.
pub fn gen_community(n: usize, n_communities: usize, p_in: f64, p_out: f64, seed: u64) -> Result<Graph> {
    if n_communities == 0 || n_communities > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 ≤ communities ≤ n, got {n_communities} for n = {n}"
        )));
    }
    check_probability("p_in", p_in)?;
    check_probability("p_out", p_out)?;
    let base = n / n_communities;
    let extra = n % n_communities;
    let mut community = Vec::with_capacity(n);
    for c in 0..n_communities {
        community.extend(std::iter::repeat_n(c, base + usize::from(c < extra)));
    }

    let mut r = seeded(seed);
    let mut a = Matrix::zeros(n, n);
    let mut start = 0;
    for c in 0..n_communities {
        let size = base + usize::from(c < extra);
        let mut order: Vec<usize> = (start..start + size).collect();
        order.shuffle(&mut r);
        for k in 1..order.len() {
            let parent = order[r.random_range(0..k)];
            a[(order[k], parent)] = 1.0;
            a[(parent, order[k])] = 1.0;
        }
        start += size;
    }
    for i in 0..n {
        for j in i + 1..n {
            let p = if community[i] == community[j] { p_in } else { p_out };
            if r.random_bool(p) {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    Graph::new(a)
}

/// Random geometric sensor network: `n` uniform points in the unit square,
/// each joined to its `k` nearest neighbours (union of both directions) with
/// weight `exp(−‖p_i − p_j‖² / σ²)`. Without `sigma`, σ is the mean distance
/// to the `k` nearest neighbours.
pub fn gen_sensor(n: usize, k: usize, sigma: Option<f64>, seed: u64) -> Result<Graph> {
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("need 1 ≤ k < n, got k = {k}, n = {n}")));
    }
    if let Some(s) = sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {s}")));
        }
    }
    let mut r = seeded(seed);
    let points: Vec<(f64, f64)> = (0..n).map(|_| (r.random::<f64>(), r.random::<f64>())).collect();
    let dist = |i: usize, j: usize| {
        let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
        (dx * dx + dy * dy).sqrt()
    };

    let mut neighbours = Vec::with_capacity(n);
    let mut knn_total = 0.0;
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist(i, j), j)).collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        others.truncate(k);
        knn_total += others.iter().map(|(d, _)| d).sum::<f64>();
        neighbours.push(others);
    }
    let sigma = match sigma {
        Some(s) => s,
        None => {
            let mean = knn_total / (n * k) as f64;
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
    };
    let mut a = Matrix::zeros(n, n);
    for (i, list) in neighbours.iter().enumerate() {
        for &(d, j) in list {
            // Keep coincident or far-apart pairs as genuine edges.
            let w = (-(d * d) / (sigma * sigma)).exp().max(f64::MIN_POSITIVE);
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
    }
    Graph::new(a)
}

/// One point of the densification sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensifyRecord {
    /// Edges present over `n(n−1)/2`.
    pub density: f64,
    pub spectral_gamma: f64,
    /// Mean cut fraction of [`RANDOM_CUT_DRAWS`] random partitions.
    pub random_gamma: f64,
    /// `λ^s_max / 2`.
    pub upper_bound: f64,
    /// `1 − τ`: below this the spectral cut is not guaranteed to beat a random one.
    pub threshold: f64,
}

/// Adds random absent unit edges to a connected bipartite graph in `steps − 1`
/// even batches until it is complete, recording cut statistics before the
/// first batch and after each one.
pub fn densify_sweep(g: &Graph, steps: usize, seed: u64) -> Result<Vec<DensifyRecord>> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!(
            "densification needs at least 2 steps, got {steps}"
        )));
    }
    if !is_bipartite(g) {
        return Err(Error::InvalidGraph(
            "densification must start from a bipartite graph".into(),
        ));
    }
    if g.n() < 2 || !is_connected(g) {
        return Err(Error::InvalidGraph(
            "densification must start from a connected graph".into(),
        ));
    }
    let n = g.n();
    let pairs = n * (n - 1) / 2;
    let mut absent: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| g.weight(i, j) == 0.0)
        .collect();
    absent.shuffle(&mut seeded(seed));

    let mut a = g.adjacency().clone();
    let mut added = 0;
    let mut records = Vec::with_capacity(steps);
    for step in 0..steps {
        let target = (absent.len() * step + (steps - 1) / 2) / (steps - 1);
        for &(i, j) in &absent[added..target] {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        added = target;
        let current = Graph::new(a.clone())?;
        let spectral = spectral_partition(&current)?;
        let step_seed = derive_seed(seed, step as u64 + 1);
        let random_gamma = (0..RANDOM_CUT_DRAWS)
            .map(|d| random_partition(&current, derive_seed(step_seed, d)).gamma)
            .sum::<f64>()
            / RANDOM_CUT_DRAWS as f64;
        let lambda = match spectral.lambda_s_max {
            Some(l) => l,
            None => lambda_s_max(&current)?,
        };
        records.push(DensifyRecord {
            density: current.edge_count() as f64 / pairs as f64,
            spectral_gamma: spectral.gamma,
            random_gamma,
            upper_bound: lambda / 2.0,
            threshold: 1.0 - TREVISAN_TAU,
        });
    }
    Ok(records)
}

/// One point of the threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    pub spectral_distance: f64,
    pub edge_count: usize,
}

/// `count` log-spaced thresholds covering `[1e-4, 1]`.
pub fn log_epsilon_grid(count: usize) -> Vec<f64> {
    let (lo, hi) = (EPSILON_GRID_MIN.log10(), EPSILON_GRID_MAX.log10());
    match count {
        0 => Vec::new(),
        1 => vec![EPSILON_GRID_MIN],
        _ => (0..count)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (count - 1) as f64))
            .collect(),
    }
}

/// Twenty log-spaced thresholds in `[1e-4, 1]`.
pub fn default_epsilon_grid() -> Vec<f64> {
    log_epsilon_grid(20)
}

/// Sparsifies `g` at every threshold and measures the spectral distance to
/// the original Laplacian over its `k` smallest nonzero eigenvalues.
pub fn epsilon_sweep(g: &Graph, eps_grid: &[f64], k: usize) -> Result<Vec<EpsilonRecord>> {
    if !is_connected(g) {
        return Err(Error::InvalidGraph("threshold sweep needs a connected graph".into()));
    }
    let reference = jacobi_eigvals(&laplacian(g))?;
    eps_grid
        .iter()
        .map(|&epsilon| {
            let sparse = Graph::new(sparsify(g.adjacency(), epsilon)?)?;
            let values = jacobi_eigvals(&laplacian(&sparse))?;
            Ok(EpsilonRecord {
                epsilon,
                spectral_distance: spectral_distance_from_spectra(&reference, &values, k)?,
                edge_count: sparse.edge_count(),
            })
        })
        .collect()
}
