//! Kron reduction of a Laplacian onto a subset of nodes, recovery of the
//! coarsened adjacency, threshold sparsification and spectral diagnostics.

use crate::error::{Error, Result};
use crate::graph::{laplacian, Graph};
use crate::linalg::{
    jacobi_eigh, jacobi_eigvals, pseudo_inverse, solve_sym, Matrix, Solve, DEFAULT_PIVOT_TOL, DEFAULT_RANK_TOL,
};

/// Sparsification threshold used throughout the coarsening pipeline.
pub const DEFAULT_EPSILON: f64 = 1e-2;

/// Eigenvalues at or below this count as zero in spectral comparisons.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;

/// Off-diagonal adjacency entries more negative than this (relative to the
/// Laplacian scale) mean the input was not a Laplacian.
const NEGATIVE_WEIGHT_TOL: f64 = 1e-8;

/// Schur complement of `l` onto `keep`:
/// `L₊₊ − L₊₋ L₋₋⁻¹ L₋₊`.
///
/// `L₋₋` is applied through a linear solve; when it is singular (a component
/// lies entirely in the dropped set) the generalized inverse is used instead.
/// The result is symmetrized to absorb rounding drift.
pub fn kron_reduce(l: &Matrix, keep: &[usize]) -> Result<Matrix> {
    if !l.is_square() {
        return Err(Error::DimensionMismatch(format!("Laplacian of shape {:?}", l.shape())));
    }
    let n = l.rows();
    let drop = complement(keep, n)?;
    if keep.is_empty() {
        return Err(Error::InvalidArgument("nothing to keep".into()));
    }
    if drop.is_empty() {
        return Err(Error::InvalidArgument("nothing to drop".into()));
    }
    let l_kk = l.select(keep, keep);
    let l_kd = l.select(keep, &drop);
    let l_dd = l.select(&drop, &drop);
    let l_dk = l.select(&drop, keep);

    let correction = match solve_sym(&l_dd, &l_dk, DEFAULT_PIVOT_TOL)? {
        Solve::Solved(x) => l_kd.matmul(&x)?,
        Solve::Singular => {
            let pinv = pseudo_inverse(&l_dd, DEFAULT_RANK_TOL)?;
            l_kd.matmul(&pinv)?.matmul(&l_dk)?
        }
    };
    Ok(l_kk.sub(&correction)?.symmetrized())
}

/// Sorted complement of `keep` in `0..n`, validating that `keep` is strictly
/// increasing and in range.
fn complement(keep: &[usize], n: usize) -> Result<Vec<usize>> {
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "keep indices must be strictly increasing".into(),
        ));
    }
    if let Some(&last) = keep.last() {
        if last >= n {
            return Err(Error::InvalidArgument(format!(
                "keep index {last} out of range for {n} nodes"
            )));
        }
    }
    let mut mask = vec![false; n];
    keep.iter().for_each(|&i| mask[i] = true);
    Ok((0..n).filter(|&i| !mask[i]).collect())
}

fn off_diagonal_adjacency(l: &Matrix) -> Result<Matrix> {
    if !l.is_square() {
        return Err(Error::DimensionMismatch(format!("Laplacian of shape {:?}", l.shape())));
    }
    let l = l.symmetrized();
    let n = l.rows();
    let scale = l.max_abs().max(1.0);
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = -l[(i, j)];
            if w < -NEGATIVE_WEIGHT_TOL * scale {
                return Err(Error::InvalidLaplacian(format!(
                    "positive off-diagonal entry {} at ({i}, {j})",
                    l[(i, j)]
                )));
            }
            a[(i, j)] = w.max(0.0);
        }
    }
    Ok(a)
}

/// Adjacency of a loop-free graph from its Laplacian: off-diagonal weights are
/// `−L_ij`, the diagonal is zero. Slightly negative weights from rounding are
/// clamped to zero.
pub fn adjacency_from_laplacian(l: &Matrix) -> Result<Matrix> {
    off_diagonal_adjacency(l)
}

/// Adjacency from a loopy Laplacian `Q = D − A + 2·diag(A)`. Off-diagonal
/// weights are `−Q_ij`; loop weights are half the row sums of `Q`.
pub fn adjacency_from_loopy_laplacian(q: &Matrix) -> Result<Matrix> {
    let mut a = off_diagonal_adjacency(q)?;
    let q = q.symmetrized();
    let scale = q.max_abs().max(1.0);
    for i in 0..q.rows() {
        let loop_weight = 0.5 * q.row(i).iter().sum::<f64>();
        if loop_weight < -NEGATIVE_WEIGHT_TOL * scale {
            return Err(Error::InvalidLaplacian(format!("negative row sum at {i}")));
        }
        a[(i, i)] = loop_weight.max(0.0);
    }
    Ok(a)
}

/// Zeroes every entry with `|a_ij| ≤ ε` and keeps the rest verbatim.
pub fn sparsify(a: &Matrix, epsilon: f64) -> Result<Matrix> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    Ok(a.map(|w| if w.abs() <= epsilon { 0.0 } else { w }))
}

/// Mean relative deviation over the `k` smallest nonzero Laplacian
/// eigenvalues: `(1/K) Σ |λ̄_k − λ_k| / λ_k`.
///
/// Eigenvalues are paired by rank: if the reference `l` has `z` zero
/// eigenvalues, ranks `z+1 ..= z+K` (ascending) are compared in both spectra.
/// When `l_bar` is the same graph with edges removed this is exactly the
/// "K smallest nonzero" pairing while it stays connected, and stays defined
/// (with `λ̄_k = 0` entries) when it does not.
pub fn spectral_distance(l: &Matrix, l_bar: &Matrix, k: usize) -> Result<f64> {
    if l.shape() != l_bar.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            l.shape(),
            l_bar.shape()
        )));
    }
    let reference = jacobi_eigvals(l)?;
    let other = jacobi_eigvals(l_bar)?;
    spectral_distance_from_spectra(&reference, &other, k)
}

/// [`spectral_distance`] on precomputed spectra (any order).
pub fn spectral_distance_from_spectra(reference: &[f64], other: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if reference.len() != other.len() {
        return Err(Error::DimensionMismatch("spectra of different sizes".into()));
    }
    let mut lam = reference.to_vec();
    let mut bar = other.to_vec();
    lam.sort_by(f64::total_cmp);
    bar.sort_by(f64::total_cmp);
    let zeros = lam.iter().take_while(|&&x| x <= ZERO_EIGENVALUE_TOL).count();
    let available = lam.len() - zeros;
    if available < k {
        return Err(Error::InsufficientSpectrum {
            needed: k,
            found: available,
        });
    }
    let sum: f64 = (zeros..zeros + k)
        .map(|r| (bar[r].max(0.0) - lam[r]).abs() / lam[r])
        .sum();
    Ok(sum / k as f64)
}

/// Number of eigenvalues above [`ZERO_EIGENVALUE_TOL`].
pub fn nonzero_eigenvalue_count(values: &[f64]) -> usize {
    values.iter().filter(|&&x| x > ZERO_EIGENVALUE_TOL).count()
}

/// Default `K`: ten, or fewer if the reference spectrum has fewer nonzero values.
pub fn default_k(reference: &[f64]) -> usize {
    nonzero_eigenvalue_count(reference).min(10)
}

/// Per-eigenvalue outcome of [`perturbation_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    /// Eigenvalues of `A`, descending.
    pub alpha: Vec<f64>,
    /// Eigenvalues of the sparsified `Ā = A + Q`, descending.
    pub alpha_bar: Vec<f64>,
    /// `α_i + u_iᵀ Q u_i`.
    pub bound: Vec<f64>,
    /// Largest `ᾱ_i − bound_i`; the bound holds when this is ≤ tolerance.
    pub worst_excess: f64,
    pub worst_index: usize,
    /// Weyl's rigorous bound `ᾱ_i ≤ α_i + λ_max(Q)` holds for every `i`.
    pub weyl_holds: bool,
}

/// Tolerance applied by [`perturbation_bound_check`].
pub const PERTURBATION_TOL: f64 = 1e-6;

/// First-order eigenvalue bound for threshold sparsification: with
/// `q_ij = −a_ij` where `|a_ij| ≤ ε`, compares each `ᾱ_i` against
/// `α_i + u_iᵀ Q u_i`, pairing eigenvalues by descending rank.
pub fn perturbation_bound(a: &Matrix, epsilon: f64) -> Result<PerturbationReport> {
    let sparse = sparsify(a, epsilon)?;
    let q = sparse.sub(a)?;
    let spec = jacobi_eigh(&a.symmetrized())?;
    let alpha_bar = jacobi_eigvals(&sparse.symmetrized())?;
    let q_max = jacobi_eigvals(&q.symmetrized())?.first().copied().unwrap_or(0.0);
    let u = spec.vectors.as_ref().expect("vectors requested");
    let n = a.rows();

    let mut bound = Vec::with_capacity(n);
    for i in 0..n {
        let ui = u.col(i);
        let qu = q.mul_vec(&ui)?;
        bound.push(spec.values[i] + crate::linalg::dot(&ui, &qu));
    }
    let (worst_index, worst_excess) =
        alpha_bar
            .iter()
            .zip(&bound)
            .map(|(ab, b)| ab - b)
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |best, (i, e)| if e > best.1 { (i, e) } else { best },
            );
    let weyl_holds = alpha_bar
        .iter()
        .zip(&spec.values)
        .all(|(ab, al)| *ab <= al + q_max + PERTURBATION_TOL);
    Ok(PerturbationReport {
        alpha: spec.values.clone(),
        alpha_bar,
        bound,
        worst_excess: if n == 0 { 0.0 } else { worst_excess },
        worst_index,
        weyl_holds,
    })
}

/// True when `ᾱ_i ≤ α_i + u_iᵀQu_i + 1e-6` for every eigenvalue.
pub fn perturbation_bound_check(a: &Matrix, epsilon: f64) -> Result<bool> {
    Ok(perturbation_bound(a, epsilon)?.worst_excess <= PERTURBATION_TOL)
}

/// Kron-reduces `g` onto `keep` and returns the coarsened graph. Graphs with
/// self-loops go through the loopy Laplacian so loop weights survive.
pub fn kron_coarsen(g: &Graph, keep: &[usize]) -> Result<Graph> {
    let adjacency = if g.has_self_loops() {
        let q = crate::graph::loopy_laplacian(g);
        adjacency_from_loopy_laplacian(&kron_reduce(&q, keep)?)?
    } else {
        adjacency_from_laplacian(&kron_reduce(&laplacian(g), keep)?)?
    };
    Graph::new(adjacency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{is_connected, loopy_laplacian};

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).unwrap().max_abs()
    }

    #[test]
    fn kron_on_three_path() {
        // L₊₊ = diag(1, 1), L₊₋ = (−1, −1)ᵀ, L₋₋ = 2 → L₊₊ − ½·[[1,1],[1,1]].
        let r = kron_reduce(&laplacian(&path(3)), &[0, 2]).unwrap();
        assert!(max_diff(&r, &Matrix::from_rows(&[[0.5, -0.5], [-0.5, 0.5]])) < 1e-12);
        let a = adjacency_from_laplacian(&r).unwrap();
        assert!((a[(0, 1)] - 0.5).abs() < 1e-12);
        assert_eq!(a[(0, 0)], 0.0);
    }

    #[test]
    fn kron_on_four_cycle_opposite_nodes() {
        // L₋₋ = 2·I, L₊₋ = −1 everywhere → L₊₊ − ½·[[2,2],[2,2]].
        let r = kron_reduce(&laplacian(&cycle(4)), &[0, 2]).unwrap();
        assert!(max_diff(&r, &Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]])) < 1e-12);
    }

    #[test]
    fn kron_drops_isolated_node_via_pseudo_inverse() {
        let g = Graph::from_edges(3, &[(0, 1, 2.0)]).unwrap();
        let r = kron_reduce(&laplacian(&g), &[0, 1]).unwrap();
        assert!(max_diff(&r, &Matrix::from_rows(&[[2.0, -2.0], [-2.0, 2.0]])) < 1e-12);
    }

    #[test]
    fn kron_on_disconnected_graph() {
        // Second component lies entirely in the dropped set.
        let g = Graph::from_edges(5, &[(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)]).unwrap();
        let r = kron_reduce(&laplacian(&g), &[0, 2]).unwrap();
        assert!(max_diff(&r, &Matrix::from_rows(&[[0.5, -0.5], [-0.5, 0.5]])) < 1e-12);
    }

    #[test]
    fn kron_rejects_degenerate_keep_sets() {
        let l = laplacian(&path(3));
        assert!(kron_reduce(&l, &[]).is_err());
        assert!(kron_reduce(&l, &[0, 1, 2]).is_err());
        assert!(kron_reduce(&l, &[2, 0]).is_err());
        assert!(kron_reduce(&l, &[0, 3]).is_err());
    }

    #[test]
    fn adjacency_recovery() {
        let a = adjacency_from_laplacian(&Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]])).unwrap();
        assert_eq!(a, Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
        let g = Graph::from_edges(4, &[(0, 1, 0.25), (1, 2, 3.0), (0, 3, 1.5)]).unwrap();
        assert_eq!(&adjacency_from_laplacian(&laplacian(&g)).unwrap(), g.adjacency());
        let bad = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        assert!(matches!(
            adjacency_from_laplacian(&bad),
            Err(Error::InvalidLaplacian(_))
        ));
        let drift = Matrix::from_rows(&[[0.0, 1e-13], [1e-13, 0.0]]);
        assert_eq!(adjacency_from_laplacian(&drift).unwrap(), Matrix::zeros(2, 2));
    }

    #[test]
    fn loopy_round_trip() {
        let g = Graph::new(Matrix::from_rows(&[[1.5, 2.0, 0.0], [2.0, 0.0, 0.5], [0.0, 0.5, 0.25]])).unwrap();
        let back = adjacency_from_loopy_laplacian(&loopy_laplacian(&g)).unwrap();
        assert!(max_diff(&back, g.adjacency()) < 1e-15);
        let single = Graph::new(Matrix::from_rows(&[[2.0]])).unwrap();
        let back = adjacency_from_loopy_laplacian(&loopy_laplacian(&single)).unwrap();
        assert_eq!(back, Matrix::from_rows(&[[2.0]]));
    }

    #[test]
    fn kron_coarsen_keeps_loops_nonnegative() {
        let g = Graph::new(Matrix::from_rows(&[
            [1.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.5, 1.0],
            [0.0, 0.0, 1.0, 0.0],
        ]))
        .unwrap();
        let c = kron_coarsen(&g, &[0, 2]).unwrap();
        assert!(c.adjacency().data().iter().all(|&w| w >= 0.0));
        assert!(c.has_self_loops());
        assert!(is_connected(&c));
    }

    #[test]
    fn sparsify_examples() {
        let a = Matrix::from_rows(&[[0.0, 0.3, 0.0], [0.3, 0.0, 0.01], [0.0, 0.01, 0.0]]);
        assert_eq!(sparsify(&a, 0.0).unwrap(), a);
        assert_eq!(sparsify(&a, 0.3).unwrap(), Matrix::zeros(3, 3));
        let s = sparsify(&a, 0.01).unwrap();
        assert_eq!(s[(1, 2)], 0.0);
        assert_eq!(s[(0, 1)], 0.3);
        assert!(sparsify(&a, -1.0).is_err());
        assert!(sparsify(&a, f64::NAN).is_err());
    }

    #[test]
    fn spectral_distance_basics() {
        let l = laplacian(&cycle(6));
        assert_eq!(spectral_distance(&l, &l, 3).unwrap(), 0.0);
        assert!(spectral_distance(&l, &l, 0).is_err());
        assert_eq!(
            spectral_distance(&l, &l, 6).unwrap_err(),
            Error::InsufficientSpectrum { needed: 6, found: 5 }
        );
        // Removing one edge turns the 6-cycle into a 6-path; the distance is positive.
        let p = laplacian(&path(6));
        assert!(spectral_distance(&l, &p, 5).unwrap() > 0.0);
        // A fully removed graph deviates by exactly 1 at every rank.
        assert!((spectral_distance(&l, &Matrix::zeros(6, 6), 5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbation_trivial_when_nothing_removed() {
        let g = Graph::from_edges(4, &[(0, 1, 0.5), (1, 2, 0.7), (2, 3, 0.9), (0, 3, 0.6)]).unwrap();
        let r = perturbation_bound(g.adjacency(), 0.1).unwrap();
        assert_eq!(r.alpha, r.alpha_bar);
        assert!(r.worst_excess.abs() < 1e-12);
        assert!(perturbation_bound_check(g.adjacency(), 0.1).unwrap());
    }

    #[test]
    fn perturbation_top_eigenvalue_obeys_rayleigh_bound() {
        // ᾱ_1 = max xᵀĀx ≥ u_1ᵀĀu_1 = α_1 + u_1ᵀQu_1, so the first-order bound
        // can only hold at the top with equality; Weyl's bound always holds.
        let g = Graph::from_edges(
            5,
            &[
                (0, 1, 1.0),
                (1, 2, 0.05),
                (2, 3, 1.0),
                (3, 4, 0.8),
                (4, 0, 0.02),
                (1, 3, 0.6),
            ],
        )
        .unwrap();
        let r = perturbation_bound(g.adjacency(), 0.1).unwrap();
        assert!(r.alpha_bar[0] >= r.bound[0] - 1e-12);
        assert!(r.weyl_holds);
        // The smallest eigenvalue satisfies the bound by the same argument.
        let last = r.alpha.len() - 1;
        assert!(r.alpha_bar[last] <= r.bound[last] + 1e-12);
    }

    mod properties {
        use super::*;
        use crate::graph::{component_count, is_connected};
        use crate::linalg::{jacobi_eigvals, pseudo_inverse};
        use crate::testing::{arb_connected_graph, arb_graph};
        use proptest::prelude::*;

        fn keep_strategy(n: usize) -> impl Strategy<Value = Vec<usize>> {
            prop::collection::vec(any::<bool>(), n).prop_filter_map("proper subset", |mask| {
                let keep: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
                (!keep.is_empty() && keep.len() < mask.len()).then_some(keep)
            })
        }

        fn graph_and_keep(connected: bool) -> impl Strategy<Value = (Graph, Vec<usize>)> {
            let graphs = if connected {
                arb_connected_graph(2, 16).boxed()
            } else {
                arb_graph(2, 16).boxed()
            };
            graphs.prop_flat_map(|g| {
                let n = g.n();
                (Just(g), keep_strategy(n))
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn reduction_is_a_laplacian((g, keep) in graph_and_keep(false)) {
                let r = kron_reduce(&laplacian(&g), &keep).unwrap();
                for i in 0..r.rows() {
                    prop_assert!(r.row(i).iter().sum::<f64>().abs() <= 1e-8);
                    for j in 0..r.cols() {
                        if i != j {
                            prop_assert!(r[(i, j)] <= 1e-10);
                        }
                    }
                }
                prop_assert!(jacobi_eigvals(&r).unwrap().iter().all(|&x| x >= -1e-8));
            }

            #[test]
            fn reduction_matches_explicit_inverse((g, keep) in graph_and_keep(true)) {
                let l = laplacian(&g);
                let drop: Vec<usize> = (0..g.n()).filter(|i| !keep.contains(i)).collect();
                let inv = pseudo_inverse(&l.select(&drop, &drop), 1e-12).unwrap();
                let oracle = l
                    .select(&keep, &keep)
                    .sub(&l.select(&keep, &drop).matmul(&inv).unwrap().matmul(&l.select(&drop, &keep)).unwrap())
                    .unwrap();
                let r = kron_reduce(&l, &keep).unwrap();
                prop_assert!(r.sub(&oracle).unwrap().max_abs() <= 1e-9 * l.max_abs().max(1.0));
            }

            #[test]
            fn interlacing((g, keep) in graph_and_keep(true)) {
                let lam = jacobi_eigvals(&laplacian(&g)).unwrap();
                let red = jacobi_eigvals(&kron_reduce(&laplacian(&g), &keep).unwrap()).unwrap();
                let (n, m) = (lam.len(), red.len());
                for i in 0..m {
                    prop_assert!(lam[i] >= red[i] - 1e-8);
                    prop_assert!(red[i] >= lam[n - m + i] - 1e-8);
                }
            }

            #[test]
            fn connectivity_preserved((g, keep) in graph_and_keep(true)) {
                prop_assert!(is_connected(&kron_coarsen(&g, &keep).unwrap()));
            }

            #[test]
            fn components_never_increase((g, keep) in graph_and_keep(false)) {
                let c = kron_coarsen(&g, &keep).unwrap();
                prop_assert!(component_count(&c) <= component_count(&g));
            }

            #[test]
            fn sparsify_idempotent_and_monotone(g in arb_graph(2, 12), e1 in 0.0f64..2.0, e2 in 0.0f64..2.0) {
                let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
                let a = g.adjacency();
                let once = sparsify(a, lo).unwrap();
                prop_assert_eq!(&sparsify(&once, lo).unwrap(), &once);
                let count = |m: &Matrix| m.data().iter().filter(|&&w| w != 0.0).count();
                prop_assert!(count(&sparsify(a, hi).unwrap()) <= count(&once));
            }
        }
    }
}
