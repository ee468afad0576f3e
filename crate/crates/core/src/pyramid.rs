//! Coarsening pipeline: one pooling step (partition, Kron reduction,
//! adjacency recovery), decimation selectors and multi-level pyramids.

use serde::{Deserialize, Serialize};

use crate::cut::{partition_with_fallback, random_partition, CutMethod, Partition};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kron::{kron_coarsen, sparsify, DEFAULT_EPSILON};
use crate::linalg::Matrix;
use crate::rng::derive_seed;

/// Redraws allowed when a random partition leaves one side empty.
const MAX_REDRAWS: u64 = 256;

/// Row selection from the identity: keeps the nodes in `kept` (increasing)
/// out of `parent_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecimationSelector {
    kept: Vec<usize>,
    parent_n: usize,
}

impl DecimationSelector {
    pub fn new(kept: Vec<usize>, parent_n: usize) -> Result<Self> {
        if kept.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "kept indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = kept.last() {
            if last >= parent_n {
                return Err(Error::InvalidArgument(format!(
                    "kept index {last} out of range for {parent_n} nodes"
                )));
            }
        }
        Ok(DecimationSelector { kept, parent_n })
    }

    pub fn identity(n: usize) -> Self {
        DecimationSelector {
            kept: (0..n).collect(),
            parent_n: n,
        }
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn parent_n(&self) -> usize {
        self.parent_n
    }

    /// Number of retained nodes.
    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    /// Dense `len × parent_n` selection matrix.
    pub fn to_matrix(&self) -> Matrix {
        let mut s = Matrix::zeros(self.len(), self.parent_n);
        for (r, &c) in self.kept.iter().enumerate() {
            s[(r, c)] = 1.0;
        }
        s
    }

    /// Transpose action: places the rows of `x` back at the kept positions of
    /// a zero `parent_n × cols` matrix.
    pub fn scatter(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows scattered through a selector keeping {}",
                x.rows(),
                self.len()
            )));
        }
        let mut out = Matrix::zeros(self.parent_n, x.cols());
        for (r, &c) in self.kept.iter().enumerate() {
            out.row_mut(c).copy_from_slice(x.row(r));
        }
        Ok(out)
    }
}

/// Keeps the rows of `x` listed by `s`, in order.
pub fn apply_decimation(x: &Matrix, s: &DecimationSelector) -> Result<Matrix> {
    if x.rows() != s.parent_n {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for a selector over {} nodes",
            x.rows(),
            s.parent_n
        )));
    }
    Ok(x.select_rows(&s.kept))
}

/// Selector equivalent to applying `inner` first and then `outer`.
pub fn compose_selectors(outer: &DecimationSelector, inner: &DecimationSelector) -> Result<DecimationSelector> {
    if outer.parent_n != inner.len() {
        return Err(Error::DimensionMismatch(format!(
            "outer selector expects {} nodes, inner keeps {}",
            outer.parent_n,
            inner.len()
        )));
    }
    Ok(DecimationSelector {
        kept: outer.kept.iter().map(|&i| inner.kept[i]).collect(),
        parent_n: inner.parent_n,
    })
}

/// What happened during one pooling step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionMeta {
    pub gamma: f64,
    pub method: CutMethod,
    pub lambda_s_max: Option<f64>,
}

impl From<&Partition> for PartitionMeta {
    fn from(p: &Partition) -> Self {
        PartitionMeta {
            gamma: p.gamma,
            method: p.method,
            lambda_s_max: p.lambda_s_max,
        }
    }
}

/// Partition with fallback, guaranteeing both sides are non-empty. A random
/// draw that puts every node on one side is repeated with a fresh sub-seed.
pub fn pooling_partition(g: &Graph, seed: u64) -> Result<Partition> {
    let p = partition_with_fallback(g, seed)?;
    if !p.keep.is_empty() && !p.drop.is_empty() {
        return Ok(p);
    }
    for attempt in 0..MAX_REDRAWS {
        let mut r = random_partition(g, derive_seed(seed, attempt));
        if !r.keep.is_empty() && !r.drop.is_empty() {
            r.lambda_s_max = p.lambda_s_max;
            return Ok(r);
        }
    }
    Err(Error::InvalidGraph("could not split the node set".into()))
}

/// One decimation step: partition, Kron-reduce onto V⁺, recover the adjacency.
pub fn pool_once(g: &Graph, seed: u64) -> Result<(Graph, DecimationSelector, PartitionMeta)> {
    if g.n() < 2 {
        return Err(Error::InvalidGraph(format!(
            "pooling needs at least 2 nodes, got {}",
            g.n()
        )));
    }
    if !g.has_edges() {
        return Err(Error::InvalidGraph("pooling needs at least one edge".into()));
    }
    let p = pooling_partition(g, seed)?;
    let coarse = kron_coarsen(g, &p.keep)?;
    let meta = PartitionMeta::from(&p);
    Ok((coarse, DecimationSelector::new(p.keep, g.n())?, meta))
}

/// One emitted pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarsenedLevel {
    /// Pooling step index this level corresponds to.
    pub level: usize,
    /// Kron-reduced adjacency before thresholding.
    pub adjacency: Matrix,
    pub sparsified: Graph,
    /// Maps the previous emitted level (or the input graph) to this one.
    pub keep: DecimationSelector,
    pub epsilon: f64,
    pub edges_before: usize,
    pub edges_after: usize,
    /// Pooling steps folded into this level since the previous emitted one.
    pub cut_log: Vec<PartitionMeta>,
}

impl CoarsenedLevel {
    pub fn n(&self) -> usize {
        self.sparsified.n()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidOptions {
    pub levels: Vec<usize>,
    pub epsilon: f64,
    pub seed: u64,
    /// Feed the sparsified graph (rather than the raw Kron result) into the
    /// next pooling step.
    pub sparsify_between: bool,
}

impl Default for PyramidOptions {
    fn default() -> Self {
        PyramidOptions {
            levels: vec![0],
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            sparsify_between: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    pub source_n: usize,
    pub levels: Vec<CoarsenedLevel>,
    pub requested_levels: Vec<usize>,
    pub epsilon: f64,
    /// Coarsening stopped before the deepest requested level.
    pub truncated: bool,
}

impl Pyramid {
    /// Every pooling step in order, across all emitted levels.
    pub fn cut_log(&self) -> Vec<PartitionMeta> {
        self.levels.iter().flat_map(|l| l.cut_log.iter().copied()).collect()
    }

    pub fn selectors(&self) -> Vec<&DecimationSelector> {
        self.levels.iter().map(|l| &l.keep).collect()
    }

    /// Selector from the input graph straight to emitted level `index`.
    pub fn composed_selector(&self, index: usize) -> Result<DecimationSelector> {
        if index >= self.levels.len() {
            return Err(Error::InvalidArgument(format!(
                "level {index} requested, pyramid has {}",
                self.levels.len()
            )));
        }
        let mut acc = DecimationSelector::identity(self.source_n);
        for level in &self.levels[..=index] {
            acc = compose_selectors(&level.keep, &acc)?;
        }
        Ok(acc)
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.levels.iter().map(CoarsenedLevel::n).collect()
    }
}

fn validate_levels(levels: &[usize]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("at least one level is required".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("levels must be strictly increasing".into()));
    }
    Ok(())
}

pub fn build_pyramid(g: &Graph, levels: &[usize], epsilon: f64, seed: u64) -> Result<Pyramid> {
    build_pyramid_with(
        g,
        &PyramidOptions {
            levels: levels.to_vec(),
            epsilon,
            seed,
            sparsify_between: false,
        },
    )
}

/// Pools repeatedly up to the deepest requested level, emitting sparsified
/// adjacencies only at requested levels. Selectors of skipped steps are
/// composed into the next emitted one. Pooling stops early, with
/// `truncated` set, once the graph has at most two nodes or no edges.
pub fn build_pyramid_with(g: &Graph, opts: &PyramidOptions) -> Result<Pyramid> {
    validate_levels(&opts.levels)?;
    if !opts.epsilon.is_finite() || opts.epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be finite and non-negative, got {}",
            opts.epsilon
        )));
    }
    let deepest = *opts.levels.last().expect("validated non-empty");
    let mut current = g.clone();
    let mut pending = DecimationSelector::identity(g.n());
    let mut pending_log = Vec::new();
    let mut emitted = Vec::new();
    let mut truncated = false;

    for step in 0..=deepest {
        if current.n() <= 2 || !current.has_edges() {
            truncated = true;
            break;
        }
        let (coarse, selector, meta) = pool_once(&current, derive_seed(opts.seed, step as u64))?;
        pending = compose_selectors(&selector, &pending)?;
        pending_log.push(meta);

        let is_requested = opts.levels.binary_search(&step).is_ok();
        let sparse = if is_requested || opts.sparsify_between {
            Some(Graph::new(sparsify(coarse.adjacency(), opts.epsilon)?)?)
        } else {
            None
        };
        if is_requested {
            let sparsified = sparse.clone().expect("computed for requested levels");
            emitted.push(CoarsenedLevel {
                level: step,
                edges_before: coarse.edge_count(),
                edges_after: sparsified.edge_count(),
                adjacency: coarse.adjacency().clone(),
                sparsified,
                keep: std::mem::replace(&mut pending, DecimationSelector::identity(coarse.n())),
                epsilon: opts.epsilon,
                cut_log: std::mem::take(&mut pending_log),
            });
        }
        current = match sparse {
            Some(s) if opts.sparsify_between => s,
            _ => coarse,
        };
    }

    Ok(Pyramid {
        source_n: g.n(),
        levels: emitted,
        requested_levels: opts.levels.clone(),
        epsilon: opts.epsilon,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{is_connected, laplacian};
    use crate::kron::kron_reduce;

    fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    fn grid(r: usize, c: usize) -> Graph {
        let mut edges = Vec::new();
        for i in 0..r {
            for j in 0..c {
                let v = i * c + j;
                if j + 1 < c {
                    edges.push((v, v + 1, 1.0));
                }
                if i + 1 < r {
                    edges.push((v, v + c, 1.0));
                }
            }
        }
        Graph::from_edges(r * c, &edges).unwrap()
    }

    #[test]
    fn selector_validation() {
        assert!(DecimationSelector::new(vec![0, 2], 3).is_ok());
        assert!(DecimationSelector::new(vec![2, 0], 3).is_err());
        assert!(DecimationSelector::new(vec![0, 0], 3).is_err());
        assert!(DecimationSelector::new(vec![3], 3).is_err());
    }

    #[test]
    fn apply_examples() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert_eq!(apply_decimation(&x, &DecimationSelector::identity(3)).unwrap(), x);
        let s = DecimationSelector::new(vec![0, 2], 3).unwrap();
        assert_eq!(
            apply_decimation(&x, &s).unwrap(),
            Matrix::from_rows(&[[1.0, 2.0], [5.0, 6.0]])
        );
        assert_eq!(apply_decimation(&x, &s).unwrap(), s.to_matrix().matmul(&x).unwrap());
        assert!(apply_decimation(&x, &DecimationSelector::identity(4)).is_err());
    }

    #[test]
    fn compose_examples() {
        let outer = DecimationSelector::new(vec![0, 2], 4).unwrap();
        let inner = DecimationSelector::new(vec![0, 1, 3, 4], 5).unwrap();
        let c = compose_selectors(&outer, &inner).unwrap();
        assert_eq!(c.kept(), &[0, 3]);
        assert_eq!(c.parent_n(), 5);
        assert_eq!(
            compose_selectors(&DecimationSelector::identity(4), &inner).unwrap(),
            inner
        );
        assert_eq!(
            compose_selectors(&outer, &DecimationSelector::identity(4)).unwrap(),
            outer
        );
        assert!(compose_selectors(&inner, &outer).is_err());
    }

    #[test]
    fn apply_then_apply_is_apply_of_composition() {
        let x = Matrix::from_vec(5, 2, (0..10).map(f64::from).collect()).unwrap();
        let inner = DecimationSelector::new(vec![0, 1, 3, 4], 5).unwrap();
        let outer = DecimationSelector::new(vec![1, 3], 4).unwrap();
        let two_step = apply_decimation(&apply_decimation(&x, &inner).unwrap(), &outer).unwrap();
        let one_step = apply_decimation(&x, &compose_selectors(&outer, &inner).unwrap()).unwrap();
        assert_eq!(two_step, one_step);
    }

    #[test]
    fn scatter_is_transpose_of_selection() {
        let s = DecimationSelector::new(vec![1, 3], 4).unwrap();
        let y = Matrix::from_rows(&[[1.0], [2.0]]);
        assert_eq!(s.scatter(&y).unwrap(), s.to_matrix().transpose().matmul(&y).unwrap());
    }

    #[test]
    fn pool_four_cycle() {
        let (c, s, meta) = pool_once(&cycle(4), 0).unwrap();
        assert_eq!(c.n(), 2);
        assert_eq!(s.len(), 2);
        assert!((c.weight(0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(meta.gamma, 1.0);
        assert_eq!(meta.method, CutMethod::Spectral);
    }

    #[test]
    fn pool_three_path_keeps_middle() {
        // Top eigenvector of L_s on the path is (1, −√2, 1)/2 up to sign; its
        // largest-magnitude entry is the middle one, which is made positive.
        let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let (c, s, meta) = pool_once(&g, 0).unwrap();
        assert_eq!(s.kept(), &[1]);
        assert_eq!(c.n(), 1);
        assert_eq!(meta.gamma, 1.0);
        // The complementary side yields the single 0.5 edge.
        let r = kron_reduce(&laplacian(&g), &[0, 2]).unwrap();
        assert!((r[(0, 1)] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn pool_single_edge() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let (c, s, _) = pool_once(&g, 0).unwrap();
        assert_eq!(c.n(), 1);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn pool_rejects_degenerate_inputs() {
        assert!(pool_once(&Graph::empty(1), 0).is_err());
        assert!(pool_once(&Graph::empty(3), 0).is_err());
    }

    #[test]
    fn pool_falls_back_on_complete_graph_and_splits() {
        let mut edges = Vec::new();
        for i in 0..8 {
            for j in i + 1..8 {
                edges.push((i, j, 1.0));
            }
        }
        let g = Graph::from_edges(8, &edges).unwrap();
        for seed in 0..20 {
            let (c, s, meta) = pool_once(&g, seed).unwrap();
            assert!(!s.is_empty() && s.len() < 8);
            assert_eq!(c.n(), s.len());
            if meta.method == CutMethod::Spectral {
                assert!(meta.gamma >= 0.5);
            }
        }
    }

    #[test]
    fn pyramid_single_level() {
        let p = build_pyramid(&cycle(4), &[0], 0.0, 0).unwrap();
        assert_eq!(p.node_counts(), vec![2]);
        assert!(!p.truncated);
        assert_eq!(p.cut_log().len(), 1);
    }

    #[test]
    fn pyramid_truncates_on_small_graphs() {
        let p = build_pyramid(&cycle(4), &[0, 1, 2], 0.0, 0).unwrap();
        assert!(p.truncated);
        assert_eq!(p.node_counts(), vec![2]);
    }

    #[test]
    fn pyramid_grid_levels_decrease() {
        let p = build_pyramid(&grid(8, 8), &[0, 1, 2], DEFAULT_EPSILON, 0).unwrap();
        let counts = p.node_counts();
        assert_eq!(counts[0], 32);
        assert!(counts.windows(2).all(|w| w[1] < w[0]));
        for level in &p.levels {
            assert!(level.sparsified.adjacency().is_symmetric(0.0));
            assert!(!level.sparsified.has_self_loops());
            assert!(is_connected(&Graph::new(level.adjacency.clone()).unwrap()));
        }
    }

    #[test]
    fn pyramid_zero_epsilon_keeps_adjacency() {
        let p = build_pyramid(&grid(6, 6), &[0, 1], 0.0, 3).unwrap();
        for level in &p.levels {
            assert_eq!(&level.adjacency, level.sparsified.adjacency());
            assert_eq!(level.edges_before, level.edges_after);
        }
    }

    #[test]
    fn skipped_levels_accumulate() {
        let g = grid(8, 8);
        let full = build_pyramid(&g, &[0, 1, 2], 0.0, 11).unwrap();
        let skip = build_pyramid(&g, &[2], 0.0, 11).unwrap();
        assert_eq!(skip.levels.len(), 1);
        assert_eq!(skip.levels[0].cut_log.len(), 3);
        assert_eq!(skip.composed_selector(0).unwrap(), full.composed_selector(2).unwrap());
        assert_eq!(skip.levels[0].adjacency, full.levels[2].adjacency);
    }

    #[test]
    fn pyramid_is_deterministic() {
        let g = grid(7, 5);
        let a = build_pyramid(&g, &[0, 2], 1e-2, 5).unwrap();
        let b = build_pyramid(&g, &[0, 2], 1e-2, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pyramid_rejects_bad_options() {
        let g = grid(4, 4);
        assert!(build_pyramid(&g, &[], 0.0, 0).is_err());
        assert!(build_pyramid(&g, &[1, 1], 0.0, 0).is_err());
        assert!(build_pyramid(&g, &[2, 1], 0.0, 0).is_err());
        assert!(build_pyramid(&g, &[0], -1.0, 0).is_err());
        assert!(build_pyramid(&g, &[0], f64::NAN, 0).is_err());
    }

    #[test]
    fn sparsify_between_changes_only_the_chain() {
        let g = grid(8, 8);
        let opts = PyramidOptions {
            levels: vec![0, 1, 2],
            epsilon: 0.3,
            seed: 2,
            sparsify_between: true,
        };
        let chained = build_pyramid_with(&g, &opts).unwrap();
        let plain = build_pyramid(&g, &[0, 1, 2], 0.3, 2).unwrap();
        assert_eq!(chained.levels[0], plain.levels[0]);
        for level in &chained.levels {
            assert!(level.sparsified.adjacency().data().iter().all(|&w| w == 0.0 || w > 0.3));
        }
    }

    mod properties {
        use super::*;
        use crate::testing::arb_connected_graph;
        use proptest::prelude::*;

        fn arb_selector(parent_n: usize) -> impl Strategy<Value = DecimationSelector> {
            prop::collection::vec(any::<bool>(), parent_n).prop_map(move |mask| {
                let kept = (0..parent_n).filter(|&i| mask[i]).collect();
                DecimationSelector::new(kept, parent_n).unwrap()
            })
        }

        fn chain() -> impl Strategy<Value = (DecimationSelector, DecimationSelector, DecimationSelector)> {
            (1usize..20)
                .prop_flat_map(arb_selector)
                .prop_flat_map(|a| {
                    let n = a.len();
                    (Just(a), arb_selector(n))
                })
                .prop_flat_map(|(a, b)| {
                    let n = b.len();
                    (Just(a), Just(b), arb_selector(n))
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn composition_is_associative((a, b, c) in chain()) {
                let left = compose_selectors(&c, &compose_selectors(&b, &a).unwrap()).unwrap();
                let right = compose_selectors(&compose_selectors(&c, &b).unwrap(), &a).unwrap();
                prop_assert_eq!(left.kept(), right.kept());
                prop_assert_eq!(
                    left.to_matrix(),
                    c.to_matrix().matmul(&b.to_matrix()).unwrap().matmul(&a.to_matrix()).unwrap()
                );
            }

            #[test]
            fn pooling_shrinks_and_logs(g in arb_connected_graph(3, 24), seed in any::<u64>()) {
                let p = build_pyramid(&g, &[0, 1, 2], 1e-2, seed).unwrap();
                let mut prev = g.n();
                for level in &p.levels {
                    prop_assert!(level.n() < prev);
                    prop_assert!(level.sparsified.adjacency().data().iter().all(|&w| w >= 0.0));
                    prop_assert!(!level.sparsified.has_self_loops());
                    prev = level.n();
                }
                for meta in p.cut_log() {
                    prop_assert!(meta.method == CutMethod::Random || meta.gamma >= 0.5);
                }
                prop_assert_eq!(build_pyramid(&g, &[0, 1, 2], 1e-2, seed).unwrap(), p);
            }
        }
    }
}
