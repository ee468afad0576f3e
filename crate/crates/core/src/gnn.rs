//! Small message-passing classifier that pools with precomputed decimation
//! pyramids. Gradients are derived by hand and trained with Adam.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{gen_grid, gen_ring};
use crate::graph::{disjoint_union, laplacian, normalized_adjacency, Graph, EDGE_TOL};
use crate::io::PyramidFile;
use crate::kron::DEFAULT_EPSILON;
use crate::linalg::{jacobi_eigh, Matrix};
use crate::pyramid::{apply_decimation, build_pyramid, DecimationSelector, Pyramid};
use crate::rng::{derive_seed, seeded};

pub const DEFAULT_LEARNING_RATE: f64 = 5e-4;
pub const DEFAULT_L2: f64 = 5e-4;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// Message-passing layer with the given output width.
    Mp(usize),
    /// Decimation by a power-of-two stride.
    Pool(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_width: usize,
    pub stages: Vec<Stage>,
    pub class_count: usize,
}

impl ModelConfig {
    /// `MP(h) → P(s₁) → MP(h) → P(s₂) → … → MP(h)`, one pool per stride.
    pub fn standard(input_width: usize, hidden_width: usize, strides: &[usize], class_count: usize) -> Result<Self> {
        let mut stages = vec![Stage::Mp(hidden_width)];
        for &s in strides {
            stages.push(Stage::Pool(s));
            stages.push(Stage::Mp(hidden_width));
        }
        let config = ModelConfig {
            input_width,
            stages,
            class_count,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.class_count < 2 {
            return Err(Error::InvalidArgument(
                "need input width ≥ 1 and at least 2 classes".into(),
            ));
        }
        for stage in &self.stages {
            match *stage {
                Stage::Mp(0) => return Err(Error::InvalidArgument("layer width must be positive".into())),
                Stage::Pool(s) if s < 2 || !s.is_power_of_two() => {
                    return Err(Error::InvalidArgument(format!(
                        "pool stride must be a power of two ≥ 2, got {s}"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Pyramid levels the pool stages read from: a stride of `2^k` advances
    /// `k` pooling steps.
    pub fn pyramid_levels(&self) -> Vec<usize> {
        let mut steps = 0;
        self.stages
            .iter()
            .filter_map(|s| match *s {
                Stage::Pool(stride) => {
                    steps += stride.trailing_zeros() as usize;
                    Some(steps - 1)
                }
                Stage::Mp(_) => None,
            })
            .collect()
    }

    /// Shapes in parameter order: `W, V` per MP layer, then head weight and bias.
    fn param_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut width = self.input_width;
        for stage in &self.stages {
            if let Stage::Mp(out) = *stage {
                shapes.push((width, out));
                shapes.push((width, out));
                width = out;
            }
        }
        shapes.push((width, self.class_count));
        shapes.push((1, self.class_count));
        shapes
    }
}

/// Mixing and skip weights of one message-passing layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MPLayerParams {
    pub w: Matrix,
    pub v: Matrix,
}

/// `ReLU(Â X W + X V)` with `Â = D^{-1/2} A D^{-1/2}`.
pub fn mp_forward(x: &Matrix, g: &Graph, p: &MPLayerParams) -> Result<Matrix> {
    if x.rows() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for {} nodes",
            x.rows(),
            g.n()
        )));
    }
    Ok(mp_pre_activation(x, &normalized_adjacency(g), p)?.1.map(relu))
}

fn mp_pre_activation(x: &Matrix, a_hat: &Matrix, p: &MPLayerParams) -> Result<(Matrix, Matrix)> {
    let mixed = a_hat.matmul(x)?;
    let z = mixed.matmul(&p.w)?.add(&x.matmul(&p.v)?)?;
    Ok((mixed, z))
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

pub fn ndp_pool(x: &Matrix, s: &DecimationSelector) -> Result<Matrix> {
    apply_decimation(x, s)
}

/// Gradient of [`ndp_pool`]: upstream rows scattered back, zeros elsewhere.
pub fn ndp_pool_backward(grad: &Matrix, s: &DecimationSelector) -> Result<Matrix> {
    s.scatter(grad)
}

/// Mean feature vector of each segment `offsets[k]..offsets[k + 1]`.
pub fn global_avg_pool(x: &Matrix, offsets: &[usize]) -> Result<Matrix> {
    check_offsets(offsets, x.rows())?;
    let mut out = Matrix::zeros(offsets.len() - 1, x.cols());
    for (k, w) in offsets.windows(2).enumerate() {
        let count = (w[1] - w[0]) as f64;
        let row = out.row_mut(k);
        for i in w[0]..w[1] {
            row.iter_mut().zip(x.row(i)).for_each(|(o, v)| *o += v);
        }
        row.iter_mut().for_each(|o| *o /= count);
    }
    Ok(out)
}

fn global_avg_pool_backward(grad: &Matrix, offsets: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(*offsets.last().unwrap_or(&0), grad.cols());
    for (k, w) in offsets.windows(2).enumerate() {
        let count = (w[1] - w[0]) as f64;
        for i in w[0]..w[1] {
            out.row_mut(i)
                .iter_mut()
                .zip(grad.row(k))
                .for_each(|(o, g)| *o = g / count);
        }
    }
    out
}

fn check_offsets(offsets: &[usize], rows: usize) -> Result<()> {
    if offsets.len() < 2 || offsets[0] != 0 || *offsets.last().unwrap() != rows {
        return Err(Error::InvalidArgument(format!("offsets must run from 0 to {rows}")));
    }
    if offsets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("empty readout segment".into()));
    }
    Ok(())
}

/// Mean softmax cross-entropy and its gradient `(softmax − onehot) / batch`.
pub fn softmax_xent(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= logits.cols()) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {} classes",
            logits.cols()
        )));
    }
    let batch = labels.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| (z - top).exp()).sum();
        loss += sum.ln() + top - row[y];
        let g = grad.row_mut(r);
        for (c, &z) in row.iter().enumerate() {
            g[c] = ((z - top).exp() / sum - if c == y { 1.0 } else { 0.0 }) / batch;
        }
    }
    Ok((loss / batch, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    /// `W, V` per MP layer, then the head weight and the `1 × C` head bias.
    pub params: Vec<Matrix>,
}

impl Model {
    /// Glorot-uniform weights, zero bias.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = seeded(seed);
        let shapes = config.param_shapes();
        let last = shapes.len() - 1;
        let params = shapes
            .iter()
            .enumerate()
            .map(|(k, &(fin, fout))| {
                if k == last {
                    return Matrix::zeros(fin, fout);
                }
                let limit = (6.0 / (fin + fout) as f64).sqrt();
                let data = (0..fin * fout).map(|_| r.random_range(-limit..=limit)).collect();
                Matrix::from_vec(fin, fout, data).expect("shape matches data")
            })
            .collect();
        Ok(Model { config, params })
    }

    pub fn mp_layer(&self, index: usize) -> Option<MPLayerParams> {
        let w = self.params.get(2 * index)?;
        let v = self.params.get(2 * index + 1)?;
        (2 * index + 2 < self.params.len()).then(|| MPLayerParams {
            w: w.clone(),
            v: v.clone(),
        })
    }

    fn is_bias(&self, index: usize) -> bool {
        index + 1 == self.params.len()
    }
}

/// A graph together with the coarsened graphs and selectors its pool stages use.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledGraph {
    /// Input graph followed by one graph per pool stage.
    pub graphs: Vec<Graph>,
    pub selectors: Vec<DecimationSelector>,
}

impl PooledGraph {
    pub fn from_pyramid(g: &Graph, pyramid: &Pyramid, config: &ModelConfig) -> Result<Self> {
        let wanted = config.pyramid_levels();
        let emitted: Vec<usize> = pyramid.levels.iter().map(|l| l.level).collect();
        if pyramid.source_n != g.n() || emitted != wanted {
            return Err(Error::InvalidArgument(format!(
                "pyramid/architecture level mismatch: pyramid has levels {emitted:?}, model needs {wanted:?}"
            )));
        }
        let mut graphs = vec![g.clone()];
        graphs.extend(pyramid.levels.iter().map(|l| l.sparsified.clone()));
        Ok(PooledGraph {
            graphs,
            selectors: pyramid.levels.iter().map(|l| l.keep.clone()).collect(),
        })
    }

    /// Wraps a pyramid read from a file. `g` must be the graph it was built from.
    pub fn from_file(g: &Graph, file: &PyramidFile, config: &ModelConfig) -> Result<Self> {
        file.validate()?;
        let wanted = config.pyramid_levels();
        let emitted: Vec<usize> = file.levels.iter().map(|l| l.level).collect();
        if file.source_n != g.n() || emitted != wanted {
            return Err(Error::InvalidArgument(format!(
                "pyramid/architecture level mismatch: pyramid has levels {emitted:?}, model needs {wanted:?}"
            )));
        }
        let mut graphs = vec![g.clone()];
        graphs.extend(file.graphs()?);
        Ok(PooledGraph {
            graphs,
            selectors: file.selectors()?,
        })
    }

    /// Builds the pyramid the model needs and wraps it.
    pub fn build(g: &Graph, config: &ModelConfig, epsilon: f64, seed: u64) -> Result<Self> {
        let levels = config.pyramid_levels();
        if levels.is_empty() {
            return Ok(PooledGraph {
                graphs: vec![g.clone()],
                selectors: Vec::new(),
            });
        }
        let pyramid = build_pyramid(g, &levels, epsilon, seed)?;
        Self::from_pyramid(g, &pyramid, config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub structure: Arc<PooledGraph>,
    pub features: Matrix,
    pub label: usize,
}

/// Disjoint union of samples at every resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub a_hats: Vec<Matrix>,
    pub selectors: Vec<DecimationSelector>,
    pub features: Matrix,
    pub labels: Vec<usize>,
    /// Node ranges of each sample at the final resolution.
    pub offsets: Vec<usize>,
}

impl Batch {
    pub fn new(samples: &[&Sample]) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidArgument("empty batch".into()));
        };
        let depth = first.structure.graphs.len();
        if samples
            .iter()
            .any(|s| s.structure.graphs.len() != depth || s.structure.selectors.len() + 1 != depth)
        {
            return Err(Error::InvalidArgument("samples disagree on pyramid depth".into()));
        }
        let mut a_hats = Vec::with_capacity(depth);
        let mut offsets_per_level = Vec::with_capacity(depth);
        let mut features = Matrix::zeros(0, 0);
        for level in 0..depth {
            let graphs: Vec<Graph> = samples.iter().map(|s| s.structure.graphs[level].clone()).collect();
            let xs: Vec<Matrix> = if level == 0 {
                samples.iter().map(|s| s.features.clone()).collect()
            } else {
                graphs.iter().map(|g| Matrix::zeros(g.n(), 0)).collect()
            };
            let union = disjoint_union(&graphs, &xs)?;
            if level == 0 {
                features = union.features;
            }
            a_hats.push(normalized_adjacency(&union.graph));
            offsets_per_level.push(union.offsets);
        }
        let mut selectors = Vec::with_capacity(depth - 1);
        for level in 0..depth - 1 {
            let parent = &offsets_per_level[level];
            let mut kept = Vec::new();
            for (k, s) in samples.iter().enumerate() {
                let sel = &s.structure.selectors[level];
                if sel.parent_n() != parent[k + 1] - parent[k]
                    || sel.len() != offsets_per_level[level + 1][k + 1] - offsets_per_level[level + 1][k]
                {
                    return Err(Error::DimensionMismatch(
                        "selector does not chain with its graphs".into(),
                    ));
                }
                kept.extend(sel.kept().iter().map(|&i| i + parent[k]));
            }
            selectors.push(DecimationSelector::new(kept, *parent.last().unwrap())?);
        }
        Ok(Batch {
            a_hats,
            selectors,
            features,
            labels: samples.iter().map(|s| s.label).collect(),
            offsets: offsets_per_level.pop().expect("depth ≥ 1"),
        })
    }
}

struct Trace {
    /// Input of every stage.
    inputs: Vec<Matrix>,
    /// `Â H` and pre-activation for MP stages.
    mp: Vec<Option<(Matrix, Matrix)>>,
    readout: Matrix,
}

fn forward(model: &Model, batch: &Batch) -> Result<(Matrix, Trace)> {
    if batch.features.cols() != model.config.input_width {
        return Err(Error::DimensionMismatch(format!(
            "features have width {}, model expects {}",
            batch.features.cols(),
            model.config.input_width
        )));
    }
    if batch.selectors.len() != model.config.pyramid_levels().len() {
        return Err(Error::InvalidArgument("pyramid/architecture level mismatch".into()));
    }
    let mut h = batch.features.clone();
    let mut inputs = Vec::with_capacity(model.config.stages.len());
    let mut mp = Vec::with_capacity(model.config.stages.len());
    let (mut level, mut layer) = (0, 0);
    for stage in &model.config.stages {
        inputs.push(h.clone());
        match stage {
            Stage::Mp(_) => {
                let p = MPLayerParams {
                    w: model.params[2 * layer].clone(),
                    v: model.params[2 * layer + 1].clone(),
                };
                let (mixed, z) = mp_pre_activation(&h, &batch.a_hats[level], &p)?;
                h = z.map(relu);
                mp.push(Some((mixed, z)));
                layer += 1;
            }
            Stage::Pool(_) => {
                h = ndp_pool(&h, &batch.selectors[level])?;
                mp.push(None);
                level += 1;
            }
        }
    }
    let readout = global_avg_pool(&h, &batch.offsets)?;
    let n_params = model.params.len();
    let logits = readout.matmul(&model.params[n_params - 2])?;
    let bias = model.params[n_params - 1].row(0);
    let logits = Matrix::from_vec(
        logits.rows(),
        logits.cols(),
        logits
            .data()
            .chunks(logits.cols())
            .flat_map(|row| row.iter().zip(bias).map(|(z, b)| z + b))
            .collect(),
    )?;
    Ok((logits, Trace { inputs, mp, readout }))
}

fn l2_penalty(model: &Model, l2: f64) -> f64 {
    model
        .params
        .iter()
        .enumerate()
        .filter(|(k, _)| !model.is_bias(*k))
        .map(|(_, p)| p.data().iter().map(|w| w * w).sum::<f64>())
        .sum::<f64>()
        * l2
}

/// Cross-entropy plus `l2 · Σ‖W‖²` over all weights (biases excluded).
pub fn loss(model: &Model, batch: &Batch, l2: f64) -> Result<f64> {
    let (logits, _) = forward(model, batch)?;
    Ok(softmax_xent(&logits, &batch.labels)?.0 + l2_penalty(model, l2))
}

pub fn predict(model: &Model, batch: &Batch) -> Result<Vec<usize>> {
    let (logits, _) = forward(model, batch)?;
    Ok((0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best })
        })
        .collect())
}

/// Loss and its exact gradient with respect to every parameter.
pub fn backward(model: &Model, batch: &Batch, l2: f64) -> Result<(f64, Vec<Matrix>)> {
    let (logits, trace) = forward(model, batch)?;
    let (xent, d_logits) = softmax_xent(&logits, &batch.labels)?;
    let n_params = model.params.len();
    let mut grads: Vec<Matrix> = model.params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();

    grads[n_params - 2] = trace.readout.t_matmul(&d_logits)?;
    let mut bias = Matrix::zeros(1, d_logits.cols());
    for r in 0..d_logits.rows() {
        bias.row_mut(0)
            .iter_mut()
            .zip(d_logits.row(r))
            .for_each(|(b, g)| *b += g);
    }
    grads[n_params - 1] = bias;
    let d_readout = d_logits.matmul_t(&model.params[n_params - 2])?;
    let mut d_h = global_avg_pool_backward(&d_readout, &batch.offsets);

    let mut level = batch.selectors.len();
    let mut layer = model.config.stages.iter().filter(|s| matches!(s, Stage::Mp(_))).count();
    for (k, stage) in model.config.stages.iter().enumerate().rev() {
        match stage {
            Stage::Pool(_) => {
                level -= 1;
                d_h = ndp_pool_backward(&d_h, &batch.selectors[level])?;
            }
            Stage::Mp(_) => {
                layer -= 1;
                let (mixed, z) = trace.mp[k].as_ref().expect("MP stage traced");
                let input = &trace.inputs[k];
                let mut d_z = d_h;
                d_z.data_mut().iter_mut().zip(z.data()).for_each(|(g, &pre)| {
                    if pre <= 0.0 {
                        *g = 0.0
                    }
                });
                let (w, v) = (&model.params[2 * layer], &model.params[2 * layer + 1]);
                grads[2 * layer] = mixed.t_matmul(&d_z)?;
                grads[2 * layer + 1] = input.t_matmul(&d_z)?;
                // Â is symmetric, so the mixing term back-propagates through Â itself.
                d_h = batch.a_hats[level].matmul(&d_z.matmul_t(w)?)?.add(&d_z.matmul_t(v)?)?;
            }
        }
    }
    for (k, g) in grads.iter_mut().enumerate() {
        if !model.is_bias(k) {
            *g = g.add(&model.params[k].scale(2.0 * l2))?;
        }
    }
    Ok((xent + l2_penalty(model, l2), grads))
}

/// Adam optimizer state mirroring a parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub learning_rate: f64,
    pub first_moment: Vec<Matrix>,
    pub second_moment: Vec<Matrix>,
    pub step: u64,
}

impl TrainState {
    pub fn new(params: &[Matrix], learning_rate: f64) -> Self {
        let zeros: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        TrainState {
            learning_rate,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }
}

/// Bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut TrainState, params: &mut [Matrix], grads: &[Matrix]) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::DimensionMismatch(
            "parameter, gradient and moment counts differ".into(),
        ));
    }
    if params.iter().zip(grads).any(|(p, g)| p.shape() != g.shape()) {
        return Err(Error::DimensionMismatch("gradient shape differs from parameter".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first_moment[k].data_mut();
        let v = state.second_moment[k].data_mut();
        for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
            *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
            *w -= state.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Node degree and local clustering coefficient, one row per node.
pub fn structural_features(g: &Graph) -> Matrix {
    let n = g.n();
    let adjacent = |i: usize, j: usize| i != j && g.weight(i, j) > EDGE_TOL;
    let mut x = Matrix::zeros(n, 2);
    for i in 0..n {
        let nbrs: Vec<usize> = (0..n).filter(|&j| adjacent(i, j)).collect();
        let k = nbrs.len();
        let mut links = 0;
        for (a, &u) in nbrs.iter().enumerate() {
            links += nbrs[a + 1..].iter().filter(|&&v| adjacent(u, v)).count();
        }
        x[(i, 0)] = g.degrees()[i];
        x[(i, 1)] = if k >= 2 {
            2.0 * links as f64 / (k * (k - 1)) as f64
        } else {
            0.0
        };
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemoTask {
    /// Graph classification: rings with up to two chords against grids.
    RingVsGrid { per_class: usize },
    /// Signal classification on one shared grid: smooth against oscillating signals.
    SmoothVsRough { per_class: usize, side: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_width: usize,
    pub strides: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_width: 32,
            strides: vec![2, 2],
            epochs: 200,
            learning_rate: DEFAULT_LEARNING_RATE,
            l2: DEFAULT_L2,
            batch_size: 1,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn final_accuracy(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.accuracy)
    }

    pub fn best_accuracy(&self) -> f64 {
        self.epochs.iter().map(|e| e.accuracy).fold(0.0, f64::max)
    }

    /// One JSON object per epoch, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("plain record serializes") + "\n")
            .collect()
    }
}

fn ring_family_member(r: &mut crate::rng::Rng) -> Result<Graph> {
    let n = r.random_range(12..=30);
    let mut a = gen_ring(n)?.into_adjacency();
    let chords = r.random_range(0..=2);
    let mut added = 0;
    while added < chords {
        let (i, j) = (r.random_range(0..n), r.random_range(0..n));
        if i != j && a[(i, j)] == 0.0 {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
            added += 1;
        }
    }
    Graph::new(a)
}

/// Labelled samples for `task`, with pyramids matching `config`. For the
/// signal task, `shared` replaces the pyramid built over the grid.
pub fn build_dataset(
    task: DemoTask,
    model: &ModelConfig,
    epsilon: f64,
    seed: u64,
    shared: Option<PooledGraph>,
) -> Result<Vec<Sample>> {
    if shared.is_some() && !matches!(task, DemoTask::SmoothVsRough { .. }) {
        return Err(Error::InvalidArgument(
            "a shared pyramid only applies to the signal task".into(),
        ));
    }
    let mut r = seeded(derive_seed(seed, 0));
    let mut samples = Vec::new();
    match task {
        DemoTask::RingVsGrid { per_class } => {
            for k in 0..2 * per_class {
                let label = k % 2;
                let g = if label == 0 {
                    ring_family_member(&mut r)?
                } else {
                    gen_grid(r.random_range(3..=6), r.random_range(3..=6))?
                };
                let structure = PooledGraph::build(&g, model, epsilon, derive_seed(seed, k as u64 + 1))?;
                samples.push(Sample {
                    features: structural_features(&g),
                    structure: Arc::new(structure),
                    label,
                });
            }
        }
        DemoTask::SmoothVsRough { per_class, side } => {
            let g = gen_grid(side, side)?;
            let structure = match shared {
                Some(p) if p.graphs.first() == Some(&g) => Arc::new(p),
                Some(_) => {
                    return Err(Error::InvalidArgument(
                        "shared pyramid was not built over this grid".into(),
                    ))
                }
                None => Arc::new(PooledGraph::build(&g, model, epsilon, derive_seed(seed, 1))?),
            };
            let n = g.n();
            let basis = jacobi_eigh(&laplacian(&g))?;
            let vectors = basis.vectors.as_ref().expect("vectors requested");
            // Columns are sorted by descending eigenvalue: low frequencies sit at the end.
            let band = 4.min(n / 2);
            for k in 0..2 * per_class {
                let label = k % 2;
                let mut signal = vec![0.0; n];
                for b in 0..band {
                    let col = if label == 0 { n - 2 - b } else { b };
                    let c: f64 = r.random_range(-1.0..1.0);
                    signal.iter_mut().zip(vectors.col(col)).for_each(|(s, u)| *s += c * u);
                }
                let scale = (n as f64).sqrt();
                samples.push(Sample {
                    features: Matrix::column(&signal.iter().map(|s| s * scale).collect::<Vec<_>>()),
                    structure: Arc::clone(&structure),
                    label,
                });
            }
        }
    }
    Ok(samples)
}

/// Trains from scratch, evaluating loss and accuracy over the whole training
/// set after every epoch.
pub fn train(model: &mut Model, samples: &[Sample], config: &TrainConfig, seed: u64) -> Result<TrainReport> {
    if samples.is_empty() || config.batch_size == 0 {
        return Err(Error::InvalidArgument("need samples and a positive batch size".into()));
    }
    let mut state = TrainState::new(&model.params, config.learning_rate);
    let all: Vec<&Sample> = samples.iter().collect();
    let full = Batch::new(&all)?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut seeded(derive_seed(seed, epoch as u64)));
        for chunk in order.chunks(config.batch_size) {
            let members: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (_, grads) = backward(model, &Batch::new(&members)?, config.l2)?;
            adam_step(&mut state, &mut model.params, &grads)?;
        }
        let predictions = predict(model, &full)?;
        let correct = predictions.iter().zip(&full.labels).filter(|(p, y)| p == y).count();
        epochs.push(EpochRecord {
            epoch: epoch + 1,
            loss: loss(model, &full, config.l2)?,
            accuracy: correct as f64 / samples.len() as f64,
        });
    }
    Ok(TrainReport { epochs })
}

/// Model layout used by the demo tasks.
pub fn demo_model_config(task: DemoTask, config: &TrainConfig) -> Result<ModelConfig> {
    let input_width = match task {
        DemoTask::RingVsGrid { .. } => 2,
        DemoTask::SmoothVsRough { .. } => 1,
    };
    ModelConfig::standard(input_width, config.hidden_width, &config.strides, 2)
}

/// Builds the dataset for `task`, initializes a model and trains it.
pub fn train_demo(task: DemoTask, config: &TrainConfig, seed: u64) -> Result<TrainReport> {
    train_demo_with(task, config, seed, None)
}

/// [`train_demo`] with an optional precomputed shared pyramid for the signal task.
pub fn train_demo_with(
    task: DemoTask,
    config: &TrainConfig,
    seed: u64,
    shared: Option<PooledGraph>,
) -> Result<TrainReport> {
    let model_config = demo_model_config(task, config)?;
    let samples = build_dataset(task, &model_config, config.epsilon, seed, shared)?;
    let mut model = Model::init(model_config, derive_seed(seed, u64::MAX))?;
    train(&mut model, &samples, config, seed)
}
