//! Two-layer graph convolutional classifier
//! `softmax(Â · ReLU(Â X W0) · W1)` and its graph-agnostic twin
//! `softmax(ReLU(X W0) · W1)`.
//!
//! Training is full-batch Adam on the mean cross-entropy over the labelled
//! nodes, with inverted dropout on the input of each layer and an L2 penalty
//! `weight_decay/2 · ‖W0‖²` on the first layer only.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::graph::{normalized_entry, Graph, NodeId, NormalizedAdjacency};
use crate::optim::Adam;
use crate::sparse::CsrMatrix;

pub const N_LAYERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 200,
            hidden_dim: 16,
            dropout: 0.5,
            weight_decay: 5e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// The two weight matrices shared by the GCN and the MLP baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// `F × H`
    pub w0: Array2<f64>,
    /// `H × C`
    pub w1: Array2<f64>,
}

impl Weights {
    /// Glorot-uniform initialization, bound `sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(n_features: usize, hidden: usize, n_classes: usize, rng: &mut R) -> Self {
        Self {
            w0: glorot_uniform(n_features, hidden, rng),
            w1: glorot_uniform(hidden, n_classes, rng),
        }
    }

    pub fn new(w0: Array2<f64>, w1: Array2<f64>) -> Result<Self> {
        if w0.ncols() != w1.nrows() {
            return Err(Error::Dimension(format!(
                "W0 is {:?} but W1 is {:?}",
                w0.dim(),
                w1.dim()
            )));
        }
        if w0.iter().chain(w1.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Input("weights must be finite".into()));
        }
        Ok(Self { w0, w1 })
    }

    pub fn n_features(&self) -> usize {
        self.w0.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w0.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.w1.ncols()
    }

    fn shapes(&self) -> [(usize, usize); 2] {
        [self.w0.dim(), self.w1.dim()]
    }
}

pub fn glorot_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..=bound))
}

/// Row-stochastic class probabilities, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxOutput {
    probs: Array2<f64>,
}

impl SoftmaxOutput {
    pub fn from_logits(mut logits: Array2<f64>) -> Self {
        for mut row in logits.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("standard layout"));
        }
        Self { probs: logits }
    }

    pub fn n_nodes(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.probs.ncols()
    }

    pub fn row(&self, v: NodeId) -> ArrayView1<'_, f64> {
        self.probs.row(v)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.probs
    }

    /// Argmax of row `v`, lowest class index on ties.
    pub fn predicted(&self, v: NodeId) -> usize {
        argmax(self.probs.row(v).iter().copied())
    }

    pub fn predictions(&self) -> Vec<usize> {
        (0..self.n_nodes()).map(|v| self.predicted(v)).collect()
    }
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in z.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in z.iter_mut() {
        *x /= total;
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, x) in values.into_iter().enumerate() {
        if x > best_val {
            best_val = x;
            best = i;
        }
    }
    best
}

/// Per-epoch training objective (cross-entropy plus weight penalty).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub losses: Vec<f64>,
}

/// The propagation step between layers: `Â` for the GCN, identity for the MLP.
#[derive(Debug, Clone, Copy)]
pub enum Propagation<'a> {
    Normalized(&'a CsrMatrix),
    Identity,
}

impl Propagation<'_> {
    fn apply(&self, m: Array2<f64>) -> Array2<f64> {
        match self {
            Propagation::Normalized(a) => a.matmul(m.view()),
            Propagation::Identity => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
}

/// Loss value and gradient of the training objective.
#[derive(Debug, Clone)]
pub struct Objective {
    pub cross_entropy: f64,
    pub penalty: f64,
    pub grads: Gradients,
}

impl Objective {
    pub fn total(&self) -> f64 {
        self.cross_entropy + self.penalty
    }
}

/// Objective and its exact gradient. `x` is the (possibly dropout-masked)
/// feature matrix; `hidden_mask` multiplies the hidden activations.
pub fn objective(
    w: &Weights,
    prop: Propagation<'_>,
    x: &CsrMatrix,
    labels: &LabelVector,
    train_set: &[NodeId],
    weight_decay: f64,
    hidden_mask: Option<&Array2<f64>>,
) -> Objective {
    let z1 = prop.apply(x.matmul(w.w0.view()));
    let mut h = z1.mapv(|v| v.max(0.0));
    if let Some(mask) = hidden_mask {
        h *= mask;
    }
    let z2 = prop.apply(h.dot(&w.w1));

    let n_train = train_set.len() as f64;
    let mut dz2 = Array2::<f64>::zeros(z2.dim());
    let mut ce = 0.0;
    for &v in train_set {
        let mut row = z2.row(v).to_vec();
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        let y = labels.get(v);
        ce += lse - row[y];
        softmax_in_place(&mut row);
        row[y] -= 1.0;
        for (d, p) in dz2.row_mut(v).iter_mut().zip(row) {
            *d += p / n_train;
        }
    }
    ce /= n_train;
    let penalty = 0.5 * weight_decay * w.w0.iter().map(|a| a * a).sum::<f64>();

    // Â is symmetric, so its transpose is itself.
    let dq = prop.apply(dz2);
    let grad_w1 = h.t().dot(&dq);
    let mut dh = dq.dot(&w.w1.t());
    if let Some(mask) = hidden_mask {
        dh *= mask;
    }
    ndarray::Zip::from(&mut dh).and(&z1).for_each(|d, &z| {
        if z <= 0.0 {
            *d = 0.0;
        }
    });
    let dp = prop.apply(dh);
    let mut grad_w0 = x.t_matmul(dp.view());
    grad_w0.scaled_add(weight_decay, &w.w0);

    Objective {
        cross_entropy: ce,
        penalty,
        grads: Gradients {
            w0: grad_w0,
            w1: grad_w1,
        },
    }
}

fn logits(w: &Weights, prop: Propagation<'_>, x: &CsrMatrix) -> Array2<f64> {
    let h = prop.apply(x.matmul(w.w0.view())).mapv(|v| v.max(0.0));
    prop.apply(h.dot(&w.w1))
}

fn check_dims(w: &Weights, x: &FeatureMatrix, n_nodes: usize) -> Result<()> {
    if w.n_features() != x.n_features() {
        return Err(Error::Dimension(format!(
            "model expects {} features, matrix has {}",
            w.n_features(),
            x.n_features()
        )));
    }
    if x.n_nodes() != n_nodes {
        return Err(Error::Dimension(format!(
            "feature matrix has {} rows for {} nodes",
            x.n_nodes(),
            n_nodes
        )));
    }
    Ok(())
}

fn check_training_inputs(labels: &LabelVector, train_set: &[NodeId], w: &Weights, n: usize) -> Result<()> {
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} nodes", labels.len())));
    }
    if labels.n_classes() != w.n_classes() {
        return Err(Error::Dimension(format!(
            "model has {} classes, labels have {}",
            w.n_classes(),
            labels.n_classes()
        )));
    }
    if let Some(&v) = train_set.iter().find(|&&v| v >= n) {
        return Err(Error::Input(format!("training node {v} out of range")));
    }
    Ok(())
}

fn inverted_dropout_mask<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

fn train_weights<R: Rng + ?Sized>(
    mut w: Weights,
    prop: Propagation<'_>,
    x: &FeatureMatrix,
    labels: &LabelVector,
    train_set: &[NodeId],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(Weights, TrainLog)> {
    cfg.validate()?;
    let csr = x.as_csr();
    let mut opt = Adam::new(cfg.learning_rate, &w.shapes());
    let mut log = TrainLog::default();
    let n = x.n_nodes();
    for epoch in 0..cfg.epochs {
        let (masked, hidden_mask);
        let (xs, hm) = if cfg.dropout > 0.0 {
            let m = inverted_dropout_mask(csr.nnz(), cfg.dropout, rng);
            masked = csr.with_values(csr.values().iter().zip(m).map(|(v, k)| v * k).collect());
            let hm = inverted_dropout_mask(n * w.hidden_dim(), cfg.dropout, rng);
            hidden_mask = Array2::from_shape_vec((n, w.hidden_dim()), hm).expect("mask shape");
            (&masked, Some(&hidden_mask))
        } else {
            (csr, None)
        };
        let obj = objective(&w, prop, xs, labels, train_set, cfg.weight_decay, hm);
        let loss = obj.total();
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss });
        }
        log.losses.push(loss);
        opt.step(&mut [&mut w.w0, &mut w.w1], &[&obj.grads.w0, &obj.grads.w1]);
    }
    Ok((w, log))
}

/// Two-layer GCN classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub weights: Weights,
}

impl GcnModel {
    pub fn init<R: Rng + ?Sized>(n_features: usize, hidden: usize, n_classes: usize, rng: &mut R) -> Self {
        Self {
            weights: Weights::glorot(n_features, hidden, n_classes, rng),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.weights.n_classes()
    }

    /// Full-graph prediction, dropout disabled.
    pub fn forward(&self, a_hat: &NormalizedAdjacency, x: &FeatureMatrix) -> Result<SoftmaxOutput> {
        check_dims(&self.weights, x, a_hat.n_nodes())?;
        Ok(SoftmaxOutput::from_logits(logits(
            &self.weights,
            Propagation::Normalized(a_hat.matrix()),
            x.as_csr(),
        )))
    }

    pub fn train<R: Rng + ?Sized>(
        self,
        a_hat: &NormalizedAdjacency,
        x: &FeatureMatrix,
        labels: &LabelVector,
        train_set: &[NodeId],
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<(Self, TrainLog)> {
        check_dims(&self.weights, x, a_hat.n_nodes())?;
        check_training_inputs(labels, train_set, &self.weights, a_hat.n_nodes())?;
        let (weights, log) = train_weights(
            self.weights,
            Propagation::Normalized(a_hat.matrix()),
            x,
            labels,
            train_set,
            cfg,
            rng,
        )?;
        Ok((Self { weights }, log))
    }

    /// Prediction at `v` computed from its 2-hop neighborhood only.
    pub fn predict_node_local(&self, g: &Graph, x: &FeatureMatrix, v: NodeId) -> Vec<f64> {
        self.predict_node_with_rows(g, x, v, |u| u)
    }

    /// Like [`predict_node_local`](Self::predict_node_local), except node `u`
    /// reads its features from row `row_of(u)` of `x`. Normalization always
    /// uses the degrees of `g`.
    pub fn predict_node_with_rows(
        &self,
        g: &Graph,
        x: &FeatureMatrix,
        v: NodeId,
        row_of: impl Fn(NodeId) -> NodeId,
    ) -> Vec<f64> {
        let w = &self.weights;
        let mut projected: HashMap<NodeId, Array1<f64>> = HashMap::new();
        let mut project = |u: NodeId| -> Array1<f64> {
            projected
                .entry(u)
                .or_insert_with(|| sparse_row_times(x, row_of(u), &w.w0))
                .clone()
        };
        let mut out = Array1::<f64>::zeros(w.n_classes());
        for u in closed_neighbors(g, v) {
            let mut z1 = Array1::<f64>::zeros(w.hidden_dim());
            for t in closed_neighbors(g, u) {
                z1.scaled_add(normalized_entry(g, u, t), &project(t));
            }
            z1.mapv_inplace(|a| a.max(0.0));
            let q = z1.dot(&w.w1);
            out.scaled_add(normalized_entry(g, v, u), &q);
        }
        let mut out = out.to_vec();
        softmax_in_place(&mut out);
        out
    }
}

/// `v` followed by its neighbors in ascending order, with `v` in sorted position.
fn closed_neighbors(g: &Graph, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
    let nbrs = g.neighbors(v);
    let split = nbrs.partition_point(|&u| u < v);
    nbrs[..split]
        .iter()
        .copied()
        .chain(std::iter::once(v))
        .chain(nbrs[split..].iter().copied())
}

fn sparse_row_times(x: &FeatureMatrix, row: NodeId, w0: &Array2<f64>) -> Array1<f64> {
    let (cols, vals) = x.row(row);
    let mut acc = Array1::zeros(w0.ncols());
    for (&j, &val) in cols.iter().zip(vals) {
        acc.scaled_add(val, &w0.row(j));
    }
    acc
}

/// Graph-agnostic baseline with the same two-layer shape as [`GcnModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub weights: Weights,
}

impl MlpModel {
    pub fn init<R: Rng + ?Sized>(n_features: usize, hidden: usize, n_classes: usize, rng: &mut R) -> Self {
        Self {
            weights: Weights::glorot(n_features, hidden, n_classes, rng),
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<SoftmaxOutput> {
        check_dims(&self.weights, x, x.n_nodes())?;
        Ok(SoftmaxOutput::from_logits(logits(
            &self.weights,
            Propagation::Identity,
            x.as_csr(),
        )))
    }

    pub fn train<R: Rng + ?Sized>(
        self,
        x: &FeatureMatrix,
        labels: &LabelVector,
        train_set: &[NodeId],
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<(Self, TrainLog)> {
        check_training_inputs(labels, train_set, &self.weights, x.n_nodes())?;
        check_dims(&self.weights, x, x.n_nodes())?;
        let (weights, log) =
            train_weights(self.weights, Propagation::Identity, x, labels, train_set, cfg, rng)?;
        Ok((Self { weights }, log))
    }
}

/// Elementwise mean of equal-length probability rows.
pub(crate) fn mean_rows(probs: &[Vec<f64>]) -> Vec<f64> {
    let c = probs.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; c];
    for row in probs {
        for (a, p) in acc.iter_mut().zip(row) {
            *a += p;
        }
    }
    let n = probs.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Sum of probability mass per row, for sanity checks.
pub fn row_sums(out: &SoftmaxOutput) -> Array1<f64> {
    out.as_array().sum_axis(Axis(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights_single_node() {
        let model = GcnModel {
            weights: Weights::new(Array2::eye(2), Array2::eye(2)).unwrap(),
        };
        let x = FeatureMatrix::from_dense(array![[1.0, 0.0]].view()).unwrap();
        let a = NormalizedAdjacency::new(&Graph::empty(1));
        let out = model.forward(&a, &x).unwrap();
        let e = std::f64::consts::E;
        assert!((out.row(0)[0] - e / (1.0 + e)).abs() < 1e-12);
        assert!((out.row(0)[1] - 1.0 / (1.0 + e)).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_uniform_rows() {
        let model = GcnModel {
            weights: Weights::new(Array2::zeros((3, 4)), Array2::zeros((4, 5))).unwrap(),
        };
        let (g, _) = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let x = FeatureMatrix::from_dense(array![[1.0, 2.0, 0.0], [0.0, 1.0, 1.0], [3.0, 0.0, 0.0]].view())
            .unwrap();
        let out = model.forward(&NormalizedAdjacency::new(&g), &x).unwrap();
        for v in 0..3 {
            for c in 0..5 {
                assert!((out.row(v)[c] - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn init_bounds_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = GcnModel::init(1, 1, 1, &mut rng);
        let b = 3f64.sqrt();
        assert!(m.weights.w0[[0, 0]].abs() <= b && m.weights.w1[[0, 0]].abs() <= b);
        let a = GcnModel::init(1433, 16, 7, &mut ChaCha8Rng::seed_from_u64(11));
        let c = GcnModel::init(1433, 16, 7, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, c);
        assert_eq!(a.weights.w0.dim(), (1433, 16));
        assert_eq!(a.weights.w1.dim(), (16, 7));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = GcnModel::init(4, 2, 3, &mut ChaCha8Rng::seed_from_u64(0));
        let x = FeatureMatrix::from_dense(Array2::zeros((2, 5)).view()).unwrap();
        let a = NormalizedAdjacency::new(&Graph::empty(2));
        assert!(matches!(m.forward(&a, &x), Err(Error::Dimension(_))));
    }

    #[test]
    fn zero_epochs_leave_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = GcnModel::init(3, 4, 2, &mut rng);
        let x = FeatureMatrix::from_dense(array![[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]].view()).unwrap();
        let labels = LabelVector::new(vec![0, 1], 2).unwrap();
        let a = NormalizedAdjacency::new(&Graph::empty(2));
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (trained, log) = m.clone().train(&a, &x, &labels, &[0], &cfg, &mut rng).unwrap();
        assert_eq!(trained, m);
        assert!(log.losses.is_empty());
    }

    #[test]
    fn empty_train_set_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = GcnModel::init(1, 2, 2, &mut rng);
        let x = FeatureMatrix::from_dense(array![[1.0]].view()).unwrap();
        let labels = LabelVector::new(vec![0], 2).unwrap();
        let a = NormalizedAdjacency::new(&Graph::empty(1));
        let r = m.train(&a, &x, &labels, &[], &TrainConfig::default(), &mut rng);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn divergence_names_epoch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = GcnModel {
            weights: Weights {
                w0: array![[f64::NAN, 0.0]],
                w1: Array2::zeros((2, 2)),
            },
        };
        let x = FeatureMatrix::from_dense(array![[1.0]].view()).unwrap();
        let labels = LabelVector::new(vec![0], 2).unwrap();
        let a = NormalizedAdjacency::new(&Graph::empty(1));
        let cfg = TrainConfig {
            dropout: 0.0,
            ..TrainConfig::default()
        };
        match m.train(&a, &x, &labels, &[0], &cfg, &mut rng) {
            Err(Error::TrainingDiverged { epoch, .. }) => assert_eq!(epoch, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn closed_neighbors_order() {
        let (g, _) = Graph::from_edges(5, &[(2, 0), (2, 4), (2, 3)]).unwrap();
        assert_eq!(closed_neighbors(&g, 2).collect::<Vec<_>>(), vec![0, 2, 3, 4]);
        assert_eq!(closed_neighbors(&g, 1).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax([0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax([0.5, 0.5]), 0);
    }
}
