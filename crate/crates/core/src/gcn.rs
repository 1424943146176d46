//! Dense L-layer graph convolutional network trained full-batch with Adam.
//!
//! Layer `l < L-1` computes `H_{l+1} = ReLU(Â H_l W_l)`; the output layer
//! is linear, `Z = Â H_{L-1} W_{L-1}`. Softmax only appears inside the
//! loss and prediction.

use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, NormalizedAdjacency, SplitSpec};

pub const DEFAULT_HIDDEN: usize = 16;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_ITERATIONS: usize = 500;
pub const DEFAULT_WEIGHT_DECAY: f64 = 5e-4;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Which weight matrices the L2 penalty covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayScope {
    #[default]
    All,
    First,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnConfig {
    /// Input width, hidden widths, then the class count.
    pub layer_dims: Vec<usize>,
    pub learning_rate: f64,
    pub iterations: usize,
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
    #[serde(default)]
    pub decay_scope: DecayScope,
    /// Stop once validation loss has not improved for this many steps.
    #[serde(default)]
    pub early_stop_patience: Option<usize>,
}

impl GcnConfig {
    /// Two layers with 16 hidden units and the standard training defaults.
    pub fn new(input_dim: usize, num_classes: usize) -> Self {
        Self::with_depth(input_dim, num_classes, 2)
    }

    /// `depth` graph-convolution layers, every hidden layer 16 wide.
    pub fn with_depth(input_dim: usize, num_classes: usize, depth: usize) -> Self {
        let mut layer_dims = vec![input_dim];
        layer_dims.extend(std::iter::repeat_n(DEFAULT_HIDDEN, depth.saturating_sub(1)));
        layer_dims.push(num_classes);
        Self {
            layer_dims,
            learning_rate: DEFAULT_LEARNING_RATE,
            iterations: DEFAULT_ITERATIONS,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            dropout: 0.0,
            seed: 0,
            decay_scope: DecayScope::All,
            early_stop_patience: None,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
            return bad(format!("layer_dims {:?} needs >= 2 positive widths", self.layer_dims));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be finite and >= 0", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay {} must be finite and >= 0", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Array2<f64>>,
    pub second_moment: Vec<Array2<f64>>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    weights: Vec<Array2<f64>>,
    config: GcnConfig,
    adam: AdamState,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..=limit))
}

impl GcnModel {
    /// Glorot-uniform initialization from `config.seed`.
    pub fn init(config: GcnConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let weights = config
            .layer_dims
            .windows(2)
            .map(|w| glorot(&mut rng, w[0], w[1]))
            .collect();
        Self::from_weights(config, weights)
    }

    pub fn from_weights(config: GcnConfig, weights: Vec<Array2<f64>>) -> Result<Self> {
        config.validate()?;
        if weights.len() != config.num_layers() {
            return Err(Error::Shape(format!(
                "{} weight matrices for {} layers",
                weights.len(),
                config.num_layers()
            )));
        }
        for (l, (w, dims)) in weights.iter().zip(config.layer_dims.windows(2)).enumerate() {
            if w.dim() != (dims[0], dims[1]) {
                return Err(Error::Shape(format!(
                    "W({l}) is {:?}, layer_dims require ({}, {})",
                    w.dim(),
                    dims[0],
                    dims[1]
                )));
            }
        }
        let zeros: Vec<Array2<f64>> = weights.iter().map(|w| Array2::zeros(w.dim())).collect();
        Ok(Self {
            weights,
            config,
            adam: AdamState {
                first_moment: zeros.clone(),
                second_moment: zeros,
                step: 0,
            },
        })
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn config(&self) -> &GcnConfig {
        &self.config
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    fn adam_step(&mut self, grads: &[Array2<f64>]) {
        let lr = self.config.learning_rate;
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (((w, g), m), v) in self
            .weights
            .iter_mut()
            .zip(grads)
            .zip(&mut self.adam.first_moment)
            .zip(&mut self.adam.second_moment)
        {
            Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
            });
        }
    }
}

/// Output of a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Array2<f64>,
    /// Post-ReLU activations `H_1 … H_{L-1}`.
    pub hidden: Vec<Array2<f64>>,
}

struct Tape {
    forward: Forward,
    /// Inverted-dropout masks applied to each layer's input, if any.
    masks: Vec<Option<Array2<f64>>>,
}

fn check_input(model: &GcnModel, adj: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<()> {
    let d = model.config.layer_dims[0];
    if x.ncols() != d {
        return Err(Error::Shape(format!(
            "input has {} columns, model expects {d}",
            x.ncols()
        )));
    }
    if x.nrows() != adj.num_nodes() {
        return Err(Error::Shape(format!(
            "input has {} rows, adjacency has {} nodes",
            x.nrows(),
            adj.num_nodes()
        )));
    }
    Ok(())
}

fn dropout_mask(rng: &mut ChaCha8Rng, shape: (usize, usize), p: f64) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < p { 0.0 } else { keep })
}

fn run_forward(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: ArrayView2<'_, f64>,
    mut dropout: Option<&mut ChaCha8Rng>,
) -> Result<Tape> {
    check_input(model, adj, x)?;
    let layers = model.num_layers();
    let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(layers - 1);
    let mut masks = Vec::with_capacity(layers);
    let mut logits = None;
    for (l, w) in model.weights.iter().enumerate() {
        let input = if l == 0 { x } else { hidden[l - 1].view() };
        let mask = dropout
            .as_deref_mut()
            .map(|rng| dropout_mask(rng, input.dim(), model.config.dropout));
        let support = match &mask {
            Some(m) => (&input * m).dot(w),
            None => input.dot(w),
        };
        let z = adj.matmul(support.view())?;
        masks.push(mask);
        if l + 1 < layers {
            hidden.push(z.mapv_into(|v| v.max(0.0)));
        } else {
            logits = Some(z);
        }
    }
    Ok(Tape {
        forward: Forward {
            logits: logits.expect("at least one layer"),
            hidden,
        },
        masks,
    })
}

/// Deterministic (dropout-free) forward pass.
pub fn forward(model: &GcnModel, adj: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<Forward> {
    Ok(run_forward(model, adj, x, None)?.forward)
}

/// Row-wise numerically stable log-softmax.
pub fn log_softmax(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Mean negative log-likelihood over the nodes in `idx`.
pub fn masked_cross_entropy(logits: ArrayView2<'_, f64>, labels: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return f64::NAN;
    }
    let logp = log_softmax(logits);
    -idx.iter().map(|&i| logp[[i, labels[i]]]).sum::<f64>() / idx.len() as f64
}

fn regularizer(model: &GcnModel) -> f64 {
    let wd = model.config.weight_decay;
    decayed(model)
        .map(|w| 0.5 * wd * w.iter().map(|v| v * v).sum::<f64>())
        .sum()
}

fn decayed(model: &GcnModel) -> impl Iterator<Item = &Array2<f64>> {
    let n = match model.config.decay_scope {
        DecayScope::All => model.weights.len(),
        DecayScope::First => 1,
    };
    model.weights.iter().take(n)
}

fn backward(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    mask: &[usize],
    tape: &Tape,
) -> Result<(f64, Vec<Array2<f64>>)> {
    let logits = &tape.forward.logits;
    let logp = log_softmax(logits.view());
    let m = mask.len() as f64;
    let mut grad_z = Array2::zeros(logits.dim());
    let mut data_loss = 0.0;
    for &i in mask {
        let y = labels[i];
        data_loss -= logp[[i, y]];
        for (c, g) in grad_z.row_mut(i).iter_mut().enumerate() {
            *g = (logp[[i, c]].exp() - if c == y { 1.0 } else { 0.0 }) / m;
        }
    }
    let loss = data_loss / m + regularizer(model);

    let layers = model.num_layers();
    let mut grads: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); layers];
    for l in (0..layers).rev() {
        // Â is symmetric, so Âᵀ·G = Â·G.
        let propagated = adj.matmul(grad_z.view())?;
        let raw_input = if l == 0 { x } else { tape.forward.hidden[l - 1].view() };
        let input = match &tape.masks[l] {
            Some(mk) => &raw_input * mk,
            None => raw_input.to_owned(),
        };
        grads[l] = input.t().dot(&propagated);
        if l > 0 {
            let mut grad_h = propagated.dot(&model.weights[l].t());
            if let Some(mk) = &tape.masks[l] {
                grad_h *= mk;
            }
            Zip::from(&mut grad_h)
                .and(&tape.forward.hidden[l - 1])
                .for_each(|g, &h| {
                    if h <= 0.0 {
                        *g = 0.0
                    }
                });
            grad_z = grad_h;
        }
    }
    let wd = model.config.weight_decay;
    for (g, w) in grads.iter_mut().zip(decayed(model)) {
        g.scaled_add(wd, w);
    }
    Ok((loss, grads))
}

/// Masked cross-entropy plus `weight_decay · ½ Σ ‖W‖²_F`, and its exact
/// gradient with respect to every weight matrix.
pub fn loss_and_grads(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    mask: &[usize],
) -> Result<(f64, Vec<Array2<f64>>)> {
    if mask.is_empty() {
        return Err(Error::InvalidArgument("loss mask is empty".into()));
    }
    if labels.len() != x.nrows() {
        return Err(Error::Shape(format!("{} labels for {} nodes", labels.len(), x.nrows())));
    }
    let k = *model.config.layer_dims.last().unwrap();
    if let Some(&i) = mask.iter().find(|&&i| i >= labels.len() || labels[i] >= k) {
        return Err(Error::InvalidArgument(format!(
            "mask entry {i} is out of range or mislabelled"
        )));
    }
    let tape = run_forward(model, adj, x, None)?;
    backward(model, adj, x, labels, mask, &tape)
}

/// Argmax class per node; ties resolve to the lowest index.
pub fn predict(model: &GcnModel, adj: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    Ok(argmax_rows(forward(model, adj, x)?.logits.view()))
}

pub fn argmax_rows(logits: ArrayView2<'_, f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|r| crate::learners::argmax(r.as_slice().expect("standard layout")))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    /// `NaN` when there is no validation split.
    pub val_accuracy: Vec<f64>,
    pub seconds: f64,
}

fn accuracy_on(pred: &[usize], labels: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return f64::NAN;
    }
    idx.iter().filter(|&&i| pred[i] == labels[i]).count() as f64 / idx.len() as f64
}

/// Normalizes the bundle's graph and trains on `x`.
pub fn train(bundle: &DatasetBundle, x: ArrayView2<'_, f64>, config: GcnConfig) -> Result<(GcnModel, TrainTrace)> {
    let adj = normalize_adjacency(&bundle.graph);
    train_on(&adj, x, bundle.graph.labels(), &bundle.splits, config)
}

/// Full-batch Adam on the training mask for `config.iterations` steps.
pub fn train_on(
    adj: &NormalizedAdjacency,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    splits: &SplitSpec,
    config: GcnConfig,
) -> Result<(GcnModel, TrainTrace)> {
    let start = Instant::now();
    let mut model = GcnModel::init(config)?;
    check_input(&model, adj, x)?;
    let mut dropout_rng = (model.config.dropout > 0.0).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
        rng.set_stream(1);
        rng
    });
    let mut trace = TrainTrace::default();
    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;
    for iteration in 0..model.config.iterations {
        let tape = run_forward(&model, adj, x, dropout_rng.as_mut())?;
        let (loss, grads) = backward(&model, adj, x, labels, &splits.train, &tape)?;
        if !loss.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteLoss { iteration, loss });
        }
        let eval_logits = if dropout_rng.is_some() {
            forward(&model, adj, x)?.logits
        } else {
            tape.forward.logits
        };
        let pred = argmax_rows(eval_logits.view());
        trace.loss.push(loss);
        trace.train_accuracy.push(accuracy_on(&pred, labels, &splits.train));
        trace.val_accuracy.push(accuracy_on(&pred, labels, &splits.val));

        model.adam_step(&grads);

        if let (Some(patience), false) = (model.config.early_stop_patience, splits.val.is_empty()) {
            let val_loss = masked_cross_entropy(eval_logits.view(), labels, &splits.val);
            if val_loss < best_val {
                best_val = val_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    trace.seconds = start.elapsed().as_secs_f64();
    Ok((model, trace))
}

/// What the first layer consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureInput {
    Raw,
    Aggregated,
}

/// JSON checkpoint: weights flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub config: GcnConfig,
    pub seed: u64,
    pub input: FeatureInput,
}

impl Checkpoint {
    pub fn from_model(model: &GcnModel, input: FeatureInput) -> Self {
        Self {
            layer_dims: model.config.layer_dims.clone(),
            weights: model.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            config: model.config.clone(),
            seed: model.config.seed,
            input,
        }
    }

    pub fn to_model(&self) -> Result<GcnModel> {
        if self.layer_dims != self.config.layer_dims {
            return Err(Error::Shape("checkpoint layer_dims disagree with config".into()));
        }
        let weights = self
            .weights
            .iter()
            .zip(self.layer_dims.windows(2))
            .map(|(flat, d)| {
                Array2::from_shape_vec((d[0], d[1]), flat.clone()).map_err(|e| Error::Shape(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        GcnModel::from_weights(self.config.clone(), weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
