//! Graph convolutional regressor over an architecture graph.
//!
//! `H^0 = X`, `H^{l+1} = relu(Â H^l W^l)`, `out = Â H^L w + b`, trained
//! full-batch with Adam on the mean absolute error over labeled nodes plus an
//! L2 weight-decay term. Gradients are derived by hand; there is no autodiff.

use std::borrow::Cow;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar};
use num_traits::Float;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::arch_graph::{normalize_adjacency, ArchGraph};
use crate::error::{Error, Result};
use crate::seeds;
use crate::sparse::CsrMatrix;

pub const MODEL_MAGIC: &[u8; 4] = b"GCNM";
pub const MODEL_VERSION: u32 = 1;

/// Above this many activation entries, prediction runs in `f32`.
pub const F64_ACTIVATION_LIMIT: usize = 1 << 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcnConfig {
    pub hidden_dims: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    /// Multiplier applied at `epochs / 2` and `3 * epochs / 4`.
    pub lr_decay: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![512, 512],
            epochs: 600,
            lr: 0.01,
            lr_decay: 0.1,
            weight_decay: 5e-4,
            seed: 0,
        }
    }
}

impl GcnConfig {
    /// Narrow profile for tests and CI.
    pub fn reduced() -> Self {
        Self {
            hidden_dims: vec![32, 32],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidSpec("hidden_dims must be non-empty and positive".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::InvalidSpec(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidSpec("epochs must be at least 1".into()));
        }
        if self.weight_decay < 0.0 || self.lr_decay <= 0.0 {
            return Err(Error::InvalidSpec("weight_decay and lr_decay must be non-negative".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let milestones = [self.epochs / 2, 3 * self.epochs / 4];
        let steps = milestones.iter().filter(|&&m| epoch >= m).count() as i32;
        self.lr * self.lr_decay.powi(steps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    layers: Vec<Array2<f64>>,
    head: Array1<f64>,
    bias: f64,
}

impl GcnModel {
    pub fn from_parts(layers: Vec<Array2<f64>>, head: Array1<f64>, bias: f64) -> Result<Self> {
        let model = Self { layers, head, bias };
        model.check_chain()?;
        Ok(model)
    }

    fn check_chain(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::ShapeMismatch("model has no layers".into()));
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[0].ncols() != w[1].nrows() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].ncols(),
                    i + 1,
                    w[1].nrows()
                )));
            }
        }
        let last = self.layers.last().unwrap().ncols();
        if self.head.len() != last {
            return Err(Error::ShapeMismatch(format!(
                "head has {} weights for width {last}",
                self.head.len()
            )));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Array2<f64>] {
        &self.layers
    }

    pub fn head(&self) -> &Array1<f64> {
        &self.head
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].nrows()
    }

    /// Weight shapes, head included as a column.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .map(|w| w.dim())
            .chain(std::iter::once((self.head.len(), 1)))
            .collect()
    }

    fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|w| Array2::zeros(w.dim())).collect(),
            head: Array1::zeros(self.head.len()),
            bias: 0.0,
        }
    }

    /// Every parameter as a flat slice, in a fixed order.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self
            .layers
            .iter()
            .map(|w| w.as_slice().expect("standard layout"))
            .collect();
        out.push(self.head.as_slice().expect("contiguous"));
        out.push(std::slice::from_ref(&self.bias));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self
            .layers
            .iter_mut()
            .map(|w| w.as_slice_mut().expect("standard layout"))
            .collect();
        out.push(self.head.as_slice_mut().expect("contiguous"));
        out.push(std::slice::from_mut(&mut self.bias));
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_u32::<LittleEndian>(MODEL_VERSION)?;
        w.write_u32::<LittleEndian>(self.layers.len() as u32)?;
        for layer in &self.layers {
            w.write_u32::<LittleEndian>(layer.nrows() as u32)?;
            w.write_u32::<LittleEndian>(layer.ncols() as u32)?;
            for &v in layer.iter() {
                w.write_f32::<LittleEndian>(v as f32)?;
            }
        }
        w.write_u32::<LittleEndian>(self.head.len() as u32)?;
        for &v in &self.head {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
        w.write_f32::<LittleEndian>(self.bias as f32)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let read_vec = |r: &mut R, n: usize| -> Result<Vec<f64>> {
            (0..n).map(|_| Ok(r.read_f32::<LittleEndian>()? as f64)).collect()
        };
        let count = r.read_u32::<LittleEndian>()? as usize;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = r.read_u32::<LittleEndian>()? as usize;
            let cols = r.read_u32::<LittleEndian>()? as usize;
            let data = read_vec(&mut r, rows * cols)?;
            layers.push(
                Array2::from_shape_vec((rows, cols), data)
                    .map_err(|e| Error::ModelFormat(e.to_string()))?,
            );
        }
        let head_len = r.read_u32::<LittleEndian>()? as usize;
        let head = Array1::from(read_vec(&mut r, head_len)?);
        let bias = r.read_f32::<LittleEndian>()? as f64;
        Self::from_parts(layers, head, bias).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_from(BufReader::new(file))
    }
}

/// Glorot-uniform weights, zero head bias.
pub fn init_model(feat_dim: usize, config: &GcnConfig) -> Result<GcnModel> {
    if feat_dim == 0 {
        return Err(Error::ShapeMismatch("feature dimension must be at least 1".into()));
    }
    config.validate()?;
    let mut rng = seeds::stream(config.seed, "gcn-init", 0);
    let mut glorot = |rows: usize, cols: usize| -> Vec<f64> {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        (0..rows * cols).map(|_| dist.sample(&mut rng)).collect()
    };
    let mut dims = vec![feat_dim];
    dims.extend(&config.hidden_dims);
    let layers = dims
        .windows(2)
        .map(|d| Array2::from_shape_vec((d[0], d[1]), glorot(d[0], d[1])).expect("shape"))
        .collect();
    let head = Array1::from(glorot(*dims.last().unwrap(), 1));
    GcnModel::from_parts(layers, head, 0.0)
}

fn cast<F: Float>(w: &Array2<f64>) -> Array2<F> {
    w.mapv(|v| F::from(v).unwrap())
}

/// Forward pass on an explicit operator and feature matrix.
pub fn forward_with<F: Float + LinalgScalar>(
    adj: &CsrMatrix,
    features: ArrayView2<'_, F>,
    model: &GcnModel,
) -> Result<Vec<F>> {
    if features.nrows() != adj.n() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} nodes",
            features.nrows(),
            adj.n()
        )));
    }
    if features.ncols() != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "features have {} columns, model expects {}",
            features.ncols(),
            model.input_dim()
        )));
    }
    let relu = |z: &mut Array2<F>| z.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });

    let mut h: Option<Array2<F>> = None;
    for w in &model.layers {
        let w = cast::<F>(w);
        let mut z = {
            let input = h.as_ref().map_or(features.view(), |x| x.view());
            if w.nrows() <= w.ncols() {
                adj.matmul(input).dot(&w)
            } else {
                adj.matmul(input.dot(&w).view())
            }
        };
        relu(&mut z);
        h = Some(z);
    }
    let h = h.expect("at least one layer");
    let head: Array1<F> = model.head.mapv(|v| F::from(v).unwrap());
    let s = h.dot(&head);
    drop(h);
    let bias = F::from(model.bias).unwrap();
    Ok(adj.matvec(s.as_slice().expect("contiguous")).into_iter().map(|v| v + bias).collect())
}

fn adjacency(graph: &ArchGraph) -> Cow<'_, CsrMatrix> {
    match graph.normalized() {
        Some(a) => Cow::Borrowed(a),
        None => Cow::Owned(normalize_adjacency(graph)),
    }
}

/// Score of every node of `graph`.
pub fn forward(graph: &ArchGraph, model: &GcnModel) -> Result<Vec<f64>> {
    let adj = adjacency(graph);
    forward_with(&adj, graph.features_as::<f64>().view(), model)
}

/// Full-graph prediction; switches to `f32` when the widest activation
/// matrix would exceed [`F64_ACTIVATION_LIMIT`] entries.
pub fn predict(graph: &ArchGraph, model: &GcnModel) -> Result<Vec<f64>> {
    let width = model.layers.iter().map(|w| w.ncols().max(w.nrows())).max().unwrap_or(1);
    if graph.num_nodes().saturating_mul(width) <= F64_ACTIVATION_LIMIT {
        return forward(graph, model);
    }
    let adj = adjacency(graph);
    let out = forward_with(&adj, graph.features_as::<f32>().view(), model)?;
    Ok(out.into_iter().map(f64::from).collect())
}

/// Per-node data loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// `|r|`, subgradient `sign(r)` with `sign(0) = 0`.
    L1,
    /// `sqrt(r^2 + d^2) - d`, a smooth stand-in for `|r|` used in gradient checks.
    PseudoHuber(f64),
}

impl Loss {
    fn value(self, r: f64) -> f64 {
        match self {
            Loss::L1 => r.abs(),
            Loss::PseudoHuber(d) => (r * r + d * d).sqrt() - d,
        }
    }

    fn derivative(self, r: f64) -> f64 {
        match self {
            Loss::L1 if r > 0.0 => 1.0,
            Loss::L1 if r < 0.0 => -1.0,
            Loss::L1 => 0.0,
            Loss::PseudoHuber(d) => r / (r * r + d * d).sqrt(),
        }
    }
}

/// Objective value and gradient of one full-batch step.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Mean data loss over labeled nodes.
    pub data_loss: f64,
    /// Data loss plus `weight_decay / 2 * ||weights||^2` (bias excluded).
    pub objective: f64,
    pub gradient: GcnModel,
}

/// Mean loss over `labels` and its gradient with respect to every parameter.
///
/// `propagated` is `Â X`, which is constant across training steps.
pub fn objective_and_gradient(
    adj: &CsrMatrix,
    propagated: ArrayView2<'_, f64>,
    model: &GcnModel,
    labels: &[(usize, f64)],
    loss: Loss,
    weight_decay: f64,
) -> Result<Evaluation> {
    if labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    let depth = model.layers.len();
    // inputs[l] = Â H^l, pre[l] = Â H^l W^l
    let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(depth);
    let mut pre: Vec<Array2<f64>> = Vec::with_capacity(depth);
    let mut h = Array2::zeros((0, 0));
    for (l, w) in model.layers.iter().enumerate() {
        let p = if l == 0 {
            propagated.to_owned()
        } else {
            adj.matmul(h.view())
        };
        let z = p.dot(w);
        h = z.mapv(|v| v.max(0.0));
        inputs.push(p);
        pre.push(z);
    }
    let s = h.dot(&model.head);
    let out = adj.matvec(s.as_slice().expect("contiguous"));

    let m = labels.len() as f64;
    let mut g_out = vec![0.0; adj.n()];
    let mut data_loss = 0.0;
    for &(i, y) in labels {
        let r = out[i] + model.bias - y;
        data_loss += loss.value(r);
        g_out[i] += loss.derivative(r) / m;
    }
    data_loss /= m;

    let mut grad = model.zeros_like();
    grad.bias = g_out.iter().sum();
    let g_s = Array1::from(adj.matvec(&g_out));
    grad.head = h.t().dot(&g_s) + &(&model.head * weight_decay);
    let mut g_h = g_s
        .view()
        .insert_axis(Axis(1))
        .dot(&model.head.view().insert_axis(Axis(0)));
    for l in (0..depth).rev() {
        let mut g_z = g_h;
        g_z.zip_mut_with(&pre[l], |g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        grad.layers[l].assign(&inputs[l].t().dot(&g_z));
        grad.layers[l].scaled_add(weight_decay, &model.layers[l]);
        g_h = if l > 0 {
            adj.matmul(g_z.dot(&model.layers[l].t()).view())
        } else {
            Array2::zeros((0, 0))
        };
    }

    let sq: f64 = model
        .layers
        .iter()
        .map(|w| w.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        + model.head.iter().map(|v| v * v).sum::<f64>();
    Ok(Evaluation {
        data_loss,
        objective: data_loss + 0.5 * weight_decay * sq,
        gradient: grad,
    })
}

struct Adam {
    m: GcnModel,
    v: GcnModel,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(model: &GcnModel) -> Self {
        Self {
            m: model.zeros_like(),
            v: model.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut GcnModel, grad: &GcnModel, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let params = model.params_mut();
        let grads = grad.params();
        let ms = self.m.params_mut();
        let vs = self.v.params_mut();
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(ms).zip(vs) {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Training {
    pub model: GcnModel,
    /// Mean L1 loss over labeled nodes at the start of each epoch, in label units.
    pub losses: Vec<f64>,
}

/// Trains on an explicit operator and feature matrix.
///
/// Targets are standardized internally; the returned model predicts in label units.
pub fn train_with(
    adj: &CsrMatrix,
    features: ArrayView2<'_, f64>,
    labels: &[(usize, f64)],
    config: &GcnConfig,
) -> Result<Training> {
    config.validate()?;
    if labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    if let Some(&(index, _)) = labels.iter().find(|(i, _)| *i >= adj.n()) {
        return Err(Error::IndexOutOfRange { index, len: adj.n() });
    }
    if features.nrows() != adj.n() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} nodes",
            features.nrows(),
            adj.n()
        )));
    }
    let propagated = adj.matmul(features);
    // Fit standardized targets, then fold the affine map back into the head.
    let count = labels.len() as f64;
    let mean = labels.iter().map(|l| l.1).sum::<f64>() / count;
    let sd = (labels.iter().map(|l| (l.1 - mean).powi(2)).sum::<f64>() / count).sqrt();
    let scale = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
    let scaled: Vec<(usize, f64)> = labels.iter().map(|&(i, y)| (i, (y - mean) / scale)).collect();
    let mut model = init_model(features.ncols(), config)?;
    let mut adam = Adam::new(&model);
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let eval = objective_and_gradient(
            adj,
            propagated.view(),
            &model,
            &scaled,
            Loss::L1,
            config.weight_decay,
        )?;
        if !eval.objective.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        losses.push(eval.data_loss * scale);
        adam.step(&mut model, &eval.gradient, config.lr_at(epoch));
    }
    model.head.mapv_inplace(|w| w * scale);
    model.bias = model.bias * scale + mean;
    Ok(Training { model, losses })
}

/// Fits the regressor to `(node, accuracy)` labels of `graph`.
pub fn train(graph: &ArchGraph, labels: &[(usize, f64)], config: &GcnConfig) -> Result<Training> {
    let adj = adjacency(graph);
    train_with(&adj, graph.features_as::<f64>().view(), labels, config)
}

/// Writes `epoch,loss` rows.
pub fn write_loss_csv<W: Write>(mut w: W, losses: &[f64]) -> Result<()> {
    writeln!(w, "epoch,loss")?;
    for (epoch, loss) in losses.iter().enumerate() {
        writeln!(w, "{epoch},{loss:.6}")?;
    }
    Ok(())
}
