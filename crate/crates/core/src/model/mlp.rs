//! Fully connected network with hand-written backpropagation.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_dim, MiniBatch, ModelError, StochasticObjective, Targets};
use crate::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl FromStr for Activation {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(ModelError::InvalidSpec(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Softmax over the output layer followed by cross-entropy; targets are class indices.
    SoftmaxCrossEntropy,
    /// Per-sample `(1/n_L) Σ (o − d)²`; targets are real rows of width `n_L`.
    MeanSquaredError,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::SoftmaxCrossEntropy => "softmax_cross_entropy",
            LossKind::MeanSquaredError => "mean_squared_error",
        })
    }
}

impl FromStr for LossKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "softmax_cross_entropy" | "cross_entropy" | "ce" => Ok(LossKind::SoftmaxCrossEntropy),
            "mean_squared_error" | "mse" => Ok(LossKind::MeanSquaredError),
            other => Err(ModelError::InvalidSpec(format!("unknown loss `{other}`"))),
        }
    }
}

/// Architecture of a multilayer perceptron.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    activation: Activation,
    loss: LossKind,
}

impl MlpSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        activation: Activation,
        loss: LossKind,
    ) -> Result<Self, ModelError> {
        if layer_sizes.len() < 2 {
            return Err(ModelError::InvalidSpec(
                "need at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(ModelError::InvalidSpec("layer sizes must be positive".into()));
        }
        Ok(Self { layer_sizes, activation, loss })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Total number of weights and biases, `Σ_l (n_{l-1}·n_l + n_l)`.
    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    pub fn layout(&self) -> MlpParamLayout {
        MlpParamLayout::new(&self.layer_sizes)
    }

    /// Fan-based uniform weights `U(-a, a)` with `a = √(6/(fan_in + fan_out))`,
    /// zero biases.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = self.layout();
        let mut w = Array1::zeros(layout.total());
        for layer in layout.layers() {
            let bound = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
            for x in w.slice_mut(s![layer.weight_range()]).iter_mut() {
                *x = rng.random_range(-bound..bound);
            }
        }
        w
    }
}

/// Parses architecture strings such as `64-20-10-10`.
pub fn parse_layer_sizes(s: &str) -> Result<Vec<usize>, ModelError> {
    s.split(['-', ','])
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| ModelError::InvalidSpec(format!("bad layer size `{part}` in `{s}`")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub n_in: usize,
    pub n_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerSlot {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight_offset..self.bias_offset
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias_offset..self.bias_offset + self.n_out
    }
}

/// Maps the flat parameter vector onto per-layer weight matrices
/// (row-major, `n_out × n_in`) each followed by its bias vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpParamLayout {
    layers: Vec<LayerSlot>,
    total: usize,
}

impl MlpParamLayout {
    fn new(sizes: &[usize]) -> Self {
        let mut offset = 0;
        let layers = sizes
            .windows(2)
            .map(|p| {
                let slot = LayerSlot {
                    n_in: p[0],
                    n_out: p[1],
                    weight_offset: offset,
                    bias_offset: offset + p[0] * p[1],
                };
                offset += p[0] * p[1] + p[1];
                slot
            })
            .collect();
        Self { layers, total: offset }
    }

    pub fn layers(&self) -> &[LayerSlot] {
        &self.layers
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn unpack(&self, w: ArrayView1<f64>) -> Result<Vec<(Array2<f64>, Array1<f64>)>, ModelError> {
        check_dim(self.total, w)?;
        Ok(self
            .layers
            .iter()
            .map(|l| (weight_view(w, l).to_owned(), w.slice(s![l.bias_range()]).to_owned()))
            .collect())
    }

    pub fn pack(&self, parts: &[(Array2<f64>, Array1<f64>)]) -> Result<ParamVector, ModelError> {
        if parts.len() != self.layers.len() {
            return Err(ModelError::InvalidSpec(format!(
                "expected {} layers, got {}",
                self.layers.len(),
                parts.len()
            )));
        }
        let mut w = Array1::zeros(self.total);
        for (l, (weights, bias)) in self.layers.iter().zip(parts) {
            if weights.dim() != (l.n_out, l.n_in) || bias.len() != l.n_out {
                return Err(ModelError::InvalidSpec("layer shape does not match layout".into()));
            }
            for (dst, src) in w.slice_mut(s![l.weight_range()]).iter_mut().zip(weights.iter()) {
                *dst = *src;
            }
            w.slice_mut(s![l.bias_range()]).assign(bias);
        }
        Ok(w)
    }
}

fn weight_view<'a>(w: ArrayView1<'a, f64>, l: &LayerSlot) -> ArrayView2<'a, f64> {
    let flat = w.slice_move(s![l.weight_range()]);
    flat.into_shape_with_order((l.n_out, l.n_in)).expect("contiguous layer weights")
}

/// Row-wise softmax.
pub fn softmax(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    out
}

#[derive(Clone, Copy)]
enum TargetView<'a> {
    Classes(&'a [usize]),
    Values(ArrayView2<'a, f64>),
}

impl<'a> TargetView<'a> {
    fn rows(&self, start: usize, end: usize) -> TargetView<'a> {
        match *self {
            TargetView::Classes(c) => TargetView::Classes(&c[start..end]),
            TargetView::Values(v) => TargetView::Values(v.slice_move(s![start..end, ..])),
        }
    }
}

/// The MLP objective: batch-mean loss and its exact gradient.
#[derive(Debug, Clone)]
pub struct MlpObjective {
    spec: MlpSpec,
    layout: MlpParamLayout,
}

impl MlpObjective {
    pub fn new(spec: MlpSpec) -> Self {
        let layout = spec.layout();
        Self { spec, layout }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layout(&self) -> &MlpParamLayout {
        &self.layout
    }

    /// Output-layer values (logits for classification) for each input row.
    pub fn predict(&self, w: ArrayView1<f64>, inputs: ArrayView2<f64>) -> Result<Array2<f64>, ModelError> {
        check_dim(self.layout.total, w)?;
        self.check_inputs(inputs)?;
        let acts = self.forward(w, inputs);
        Ok(acts.into_iter().last().unwrap())
    }

    /// Mean loss over an arbitrarily large sample set, evaluated in chunks.
    pub fn mean_loss(
        &self,
        w: ArrayView1<f64>,
        inputs: ArrayView2<f64>,
        targets: &Targets,
    ) -> Result<f64, ModelError> {
        check_dim(self.layout.total, w)?;
        self.check_inputs(inputs)?;
        let n = inputs.nrows();
        let view = self.target_view(targets, n)?;
        if n == 0 {
            return Err(ModelError::InvalidBatch("no samples".into()));
        }
        const CHUNK: usize = 4096;
        let mut total = 0.0;
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let acts = self.forward(w, inputs.slice(s![start..end, ..]));
            let out = acts.last().unwrap();
            total += self.loss_sum(out.view(), view.rows(start, end));
            start = end;
        }
        Ok(total / n as f64)
    }

    fn check_inputs(&self, inputs: ArrayView2<f64>) -> Result<(), ModelError> {
        if inputs.ncols() != self.spec.input_width() {
            return Err(ModelError::InputWidthMismatch {
                expected: self.spec.input_width(),
                got: inputs.ncols(),
            });
        }
        Ok(())
    }

    fn target_view<'t>(&self, targets: &'t Targets, n: usize) -> Result<TargetView<'t>, ModelError> {
        if targets.len() != n {
            return Err(ModelError::InvalidBatch(format!("{n} inputs but {} targets", targets.len())));
        }
        let out = self.spec.output_width();
        match (self.spec.loss, targets) {
            (LossKind::SoftmaxCrossEntropy, Targets::Classes(c)) => {
                if let Some(&bad) = c.iter().find(|&&c| c >= out) {
                    return Err(ModelError::InvalidBatch(format!(
                        "class {bad} out of range for {out} outputs"
                    )));
                }
                Ok(TargetView::Classes(c))
            }
            (LossKind::MeanSquaredError, Targets::Values(v)) => {
                if v.ncols() != out {
                    return Err(ModelError::InvalidBatch(format!(
                        "target width {} does not match output width {out}",
                        v.ncols()
                    )));
                }
                Ok(TargetView::Values(v.view()))
            }
            (LossKind::SoftmaxCrossEntropy, _) => {
                Err(ModelError::InvalidBatch("cross-entropy needs class targets".into()))
            }
            (LossKind::MeanSquaredError, _) => {
                Err(ModelError::InvalidBatch("squared error needs real-valued targets".into()))
            }
        }
    }

    /// Activations of every layer, input first. Hidden layers are activated,
    /// the output layer is linear.
    fn forward(&self, w: ArrayView1<f64>, inputs: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let n_layers = self.layout.layers.len();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(inputs.to_owned());
        for (i, l) in self.layout.layers.iter().enumerate() {
            let weights = weight_view(w, l);
            let bias = w.slice(s![l.bias_range()]);
            let mut z = acts[i].dot(&weights.t());
            z += &bias;
            if i + 1 < n_layers {
                match self.spec.activation {
                    Activation::Relu => z.mapv_inplace(|x| x.max(0.0)),
                    Activation::Sigmoid => z.mapv_inplace(sigmoid),
                }
            }
            acts.push(z);
        }
        acts
    }

    fn loss_sum(&self, out: ArrayView2<f64>, targets: TargetView) -> f64 {
        match targets {
            TargetView::Classes(classes) => out
                .rows()
                .into_iter()
                .zip(classes)
                .map(|(row, &c)| log_sum_exp(row) - row[c])
                .sum(),
            TargetView::Values(t) => {
                let width = out.ncols() as f64;
                Zip::from(out).and(t).fold(0.0, |acc, &o, &d| acc + (o - d) * (o - d)) / width
            }
        }
    }

    /// dLoss/dOutput for the batch mean.
    fn output_delta(&self, out: &Array2<f64>, targets: TargetView) -> Array2<f64> {
        let b = out.nrows() as f64;
        match targets {
            TargetView::Classes(classes) => {
                let mut delta = softmax(out.view());
                for (mut row, &c) in delta.rows_mut().into_iter().zip(classes) {
                    row[c] -= 1.0;
                }
                delta.mapv_inplace(|x| x / b);
                delta
            }
            TargetView::Values(t) => {
                let scale = 2.0 / (b * out.ncols() as f64);
                let mut delta = out - &t;
                delta.mapv_inplace(|x| x * scale);
                delta
            }
        }
    }
}

impl StochasticObjective for MlpObjective {
    type Batch = MiniBatch;

    fn dim(&self) -> usize {
        self.layout.total
    }

    fn evaluate(
        &self,
        w: ArrayView1<f64>,
        batch: &MiniBatch,
    ) -> Result<(f64, Array1<f64>), ModelError> {
        check_dim(self.layout.total, w)?;
        self.check_inputs(batch.inputs().view())?;
        let targets = self.target_view(batch.targets(), batch.len())?;
        let acts = self.forward(w, batch.inputs().view());
        let out = acts.last().unwrap();
        let loss = self.loss_sum(out.view(), targets) / batch.len() as f64;

        let mut grad = Array1::<f64>::zeros(self.layout.total);
        let mut delta = self.output_delta(out, targets);
        for (i, l) in self.layout.layers.iter().enumerate().rev() {
            let prev = &acts[i];
            {
                let flat = grad.slice_mut(s![l.weight_range()]);
                let mut gw: ArrayViewMut2<f64> =
                    flat.into_shape_with_order((l.n_out, l.n_in)).expect("contiguous gradient");
                gw.assign(&delta.t().dot(prev));
            }
            grad.slice_mut(s![l.bias_range()]).assign(&delta.sum_axis(Axis(0)));
            if i > 0 {
                let mut back = delta.dot(&weight_view(w, l));
                match self.spec.activation {
                    Activation::Relu => {
                        Zip::from(&mut back).and(prev).for_each(|d, &h| {
                            if h <= 0.0 {
                                *d = 0.0;
                            }
                        });
                    }
                    Activation::Sigmoid => {
                        Zip::from(&mut back).and(prev).for_each(|d, &h| *d *= h * (1.0 - h));
                    }
                }
                delta = back;
            }
        }
        Ok((loss, grad))
    }

    fn loss(&self, w: ArrayView1<f64>, batch: &MiniBatch) -> Result<f64, ModelError> {
        self.mean_loss(w, batch.inputs().view(), batch.targets())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(row: ArrayView1<f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}
