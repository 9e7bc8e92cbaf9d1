//! Layers, activations, loss, and explicit backpropagation.
//!
//! The centerpiece is [`ContextBiasDense`]: a dense layer whose bias is not a
//! single learned vector but one learned vector *per context*, stored as the
//! columns of a `out x C` matrix. Feeding the layer a context label selects a
//! bias column; with a one-hot context this is exactly equivalent to an
//! ordinary dense layer whose bias is that column, and the implementation
//! keeps the equivalence bit-exact by always selecting the column rather than
//! multiplying by the one-hot vector.
//!
//! Backpropagation is written out by hand. The output layer must use softmax,
//! and its gradient is fused with the cross-entropy loss.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Activation functions supported by dense layers.
///
/// Softmax is only valid on the output layer; it normalizes per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Elu,
    Softmax,
}

impl Activation {
    fn apply(&self, z: &Matrix) -> Matrix {
        match self {
            Activation::Identity => z.clone(),
            Activation::Elu => elu(z),
            Activation::Softmax => softmax(z),
        }
    }
}

/// Exponential linear unit with alpha = 1: `x` for `x > 0`, else `e^x - 1`.
pub fn elu(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { v.exp_m1() })
}

/// Derivative of [`elu`] evaluated at the pre-activation.
fn elu_prime(z: &Matrix) -> Matrix {
    z.map(|v| if v > 0.0 { 1.0 } else { v.exp() })
}

/// Row-wise softmax with max-subtraction for overflow safety.
pub fn softmax(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy of row-stochastic predictions against integer labels.
///
/// Probabilities are clamped at `1e-12` before the log.
pub fn cross_entropy(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != probs.rows() {
        return Err(Error::Parameter(format!(
            "cross_entropy: {} labels for {} rows",
            labels.len(),
            probs.rows()
        )));
    }
    if probs.rows() == 0 {
        return Err(Error::Parameter(
            "cross_entropy: empty batch".to_string(),
        ));
    }
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= probs.cols() {
            return Err(Error::Parameter(format!(
                "cross_entropy: label {label} out of range for {} classes",
                probs.cols()
            )));
        }
        total -= probs.get(r, label).max(1e-12).ln();
    }
    Ok(total / probs.rows() as f64)
}

/// Fused gradient of mean cross-entropy through softmax:
/// `(probs - one_hot(labels)) / batch`.
pub fn softmax_ce_delta(probs: &Matrix, labels: &[usize]) -> Matrix {
    let n = probs.rows() as f64;
    let mut delta = probs.clone();
    for (r, &label) in labels.iter().enumerate() {
        let v = delta.get(r, label);
        delta.set(r, label, v - 1.0);
    }
    delta.scale(1.0 / n)
}

/// A context identity: an integer in `[0, num_contexts)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextLabel {
    pub index: usize,
    pub num_contexts: usize,
}

impl ContextLabel {
    pub fn new(index: usize, num_contexts: usize) -> Result<ContextLabel> {
        if index >= num_contexts {
            return Err(Error::Index {
                op: "ContextLabel",
                index,
                bound: num_contexts,
            });
        }
        Ok(ContextLabel { index, num_contexts })
    }

    /// One-hot encoding as a `num_contexts x 1` column vector.
    pub fn one_hot(&self) -> Matrix {
        let mut m = Matrix::zeros(self.num_contexts, 1);
        m.set(self.index, 0, 1.0);
        m
    }
}

/// Ordinary dense layer: `a = f(x W + bias)`.
///
/// Weights are `in x out`; the optional bias is `1 x out`. Layers that are
/// fed a context instead of a bias leave `bias` as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Option<Matrix>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Option<Matrix>, activation: Activation) -> Result<DenseLayer> {
        if let Some(b) = &bias {
            if b.rows() != 1 || b.cols() != weights.cols() {
                return Err(Error::Shape {
                    op: "DenseLayer::new",
                    lhs_rows: weights.rows(),
                    lhs_cols: weights.cols(),
                    rhs_rows: b.rows(),
                    rhs_cols: b.cols(),
                });
            }
        }
        Ok(DenseLayer { weights, bias, activation })
    }

    /// Glorot-uniform weights in `+-sqrt(6 / (in + out))`, zero bias.
    pub fn glorot(rng: &mut Rng, input: usize, output: usize, activation: Activation, with_bias: bool) -> DenseLayer {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let weights = rng.uniform(input, output, -limit, limit).expect("valid range");
        let bias = with_bias.then(|| Matrix::zeros(1, output));
        DenseLayer { weights, bias, activation }
    }
}

/// Dense layer with a per-context bias: `a = f(x W + B[:, ctx])`.
///
/// `context_bias` is `out x num_contexts`; column `i` is the bias vector the
/// layer uses when the context is `i`. The column is selected directly, never
/// multiplied out, so a one-hot context reproduces [`DenseLayer`] bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextBiasDense {
    pub weights: Matrix,
    pub context_bias: Matrix,
    pub activation: Activation,
}

impl ContextBiasDense {
    pub fn new(weights: Matrix, context_bias: Matrix, activation: Activation) -> Result<ContextBiasDense> {
        if context_bias.rows() != weights.cols() {
            return Err(Error::Shape {
                op: "ContextBiasDense::new",
                lhs_rows: weights.rows(),
                lhs_cols: weights.cols(),
                rhs_rows: context_bias.rows(),
                rhs_cols: context_bias.cols(),
            });
        }
        Ok(ContextBiasDense { weights, context_bias, activation })
    }

    /// Glorot-uniform weights; the context-bias matrix starts at zero so the
    /// layer is initially indistinguishable from a bias-free dense layer.
    pub fn glorot(rng: &mut Rng, input: usize, output: usize, num_contexts: usize, activation: Activation) -> ContextBiasDense {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let weights = rng.uniform(input, output, -limit, limit).expect("valid range");
        ContextBiasDense {
            weights,
            context_bias: Matrix::zeros(output, num_contexts),
            activation,
        }
    }

    pub fn num_contexts(&self) -> usize {
        self.context_bias.cols()
    }

    /// The bias column for context `i`, as a `1 x out` row vector.
    pub fn bias_for(&self, context: usize) -> Result<Matrix> {
        Ok(self.context_bias.col_select(context)?.transpose())
    }

    /// The equivalent plain dense layer under a fixed context.
    pub fn as_dense(&self, context: usize) -> Result<DenseLayer> {
        DenseLayer::new(self.weights.clone(), Some(self.bias_for(context)?), self.activation)
    }
}

/// Train/eval switch for dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Dropout configuration. Eval mode is the identity map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub rate: f64,
    pub mode: Mode,
}

/// Inverted dropout: in train mode each entry is kept with probability
/// `1 - rate` and scaled by `1 / (1 - rate)`; eval mode passes through.
///
/// Returns the output together with the scaled mask actually applied
/// (all ones when nothing was dropped).
pub fn apply_dropout(x: &Matrix, spec: &DropoutSpec, rng: &mut Rng) -> Result<(Matrix, Matrix)> {
    if !(0.0..1.0).contains(&spec.rate) {
        return Err(Error::Parameter(format!(
            "dropout rate {} outside [0, 1)",
            spec.rate
        )));
    }
    if spec.mode == Mode::Eval || spec.rate == 0.0 {
        let mask = Matrix::zeros(x.rows(), x.cols()).map(|_| 1.0);
        return Ok((x.clone(), mask));
    }
    let keep = rng.bernoulli(x.rows(), x.cols(), 1.0 - spec.rate)?;
    let mask = keep.scale(1.0 / (1.0 - spec.rate));
    let out = x.hadamard(&mask)?;
    Ok((out, mask))
}

/// One element of a model's layer stack.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    ContextBias(ContextBiasDense),
    Dropout(f64),
}

/// Gradient of one layer, mirroring [`Layer`] shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerGrad {
    Dense { weights: Matrix, bias: Option<Matrix> },
    ContextBias { weights: Matrix, context_bias: Matrix },
    None,
}

/// Gradients for a whole model, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    /// Parameter-aligned view, matching [`Model::params`] order.
    pub fn flat(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        for g in &self.layers {
            match g {
                LayerGrad::Dense { weights, bias } => {
                    out.push(weights);
                    if let Some(b) = bias {
                        out.push(b);
                    }
                }
                LayerGrad::ContextBias { weights, context_bias } => {
                    out.push(weights);
                    out.push(context_bias);
                }
                LayerGrad::None => {}
            }
        }
        out
    }
}

struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each dense-like layer (`None` for dropout).
    pre: Vec<Option<Matrix>>,
    /// Scaled dropout mask per dropout layer (`None` elsewhere).
    masks: Vec<Option<Matrix>>,
    /// Final output probabilities.
    output: Matrix,
    /// Context labels used in this pass.
    contexts: Option<Vec<usize>>,
}

/// A feedforward stack of layers with at most one context-bias layer.
///
/// The model owns the forward cache backpropagation needs, so a train-mode
/// forward pass must precede each `backward` call.
pub struct Model {
    layers: Vec<Layer>,
    cache: Option<ForwardCache>,
}

impl Model {
    /// Assembles a model and validates the stack:
    /// at most one context-bias layer, softmax only at the output, and the
    /// output layer must be dense.
    pub fn new(layers: Vec<Layer>) -> Result<Model> {
        let n_ctx = layers
            .iter()
            .filter(|l| matches!(l, Layer::ContextBias(_)))
            .count();
        if n_ctx > 1 {
            return Err(Error::Config(format!(
                "model has {n_ctx} context-bias layers; at most one layer may consume the context"
            )));
        }
        let last_dense = layers
            .iter()
            .rposition(|l| !matches!(l, Layer::Dropout(_)));
        match last_dense {
            None => {
                return Err(Error::Config("model has no dense layer".to_string()));
            }
            Some(i) if i != layers.len() - 1 => {
                return Err(Error::Config(
                    "trailing dropout after the output layer".to_string(),
                ));
            }
            _ => {}
        }
        for (i, layer) in layers.iter().enumerate() {
            let act = match layer {
                Layer::Dense(d) => Some(d.activation),
                Layer::ContextBias(c) => Some(c.activation),
                Layer::Dropout(_) => None,
            };
            if act == Some(Activation::Softmax) && i != layers.len() - 1 {
                return Err(Error::Config(
                    "softmax is only supported on the output layer".to_string(),
                ));
            }
        }
        Ok(Model { layers, cache: None })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of contexts the model expects, if it has a context layer.
    pub fn num_contexts(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            Layer::ContextBias(c) => Some(c.num_contexts()),
            _ => None,
        })
    }

    /// Width of the first dense layer's input.
    pub fn input_width(&self) -> usize {
        self.layers
            .iter()
            .find_map(|l| match l {
                Layer::Dense(d) => Some(d.weights.rows()),
                Layer::ContextBias(c) => Some(c.weights.rows()),
                Layer::Dropout(_) => None,
            })
            .unwrap_or(0)
    }

    /// Width of the output layer.
    pub fn output_width(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Dense(d) => Some(d.weights.cols()),
                Layer::ContextBias(c) => Some(c.weights.cols()),
                Layer::Dropout(_) => None,
            })
            .unwrap_or(0)
    }

    /// All trainable parameter matrices, in a fixed documented order:
    /// layer by layer, weights first, then bias / context-bias.
    pub fn params(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.push(&d.weights);
                    if let Some(b) = &d.bias {
                        out.push(b);
                    }
                }
                Layer::ContextBias(c) => {
                    out.push(&c.weights);
                    out.push(&c.context_bias);
                }
                Layer::Dropout(_) => {}
            }
        }
        out
    }

    /// Mutable view of the parameters, same order as [`Model::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.push(&mut d.weights);
                    if let Some(b) = &mut d.bias {
                        out.push(b);
                    }
                }
                Layer::ContextBias(c) => {
                    out.push(&mut c.weights);
                    out.push(&mut c.context_bias);
                }
                Layer::Dropout(_) => {}
            }
        }
        out
    }

    /// Runs the stack on a batch (`x` is `n x input_width`).
    ///
    /// `contexts` carries one label per row and must be present exactly when
    /// the model has a context-bias layer. In train mode the pass caches
    /// pre-activations and dropout masks for [`Model::backward`]; an eval
    /// pass clears any cached state.
    pub fn forward(
        &mut self,
        x: &Matrix,
        contexts: Option<&[usize]>,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Matrix> {
        match (self.num_contexts(), contexts) {
            (Some(_), None) => {
                return Err(Error::Config(
                    "model has a context layer but no context was supplied".to_string(),
                ));
            }
            (None, Some(_)) => {
                return Err(Error::Config(
                    "context supplied to a model without a context layer".to_string(),
                ));
            }
            (Some(c), Some(ctx)) => {
                if ctx.len() != x.rows() {
                    return Err(Error::Parameter(format!(
                        "forward: {} context labels for {} rows",
                        ctx.len(),
                        x.rows()
                    )));
                }
                if let Some(&bad) = ctx.iter().find(|&&l| l >= c) {
                    return Err(Error::Index {
                        op: "forward",
                        index: bad,
                        bound: c,
                    });
                }
            }
            (None, None) => {}
        }

        let n_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers);
        let mut masks = Vec::with_capacity(n_layers);
        let mut current = x.clone();

        for layer in &self.layers {
            inputs.push(current.clone());
            match layer {
                Layer::Dense(d) => {
                    if current.cols() != d.weights.rows() {
                        return Err(Error::Shape {
                            op: "forward",
                            lhs_rows: current.rows(),
                            lhs_cols: current.cols(),
                            rhs_rows: d.weights.rows(),
                            rhs_cols: d.weights.cols(),
                        });
                    }
                    let mut z = current.matmul(&d.weights)?;
                    if let Some(b) = &d.bias {
                        z = z.add_broadcast_row(b)?;
                    }
                    current = d.activation.apply(&z);
                    pre.push(Some(z));
                    masks.push(None);
                }
                Layer::ContextBias(c) => {
                    if current.cols() != c.weights.rows() {
                        return Err(Error::Shape {
                            op: "forward",
                            lhs_rows: current.rows(),
                            lhs_cols: current.cols(),
                            rhs_rows: c.weights.rows(),
                            rhs_cols: c.weights.cols(),
                        });
                    }
                    let ctx = contexts.expect("validated above");
                    let mut z = current.matmul(&c.weights)?;
                    // B x_hat by column selection: row r picks column ctx[r].
                    let b = &c.context_bias;
                    let n_ctx = b.cols();
                    for r in 0..z.rows() {
                        let col = ctx[r];
                        let row = z.row_mut(r);
                        for (j, v) in row.iter_mut().enumerate() {
                            *v += b.data()[j * n_ctx + col];
                        }
                    }
                    current = c.activation.apply(&z);
                    pre.push(Some(z));
                    masks.push(None);
                }
                Layer::Dropout(rate) => {
                    let spec = DropoutSpec { rate: *rate, mode };
                    let (out, mask) = apply_dropout(&current, &spec, rng)?;
                    current = out;
                    pre.push(None);
                    masks.push(Some(mask));
                }
            }
        }

        self.cache = match mode {
            Mode::Train => Some(ForwardCache {
                inputs,
                pre,
                masks,
                output: current.clone(),
                contexts: contexts.map(|c| c.to_vec()),
            }),
            Mode::Eval => None,
        };
        Ok(current)
    }

    /// Backpropagates mean cross-entropy from the cached train-mode forward
    /// pass. The output layer must be softmax; its gradient is the fused
    /// `(probs - one_hot) / batch`.
    ///
    /// The context-bias gradient accumulates each sample's delta into the
    /// column of its context only; columns of unused contexts stay zero.
    pub fn backward(&mut self, labels: &[usize]) -> Result<Gradients> {
        let cache = self.cache.as_ref().ok_or_else(|| {
            Error::State("backward called without a preceding train-mode forward".to_string())
        })?;
        if labels.len() != cache.output.rows() {
            return Err(Error::Parameter(format!(
                "backward: {} labels for {} rows",
                labels.len(),
                cache.output.rows()
            )));
        }
        let last = self.layers.len() - 1;
        let last_act = match &self.layers[last] {
            Layer::Dense(d) => d.activation,
            Layer::ContextBias(c) => c.activation,
            Layer::Dropout(_) => unreachable!("validated in Model::new"),
        };
        if last_act != Activation::Softmax {
            return Err(Error::Config(
                "backward requires a softmax output layer".to_string(),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= cache.output.cols()) {
            return Err(Error::Index {
                op: "backward",
                index: bad,
                bound: cache.output.cols(),
            });
        }

        let mut grads: Vec<LayerGrad> = self.layers.iter().map(|_| LayerGrad::None).collect();
        // delta holds dL/dz of the dense-like layer at index `i`.
        let mut delta = softmax_ce_delta(&cache.output, labels);
        let mut i = last;
        loop {
            let weights = match &self.layers[i] {
                Layer::Dense(d) => {
                    let dw = cache.inputs[i].transpose().matmul(&delta)?;
                    let db = d.bias.as_ref().map(|_| delta.col_sums());
                    grads[i] = LayerGrad::Dense { weights: dw, bias: db };
                    &d.weights
                }
                Layer::ContextBias(c) => {
                    let dw = cache.inputs[i].transpose().matmul(&delta)?;
                    let ctx = cache
                        .contexts
                        .as_ref()
                        .expect("context cached with context layer");
                    let n_ctx = c.num_contexts();
                    let mut db = Matrix::zeros(c.context_bias.rows(), n_ctx);
                    for r in 0..delta.rows() {
                        let col = ctx[r];
                        for (j, &v) in delta.row(r).iter().enumerate() {
                            let cur = db.data()[j * n_ctx + col];
                            db.data_mut()[j * n_ctx + col] = cur + v;
                        }
                    }
                    grads[i] = LayerGrad::ContextBias { weights: dw, context_bias: db };
                    &c.weights
                }
                Layer::Dropout(_) => unreachable!("delta always enters at a dense layer"),
            };
            if i == 0 {
                break;
            }
            let mut delta_a = delta.matmul(&weights.transpose())?;
            // Walk back over dropout layers until the previous dense layer.
            let mut j = i;
            loop {
                if j == 0 {
                    // Only dropout layers remain before the input.
                    i = 0;
                    break;
                }
                j -= 1;
                match &self.layers[j] {
                    Layer::Dropout(_) => {
                        let mask = cache.masks[j].as_ref().expect("mask cached");
                        delta_a = delta_a.hadamard(mask)?;
                    }
                    Layer::Dense(d) => {
                        let z = cache.pre[j].as_ref().expect("pre-activation cached");
                        delta = match d.activation {
                            Activation::Identity => delta_a,
                            Activation::Elu => delta_a.hadamard(&elu_prime(z))?,
                            Activation::Softmax => unreachable!("validated in Model::new"),
                        };
                        i = j;
                        break;
                    }
                    Layer::ContextBias(c) => {
                        let z = cache.pre[j].as_ref().expect("pre-activation cached");
                        delta = match c.activation {
                            Activation::Identity => delta_a,
                            Activation::Elu => delta_a.hadamard(&elu_prime(z))?,
                            Activation::Softmax => unreachable!("validated in Model::new"),
                        };
                        i = j;
                        break;
                    }
                }
            }
            if i == 0 && matches!(self.layers[0], Layer::Dropout(_)) {
                break;
            }
        }
        Ok(Gradients { layers: grads })
    }

    /// Last cached forward output, if a train-mode pass has run.
    pub fn cached_output(&self) -> Option<&Matrix> {
        self.cache.as_ref().map(|c| &c.output)
    }
}

#[cfg(test)]
mod tests;
