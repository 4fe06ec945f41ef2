//! From-scratch feedforward networks with manual backpropagation.
//!
//! Two architectures are provided at desk scale: a three-layer autoencoder
//! (36-16-8-16-36) and a one-layer classifier (36-10). The backward pass
//! computes both the parameter gradient (as a flat [`ParamVector`]) and the
//! total derivative with respect to the continuation parameter lambda,
//! through every activation site and/or the brightness transform.
//!
//! Batch evaluation accumulates per-sample contributions in fixed-size
//! chunks: chunk partials are computed either sequentially or in parallel
//! (rayon, behind the `parallel` feature) and then combined in chunk order,
//! so both backends produce bit-identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homotopy::{h_activation, ActivationBase, HomotopyKind, HomotopySpec};
use crate::param_space::ParamVector;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Samples per accumulation chunk. Chunk boundaries are part of the numeric
/// contract: changing this changes summation order and hence bit patterns.
pub const BATCH_CHUNK: usize = 32;

/// Task loss. MseFrobenius for the autoencoder, SoftmaxCrossEntropy for the
/// classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean over the batch of the squared Frobenius norm of (output - target).
    MseFrobenius,
    /// Mean over the batch of cross-entropy on softmax(outputs).
    SoftmaxCrossEntropy,
}

/// Targets for one batch.
#[derive(Debug, Clone, Copy)]
pub enum BatchTargets<'a> {
    /// Target equals the (homotopy-transformed) network input. The
    /// autoencoder task.
    Reconstruction,
    /// Integer class labels, one per sample.
    Labels(&'a [u8]),
    /// Explicit target rows, `n * out_dim` long.
    Values(&'a [f64]),
}

/// One minibatch: `n` input rows of the model's input width, plus targets.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub inputs: &'a [f64],
    pub targets: BatchTargets<'a>,
    pub n: usize,
}

impl<'a> Batch<'a> {
    pub fn reconstruction(inputs: &'a [f64], n: usize) -> Self {
        Batch {
            inputs,
            targets: BatchTargets::Reconstruction,
            n,
        }
    }

    pub fn labeled(inputs: &'a [f64], labels: &'a [u8], n: usize) -> Self {
        Batch {
            inputs,
            targets: BatchTargets::Labels(labels),
            n,
        }
    }
}

/// Parameter initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    XavierUniform,
    Zeros,
}

#[derive(Debug, Clone, Copy)]
struct LayerOffsets {
    w: usize,
    b: usize,
    in_dim: usize,
    out_dim: usize,
}

/// A feedforward network: affine layers with the homotopy activation applied
/// after every layer (hidden and output alike). Immutable after construction;
/// forward/backward are pure in (theta, batch, lambda).
#[derive(Debug, Clone)]
pub struct MlpModel {
    layer_dims: Vec<(usize, usize)>,
    offsets: Vec<LayerOffsets>,
    activation: ActivationBase,
    homotopy: HomotopySpec,
    param_count: usize,
}

impl MlpModel {
    /// Builds a network from a width list, e.g. `[36, 16, 8, 16, 36]`.
    ///
    /// For the activation homotopies the base activation is implied by the
    /// homotopy kind (h-relu interpolates toward relu, h-sigmoid toward
    /// sigmoid), overriding `activation`.
    pub fn new(
        widths: &[usize],
        activation: ActivationBase,
        homotopy: HomotopySpec,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Shape("model needs at least one layer".into()));
        }
        if widths.contains(&0) {
            return Err(Error::Shape("zero-width layers are not allowed".into()));
        }
        let activation = match homotopy.kind {
            HomotopyKind::HRelu => ActivationBase::Relu,
            HomotopyKind::HSigmoid => ActivationBase::Sigmoid,
            _ => activation,
        };
        let layer_dims: Vec<(usize, usize)> = widths.windows(2).map(|w| (w[0], w[1])).collect();
        let mut offsets = Vec::with_capacity(layer_dims.len());
        let mut cursor = 0;
        for &(in_dim, out_dim) in &layer_dims {
            offsets.push(LayerOffsets {
                w: cursor,
                b: cursor + in_dim * out_dim,
                in_dim,
                out_dim,
            });
            cursor += in_dim * out_dim + out_dim;
        }
        Ok(MlpModel {
            layer_dims,
            offsets,
            activation,
            homotopy,
            param_count: cursor,
        })
    }

    /// The 36-16-8-16-36 autoencoder used on 6x6 images.
    pub fn autoencoder_6x6(activation: ActivationBase, homotopy: HomotopySpec) -> Self {
        MlpModel::new(&[36, 16, 8, 16, 36], activation, homotopy).unwrap()
    }

    /// The one-layer 36-10 classifier. The (homotopy) activation output is
    /// the logit vector fed to softmax cross-entropy.
    pub fn classifier_6x6(activation: ActivationBase, homotopy: HomotopySpec) -> Self {
        MlpModel::new(&[36, 10], activation, homotopy).unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn layer_dims(&self) -> &[(usize, usize)] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0].0
    }

    pub fn output_dim(&self) -> usize {
        self.layer_dims[self.layer_dims.len() - 1].1
    }

    pub fn homotopy(&self) -> &HomotopySpec {
        &self.homotopy
    }

    /// The base activation actually applied (after homotopy-kind override).
    pub fn base_activation(&self) -> ActivationBase {
        self.activation
    }

    /// Lambda seen by the activation sites: the continuation parameter for
    /// activation homotopies, pinned to 1 (full activation) otherwise.
    fn act_lambda(&self, lambda: f64) -> f64 {
        match self.homotopy.kind {
            HomotopyKind::HRelu | HomotopyKind::HSigmoid => lambda,
            _ => 1.0,
        }
    }

    /// Lambda seen by the brightness transform, pinned to 1 when inactive.
    fn bright_lambda(&self, lambda: f64) -> f64 {
        match self.homotopy.kind {
            HomotopyKind::HBrightness => lambda,
            _ => 1.0,
        }
    }

    /// Deterministic parameter initialization.
    ///
    /// Xavier-uniform draws weights in +/- sqrt(6 / (in + out)) per layer and
    /// zeros the biases.
    pub fn init_params(&self, scheme: InitScheme, seed: u64) -> ParamVector {
        match scheme {
            InitScheme::Zeros => ParamVector::zeros(self.param_count),
            InitScheme::XavierUniform => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut out = vec![0.0; self.param_count];
                for off in &self.offsets {
                    let bound = (6.0 / (off.in_dim + off.out_dim) as f64).sqrt();
                    for w in &mut out[off.w..off.w + off.in_dim * off.out_dim] {
                        *w = rng.random_range(-bound..bound);
                    }
                    // biases stay zero
                }
                ParamVector::new(out)
            }
        }
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.param_count {
            return Err(Error::DimensionMismatch {
                expected: self.param_count,
                got: theta.len(),
            });
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.n == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        if batch.inputs.len() != batch.n * self.input_dim() {
            return Err(Error::Shape(format!(
                "batch inputs have {} values, expected {} x {}",
                batch.inputs.len(),
                batch.n,
                self.input_dim()
            )));
        }
        match batch.targets {
            BatchTargets::Labels(l) if l.len() != batch.n => {
                Err(Error::Shape("label count != sample count".into()))
            }
            BatchTargets::Values(v) if v.len() != batch.n * self.output_dim() => {
                Err(Error::Shape("target row size mismatch".into()))
            }
            _ => Ok(()),
        }
    }

    /// Forward pass for a batch of rows; returns `n * out_dim` outputs.
    ///
    /// The brightness transform (if active) is applied to the input before
    /// layer 0; the activation homotopy is applied after every layer.
    pub fn forward(&self, theta: &ParamVector, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let in_dim = self.input_dim();
        if !x.len().is_multiple_of(in_dim) {
            return Err(Error::Shape(format!(
                "input length {} not a multiple of input dim {in_dim}",
                x.len()
            )));
        }
        let n = x.len() / in_dim;
        let act_l = self.act_lambda(lambda);
        let bright_l = self.bright_lambda(lambda);
        let mut out = Vec::with_capacity(n * self.output_dim());
        let mut scratch = SampleScratch::new(self);
        for s in 0..n {
            let row = &x[s * in_dim..(s + 1) * in_dim];
            self.forward_sample(theta, row, act_l, bright_l, &mut scratch);
            out.extend_from_slice(scratch.output());
        }
        Ok(out)
    }

    fn forward_sample(
        &self,
        theta: &ParamVector,
        row: &[f64],
        act_lambda: f64,
        bright_lambda: f64,
        scratch: &mut SampleScratch,
    ) {
        let base = self.activation;
        let baseline = self.homotopy.baseline_value;
        for (j, &v) in row.iter().enumerate() {
            scratch.x0[j] = crate::homotopy::h_brightness(v, bright_lambda, baseline);
        }
        let th = theta.as_slice();
        for (l, off) in self.offsets.iter().enumerate() {
            let (inputs, act): (&[f64], &mut [f64]) = if l == 0 {
                (&scratch.x0, &mut scratch.acts[0])
            } else {
                let (before, after) = scratch.acts.split_at_mut(l);
                (&before[l - 1], &mut after[0])
            };
            let pre = &mut scratch.pres[l];
            for o in 0..off.out_dim {
                let wrow = &th[off.w + o * off.in_dim..off.w + (o + 1) * off.in_dim];
                let mut a = th[off.b + o];
                for (wi, xi) in wrow.iter().zip(inputs.iter()) {
                    a += wi * xi;
                }
                pre[o] = a;
                act[o] = h_activation(a, act_lambda, base);
            }
        }
    }

    /// Mean loss, analytic parameter gradient, and total lambda-derivative
    /// over a batch. Dispatches to the default execution backend.
    pub fn loss_and_grads(
        &self,
        theta: &ParamVector,
        batch: &Batch,
        lambda: f64,
        loss_kind: LossKind,
    ) -> Result<(f64, ParamVector, f64)> {
        self.loss_and_grads_with(theta, batch, lambda, loss_kind, cfg!(feature = "parallel"))
    }

    /// Sequential-backend evaluation (always available).
    pub fn loss_and_grads_seq(
        &self,
        theta: &ParamVector,
        batch: &Batch,
        lambda: f64,
        loss_kind: LossKind,
    ) -> Result<(f64, ParamVector, f64)> {
        self.loss_and_grads_with(theta, batch, lambda, loss_kind, false)
    }

    /// Parallel-backend evaluation. Bit-identical to the sequential backend.
    #[cfg(feature = "parallel")]
    pub fn loss_and_grads_par(
        &self,
        theta: &ParamVector,
        batch: &Batch,
        lambda: f64,
        loss_kind: LossKind,
    ) -> Result<(f64, ParamVector, f64)> {
        self.loss_and_grads_with(theta, batch, lambda, loss_kind, true)
    }

    fn loss_and_grads_with(
        &self,
        theta: &ParamVector,
        batch: &Batch,
        lambda: f64,
        loss_kind: LossKind,
        parallel: bool,
    ) -> Result<(f64, ParamVector, f64)> {
        self.check_theta(theta)?;
        self.check_batch(batch)?;
        match self.homotopy.kind {
            HomotopyKind::LossBlend => {
                // Blend of the target problem (full activation) with the
                // lambda=0-transformed problem (linear network), at the same
                // theta.
                let hard = self.batch_eval(theta, batch, 1.0, 1.0, loss_kind, parallel)?;
                let easy = self.batch_eval(theta, batch, 0.0, 1.0, loss_kind, parallel)?;
                let loss = lambda * hard.loss + (1.0 - lambda) * easy.loss;
                let mut grad = hard.grad.scaled(lambda);
                grad.axpy(1.0 - lambda, &easy.grad);
                Ok((loss, grad, hard.loss - easy.loss))
            }
            kind => {
                let act_l = self.act_lambda(lambda);
                let bright_l = self.bright_lambda(lambda);
                let eval = self.batch_eval(theta, batch, act_l, bright_l, loss_kind, parallel)?;
                let d_lambda = match kind {
                    HomotopyKind::HRelu | HomotopyKind::HSigmoid => eval.d_act,
                    HomotopyKind::HBrightness => eval.d_bright,
                    _ => 0.0,
                };
                Ok((eval.loss, eval.grad, d_lambda))
            }
        }
    }

    fn batch_eval(
        &self,
        theta: &ParamVector,
        batch: &Batch,
        act_lambda: f64,
        bright_lambda: f64,
        loss_kind: LossKind,
        parallel: bool,
    ) -> Result<RawEval> {
        let n = batch.n;
        let ranges: Vec<(usize, usize)> = (0..n)
            .step_by(BATCH_CHUNK)
            .map(|lo| (lo, (lo + BATCH_CHUNK).min(n)))
            .collect();

        let partials: Vec<ChunkAccum> = if parallel {
            #[cfg(feature = "parallel")]
            {
                ranges
                    .par_iter()
                    .map(|&(lo, hi)| {
                        self.eval_chunk(theta, batch, lo, hi, act_lambda, bright_lambda, loss_kind)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            #[cfg(not(feature = "parallel"))]
            {
                unreachable!("parallel backend requested without the `parallel` feature")
            }
        } else {
            ranges
                .iter()
                .map(|&(lo, hi)| {
                    self.eval_chunk(theta, batch, lo, hi, act_lambda, bright_lambda, loss_kind)
                })
                .collect::<Result<Vec<_>>>()?
        };

        // combine in chunk order, then scale once
        let mut total = ChunkAccum::zeros(self.param_count);
        for p in &partials {
            total.loss += p.loss;
            total.d_act += p.d_act;
            total.d_bright += p.d_bright;
            for (t, g) in total.grad.iter_mut().zip(&p.grad) {
                *t += g;
            }
        }
        let inv_n = 1.0 / n as f64;
        let loss = total.loss * inv_n;
        if !loss.is_finite() {
            return Err(Error::NumericalDivergence {
                context: "non-finite loss in batch evaluation".into(),
            });
        }
        let grad = ParamVector::new(total.grad.iter().map(|g| g * inv_n).collect());
        if !grad.all_finite() {
            return Err(Error::NumericalDivergence {
                context: "non-finite gradient in batch evaluation".into(),
            });
        }
        Ok(RawEval {
            loss,
            grad,
            d_act: total.d_act * inv_n,
            d_bright: total.d_bright * inv_n,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn eval_chunk(
        &self,
        theta: &ParamVector,
        batch: &Batch,
        lo: usize,
        hi: usize,
        act_lambda: f64,
        bright_lambda: f64,
        loss_kind: LossKind,
    ) -> Result<ChunkAccum> {
        let mut acc = ChunkAccum::zeros(self.param_count);
        let mut scratch = SampleScratch::new(self);
        let in_dim = self.input_dim();
        let out_dim = self.output_dim();
        let base = self.activation;
        let baseline = self.homotopy.baseline_value;
        let th = theta.as_slice();
        let n_layers = self.offsets.len();
        let brightness_active = self.homotopy.kind == HomotopyKind::HBrightness;

        for s in lo..hi {
            let row = &batch.inputs[s * in_dim..(s + 1) * in_dim];
            self.forward_sample(theta, row, act_lambda, bright_lambda, &mut scratch);

            // per-sample loss and d(loss)/d(output) into grad_out, unscaled by 1/N
            let output = &scratch.acts[n_layers - 1];
            let d_out = &mut scratch.grad_out[..out_dim];
            let sample_loss = match (loss_kind, batch.targets) {
                (LossKind::MseFrobenius, targets) => {
                    let target: &[f64] = match targets {
                        BatchTargets::Reconstruction => &scratch.x0,
                        BatchTargets::Values(v) => &v[s * out_dim..(s + 1) * out_dim],
                        BatchTargets::Labels(_) => {
                            return Err(Error::Shape(
                                "MseFrobenius needs value or reconstruction targets".into(),
                            ))
                        }
                    };
                    let mut l = 0.0;
                    for j in 0..out_dim {
                        let r = output[j] - target[j];
                        l += r * r;
                        d_out[j] = 2.0 * r;
                    }
                    // reconstruction target depends on lambda through the
                    // brightness transform: dy/dlambda = x - baseline
                    if brightness_active && matches!(targets, BatchTargets::Reconstruction) {
                        for j in 0..out_dim {
                            acc.d_bright += -d_out[j] * (row[j] - baseline);
                        }
                    }
                    l
                }
                (LossKind::SoftmaxCrossEntropy, BatchTargets::Labels(labels)) => {
                    let y = labels[s] as usize;
                    if y >= out_dim {
                        return Err(Error::Shape(format!(
                            "label {y} out of range for {out_dim} classes"
                        )));
                    }
                    let mx = output.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let sum_exp: f64 = output.iter().map(|&v| (v - mx).exp()).sum();
                    let lse = mx + sum_exp.ln();
                    for j in 0..out_dim {
                        d_out[j] = (output[j] - lse).exp();
                    }
                    d_out[y] -= 1.0;
                    lse - output[y]
                }
                (LossKind::SoftmaxCrossEntropy, _) => {
                    return Err(Error::Shape(
                        "SoftmaxCrossEntropy needs label targets".into(),
                    ))
                }
            };
            acc.loss += sample_loss;

            // backward: grad_out holds dL/d(act_l) entering each layer
            for l in (0..n_layers).rev() {
                let off = self.offsets[l];
                // d(post-activation)/dlambda at this site: act(pre) - pre
                for o in 0..off.out_dim {
                    let pre = scratch.pres[l][o];
                    acc.d_act += scratch.grad_out[o] * (base.apply(pre) - pre);
                    let dz = (1.0 - act_lambda) + act_lambda * base.derivative(pre);
                    scratch.delta[o] = scratch.grad_out[o] * dz;
                }
                let inputs: &[f64] = if l == 0 {
                    &scratch.x0
                } else {
                    &scratch.acts[l - 1]
                };
                for o in 0..off.out_dim {
                    let d = scratch.delta[o];
                    let wg = &mut acc.grad[off.w + o * off.in_dim..off.w + (o + 1) * off.in_dim];
                    for (g, xi) in wg.iter_mut().zip(inputs.iter()) {
                        *g += d * xi;
                    }
                    acc.grad[off.b + o] += d;
                }
                if l > 0 || brightness_active {
                    let g_in = &mut scratch.grad_in[..off.in_dim];
                    g_in.fill(0.0);
                    for o in 0..off.out_dim {
                        let d = scratch.delta[o];
                        let wrow = &th[off.w + o * off.in_dim..off.w + (o + 1) * off.in_dim];
                        for (gi, wi) in g_in.iter_mut().zip(wrow.iter()) {
                            *gi += d * wi;
                        }
                    }
                    if l == 0 {
                        // input depends on lambda through brightness
                        for (gi, &xi) in g_in.iter().zip(row.iter()) {
                            acc.d_bright += gi * (xi - baseline);
                        }
                    } else {
                        scratch.grad_out[..off.in_dim]
                            .copy_from_slice(&scratch.grad_in[..off.in_dim]);
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Loss only (no gradients) over a batch; forward passes only.
    pub fn evaluate(
        &self,
        theta: &ParamVector,
        batch: &Batch,
        lambda: f64,
        loss_kind: LossKind,
    ) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_batch(batch)?;
        if self.homotopy.kind == HomotopyKind::LossBlend {
            let (loss, _, _) = self.loss_and_grads_seq(theta, batch, lambda, loss_kind)?;
            return Ok(loss);
        }
        let outputs = self.forward(theta, batch.inputs, lambda)?;
        let out_dim = self.output_dim();
        let bright_l = self.bright_lambda(lambda);
        let baseline = self.homotopy.baseline_value;
        let mut total = 0.0;
        for s in 0..batch.n {
            let o = &outputs[s * out_dim..(s + 1) * out_dim];
            match (loss_kind, batch.targets) {
                (LossKind::MseFrobenius, BatchTargets::Reconstruction) => {
                    let row = &batch.inputs[s * out_dim..(s + 1) * out_dim];
                    for j in 0..out_dim {
                        let t = crate::homotopy::h_brightness(row[j], bright_l, baseline);
                        let r = o[j] - t;
                        total += r * r;
                    }
                }
                (LossKind::MseFrobenius, BatchTargets::Values(v)) => {
                    let t = &v[s * out_dim..(s + 1) * out_dim];
                    for j in 0..out_dim {
                        let r = o[j] - t[j];
                        total += r * r;
                    }
                }
                (LossKind::SoftmaxCrossEntropy, BatchTargets::Labels(labels)) => {
                    let mx = o.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let sum_exp: f64 = o.iter().map(|&v| (v - mx).exp()).sum();
                    total += mx + sum_exp.ln() - o[labels[s] as usize];
                }
                _ => return Err(Error::Shape("loss/target combination invalid".into())),
            }
        }
        Ok(total / batch.n as f64)
    }

    /// Fraction of samples whose argmax output matches the label.
    pub fn accuracy(
        &self,
        theta: &ParamVector,
        inputs: &[f64],
        labels: &[u8],
        lambda: f64,
    ) -> Result<f64> {
        let outputs = self.forward(theta, inputs, lambda)?;
        let out_dim = self.output_dim();
        let n = labels.len();
        let mut hits = 0usize;
        for s in 0..n {
            let o = &outputs[s * out_dim..(s + 1) * out_dim];
            let pred = o
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            if pred == labels[s] as usize {
                hits += 1;
            }
        }
        Ok(hits as f64 / n as f64)
    }
}

struct RawEval {
    loss: f64,
    grad: ParamVector,
    d_act: f64,
    d_bright: f64,
}

struct ChunkAccum {
    loss: f64,
    grad: Vec<f64>,
    d_act: f64,
    d_bright: f64,
}

impl ChunkAccum {
    fn zeros(m: usize) -> Self {
        ChunkAccum {
            loss: 0.0,
            grad: vec![0.0; m],
            d_act: 0.0,
            d_bright: 0.0,
        }
    }
}

/// Reusable per-sample buffers.
struct SampleScratch {
    x0: Vec<f64>,
    pres: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    grad_out: Vec<f64>,
    grad_in: Vec<f64>,
}

impl SampleScratch {
    fn new(model: &MlpModel) -> Self {
        let max_dim = model
            .layer_dims
            .iter()
            .flat_map(|&(i, o)| [i, o])
            .max()
            .unwrap();
        SampleScratch {
            x0: vec![0.0; model.input_dim()],
            pres: model
                .layer_dims
                .iter()
                .map(|&(_, o)| vec![0.0; o])
                .collect(),
            acts: model
                .layer_dims
                .iter()
                .map(|&(_, o)| vec![0.0; o])
                .collect(),
            delta: vec![0.0; max_dim],
            grad_out: vec![0.0; max_dim],
            grad_in: vec![0.0; max_dim],
        }
    }

    fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_diff, max_grad_rel_err};
    use crate::homotopy::sigmoid;

    fn spec(kind: HomotopyKind) -> HomotopySpec {
        HomotopySpec::new(kind)
    }

    #[test]
    fn identity_one_layer_relu_passes_positive_input() {
        let model = MlpModel::new(&[2, 2], ActivationBase::Relu, spec(HomotopyKind::None)).unwrap();
        // identity weights, zero bias
        let theta = ParamVector::new(vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let out = model.forward(&theta, &[1.0, 2.0], 1.0).unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn h_sigmoid_at_lambda_zero_is_affine() {
        let model = MlpModel::new(
            &[2, 2],
            ActivationBase::Sigmoid,
            spec(HomotopyKind::HSigmoid),
        )
        .unwrap();
        let theta = ParamVector::new(vec![0.5, -1.0, 2.0, 0.25, 0.1, -0.2]);
        let x = [0.3, -0.7];
        let out = model.forward(&theta, &x, 0.0).unwrap();
        let expect = [
            0.5 * 0.3 + (-1.0) * (-0.7) + 0.1,
            2.0 * 0.3 + 0.25 * (-0.7) - 0.2,
        ];
        assert_eq!(out[0], expect[0]);
        assert_eq!(out[1], expect[1]);
    }

    /// Independent plain-relu forward pass with no homotopy machinery.
    fn reference_relu_forward(widths: &[usize], theta: &[f64], x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut off = 0;
        for w in widths.windows(2) {
            let (ni, no) = (w[0], w[1]);
            let mut next = vec![0.0; no];
            for o in 0..no {
                let mut a = theta[off + ni * no + o];
                for i in 0..ni {
                    a += theta[off + o * ni + i] * cur[i];
                }
                next[o] = if a > 0.0 { a } else { 0.0 };
            }
            off += ni * no + no;
            cur = next;
        }
        cur
    }

    #[test]
    fn h_relu_at_lambda_one_matches_reference_network() {
        let widths = [4, 3, 2];
        let model =
            MlpModel::new(&widths, ActivationBase::Relu, spec(HomotopyKind::HRelu)).unwrap();
        let theta = model.init_params(InitScheme::XavierUniform, 42);
        let x = [0.3, -0.2, 0.9, 0.05];
        let ours = model.forward(&theta, &x, 1.0).unwrap();
        let reference = reference_relu_forward(&widths, theta.as_slice(), &x);
        for (a, b) in ours.iter().zip(&reference) {
            assert_eq!(a, b, "endpoint must be bit-exact");
        }
    }

    #[test]
    fn zero_autoencoder_on_zero_data_has_zero_loss_and_grad() {
        let model = MlpModel::autoencoder_6x6(ActivationBase::Relu, spec(HomotopyKind::None));
        let theta = model.init_params(InitScheme::Zeros, 0);
        let inputs = vec![0.0; 36 * 4];
        let batch = Batch::reconstruction(&inputs, 4);
        let (loss, grad, dl) = model
            .loss_and_grads(&theta, &batch, 1.0, LossKind::MseFrobenius)
            .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.norm(), 0.0);
        assert_eq!(dl, 0.0);
    }

    #[test]
    fn init_zeros_and_determinism() {
        let model = MlpModel::classifier_6x6(ActivationBase::Relu, spec(HomotopyKind::None));
        assert_eq!(model.param_count(), 36 * 10 + 10);
        let z = model.init_params(InitScheme::Zeros, 9);
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
        let a = model.init_params(InitScheme::XavierUniform, 123);
        let b = model.init_params(InitScheme::XavierUniform, 123);
        assert_eq!(a, b);
        let c = model.init_params(InitScheme::XavierUniform, 124);
        assert_ne!(a, c);
    }

    #[test]
    fn xavier_bounds_for_36_16_layer() {
        let model =
            MlpModel::new(&[36, 16], ActivationBase::Relu, spec(HomotopyKind::None)).unwrap();
        let theta = model.init_params(InitScheme::XavierUniform, 7);
        let bound = (6.0_f64 / 52.0).sqrt();
        assert!((bound - 0.3397).abs() < 1e-4);
        for &v in theta.as_slice() {
            assert!(v.abs() <= bound);
        }
    }

    fn random_batch_inputs(n: usize, dim: usize, seed: u64) -> Vec<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * dim).map(|_| rng.random_range(0.0..1.0)).collect()
    }

    fn gradient_check(
        model: &MlpModel,
        loss_kind: LossKind,
        batch: &Batch,
        lambda: f64,
        seed: u64,
    ) {
        let theta = model.init_params(InitScheme::XavierUniform, seed);
        let (_, grad, d_lambda) = model
            .loss_and_grads(&theta, batch, lambda, loss_kind)
            .unwrap();

        // subsample up to 50 coordinates
        let m = theta.len();
        let stride = (m / 50).max(1);
        let coords: Vec<usize> = (0..m).step_by(stride).take(50).collect();
        let f = |t: &[f64]| {
            model
                .loss_and_grads_seq(&ParamVector::new(t.to_vec()), batch, lambda, loss_kind)
                .unwrap()
                .0
        };
        let (worst, at) =
            max_grad_rel_err(f, theta.as_slice(), grad.as_slice(), &coords, 1e-5, 1e-4);
        assert!(worst < 1e-4, "theta-grad rel err {worst} at coord {at}");

        let fd_dl = central_diff(
            |l| {
                model
                    .loss_and_grads_seq(&theta, batch, l, loss_kind)
                    .unwrap()
                    .0
            },
            lambda,
            1e-6,
        );
        let rel = (d_lambda - fd_dl).abs() / fd_dl.abs().max(1e-4);
        assert!(rel < 1e-4, "lambda-grad {d_lambda} vs fd {fd_dl}");
    }

    #[test]
    fn gradcheck_autoencoder_h_sigmoid() {
        let model =
            MlpModel::autoencoder_6x6(ActivationBase::Sigmoid, spec(HomotopyKind::HSigmoid));
        let inputs = random_batch_inputs(8, 36, 100);
        let batch = Batch::reconstruction(&inputs, 8);
        gradient_check(&model, LossKind::MseFrobenius, &batch, 0.3, 1);
    }

    #[test]
    fn gradcheck_autoencoder_h_relu() {
        let model = MlpModel::autoencoder_6x6(ActivationBase::Relu, spec(HomotopyKind::HRelu));
        let inputs = random_batch_inputs(8, 36, 101);
        let batch = Batch::reconstruction(&inputs, 8);
        gradient_check(&model, LossKind::MseFrobenius, &batch, 0.62, 2);
    }

    #[test]
    fn gradcheck_autoencoder_brightness() {
        let model =
            MlpModel::autoencoder_6x6(ActivationBase::Relu, spec(HomotopyKind::HBrightness));
        let inputs = random_batch_inputs(8, 36, 102);
        let batch = Batch::reconstruction(&inputs, 8);
        gradient_check(&model, LossKind::MseFrobenius, &batch, 0.45, 3);
    }

    #[test]
    fn gradcheck_classifier_h_relu() {
        let model = MlpModel::classifier_6x6(ActivationBase::Relu, spec(HomotopyKind::HRelu));
        let inputs = random_batch_inputs(8, 36, 103);
        let labels: Vec<u8> = (0..8).map(|i| (i % 10) as u8).collect();
        let batch = Batch::labeled(&inputs, &labels, 8);
        gradient_check(&model, LossKind::SoftmaxCrossEntropy, &batch, 0.37, 4);
    }

    #[test]
    fn gradcheck_classifier_brightness() {
        let model = MlpModel::classifier_6x6(ActivationBase::Relu, spec(HomotopyKind::HBrightness));
        let inputs = random_batch_inputs(8, 36, 104);
        let labels: Vec<u8> = (0..8).map(|i| ((i * 3) % 10) as u8).collect();
        let batch = Batch::labeled(&inputs, &labels, 8);
        gradient_check(&model, LossKind::SoftmaxCrossEntropy, &batch, 0.51, 5);
    }

    #[test]
    fn gradcheck_loss_blend() {
        let model = MlpModel::new(
            &[6, 4, 6],
            ActivationBase::Sigmoid,
            spec(HomotopyKind::LossBlend),
        )
        .unwrap();
        let inputs = random_batch_inputs(5, 6, 105);
        let batch = Batch::reconstruction(&inputs, 5);
        gradient_check(&model, LossKind::MseFrobenius, &batch, 0.7, 6);
    }

    #[test]
    fn lambda_endpoint_matches_plain_network_loss() {
        // loss at lambda=1 must equal an independently coded plain network
        let model =
            MlpModel::autoencoder_6x6(ActivationBase::Sigmoid, spec(HomotopyKind::HSigmoid));
        let theta = model.init_params(InitScheme::XavierUniform, 77);
        let inputs = random_batch_inputs(6, 36, 106);
        let batch = Batch::reconstruction(&inputs, 6);
        let ours = model
            .evaluate(&theta, &batch, 1.0, LossKind::MseFrobenius)
            .unwrap();

        // independent: plain sigmoid forward, frobenius mse
        let widths = [36usize, 16, 8, 16, 36];
        let mut total = 0.0;
        for s in 0..6 {
            let x = &inputs[s * 36..(s + 1) * 36];
            let mut cur = x.to_vec();
            let mut off = 0;
            for w in widths.windows(2) {
                let (ni, no) = (w[0], w[1]);
                let mut next = vec![0.0; no];
                for o in 0..no {
                    let mut a = theta[off + ni * no + o];
                    for i in 0..ni {
                        a += theta[off + o * ni + i] * cur[i];
                    }
                    next[o] = sigmoid(a);
                }
                off += ni * no + no;
                cur = next;
            }
            for j in 0..36 {
                total += (cur[j] - x[j]) * (cur[j] - x[j]);
            }
        }
        let reference = total / 6.0;
        assert!((ours - reference).abs() < 1e-12);
    }

    #[test]
    fn losses_are_nonnegative() {
        let ae = MlpModel::autoencoder_6x6(ActivationBase::Relu, spec(HomotopyKind::None));
        let clf = MlpModel::classifier_6x6(ActivationBase::Relu, spec(HomotopyKind::None));
        let inputs = random_batch_inputs(16, 36, 107);
        let labels: Vec<u8> = (0..16).map(|i| (i % 10) as u8).collect();
        let theta_ae = ae.init_params(InitScheme::XavierUniform, 8);
        let theta_clf = clf.init_params(InitScheme::XavierUniform, 9);
        let l1 = ae
            .evaluate(
                &theta_ae,
                &Batch::reconstruction(&inputs, 16),
                1.0,
                LossKind::MseFrobenius,
            )
            .unwrap();
        let l2 = clf
            .evaluate(
                &theta_clf,
                &Batch::labeled(&inputs, &labels, 16),
                1.0,
                LossKind::SoftmaxCrossEntropy,
            )
            .unwrap();
        assert!(l1 >= 0.0 && l2 >= 0.0);
    }

    #[test]
    fn divergent_forward_reports_numerical_divergence() {
        let model = MlpModel::autoencoder_6x6(ActivationBase::Relu, spec(HomotopyKind::None));
        let mut theta = model.init_params(InitScheme::XavierUniform, 10);
        theta[0] = 1e308;
        theta[1] = 1e308;
        let inputs = random_batch_inputs(4, 36, 108);
        let batch = Batch::reconstruction(&inputs, 4);
        let err = model
            .loss_and_grads(&theta, &batch, 1.0, LossKind::MseFrobenius)
            .unwrap_err();
        assert!(matches!(err, Error::NumericalDivergence { .. }));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let model = MlpModel::classifier_6x6(ActivationBase::Relu, spec(HomotopyKind::None));
        let theta = model.init_params(InitScheme::Zeros, 0);
        assert!(model.forward(&theta, &[1.0, 2.0, 3.0], 1.0).is_err());
        let bad_theta = ParamVector::zeros(5);
        assert!(model.forward(&bad_theta, &[0.0; 36], 1.0).is_err());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_backend_is_bit_identical_to_sequential() {
        let model =
            MlpModel::autoencoder_6x6(ActivationBase::Sigmoid, spec(HomotopyKind::HSigmoid));
        let theta = model.init_params(InitScheme::XavierUniform, 55);
        let inputs = random_batch_inputs(257, 36, 109); // odd count: exercises the partial chunk
        let batch = Batch::reconstruction(&inputs, 257);
        let (l_seq, g_seq, d_seq) = model
            .loss_and_grads_seq(&theta, &batch, 0.4, LossKind::MseFrobenius)
            .unwrap();
        let (l_par, g_par, d_par) = model
            .loss_and_grads_par(&theta, &batch, 0.4, LossKind::MseFrobenius)
            .unwrap();
        assert_eq!(l_seq.to_bits(), l_par.to_bits());
        assert_eq!(d_seq.to_bits(), d_par.to_bits());
        for (a, b) in g_seq.as_slice().iter().zip(g_par.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
