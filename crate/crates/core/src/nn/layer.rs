//! Layer state plus forward and backward kernels for every layer type in
//! the search space. Activations are laid out batch-major, then time, then
//! channel: `[batch, len, channels]` for sequences, `[batch, features]` once
//! flattened.

use rand::Rng as _;

use super::activation::{self, sigmoid};
use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::space::shape::{layer_output_shape, same_pad_left};
use crate::space::{FeatureShape, LayerDescriptor, Padding, PoolKind};
use crate::tensor::{Real, Tensor};

/// Batch-norm moving-average momentum.
pub const BN_MOMENTUM: f64 = 0.99;
/// Batch-norm variance epsilon.
pub const BN_EPSILON: f64 = 1e-3;

/// A named weight tensor with an optional pruning mask.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: &'static str,
    pub value: Tensor<T>,
    pub trainable: bool,
    /// Conv, GRU and dense kernels; biases and batch-norm state are never pruned.
    pub prunable: bool,
    /// `true` keeps the weight, `false` pins it to zero.
    pub mask: Option<Vec<bool>>,
}

impl<T: Real> Param<T> {
    fn new(name: &'static str, value: Tensor<T>, trainable: bool, prunable: bool) -> Self {
        Self {
            name,
            value,
            trainable,
            prunable,
            mask: None,
        }
    }

    /// Zeroes every masked entry.
    pub fn apply_mask(&mut self) {
        if let Some(mask) = &self.mask {
            for (w, &keep) in self.value.data_mut().iter_mut().zip(mask) {
                if !keep {
                    *w = T::zero();
                }
            }
        }
    }

    pub fn masked_count(&self) -> usize {
        self.mask.as_ref().map_or(0, |m| m.iter().filter(|k| !**k).count())
    }

    pub fn cast<U: Real>(&self) -> Param<U> {
        Param {
            name: self.name,
            value: self.value.cast(),
            trainable: self.trainable,
            prunable: self.prunable,
            mask: self.mask.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer<T> {
    pub descriptor: LayerDescriptor,
    pub input_shape: FeatureShape,
    pub output_shape: FeatureShape,
    pub params: Vec<Param<T>>,
}

/// Values saved by a training-mode forward pass for the backward pass.
#[derive(Debug)]
pub enum Cache<T> {
    Identity,
    BatchNorm {
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    Conv {
        input: Tensor<T>,
        output: Tensor<T>,
    },
    Gru {
        input: Tensor<T>,
        /// Hidden states h_0..h_L per sample, `[batch, len + 1, units]`.
        hidden: Vec<T>,
        z: Vec<T>,
        r: Vec<T>,
        candidate: Vec<T>,
        /// Recurrent contribution to the candidate, h_{t-1}·U_h + b_h.
        rec_candidate: Vec<T>,
    },
    Pool {
        /// For max pooling, the input offset each output was taken from.
        argmax: Vec<usize>,
    },
    Dense {
        input: Tensor<T>,
        output: Tensor<T>,
    },
    Dropout {
        scale: Vec<T>,
    },
}

fn glorot<T: Real>(shape: Vec<usize>, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::lit(rng.gen_range(-limit..limit))).collect();
    Tensor::new(shape, data).expect("shape product")
}

fn seq_dims(shape: FeatureShape) -> (usize, usize) {
    match shape {
        FeatureShape::Seq { len, channels } => (len, channels),
        FeatureShape::Flat(n) => (1, n),
    }
}

impl<T: Real> Layer<T> {
    /// Allocates and initialises the layer's weights for the given input shape.
    pub fn new(descriptor: LayerDescriptor, input_shape: FeatureShape, rng: &mut Rng) -> Result<Self> {
        let output_shape = layer_output_shape(&descriptor, input_shape).map_err(Error::Shape)?;
        let params = match descriptor {
            LayerDescriptor::BatchNorm => {
                let c = input_shape.features();
                vec![
                    Param::new("gamma", Tensor::filled(vec![c], T::one()), true, false),
                    Param::new("beta", Tensor::zeros(vec![c]), true, false),
                    Param::new("moving_mean", Tensor::zeros(vec![c]), false, false),
                    Param::new("moving_variance", Tensor::filled(vec![c], T::one()), false, false),
                ]
            }
            LayerDescriptor::Conv1d { filters, kernel, .. } => {
                let c = input_shape.features();
                vec![
                    Param::new(
                        "kernel",
                        glorot(vec![kernel, c, filters], kernel * c, kernel * filters, rng),
                        true,
                        true,
                    ),
                    Param::new("bias", Tensor::zeros(vec![filters]), true, false),
                ]
            }
            LayerDescriptor::Gru { units } => {
                let i = input_shape.features();
                vec![
                    Param::new("kernel", glorot(vec![i, 3 * units], i, 3 * units, rng), true, true),
                    Param::new(
                        "recurrent_kernel",
                        glorot(vec![units, 3 * units], units, 3 * units, rng),
                        true,
                        true,
                    ),
                    Param::new("bias", Tensor::zeros(vec![2, 3 * units]), true, false),
                ]
            }
            LayerDescriptor::Dense { units, .. } => {
                let n = input_shape.features();
                vec![
                    Param::new("kernel", glorot(vec![n, units], n, units, rng), true, true),
                    Param::new("bias", Tensor::zeros(vec![units]), true, false),
                ]
            }
            LayerDescriptor::Pool { .. }
            | LayerDescriptor::GlobalAvgPool
            | LayerDescriptor::Flatten
            | LayerDescriptor::Dropout { .. } => Vec::new(),
        };
        Ok(Self {
            descriptor,
            input_shape,
            output_shape,
            params,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> Layer<U> {
        Layer {
            descriptor: self.descriptor,
            input_shape: self.input_shape,
            output_shape: self.output_shape,
            params: self.params.iter().map(Param::cast).collect(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<usize> {
        let dims = self.input_shape.dims();
        if x.shape().len() != dims.len() + 1 || x.shape()[1..] != dims[..] {
            return Err(Error::Shape(format!(
                "{} expects [batch, {:?}], got {:?}",
                self.descriptor.name(),
                dims,
                x.shape()
            )));
        }
        Ok(x.shape()[0])
    }

    fn out_tensor(&self, batch: usize, data: Vec<T>) -> Tensor<T> {
        let mut shape = vec![batch];
        shape.extend(self.output_shape.dims());
        Tensor::new(shape, data).expect("output shape")
    }

    /// Inference-mode forward: moving batch-norm statistics, dropout off.
    pub fn forward_inference(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let batch = self.check_input(x)?;
        let out = match self.descriptor {
            LayerDescriptor::BatchNorm => {
                let c = self.input_shape.features();
                let [gamma, beta, mean, var] = [0, 1, 2, 3].map(|i| self.params[i].value.data());
                let eps = T::lit(BN_EPSILON);
                let scale: Vec<T> = (0..c).map(|j| gamma[j] / (var[j] + eps).sqrt()).collect();
                let data = x
                    .data()
                    .chunks(c)
                    .flat_map(|row| {
                        (0..c)
                            .map(|j| (row[j] - mean[j]) * scale[j] + beta[j])
                            .collect::<Vec<_>>()
                    })
                    .collect();
                self.out_tensor(batch, data)
            }
            LayerDescriptor::Dropout { .. } | LayerDescriptor::Flatten => self.out_tensor(batch, x.data().to_vec()),
            _ => self.forward_common(x, batch)?.0,
        };
        Ok(out)
    }

    /// Training-mode forward. Updates batch-norm moving statistics and draws
    /// dropout masks from `rng`.
    pub fn forward_train(&mut self, x: &Tensor<T>, rng: &mut Rng) -> Result<(Tensor<T>, Cache<T>)> {
        let batch = self.check_input(x)?;
        match self.descriptor {
            LayerDescriptor::BatchNorm => Ok(self.batch_norm_train(x, batch)),
            LayerDescriptor::Dropout { rate } => {
                let keep = 1.0 - rate;
                let on = T::lit(1.0 / keep);
                let scale: Vec<T> = (0..x.len())
                    .map(|_| if rng.gen::<f64>() < keep { on } else { T::zero() })
                    .collect();
                let data = x.data().iter().zip(&scale).map(|(&v, &s)| v * s).collect();
                Ok((self.out_tensor(batch, data), Cache::Dropout { scale }))
            }
            LayerDescriptor::Flatten => Ok((self.out_tensor(batch, x.data().to_vec()), Cache::Identity)),
            _ => self.forward_common(x, batch),
        }
    }

    fn batch_norm_train(&mut self, x: &Tensor<T>, batch: usize) -> (Tensor<T>, Cache<T>) {
        let c = self.input_shape.features();
        let rows = x.len() / c;
        let inv_rows = T::one() / T::from_usize(rows).unwrap();
        let mut mean = vec![T::zero(); c];
        for row in x.data().chunks(c) {
            for j in 0..c {
                mean[j] += row[j];
            }
        }
        mean.iter_mut().for_each(|m| *m *= inv_rows);
        let mut var = vec![T::zero(); c];
        for row in x.data().chunks(c) {
            for j in 0..c {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v *= inv_rows);
        let eps = T::lit(BN_EPSILON);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let gamma = self.params[0].value.data().to_vec();
        let beta = self.params[1].value.data().to_vec();
        let mut xhat = Vec::with_capacity(x.len());
        let mut out = Vec::with_capacity(x.len());
        for row in x.data().chunks(c) {
            for j in 0..c {
                let h = (row[j] - mean[j]) * inv_std[j];
                xhat.push(h);
                out.push(gamma[j] * h + beta[j]);
            }
        }
        let momentum = T::lit(BN_MOMENTUM);
        let rest = T::one() - momentum;
        for (m, &b) in self.params[2].value.data_mut().iter_mut().zip(&mean) {
            *m = *m * momentum + b * rest;
        }
        for (m, &b) in self.params[3].value.data_mut().iter_mut().zip(&var) {
            *m = *m * momentum + b * rest;
        }
        (self.out_tensor(batch, out), Cache::BatchNorm { xhat, inv_std })
    }

    /// Forward for layers whose computation is identical in both modes.
    fn forward_common(&self, x: &Tensor<T>, batch: usize) -> Result<(Tensor<T>, Cache<T>)> {
        let (len, ch) = seq_dims(self.input_shape);
        match self.descriptor {
            LayerDescriptor::Conv1d {
                filters,
                kernel,
                stride,
                padding,
                activation,
            } => {
                let (out_len, _) = seq_dims(self.output_shape);
                let pad = match padding {
                    Padding::Same => same_pad_left(len, kernel, stride),
                    Padding::Valid => 0,
                };
                let w = self.params[0].value.data();
                let bias = self.params[1].value.data();
                let mut out = vec![T::zero(); batch * out_len * filters];
                for b in 0..batch {
                    let xs = &x.data()[b * len * ch..(b + 1) * len * ch];
                    for t in 0..out_len {
                        let acc = &mut out[(b * out_len + t) * filters..(b * out_len + t + 1) * filters];
                        acc.copy_from_slice(bias);
                        for k in 0..kernel {
                            let pos = (t * stride + k) as isize - pad as isize;
                            if pos < 0 || pos as usize >= len {
                                continue;
                            }
                            let xrow = &xs[pos as usize * ch..(pos as usize + 1) * ch];
                            let wk = &w[k * ch * filters..(k + 1) * ch * filters];
                            for (c, &xv) in xrow.iter().enumerate() {
                                let wrow = &wk[c * filters..(c + 1) * filters];
                                for (a, &wv) in acc.iter_mut().zip(wrow) {
                                    *a += xv * wv;
                                }
                            }
                        }
                        acc.iter_mut().for_each(|a| *a = activation::apply(activation, *a));
                    }
                }
                let output = self.out_tensor(batch, out);
                Ok((
                    output.clone(),
                    Cache::Conv {
                        input: x.clone(),
                        output,
                    },
                ))
            }
            LayerDescriptor::Gru { units } => self.gru_forward(x, batch, len, ch, units),
            LayerDescriptor::Pool { kind, length } => {
                let (out_len, _) = seq_dims(self.output_shape);
                let mut out = Vec::with_capacity(batch * out_len * ch);
                let mut argmax = Vec::new();
                let inv = T::one() / T::from_usize(length).unwrap();
                for b in 0..batch {
                    for t in 0..out_len {
                        for c in 0..ch {
                            let base = b * len * ch + t * length * ch + c;
                            match kind {
                                PoolKind::Max => {
                                    let mut best = base;
                                    for k in 1..length {
                                        let idx = base + k * ch;
                                        if x.data()[idx] > x.data()[best] {
                                            best = idx;
                                        }
                                    }
                                    argmax.push(best);
                                    out.push(x.data()[best]);
                                }
                                PoolKind::Avg => {
                                    let s: T = (0..length).map(|k| x.data()[base + k * ch]).sum();
                                    out.push(s * inv);
                                }
                            }
                        }
                    }
                }
                Ok((self.out_tensor(batch, out), Cache::Pool { argmax }))
            }
            LayerDescriptor::GlobalAvgPool => {
                let inv = T::one() / T::from_usize(len).unwrap();
                let mut out = vec![T::zero(); batch * ch];
                for b in 0..batch {
                    for t in 0..len {
                        for c in 0..ch {
                            out[b * ch + c] += x.data()[(b * len + t) * ch + c];
                        }
                    }
                }
                out.iter_mut().for_each(|v| *v *= inv);
                Ok((self.out_tensor(batch, out), Cache::Identity))
            }
            LayerDescriptor::Dense { units, activation } => {
                let n = self.input_shape.features();
                let w = self.params[0].value.data();
                let bias = self.params[1].value.data();
                let mut out = vec![T::zero(); batch * units];
                for b in 0..batch {
                    let acc = &mut out[b * units..(b + 1) * units];
                    acc.copy_from_slice(bias);
                    for (i, &xv) in x.data()[b * n..(b + 1) * n].iter().enumerate() {
                        for (a, &wv) in acc.iter_mut().zip(&w[i * units..(i + 1) * units]) {
                            *a += xv * wv;
                        }
                    }
                    acc.iter_mut().for_each(|a| *a = activation::apply(activation, *a));
                }
                let output = self.out_tensor(batch, out);
                Ok((
                    output.clone(),
                    Cache::Dense {
                        input: x.clone(),
                        output,
                    },
                ))
            }
            LayerDescriptor::BatchNorm | LayerDescriptor::Dropout { .. } | LayerDescriptor::Flatten => {
                unreachable!("mode-dependent layers handled by caller")
            }
        }
    }

    fn gru_forward(
        &self,
        x: &Tensor<T>,
        batch: usize,
        len: usize,
        input_dim: usize,
        units: usize,
    ) -> Result<(Tensor<T>, Cache<T>)> {
        let u3 = 3 * units;
        let wk = self.params[0].value.data();
        let wr = self.params[1].value.data();
        let bias = self.params[2].value.data();
        let (b_in, b_rec) = bias.split_at(u3);
        let mut hidden = vec![T::zero(); batch * (len + 1) * units];
        let mut z = vec![T::zero(); batch * len * units];
        let mut r = vec![T::zero(); batch * len * units];
        let mut cand = vec![T::zero(); batch * len * units];
        let mut rec_cand = vec![T::zero(); batch * len * units];
        let mut xp = vec![T::zero(); u3];
        let mut hp = vec![T::zero(); u3];
        for b in 0..batch {
            for t in 0..len {
                let xt = &x.data()[(b * len + t) * input_dim..(b * len + t + 1) * input_dim];
                xp.copy_from_slice(b_in);
                for (i, &xv) in xt.iter().enumerate() {
                    for (a, &w) in xp.iter_mut().zip(&wk[i * u3..(i + 1) * u3]) {
                        *a += xv * w;
                    }
                }
                let hbase = (b * (len + 1) + t) * units;
                hp.copy_from_slice(b_rec);
                for i in 0..units {
                    let hv = hidden[hbase + i];
                    for (a, &w) in hp.iter_mut().zip(&wr[i * u3..(i + 1) * u3]) {
                        *a += hv * w;
                    }
                }
                let o = (b * len + t) * units;
                for j in 0..units {
                    let zj = sigmoid(xp[j] + hp[j]);
                    let rj = sigmoid(xp[units + j] + hp[units + j]);
                    let rc = hp[2 * units + j];
                    let cj = (xp[2 * units + j] + rj * rc).tanh();
                    let hprev = hidden[hbase + j];
                    hidden[hbase + units + j] = zj * hprev + (T::one() - zj) * cj;
                    z[o + j] = zj;
                    r[o + j] = rj;
                    cand[o + j] = cj;
                    rec_cand[o + j] = rc;
                }
            }
        }
        let mut out = Vec::with_capacity(batch * len * units);
        for b in 0..batch {
            let start = (b * (len + 1) + 1) * units;
            out.extend_from_slice(&hidden[start..start + len * units]);
        }
        Ok((
            self.out_tensor(batch, out),
            Cache::Gru {
                input: x.clone(),
                hidden,
                z,
                r,
                candidate: cand,
                rec_candidate: rec_cand,
            },
        ))
    }

    /// Backward pass. `grad_out` is the loss gradient with respect to this
    /// layer's output, or, when `pre_activation` is set on a dense layer,
    /// with respect to its pre-activation. Parameter gradients are
    /// accumulated into `grads` (one tensor per param); the gradient with
    /// respect to the layer input is returned.
    pub fn backward(
        &self,
        cache: &Cache<T>,
        grad_out: &Tensor<T>,
        grads: &mut [Tensor<T>],
        pre_activation: bool,
    ) -> Result<Tensor<T>> {
        let batch = grad_out.shape()[0];
        let (len, ch) = seq_dims(self.input_shape);
        let mut in_shape = vec![batch];
        in_shape.extend(self.input_shape.dims());
        let dy = grad_out.data();
        let dx = match (self.descriptor, cache) {
            (LayerDescriptor::BatchNorm, Cache::BatchNorm { xhat, inv_std }) => {
                let c = ch;
                let rows = dy.len() / c;
                let gamma = self.params[0].value.data();
                let mut sum_dy = vec![T::zero(); c];
                let mut sum_dy_xhat = vec![T::zero(); c];
                for (drow, hrow) in dy.chunks(c).zip(xhat.chunks(c)) {
                    for j in 0..c {
                        sum_dy[j] += drow[j];
                        sum_dy_xhat[j] += drow[j] * hrow[j];
                    }
                }
                grads[0]
                    .data_mut()
                    .iter_mut()
                    .zip(&sum_dy_xhat)
                    .for_each(|(g, &v)| *g += v);
                grads[1].data_mut().iter_mut().zip(&sum_dy).for_each(|(g, &v)| *g += v);
                let m = T::from_usize(rows).unwrap();
                let mut dx = Vec::with_capacity(dy.len());
                for (drow, hrow) in dy.chunks(c).zip(xhat.chunks(c)) {
                    for j in 0..c {
                        let k = gamma[j] * inv_std[j] / m;
                        dx.push(k * (m * drow[j] - sum_dy[j] - hrow[j] * sum_dy_xhat[j]));
                    }
                }
                dx
            }
            (LayerDescriptor::Dropout { .. }, Cache::Dropout { scale }) => {
                dy.iter().zip(scale).map(|(&g, &s)| g * s).collect()
            }
            (LayerDescriptor::Flatten, _) => dy.to_vec(),
            (
                LayerDescriptor::Conv1d {
                    filters,
                    kernel,
                    stride,
                    padding,
                    activation,
                },
                Cache::Conv { input, output },
            ) => {
                let (out_len, _) = seq_dims(self.output_shape);
                let pad = match padding {
                    Padding::Same => same_pad_left(len, kernel, stride),
                    Padding::Valid => 0,
                };
                let dz: Vec<T> = dy
                    .iter()
                    .zip(output.data())
                    .map(|(&g, &y)| g * activation::grad_from_output(activation, y))
                    .collect();
                let w = self.params[0].value.data();
                let mut dw = vec![T::zero(); w.len()];
                let mut db = vec![T::zero(); filters];
                let mut dx = vec![T::zero(); batch * len * ch];
                for b in 0..batch {
                    for t in 0..out_len {
                        let dzr = &dz[(b * out_len + t) * filters..(b * out_len + t + 1) * filters];
                        db.iter_mut().zip(dzr).for_each(|(a, &g)| *a += g);
                        for k in 0..kernel {
                            let pos = (t * stride + k) as isize - pad as isize;
                            if pos < 0 || pos as usize >= len {
                                continue;
                            }
                            let xo = (b * len + pos as usize) * ch;
                            for c in 0..ch {
                                let xv = input.data()[xo + c];
                                let wo = (k * ch + c) * filters;
                                let mut acc = T::zero();
                                for f in 0..filters {
                                    dw[wo + f] += xv * dzr[f];
                                    acc += w[wo + f] * dzr[f];
                                }
                                dx[xo + c] += acc;
                            }
                        }
                    }
                }
                add_into(&mut grads[0], &dw);
                add_into(&mut grads[1], &db);
                dx
            }
            (
                LayerDescriptor::Gru { units },
                Cache::Gru {
                    input,
                    hidden,
                    z,
                    r,
                    candidate,
                    rec_candidate,
                },
            ) => self.gru_backward(
                grads,
                dy,
                batch,
                len,
                ch,
                units,
                input.data(),
                hidden,
                z,
                r,
                candidate,
                rec_candidate,
            ),
            (LayerDescriptor::Pool { kind, length }, Cache::Pool { argmax }) => {
                let (out_len, _) = seq_dims(self.output_shape);
                let mut dx = vec![T::zero(); batch * len * ch];
                match kind {
                    PoolKind::Max => {
                        for (&g, &idx) in dy.iter().zip(argmax) {
                            dx[idx] += g;
                        }
                    }
                    PoolKind::Avg => {
                        let inv = T::one() / T::from_usize(length).unwrap();
                        for b in 0..batch {
                            for t in 0..out_len {
                                for c in 0..ch {
                                    let g = dy[(b * out_len + t) * ch + c] * inv;
                                    for k in 0..length {
                                        dx[b * len * ch + (t * length + k) * ch + c] += g;
                                    }
                                }
                            }
                        }
                    }
                }
                dx
            }
            (LayerDescriptor::GlobalAvgPool, _) => {
                let inv = T::one() / T::from_usize(len).unwrap();
                let mut dx = Vec::with_capacity(batch * len * ch);
                for b in 0..batch {
                    for _ in 0..len {
                        dx.extend(dy[b * ch..(b + 1) * ch].iter().map(|&g| g * inv));
                    }
                }
                dx
            }
            (LayerDescriptor::Dense { units, activation }, Cache::Dense { input, output }) => {
                let n = self.input_shape.features();
                let dz: Vec<T> = if pre_activation {
                    dy.to_vec()
                } else {
                    dy.iter()
                        .zip(output.data())
                        .map(|(&g, &y)| g * activation::grad_from_output(activation, y))
                        .collect()
                };
                let w = self.params[0].value.data();
                let mut dw = vec![T::zero(); w.len()];
                let mut db = vec![T::zero(); units];
                let mut dx = vec![T::zero(); batch * n];
                for b in 0..batch {
                    let dzr = &dz[b * units..(b + 1) * units];
                    db.iter_mut().zip(dzr).for_each(|(a, &g)| *a += g);
                    for i in 0..n {
                        let xv = input.data()[b * n + i];
                        let wrow = &w[i * units..(i + 1) * units];
                        let dwrow = &mut dw[i * units..(i + 1) * units];
                        let mut acc = T::zero();
                        for u in 0..units {
                            dwrow[u] += xv * dzr[u];
                            acc += wrow[u] * dzr[u];
                        }
                        dx[b * n + i] = acc;
                    }
                }
                add_into(&mut grads[0], &dw);
                add_into(&mut grads[1], &db);
                dx
            }
            (d, _) => {
                return Err(Error::Shape(format!(
                    "backward for {} received a mismatched cache",
                    d.name()
                )))
            }
        };
        Tensor::new(in_shape, dx)
    }

    #[allow(clippy::too_many_arguments)]
    fn gru_backward(
        &self,
        grads: &mut [Tensor<T>],
        dy: &[T],
        batch: usize,
        len: usize,
        input_dim: usize,
        units: usize,
        x: &[T],
        hidden: &[T],
        z: &[T],
        r: &[T],
        cand: &[T],
        rec_cand: &[T],
    ) -> Vec<T> {
        let u3 = 3 * units;
        let wk = self.params[0].value.data();
        let wr = self.params[1].value.data();
        let mut dwk = vec![T::zero(); wk.len()];
        let mut dwr = vec![T::zero(); wr.len()];
        let mut dbias = vec![T::zero(); 2 * u3];
        let mut dx = vec![T::zero(); batch * len * input_dim];
        let mut dh_next = vec![T::zero(); units];
        let mut gx = vec![T::zero(); u3];
        let mut gh = vec![T::zero(); u3];
        for b in 0..batch {
            dh_next.iter_mut().for_each(|v| *v = T::zero());
            for t in (0..len).rev() {
                let o = (b * len + t) * units;
                let hbase = (b * (len + 1) + t) * units;
                let mut dh_prev = vec![T::zero(); units];
                for j in 0..units {
                    let dh = dy[o + j] + dh_next[j];
                    let (zj, rj, cj) = (z[o + j], r[o + j], cand[o + j]);
                    let hprev = hidden[hbase + j];
                    let dz = dh * (hprev - cj);
                    let dc = dh * (T::one() - zj);
                    dh_prev[j] = dh * zj;
                    let da_c = dc * (T::one() - cj * cj);
                    let dr = da_c * rec_cand[o + j];
                    let da_z = dz * zj * (T::one() - zj);
                    let da_r = dr * rj * (T::one() - rj);
                    gx[j] = da_z;
                    gx[units + j] = da_r;
                    gx[2 * units + j] = da_c;
                    gh[j] = da_z;
                    gh[units + j] = da_r;
                    gh[2 * units + j] = da_c * rj;
                }
                let xo = (b * len + t) * input_dim;
                for i in 0..input_dim {
                    let xv = x[xo + i];
                    let wrow = &wk[i * u3..(i + 1) * u3];
                    let dwrow = &mut dwk[i * u3..(i + 1) * u3];
                    let mut acc = T::zero();
                    for k in 0..u3 {
                        dwrow[k] += xv * gx[k];
                        acc += wrow[k] * gx[k];
                    }
                    dx[xo + i] = acc;
                }
                for i in 0..units {
                    let hv = hidden[hbase + i];
                    let wrow = &wr[i * u3..(i + 1) * u3];
                    let dwrow = &mut dwr[i * u3..(i + 1) * u3];
                    let mut acc = T::zero();
                    for k in 0..u3 {
                        dwrow[k] += hv * gh[k];
                        acc += wrow[k] * gh[k];
                    }
                    dh_prev[i] += acc;
                }
                for k in 0..u3 {
                    dbias[k] += gx[k];
                    dbias[u3 + k] += gh[k];
                }
                dh_next = dh_prev;
            }
        }
        add_into(&mut grads[0], &dwk);
        add_into(&mut grads[1], &dwr);
        add_into(&mut grads[2], &dbias);
        dx
    }
}

fn add_into<T: Real>(dst: &mut Tensor<T>, src: &[T]) {
    for (d, &s) in dst.data_mut().iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::space::Activation;

    fn seq(len: usize, channels: usize) -> FeatureShape {
        FeatureShape::Seq { len, channels }
    }

    #[test]
    fn conv_same_stride_two_shape() {
        let mut rng = seed::rng(0);
        let conv = LayerDescriptor::Conv1d {
            filters: 141,
            kernel: 8,
            stride: 2,
            padding: Padding::Same,
            activation: Activation::Relu,
        };
        let layer = Layer::<f32>::new(conv, seq(120, 6), &mut rng).unwrap();
        let y = layer.forward_inference(&Tensor::zeros(vec![2, 120, 6])).unwrap();
        assert_eq!(y.shape(), &[2, 60, 141]);
    }

    #[test]
    fn pool_and_gap_shapes() {
        let mut rng = seed::rng(0);
        let pool = Layer::<f32>::new(
            LayerDescriptor::Pool {
                kind: PoolKind::Max,
                length: 2,
            },
            seq(15, 31),
            &mut rng,
        )
        .unwrap();
        assert_eq!(
            pool.forward_inference(&Tensor::zeros(vec![1, 15, 31])).unwrap().shape(),
            &[1, 7, 31]
        );
        let gap = Layer::<f32>::new(LayerDescriptor::GlobalAvgPool, seq(3, 291), &mut rng).unwrap();
        assert_eq!(
            gap.forward_inference(&Tensor::zeros(vec![1, 3, 291])).unwrap().shape(),
            &[1, 291]
        );
    }

    #[test]
    fn identity_conv_reproduces_input() {
        let mut rng = seed::rng(0);
        let conv = LayerDescriptor::Conv1d {
            filters: 1,
            kernel: 1,
            stride: 1,
            padding: Padding::Same,
            activation: Activation::Linear,
        };
        let mut layer = Layer::<f64>::new(conv, seq(9, 1), &mut rng).unwrap();
        layer.params[0].value.data_mut()[0] = 1.0;
        let x = Tensor::new(vec![1, 9, 1], (0..9).map(|i| i as f64 * 0.7 - 2.0).collect()).unwrap();
        assert_eq!(layer.forward_inference(&x).unwrap().data(), x.data());
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let mut rng = seed::rng(0);
        let layer = Layer::<f32>::new(LayerDescriptor::GlobalAvgPool, seq(4, 3), &mut rng).unwrap();
        assert!(layer.forward_inference(&Tensor::zeros(vec![1, 4, 2])).is_err());
    }

    #[test]
    fn batch_norm_inference_uses_moving_stats() {
        let mut rng = seed::rng(0);
        let mut bn = Layer::<f64>::new(LayerDescriptor::BatchNorm, FeatureShape::Flat(2), &mut rng).unwrap();
        bn.params[2].value.data_mut().copy_from_slice(&[1.0, -1.0]);
        bn.params[3].value.data_mut().copy_from_slice(&[4.0, 1.0]);
        let x = Tensor::new(vec![1, 2], vec![3.0, -1.0]).unwrap();
        let y = bn.forward_inference(&x).unwrap();
        assert!((y.data()[0] - 2.0 / (4.0f64 + BN_EPSILON).sqrt()).abs() < 1e-12);
        assert_eq!(y.data()[1], 0.0);
    }
}
