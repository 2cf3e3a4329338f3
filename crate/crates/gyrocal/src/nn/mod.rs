//! A small 1D convolutional network that regresses per-channel bias from a
//! raw measurement window, written directly against 64-bit floats.
//!
//! Layer stack: strided cross-correlation over channels, leaky ReLU,
//! non-overlapping max pooling, flatten, one hidden fully connected layer
//! with leaky ReLU, and a linear output layer. The analytic gradients and
//! the Adam update live here too; the epoch loop is in [`train`].
//!
//! Conventions fixed by this module (and relied on by checkpoints):
//! windows are channel-major (`window[c * window_len + t]`), kernels are
//! `kernels[(f * in_channels + c) * kernel_size + j]`, the flatten order is
//! filter-major (`flat[f * l2 + u]`), fully connected weights are
//! `w1[i * hidden_dim + h]` and `w2[h * out_dim + o]`, the leaky ReLU
//! derivative at exactly 0 is 1, and a tied max routes its gradient to the
//! first maximal element.

#![allow(clippy::needless_range_loop)]

pub mod checkpoint;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT};
pub use train::{train, write_train_log, TrainConfig, TrainReport};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// Architecture hyperparameters. `out_dim` must equal `in_channels`: the
/// network predicts one bias value per input channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub in_channels: usize,
    pub window_len: usize,
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub conv_stride: usize,
    pub leaky_slope: f64,
    pub pool_size: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
}

impl NetworkConfig {
    /// Default architecture for a given input shape: 16 filters of width 7,
    /// stride 1, pool 4, hidden width 64.
    pub fn for_input(in_channels: usize, window_len: usize) -> Self {
        Self {
            in_channels,
            window_len,
            conv_filters: 16,
            kernel_size: 7,
            conv_stride: 1,
            leaky_slope: 0.1,
            pool_size: 4,
            hidden_dim: 64,
            out_dim: in_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("in_channels", self.in_channels),
            ("window_len", self.window_len),
            ("conv_filters", self.conv_filters),
            ("kernel_size", self.kernel_size),
            ("conv_stride", self.conv_stride),
            ("pool_size", self.pool_size),
            ("hidden_dim", self.hidden_dim),
            ("out_dim", self.out_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be >= 1")));
            }
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return Err(Error::invalid(format!(
                "leaky slope must be finite and >= 0, got {}",
                self.leaky_slope
            )));
        }
        if self.window_len < self.kernel_size {
            return Err(Error::invalid(format!(
                "window of {} samples is shorter than the kernel ({})",
                self.window_len, self.kernel_size
            )));
        }
        if self.l1() < self.pool_size {
            return Err(Error::invalid(format!(
                "conv output length {} is shorter than the pool size {}",
                self.l1(),
                self.pool_size
            )));
        }
        if self.out_dim != self.in_channels {
            return Err(Error::invalid(format!(
                "out_dim ({}) must equal in_channels ({}): one bias per channel",
                self.out_dim, self.in_channels
            )));
        }
        Ok(())
    }

    /// Convolution output length.
    pub fn l1(&self) -> usize {
        (self.window_len - self.kernel_size) / self.conv_stride + 1
    }

    /// Pooled length.
    pub fn l2(&self) -> usize {
        self.l1() / self.pool_size
    }

    /// Flattened feature count feeding the first fully connected layer.
    pub fn flat_len(&self) -> usize {
        self.conv_filters * self.l2()
    }

    pub fn n_params(&self) -> usize {
        self.conv_filters * self.in_channels * self.kernel_size
            + self.conv_filters
            + self.flat_len() * self.hidden_dim
            + self.hidden_dim
            + self.hidden_dim * self.out_dim
            + self.out_dim
    }
}

/// All learnable tensors, flat in the documented layouts. The same struct
/// doubles as gradient and optimizer-moment storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub kernels: Vec<f64>,
    pub conv_bias: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(config: &NetworkConfig) -> Self {
        Self {
            kernels: vec![0.0; config.conv_filters * config.in_channels * config.kernel_size],
            conv_bias: vec![0.0; config.conv_filters],
            w1: vec![0.0; config.flat_len() * config.hidden_dim],
            b1: vec![0.0; config.hidden_dim],
            w2: vec![0.0; config.hidden_dim * config.out_dim],
            b2: vec![0.0; config.out_dim],
        }
    }

    /// Seeded initialization: every tensor uniform in `±1/sqrt(fan_in)` of
    /// its layer, drawn in the fixed order kernels, conv biases, w1, b1,
    /// w2, b2 from one stream.
    pub fn init(config: &NetworkConfig, seed: u64) -> Self {
        let mut stream = rng::stream(seed);
        let mut draw = |n: usize, bound: f64| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let u = rng::unit_open_closed(stream.next_u64());
                    bound * (2.0 * u - 1.0)
                })
                .collect()
        };
        let conv_bound = 1.0 / ((config.in_channels * config.kernel_size) as f64).sqrt();
        let fc1_bound = 1.0 / (config.flat_len() as f64).sqrt();
        let fc2_bound = 1.0 / (config.hidden_dim as f64).sqrt();
        Self {
            kernels: draw(
                config.conv_filters * config.in_channels * config.kernel_size,
                conv_bound,
            ),
            conv_bias: draw(config.conv_filters, conv_bound),
            w1: draw(config.flat_len() * config.hidden_dim, fc1_bound),
            b1: draw(config.hidden_dim, fc1_bound),
            w2: draw(config.hidden_dim * config.out_dim, fc2_bound),
            b2: draw(config.out_dim, fc2_bound),
        }
    }

    pub fn validate(&self, config: &NetworkConfig) -> Result<()> {
        let expect = [
            (
                "kernels",
                &self.kernels,
                config.conv_filters * config.in_channels * config.kernel_size,
            ),
            ("conv_bias", &self.conv_bias, config.conv_filters),
            ("w1", &self.w1, config.flat_len() * config.hidden_dim),
            ("b1", &self.b1, config.hidden_dim),
            ("w2", &self.w2, config.hidden_dim * config.out_dim),
            ("b2", &self.b2, config.out_dim),
        ];
        for (name, tensor, want) in expect {
            if tensor.len() != want {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: expected {want} values, got {}",
                    tensor.len()
                )));
            }
            if !tensor.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} contains a non-finite value"
                )));
            }
        }
        Ok(())
    }

    /// Views over the six tensors in serialization order: kernels, conv
    /// biases, w1, b1, w2, b2.
    pub fn tensors(&self) -> [&Vec<f64>; 6] {
        [
            &self.kernels,
            &self.conv_bias,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
        ]
    }

    /// Mutable counterpart of [`NetworkParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.kernels,
            &mut self.conv_bias,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }
}

/// Strided cross-correlation of a channel-major input with a bank of
/// multi-channel kernels. `input` is `C x S`, `kernels` is `F x C x m`
/// (one bias per filter); the result is `F x L1` with
/// `L1 = (S - m) / stride + 1`.
pub fn conv1d_forward(
    input: &[f64],
    in_channels: usize,
    kernels: &[f64],
    biases: &[f64],
    kernel_size: usize,
    stride: usize,
) -> Result<Vec<f64>> {
    if in_channels == 0 || kernel_size == 0 || stride == 0 {
        return Err(Error::invalid(
            "channels, kernel size and stride must be >= 1",
        ));
    }
    if !input.len().is_multiple_of(in_channels) {
        return Err(Error::ShapeMismatch(format!(
            "input of {} values is not divisible into {} channels",
            input.len(),
            in_channels
        )));
    }
    let s = input.len() / in_channels;
    if s < kernel_size {
        return Err(Error::ShapeMismatch(format!(
            "input length {s} is shorter than the kernel ({kernel_size})"
        )));
    }
    let f = biases.len();
    if kernels.len() != f * in_channels * kernel_size {
        return Err(Error::ShapeMismatch(format!(
            "expected {} kernel weights for {f} filters, got {}",
            f * in_channels * kernel_size,
            kernels.len()
        )));
    }
    let l1 = (s - kernel_size) / stride + 1;
    let mut out = vec![0.0; f * l1];
    for fi in 0..f {
        for p in 0..l1 {
            let mut acc = biases[fi];
            let off = p * stride;
            for c in 0..in_channels {
                let kb = (fi * in_channels + c) * kernel_size;
                let xb = c * s + off;
                for j in 0..kernel_size {
                    acc += kernels[kb + j] * input[xb + j];
                }
            }
            out[fi * l1 + p] = acc;
        }
    }
    Ok(out)
}

/// `x` for `x >= 0`, `slope * x` below.
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

fn leaky_relu_deriv(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

/// Row-wise max over non-overlapping windows of `pool` elements. `x` is
/// `rows x len` row-major; a trailing remainder shorter than `pool` is
/// dropped. Errors if a full window does not fit.
pub fn max_pool1d(x: &[f64], rows: usize, pool: usize) -> Result<Vec<f64>> {
    if rows == 0 || pool == 0 {
        return Err(Error::invalid("rows and pool size must be >= 1"));
    }
    if !x.len().is_multiple_of(rows) {
        return Err(Error::ShapeMismatch(format!(
            "{} values do not form {rows} equal rows",
            x.len()
        )));
    }
    let len = x.len() / rows;
    if len < pool {
        return Err(Error::ShapeMismatch(format!(
            "row length {len} is shorter than the pool size {pool}"
        )));
    }
    let l2 = len / pool;
    let mut out = vec![0.0; rows * l2];
    for r in 0..rows {
        for u in 0..l2 {
            let start = r * len + u * pool;
            let mut best = x[start];
            for q in 1..pool {
                if x[start + q] > best {
                    best = x[start + q];
                }
            }
            out[r * l2 + u] = best;
        }
    }
    Ok(out)
}

pub(crate) struct ForwardCache {
    /// Conv pre-activations, `F x L1`.
    z1: Vec<f64>,
    /// Index into `0..L1` of the element each pooled value came from.
    argmax: Vec<usize>,
    /// Pooled activations in flatten order, length `F * L2`.
    flat: Vec<f64>,
    h_pre: Vec<f64>,
    h: Vec<f64>,
    pub y: Vec<f64>,
}

pub(crate) fn forward_cached(
    params: &NetworkParams,
    config: &NetworkConfig,
    window: &[f64],
) -> Result<ForwardCache> {
    config.validate()?;
    params.validate(config)?;
    if window.len() != config.in_channels * config.window_len {
        return Err(Error::ShapeMismatch(format!(
            "window has {} values, config implies {}",
            window.len(),
            config.in_channels * config.window_len
        )));
    }
    let (f, l1, l2, h_dim, o_dim) = (
        config.conv_filters,
        config.l1(),
        config.l2(),
        config.hidden_dim,
        config.out_dim,
    );
    let z1 = conv1d_forward(
        window,
        config.in_channels,
        &params.kernels,
        &params.conv_bias,
        config.kernel_size,
        config.conv_stride,
    )?;

    let mut argmax = vec![0usize; f * l2];
    let mut flat = vec![0.0; f * l2];
    for fi in 0..f {
        for u in 0..l2 {
            let start = u * config.pool_size;
            let mut best_p = start;
            let mut best = leaky_relu(z1[fi * l1 + start], config.leaky_slope);
            for q in 1..config.pool_size {
                let v = leaky_relu(z1[fi * l1 + start + q], config.leaky_slope);
                if v > best {
                    best = v;
                    best_p = start + q;
                }
            }
            argmax[fi * l2 + u] = best_p;
            flat[fi * l2 + u] = best;
        }
    }

    let mut h_pre = params.b1.clone();
    for (i, &x) in flat.iter().enumerate() {
        let wb = i * h_dim;
        for hh in 0..h_dim {
            h_pre[hh] += x * params.w1[wb + hh];
        }
    }
    let h: Vec<f64> = h_pre
        .iter()
        .map(|&v| leaky_relu(v, config.leaky_slope))
        .collect();

    let mut y = params.b2.clone();
    for (hh, &hv) in h.iter().enumerate() {
        let wb = hh * o_dim;
        for o in 0..o_dim {
            y[o] += hv * params.w2[wb + o];
        }
    }
    Ok(ForwardCache {
        z1,
        argmax,
        flat,
        h_pre,
        h,
        y,
    })
}

/// Full forward pass: one bias prediction per channel, in deg/s.
pub fn forward(params: &NetworkParams, config: &NetworkConfig, window: &[f64]) -> Result<Vec<f64>> {
    Ok(forward_cached(params, config, window)?.y)
}

/// Mean squared error over all elements.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} values, target {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("mse of empty vectors"));
    }
    let sq: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sq / pred.len() as f64)
}

/// Analytic gradients of the batch MSE with respect to every parameter,
/// plus the loss itself. The loss averages over all `batch * out_dim`
/// elements; gradients come back in a [`NetworkParams`] of the same shapes.
pub fn backward(
    params: &NetworkParams,
    config: &NetworkConfig,
    windows: &[&[f64]],
    targets: &[&[f64]],
) -> Result<(NetworkParams, f64)> {
    if windows.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} windows but {} targets",
            windows.len(),
            targets.len()
        )));
    }
    if windows.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let (f, l1, l2, h_dim, o_dim) = (
        config.conv_filters,
        config.l1(),
        config.l2(),
        config.hidden_dim,
        config.out_dim,
    );
    let (c, s, m, stride, slope) = (
        config.in_channels,
        config.window_len,
        config.kernel_size,
        config.conv_stride,
        config.leaky_slope,
    );
    let mut grads = NetworkParams::zeros(config);
    let mut total_sq = 0.0;
    let norm = 2.0 / (windows.len() * o_dim) as f64;

    for (window, target) in windows.iter().zip(targets) {
        if target.len() != o_dim {
            return Err(Error::ShapeMismatch(format!(
                "target has {} values, out_dim is {o_dim}",
                target.len()
            )));
        }
        let cache = forward_cached(params, config, window)?;

        let mut dy = vec![0.0; o_dim];
        for o in 0..o_dim {
            let e = cache.y[o] - target[o];
            total_sq += e * e;
            dy[o] = norm * e;
        }

        let mut dh = vec![0.0; h_dim];
        for hh in 0..h_dim {
            let wb = hh * o_dim;
            let mut acc = 0.0;
            for o in 0..o_dim {
                grads.w2[wb + o] += cache.h[hh] * dy[o];
                acc += params.w2[wb + o] * dy[o];
            }
            dh[hh] = acc * leaky_relu_deriv(cache.h_pre[hh], slope);
        }
        for o in 0..o_dim {
            grads.b2[o] += dy[o];
        }

        let mut dflat = vec![0.0; f * l2];
        for (i, &x) in cache.flat.iter().enumerate() {
            let wb = i * h_dim;
            let mut acc = 0.0;
            for hh in 0..h_dim {
                grads.w1[wb + hh] += x * dh[hh];
                acc += params.w1[wb + hh] * dh[hh];
            }
            dflat[i] = acc;
        }
        for hh in 0..h_dim {
            grads.b1[hh] += dh[hh];
        }

        // Pooling routes each pooled gradient to its argmax position; the
        // activation derivative is taken at the conv pre-activation there.
        let mut dz1 = vec![0.0; f * l1];
        for fi in 0..f {
            for u in 0..l2 {
                let p = cache.argmax[fi * l2 + u];
                dz1[fi * l1 + p] +=
                    dflat[fi * l2 + u] * leaky_relu_deriv(cache.z1[fi * l1 + p], slope);
            }
        }
        for fi in 0..f {
            for p in 0..l1 {
                let g = dz1[fi * l1 + p];
                if g == 0.0 {
                    continue;
                }
                grads.conv_bias[fi] += g;
                let off = p * stride;
                for ch in 0..c {
                    let kb = (fi * c + ch) * m;
                    let xb = ch * s + off;
                    for j in 0..m {
                        grads.kernels[kb + j] += window[xb + j] * g;
                    }
                }
            }
        }
    }
    Ok((grads, total_sq / (windows.len() * o_dim) as f64))
}

/// First and second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: NetworkParams,
    v: NetworkParams,
    t: u64,
}

impl AdamState {
    pub fn new(config: &NetworkConfig) -> Self {
        Self {
            m: NetworkParams::zeros(config),
            v: NetworkParams::zeros(config),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &NetworkParams,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) {
    state.t += 1;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    let p_tensors = params.tensors_mut();
    let g_tensors = grads.tensors();
    let m_tensors = state.m.tensors_mut();
    let v_tensors = state.v.tensors_mut();
    for (((p, g), m), v) in p_tensors
        .into_iter()
        .zip(g_tensors)
        .zip(m_tensors)
        .zip(v_tensors)
    {
        debug_assert_eq!(p.len(), g.len());
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}
