//! Individual layers: shape inference, parameter storage, forward passes and
//! hand-derived backward passes.
//!
//! Convolution follows the cross-correlation convention (no kernel flip), as
//! learned-filter layers conventionally do. Max-pool ties break toward the
//! lowest input index. Each forward returns a [`LayerCache`] holding exactly
//! what its backward needs.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor3;
use super::NnError;
use crate::seed;

/// Architecture-level description of one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerSpec {
    Conv1d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool {
        size: usize,
        stride: usize,
    },
    Flatten,
    Dense {
        out_units: usize,
    },
}

impl LayerSpec {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |what: String| Err(NnError::BadSpec(what));
        match *self {
            LayerSpec::Conv1d {
                out_channels,
                kernel,
                stride,
                ..
            } => {
                if out_channels == 0 || kernel == 0 || stride == 0 {
                    return bad(format!("conv1d dims must be >= 1, got {self:?}"));
                }
            }
            LayerSpec::MaxPool { size, stride } => {
                if size == 0 || stride == 0 {
                    return bad(format!("maxpool dims must be >= 1, got {self:?}"));
                }
            }
            LayerSpec::Dense { out_units } => {
                if out_units == 0 {
                    return bad("dense out_units must be >= 1".into());
                }
            }
            LayerSpec::Relu | LayerSpec::Flatten => {}
        }
        Ok(())
    }
}

/// An instantiated layer with concrete shapes and parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        /// `(out_channels, in_channels, kernel)`, row-major.
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    MaxPool {
        size: usize,
        stride: usize,
    },
    Flatten,
    Dense {
        in_features: usize,
        out_features: usize,
        /// `(out_features, in_features)`, row-major.
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
}

/// Backward-pass scratch captured by a layer's forward.
#[derive(Clone, Debug)]
pub enum LayerCache {
    Conv { input: Tensor3 },
    Relu { input: Tensor3 },
    MaxPool { argmax: Vec<usize>, in_shape: (usize, usize, usize) },
    Flatten { in_shape: (usize, usize, usize) },
    Dense { input: Tensor3 },
}

/// Gradients of one layer's parameters (empty for parameterless layers).
#[derive(Clone, Debug, Default)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn uniform_fan_in(rng: &mut impl rand::Rng, fan_in: usize, n: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound).collect()
}

impl Layer {
    /// Materializes a spec for a given input shape, seeding any parameters.
    pub fn build(
        spec: &LayerSpec,
        in_channels: usize,
        in_len: usize,
        init_seed: u64,
    ) -> Result<(Layer, usize, usize), NnError> {
        spec.validate()?;
        let bad = |what: String| Err(NnError::BadSpec(what));
        match *spec {
            LayerSpec::Conv1d {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let padded = in_len + 2 * padding;
                if padded < kernel {
                    return bad(format!(
                        "conv1d kernel {kernel} exceeds padded input length {padded}"
                    ));
                }
                let out_len = (padded - kernel) / stride + 1;
                let mut rng = seed::rng(init_seed);
                let weights =
                    uniform_fan_in(&mut rng, in_channels * kernel, out_channels * in_channels * kernel);
                let layer = Layer::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    weights,
                    bias: vec![0.0; out_channels],
                };
                Ok((layer, out_channels, out_len))
            }
            LayerSpec::Relu => Ok((Layer::Relu, in_channels, in_len)),
            LayerSpec::MaxPool { size, stride } => {
                if in_len < size {
                    return bad(format!("maxpool size {size} exceeds input length {in_len}"));
                }
                let out_len = (in_len - size) / stride + 1;
                Ok((Layer::MaxPool { size, stride }, in_channels, out_len))
            }
            LayerSpec::Flatten => Ok((Layer::Flatten, 1, in_channels * in_len)),
            LayerSpec::Dense { out_units } => {
                if in_channels != 1 {
                    return bad(format!(
                        "dense layer needs a flat input, got {in_channels} channels"
                    ));
                }
                let mut rng = seed::rng(init_seed);
                let weights = uniform_fan_in(&mut rng, in_len, out_units * in_len);
                let layer = Layer::Dense {
                    in_features: in_len,
                    out_features: out_units,
                    weights,
                    bias: vec![0.0; out_units],
                };
                Ok((layer, 1, out_units))
            }
        }
    }

    pub fn forward(&self, x: &Tensor3) -> (Tensor3, LayerCache) {
        match self {
            Layer::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                weights,
                bias,
            } => {
                assert_eq!(x.channels, *in_channels, "conv input channel mismatch");
                let (k, s, p) = (*kernel, *stride, *padding);
                let padded_len = x.len + 2 * p;
                let out_len = (padded_len - k) / s + 1;
                let mut out = Tensor3::zeros(x.batch, *out_channels, out_len);
                let mut padded = vec![0.0; in_channels * padded_len];
                for b in 0..x.batch {
                    for ic in 0..*in_channels {
                        let row = &mut padded[ic * padded_len..(ic + 1) * padded_len];
                        row[..p].fill(0.0);
                        row[p..p + x.len].copy_from_slice(x.row(b, ic));
                        row[p + x.len..].fill(0.0);
                    }
                    for oc in 0..*out_channels {
                        let orow = out.row_mut(b, oc);
                        orow.fill(bias[oc]);
                        for ic in 0..*in_channels {
                            let xrow = &padded[ic * padded_len..(ic + 1) * padded_len];
                            let wrow = &weights[(oc * in_channels + ic) * k..][..k];
                            for (kk, &wv) in wrow.iter().enumerate() {
                                for (oi, o) in orow.iter_mut().enumerate() {
                                    *o += wv * xrow[oi * s + kk];
                                }
                            }
                        }
                    }
                }
                (out, LayerCache::Conv { input: x.clone() })
            }
            Layer::Relu => {
                let mut out = x.clone();
                for v in &mut out.data {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                (out, LayerCache::Relu { input: x.clone() })
            }
            Layer::MaxPool { size, stride } => {
                let (sz, s) = (*size, *stride);
                assert!(x.len >= sz, "pool window exceeds input");
                let out_len = (x.len - sz) / s + 1;
                let mut out = Tensor3::zeros(x.batch, x.channels, out_len);
                let mut argmax = vec![0usize; x.batch * x.channels * out_len];
                for b in 0..x.batch {
                    for c in 0..x.channels {
                        let xrow = x.row(b, c);
                        let base = (b * x.channels + c) * out_len;
                        let orow = out.row_mut(b, c);
                        for oi in 0..out_len {
                            let start = oi * s;
                            let mut best = start;
                            let mut best_val = xrow[start];
                            for j in start + 1..start + sz {
                                if xrow[j] > best_val {
                                    best_val = xrow[j];
                                    best = j;
                                }
                            }
                            orow[oi] = best_val;
                            argmax[base + oi] = best;
                        }
                    }
                }
                (
                    out,
                    LayerCache::MaxPool {
                        argmax,
                        in_shape: x.shape(),
                    },
                )
            }
            Layer::Flatten => {
                let out = Tensor3::from_vec(x.data.clone(), x.batch, 1, x.channels * x.len);
                (out, LayerCache::Flatten { in_shape: x.shape() })
            }
            Layer::Dense {
                in_features,
                out_features,
                weights,
                bias,
            } => {
                assert_eq!(x.channels, 1, "dense input must be flat");
                assert_eq!(x.len, *in_features, "dense input feature mismatch");
                let mut out = Tensor3::zeros(x.batch, 1, *out_features);
                for b in 0..x.batch {
                    let xrow = x.row(b, 0);
                    let orow = out.row_mut(b, 0);
                    for (u, o) in orow.iter_mut().enumerate() {
                        let wrow = &weights[u * in_features..(u + 1) * in_features];
                        let mut acc = bias[u];
                        for (wv, xv) in wrow.iter().zip(xrow) {
                            acc += wv * xv;
                        }
                        *o = acc;
                    }
                }
                (out, LayerCache::Dense { input: x.clone() })
            }
        }
    }

    /// Propagates `grad_out` back through the layer, returning the gradient
    /// w.r.t. the layer input and the parameter gradients.
    pub fn backward(&self, cache: &LayerCache, grad_out: &Tensor3) -> (Tensor3, LayerGrads) {
        match (self, cache) {
            (
                Layer::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    weights,
                    ..
                },
                LayerCache::Conv { input },
            ) => {
                let (k, s, p) = (*kernel, *stride, *padding);
                let padded_len = input.len + 2 * p;
                let out_len = grad_out.len;
                let mut gw = vec![0.0; weights.len()];
                let mut gb = vec![0.0; *out_channels];
                let mut gx = Tensor3::zeros(input.batch, *in_channels, input.len);
                let mut padded = vec![0.0; in_channels * padded_len];
                let mut gpadded = vec![0.0; in_channels * padded_len];
                for b in 0..input.batch {
                    for ic in 0..*in_channels {
                        let row = &mut padded[ic * padded_len..(ic + 1) * padded_len];
                        row[..p].fill(0.0);
                        row[p..p + input.len].copy_from_slice(input.row(b, ic));
                        row[p + input.len..].fill(0.0);
                    }
                    gpadded.fill(0.0);
                    for oc in 0..*out_channels {
                        let grow = grad_out.row(b, oc);
                        gb[oc] += grow.iter().sum::<f64>();
                        for ic in 0..*in_channels {
                            let xrow = &padded[ic * padded_len..(ic + 1) * padded_len];
                            let gxrow = &mut gpadded[ic * padded_len..(ic + 1) * padded_len];
                            let wbase = (oc * in_channels + ic) * k;
                            for kk in 0..k {
                                let wv = weights[wbase + kk];
                                let mut acc = 0.0;
                                for (oi, &g) in grow.iter().enumerate().take(out_len) {
                                    acc += g * xrow[oi * s + kk];
                                    gxrow[oi * s + kk] += g * wv;
                                }
                                gw[wbase + kk] += acc;
                            }
                        }
                    }
                    for ic in 0..*in_channels {
                        let gxrow = gx.row_mut(b, ic);
                        gxrow.copy_from_slice(
                            &gpadded[ic * padded_len + p..ic * padded_len + p + input.len],
                        );
                    }
                }
                (gx, LayerGrads { weights: gw, bias: gb })
            }
            (Layer::Relu, LayerCache::Relu { input }) => {
                let mut gx = grad_out.clone();
                for (g, &xv) in gx.data.iter_mut().zip(&input.data) {
                    if xv <= 0.0 {
                        *g = 0.0;
                    }
                }
                (gx, LayerGrads::default())
            }
            (Layer::MaxPool { .. }, LayerCache::MaxPool { argmax, in_shape }) => {
                let mut gx = Tensor3::zeros(in_shape.0, in_shape.1, in_shape.2);
                for b in 0..grad_out.batch {
                    for c in 0..grad_out.channels {
                        let base = (b * grad_out.channels + c) * grad_out.len;
                        let grow = grad_out.row(b, c);
                        let gxrow = gx.row_mut(b, c);
                        for (oi, &g) in grow.iter().enumerate() {
                            gxrow[argmax[base + oi]] += g;
                        }
                    }
                }
                (gx, LayerGrads::default())
            }
            (Layer::Flatten, LayerCache::Flatten { in_shape }) => {
                let gx = Tensor3::from_vec(grad_out.data.clone(), in_shape.0, in_shape.1, in_shape.2);
                (gx, LayerGrads::default())
            }
            (
                Layer::Dense {
                    in_features,
                    out_features,
                    weights,
                    ..
                },
                LayerCache::Dense { input },
            ) => {
                let mut gw = vec![0.0; weights.len()];
                let mut gb = vec![0.0; *out_features];
                let mut gx = Tensor3::zeros(input.batch, 1, *in_features);
                for b in 0..input.batch {
                    let xrow = input.row(b, 0);
                    let grow = grad_out.row(b, 0);
                    let gxrow = gx.row_mut(b, 0);
                    for (u, &g) in grow.iter().enumerate() {
                        gb[u] += g;
                        let wrow = &weights[u * in_features..(u + 1) * in_features];
                        let gwrow = &mut gw[u * in_features..(u + 1) * in_features];
                        for f in 0..*in_features {
                            gwrow[f] += g * xrow[f];
                            gxrow[f] += g * wrow[f];
                        }
                    }
                }
                (gx, LayerGrads { weights: gw, bias: gb })
            }
            _ => unreachable!("cache kind does not match layer kind"),
        }
    }

    /// Parameter arrays in walk order (weights before bias); empty for
    /// parameterless layers.
    pub fn params(&self) -> Vec<&Vec<f64>> {
        match self {
            Layer::Conv1d { weights, bias, .. } | Layer::Dense { weights, bias, .. } => {
                vec![weights, bias]
            }
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Conv1d { weights, bias, .. } | Layer::Dense { weights, bias, .. } => {
                vec![weights, bias]
            }
            _ => Vec::new(),
        }
    }

    /// `(kind, out-shape related dims)` signature for structural comparison.
    pub fn signature(&self) -> String {
        match self {
            Layer::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => format!("conv1d({in_channels}->{out_channels},k{kernel},s{stride},p{padding})"),
            Layer::Relu => "relu".into(),
            Layer::MaxPool { size, stride } => format!("maxpool({size},{stride})"),
            Layer::Flatten => "flatten".into(),
            Layer::Dense {
                in_features,
                out_features,
                ..
            } => format!("dense({in_features}->{out_features})"),
        }
    }
}
