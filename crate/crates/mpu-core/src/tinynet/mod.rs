//! Minimal dense feedforward networks with a pluggable activation catalog,
//! reverse-mode gradients, and momentum-SGD training.
//!
//! A network is a chain of affine layers, each followed by one activation.
//! Activations may change the width (CReLU doubles it, MaxOut divides it)
//! and may carry trainable scalars (the PReLU slope, the cone width of the
//! multivariate projection unit).

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use train::{mse_loss, train, Dataset, EpochRecord, SplitData, TrainConfig};

use crate::coneproj::{self, ConeError, ConeSpec};
use crate::numerics::{Mat64, Rng, Vec64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("layer {layer}: expected input width {expected}, got {got}")]
    WidthMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("stale forward cache: the network changed after the cache was built")]
    StaleCache,
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid activation: {0}")]
    BadActivation(String),
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Cone(#[from] ConeError),
}

/// Activation applied after a layer's affine map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationSpec {
    Identity,
    Relu,
    LeakyRelu {
        slope: f64,
    },
    /// Slope on the negative side is trainable (one scalar per layer).
    PRelu {
        slope: f64,
    },
    /// Keeps the largest `keep_fraction` of entries by value, zeroes the
    /// rest. Ties at the threshold keep the lowest index first.
    Wta {
        keep_fraction: f64,
    },
    /// Concatenates `relu(z)` and `relu(-z)`: width `n` becomes `2n`.
    CRelu,
    /// Maximum over contiguous groups of `arity` entries: width `n` becomes
    /// `n / arity`.
    MaxOut {
        arity: usize,
    },
    /// Grouped projection onto a second-order cone; the cone width is
    /// trainable through its unconstrained parameter.
    Mpu {
        spec: ConeSpec,
        leaky: f64,
    },
    /// Element-wise clamp onto a fixed box; `[-1, 1]` is the hard sigmoid.
    Clamp {
        lo: Vec64,
        hi: Vec64,
    },
}

impl ActivationSpec {
    /// The standard trainable MPU: `tan_alpha = 1` at initialization.
    pub fn mpu(m: usize, leaky: f64) -> Result<Self, NetError> {
        Ok(ActivationSpec::Mpu {
            spec: ConeSpec::relu_equivalent(m)?,
            leaky,
        })
    }

    pub fn validate(&self, input_width: usize) -> Result<(), NetError> {
        match self {
            ActivationSpec::LeakyRelu { slope } | ActivationSpec::PRelu { slope } => {
                if !slope.is_finite() {
                    return Err(NetError::BadActivation(format!("slope {slope} not finite")));
                }
            }
            ActivationSpec::Wta { keep_fraction } => {
                if !(*keep_fraction > 0.0 && *keep_fraction <= 1.0) {
                    return Err(NetError::BadActivation(format!(
                        "keep_fraction {keep_fraction} outside (0, 1]"
                    )));
                }
            }
            ActivationSpec::MaxOut { arity } => {
                if *arity < 2 {
                    return Err(NetError::BadActivation(format!("arity {arity} below 2")));
                }
                if !input_width.is_multiple_of(*arity) {
                    return Err(NetError::BadActivation(format!(
                        "width {input_width} not divisible by arity {arity}"
                    )));
                }
            }
            ActivationSpec::Mpu { spec, leaky } => {
                spec.validate()?;
                if !(0.0..1.0).contains(leaky) {
                    return Err(NetError::BadActivation(format!(
                        "leaky {leaky} outside [0, 1)"
                    )));
                }
            }
            ActivationSpec::Clamp { lo, hi } => {
                if lo.len() != input_width || hi.len() != input_width {
                    return Err(NetError::BadActivation(format!(
                        "clamp bounds have length {}/{}, layer width {input_width}",
                        lo.len(),
                        hi.len()
                    )));
                }
                for i in 0..lo.len() {
                    if lo[i] > hi[i] {
                        return Err(NetError::BadActivation(format!(
                            "clamp lo {} > hi {} at index {i}",
                            lo[i], hi[i]
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn output_width(&self, input_width: usize) -> usize {
        match self {
            ActivationSpec::CRelu => 2 * input_width,
            ActivationSpec::MaxOut { arity } => input_width / arity,
            _ => input_width,
        }
    }

    fn wta_keep(keep_fraction: f64, n: usize) -> usize {
        ((keep_fraction * n as f64).ceil() as usize).clamp(1, n)
    }

    /// Indices kept by WTA, i.e. the `k` largest values with ties broken
    /// toward lower indices.
    fn wta_mask(z: &Vec64, keep_fraction: f64) -> Vec<bool> {
        let n = z.len();
        let k = Self::wta_keep(keep_fraction, n);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| z[b].partial_cmp(&z[a]).unwrap().then(a.cmp(&b)));
        let mut mask = vec![false; n];
        for &i in order.iter().take(k) {
            mask[i] = true;
        }
        mask
    }

    pub fn forward(&self, z: &Vec64) -> Vec64 {
        match self {
            ActivationSpec::Identity => z.clone(),
            ActivationSpec::Relu => coneproj::project_orthant(z),
            ActivationSpec::LeakyRelu { slope } | ActivationSpec::PRelu { slope } => Vec64::new(
                z.iter()
                    .map(|&v| if v > 0.0 { v } else { slope * v })
                    .collect(),
            ),
            ActivationSpec::Wta { keep_fraction } => {
                let mask = Self::wta_mask(z, *keep_fraction);
                Vec64::new(
                    z.iter()
                        .zip(&mask)
                        .map(|(&v, &keep)| if keep { v } else { 0.0 })
                        .collect(),
                )
            }
            ActivationSpec::CRelu => {
                let mut out = Vec::with_capacity(2 * z.len());
                out.extend(z.iter().map(|&v| v.max(0.0)));
                out.extend(z.iter().map(|&v| (-v).max(0.0)));
                Vec64::new(out)
            }
            ActivationSpec::MaxOut { arity } => Vec64::new(
                z.as_slice()
                    .chunks(*arity)
                    .map(|g| g.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                    .collect(),
            ),
            ActivationSpec::Mpu { spec, leaky } => coneproj::mpu_forward(z, spec, *leaky),
            ActivationSpec::Clamp { lo, hi } => Vec64::new(
                z.iter()
                    .enumerate()
                    .map(|(i, &v)| v.clamp(lo[i], hi[i]))
                    .collect(),
            ),
        }
    }

    /// Vector-Jacobian product at pre-activation `z`. Returns the gradient
    /// with respect to `z` and, for trainable activations, the gradient with
    /// respect to their scalar parameter.
    pub fn vjp(&self, z: &Vec64, upstream: &Vec64) -> (Vec64, f64) {
        match self {
            ActivationSpec::Identity => (upstream.clone(), 0.0),
            ActivationSpec::Relu => (
                Vec64::new(
                    z.iter()
                        .zip(upstream.iter())
                        .map(|(&v, &u)| if v > 0.0 { u } else { 0.0 })
                        .collect(),
                ),
                0.0,
            ),
            ActivationSpec::LeakyRelu { slope } => (
                Vec64::new(
                    z.iter()
                        .zip(upstream.iter())
                        .map(|(&v, &u)| if v > 0.0 { u } else { slope * u })
                        .collect(),
                ),
                0.0,
            ),
            ActivationSpec::PRelu { slope } => {
                let mut d_slope = 0.0;
                let grad = Vec64::new(
                    z.iter()
                        .zip(upstream.iter())
                        .map(|(&v, &u)| {
                            if v > 0.0 {
                                u
                            } else {
                                d_slope += u * v;
                                slope * u
                            }
                        })
                        .collect(),
                );
                (grad, d_slope)
            }
            ActivationSpec::Wta { keep_fraction } => {
                let mask = Self::wta_mask(z, *keep_fraction);
                (
                    Vec64::new(
                        upstream
                            .iter()
                            .zip(&mask)
                            .map(|(&u, &keep)| if keep { u } else { 0.0 })
                            .collect(),
                    ),
                    0.0,
                )
            }
            ActivationSpec::CRelu => {
                let n = z.len();
                let grad = Vec64::new(
                    (0..n)
                        .map(|i| {
                            let mut g = 0.0;
                            if z[i] > 0.0 {
                                g += upstream[i];
                            }
                            if z[i] < 0.0 {
                                g -= upstream[n + i];
                            }
                            g
                        })
                        .collect(),
                );
                (grad, 0.0)
            }
            ActivationSpec::MaxOut { arity } => {
                let mut grad = vec![0.0; z.len()];
                for (g, chunk) in z.as_slice().chunks(*arity).enumerate() {
                    let mut best = 0;
                    for (j, &v) in chunk.iter().enumerate() {
                        if v > chunk[best] {
                            best = j;
                        }
                    }
                    grad[g * arity + best] = upstream[g];
                }
                (Vec64::new(grad), 0.0)
            }
            ActivationSpec::Mpu { spec, leaky } => {
                coneproj::mpu_backward(z, spec, *leaky, upstream)
            }
            ActivationSpec::Clamp { lo, hi } => (
                Vec64::new(
                    z.iter()
                        .enumerate()
                        .zip(upstream.iter())
                        .map(|((i, &v), &u)| if v > lo[i] && v < hi[i] { u } else { 0.0 })
                        .collect(),
                ),
                0.0,
            ),
        }
    }

    /// Whether the scalar returned by [`ActivationSpec::vjp`] is a real
    /// trainable parameter.
    pub fn has_trainable_param(&self) -> bool {
        matches!(
            self,
            ActivationSpec::PRelu { .. } | ActivationSpec::Mpu { .. }
        )
    }

    /// Distance of `z` from the nearest nondifferentiable point of this
    /// activation. Used by gradient-checking harnesses to stay away from
    /// kinks.
    pub fn kink_margin(&self, z: &Vec64) -> f64 {
        match self {
            ActivationSpec::Identity => f64::INFINITY,
            ActivationSpec::Relu
            | ActivationSpec::LeakyRelu { .. }
            | ActivationSpec::PRelu { .. }
            | ActivationSpec::CRelu => z.iter().fold(f64::INFINITY, |m, &v| m.min(v.abs())),
            ActivationSpec::Wta { keep_fraction } => {
                let n = z.len();
                let k = Self::wta_keep(*keep_fraction, n);
                if k == n {
                    return f64::INFINITY;
                }
                let mut sorted: Vec<f64> = z.iter().copied().collect();
                sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
                (sorted[k - 1] - sorted[k]) / 2.0
            }
            ActivationSpec::MaxOut { arity } => {
                let mut margin = f64::INFINITY;
                for chunk in z.as_slice().chunks(*arity) {
                    let mut best = f64::NEG_INFINITY;
                    let mut second = f64::NEG_INFINITY;
                    for &v in chunk {
                        if v > best {
                            second = best;
                            best = v;
                        } else if v > second {
                            second = v;
                        }
                    }
                    margin = margin.min((best - second) / 2.0);
                }
                margin
            }
            ActivationSpec::Mpu { spec, .. } => {
                let m = spec.m();
                let tau = spec.tan_alpha();
                let mut margin = f64::INFINITY;
                let mut group = vec![0.0; m];
                let mut idx = 0;
                while idx < z.len() {
                    group.fill(0.0);
                    let take = m.min(z.len() - idx);
                    group[..take].copy_from_slice(&z.as_slice()[idx..idx + take]);
                    let inv_sqrt_m = 1.0 / (m as f64).sqrt();
                    let t = group.iter().sum::<f64>() * inv_sqrt_m;
                    let axial = t * inv_sqrt_m;
                    let r = group
                        .iter()
                        .map(|v| (v - axial) * (v - axial))
                        .sum::<f64>()
                        .sqrt();
                    margin = margin.min((r - tau * t).abs()).min((tau * r + t).abs());
                    idx += take;
                }
                margin
            }
            ActivationSpec::Clamp { lo, hi } => {
                let mut margin = f64::INFINITY;
                for (i, &v) in z.iter().enumerate() {
                    margin = margin.min((v - lo[i]).abs()).min((v - hi[i]).abs());
                }
                margin
            }
        }
    }
}

/// One affine map plus its activation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Layer {
    pub w: Mat64,
    pub b: Vec64,
    pub activation: ActivationSpec,
}

impl Layer {
    pub fn new(w: Mat64, b: Vec64, activation: ActivationSpec) -> Result<Self, NetError> {
        if w.rows() != b.len() {
            return Err(NetError::LengthMismatch {
                expected: w.rows(),
                got: b.len(),
            });
        }
        activation.validate(w.rows())?;
        Ok(Layer { w, b, activation })
    }

    /// Seeded uniform init in `+-sqrt(1/fan_in)`, zero bias.
    pub fn random(
        out_width: usize,
        in_width: usize,
        activation: ActivationSpec,
        rng: &mut Rng,
    ) -> Result<Self, NetError> {
        let bound = (1.0 / in_width as f64).sqrt();
        let w = Mat64::new(
            out_width,
            in_width,
            (0..out_width * in_width)
                .map(|_| rng.uniform(-bound, bound))
                .collect(),
        );
        Layer::new(w, Vec64::zeros(out_width), activation)
    }

    pub fn in_width(&self) -> usize {
        self.w.cols()
    }

    pub fn out_width(&self) -> usize {
        self.activation.output_width(self.w.rows())
    }

    pub fn forward(&self, x: &Vec64) -> Vec64 {
        self.activation.forward(&self.preactivation(x))
    }

    pub fn preactivation(&self, x: &Vec64) -> Vec64 {
        self.w.matvec(x).add(&self.b)
    }
}

/// Gradients (or velocity buffers) mirroring a network's trainable fields.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

#[derive(Clone, Debug)]
pub struct LayerGrads {
    pub w: Mat64,
    pub b: Vec64,
    /// PReLU slope or MPU raw width parameter; unused for fixed activations.
    pub activation_param: f64,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    w: Mat64::zeros(l.w.rows(), l.w.cols()),
                    b: Vec64::zeros(l.b.len()),
                    activation_param: 0.0,
                })
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, c: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.add_scaled_inplace(&b.w, c);
            a.b.add_scaled_inplace(&b.b, c);
            a.activation_param += c * b.activation_param;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.w.scale_inplace(c);
            l.b.scale_inplace(c);
            l.activation_param *= c;
        }
    }
}

/// Intermediates captured by [`Network::forward_cached`], consumed by
/// [`Network::backward`].
pub struct ForwardCache {
    version: u64,
    input: Vec64,
    preacts: Vec<Vec64>,
    outputs: Vec<Vec64>,
}

/// A feedforward network: consecutive layer widths must chain, counting the
/// width changes of CReLU and MaxOut.
#[derive(Clone, Debug)]
pub struct Network {
    layers: Vec<Layer>,
    version: u64,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::BadConfig(
                "network needs at least one layer".into(),
            ));
        }
        for i in 1..layers.len() {
            let expected = layers[i - 1].out_width();
            let got = layers[i].in_width();
            if expected != got {
                return Err(NetError::WidthMismatch {
                    layer: i,
                    expected,
                    got,
                });
            }
        }
        Ok(Network { layers, version: 0 })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access for direct parameter edits; invalidates outstanding
    /// caches. Callers must preserve the width contracts.
    pub fn layer_mut(&mut self, index: usize) -> &mut Layer {
        self.version += 1;
        &mut self.layers[index]
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].in_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().out_width()
    }

    pub fn forward(&self, x: &Vec64) -> Vec64 {
        let mut a = x.clone();
        for layer in &self.layers {
            a = layer.forward(&a);
        }
        a
    }

    pub fn forward_cached(&self, x: &Vec64) -> (Vec64, ForwardCache) {
        assert_eq!(x.len(), self.input_width(), "input width mismatch");
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for layer in &self.layers {
            let z = layer.preactivation(&a);
            a = layer.activation.forward(&z);
            preacts.push(z);
            outputs.push(a.clone());
        }
        (
            a,
            ForwardCache {
                version: self.version,
                input: x.clone(),
                preacts,
                outputs,
            },
        )
    }

    /// Reverse-mode gradients of a scalar loss whose gradient with respect to
    /// the network output is `loss_grad`.
    pub fn backward(&self, loss_grad: &Vec64, cache: &ForwardCache) -> Result<Gradients, NetError> {
        if cache.version != self.version {
            return Err(NetError::StaleCache);
        }
        if loss_grad.len() != self.output_width() {
            return Err(NetError::LengthMismatch {
                expected: self.output_width(),
                got: loss_grad.len(),
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut upstream = loss_grad.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let (dz, dparam) = layer.activation.vjp(&cache.preacts[l], &upstream);
            let input = if l == 0 {
                &cache.input
            } else {
                &cache.outputs[l - 1]
            };
            grads.layers[l].w = Mat64::outer(&dz, input);
            grads.layers[l].b = dz.clone();
            grads.layers[l].activation_param = dparam;
            if l > 0 {
                upstream = layer.w.matvec_t(&dz);
            }
        }
        Ok(grads)
    }

    /// Applies `theta += delta` across every trainable field and invalidates
    /// outstanding caches.
    pub fn apply_step(&mut self, delta: &Gradients) {
        for (layer, d) in self.layers.iter_mut().zip(&delta.layers) {
            layer.w.add_scaled_inplace(&d.w, 1.0);
            layer.b.add_scaled_inplace(&d.b, 1.0);
            match &mut layer.activation {
                ActivationSpec::PRelu { slope } => *slope += d.activation_param,
                ActivationSpec::Mpu { spec, .. } => {
                    spec.set_raw_param(spec.raw_param() + d.activation_param);
                }
                _ => {}
            }
        }
        self.version += 1;
    }

    /// Smallest kink margin across all layers for input `x`; gradient checks
    /// should skip points where this is tiny.
    pub fn kink_margin(&self, x: &Vec64) -> f64 {
        let mut margin = f64::INFINITY;
        let mut a = x.clone();
        for layer in &self.layers {
            let z = layer.preactivation(&a);
            margin = margin.min(layer.activation.kink_margin(&z));
            a = layer.activation.forward(&z);
        }
        margin
    }

    pub(crate) fn from_parts_unchecked(layers: Vec<Layer>) -> Self {
        Network { layers, version: 0 }
    }
}
