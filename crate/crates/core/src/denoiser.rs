//! Fully-connected denoiser with time conditioning and hand-written
//! reverse-mode gradients.
//!
//! Input is `[z, t, sin 2pi t, cos 2pi t, sin 4pi t, cos 4pi t]`; seven affine
//! layers with ReLU after the first six and a linear output of size
//! `data_dim`. Weights are stored `out x in`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use crate::error::{check_dims, Error, Result};
use crate::rng::RngState;
use crate::schedule::TimePoint;
use crate::targetspace::{Prediction, TargetSpace};

pub const TIME_FEATURES: usize = 5;
pub const NUM_LAYERS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub data_dim: usize,
    pub time_feature_dim: usize,
    pub hidden_width: usize,
    pub num_layers: usize,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(data_dim: usize, hidden_width: usize) -> Self {
        Architecture {
            data_dim,
            time_feature_dim: TIME_FEATURES,
            hidden_width,
            num_layers: NUM_LAYERS,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_dim == 0 || self.hidden_width == 0 {
            return Err(Error::InvalidArgument(
                "data_dim and hidden_width must be positive".into(),
            ));
        }
        if self.time_feature_dim != TIME_FEATURES {
            return Err(Error::InvalidArgument(format!(
                "time_feature_dim must be {TIME_FEATURES}, got {}",
                self.time_feature_dim
            )));
        }
        if self.num_layers != NUM_LAYERS {
            return Err(Error::InvalidArgument(format!(
                "num_layers must be {NUM_LAYERS}, got {}",
                self.num_layers
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.data_dim + self.time_feature_dim
    }

    /// `(out, in)` shape of each layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        (0..self.num_layers)
            .map(|l| {
                let fan_in = if l == 0 {
                    self.input_dim()
                } else {
                    self.hidden_width
                };
                let fan_out = if l + 1 == self.num_layers {
                    self.data_dim
                } else {
                    self.hidden_width
                };
                (fan_out, fan_in)
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(o, i)| o * i + o).sum()
    }
}

/// Weights and biases of one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserModel {
    pub arch: Architecture,
    pub layers: Vec<Layer>,
    pub predict_space: TargetSpace,
}

/// Gradients congruent with [`DenoiserModel::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(model: &DenoiserModel) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weight.as_slice().expect("contiguous"),
                l.bias.as_slice().expect("contiguous"),
            ]
        })
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weight *= k;
            l.bias *= k;
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }
}

pub fn time_features(t: TimePoint) -> [f64; TIME_FEATURES] {
    let t = t.get();
    let (s1, c1) = (2.0 * PI * t).sin_cos();
    let (s2, c2) = (4.0 * PI * t).sin_cos();
    [t, s1, c1, s2, c2]
}

/// Activations kept from a batched forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer: `inputs[0]` is `[z | features]`, `inputs[l]` the
    /// post-ReLU output of layer `l - 1`.
    inputs: Vec<Array2<f64>>,
}

impl DenoiserModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: Architecture, predict_space: TargetSpace, seed: u64) -> Result<Self> {
        arch.validate()?;
        let rng = RngState::new(seed);
        let layers = arch
            .layer_shapes()
            .into_iter()
            .enumerate()
            .map(|(l, (fan_out, fan_in))| {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut d = rng.stream("init", l as u64);
                let weight =
                    Array2::from_shape_simple_fn((fan_out, fan_in), || d.uniform_in(-bound, bound));
                Layer {
                    weight,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(DenoiserModel {
            arch,
            layers,
            predict_space,
        })
    }

    pub fn zeros(arch: Architecture, predict_space: TargetSpace) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(o, i)| Layer {
                weight: Array2::zeros((o, i)),
                bias: Array1::zeros(o),
            })
            .collect();
        Ok(DenoiserModel {
            arch,
            layers,
            predict_space,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Parameters in checkpoint order: per layer, weights row-major then biases.
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weight.as_slice().expect("contiguous"),
                l.bias.as_slice().expect("contiguous"),
            ]
        })
    }

    pub fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weight.as_slice_mut().expect("contiguous"),
                l.bias.as_slice_mut().expect("contiguous"),
            ]
        })
    }

    pub fn is_finite(&self) -> bool {
        self.slices().all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn build_input(&self, z: ArrayView2<f64>, t: &[f64]) -> Result<Array2<f64>> {
        let d = self.arch.data_dim;
        check_dims(d, z.ncols())?;
        check_dims(z.nrows(), t.len())?;
        let mut input = Array2::zeros((z.nrows(), self.arch.input_dim()));
        for (i, mut row) in input.axis_iter_mut(Axis(0)).enumerate() {
            for k in 0..d {
                row[k] = z[[i, k]];
            }
            let f = time_features(TimePoint::new(t[i])?);
            for (k, v) in f.iter().enumerate() {
                row[d + k] = *v;
            }
        }
        Ok(input)
    }

    /// Batched forward pass; rows of `z` pair with entries of `t`.
    pub fn forward_batch(&self, z: ArrayView2<f64>, t: &[f64]) -> Result<Array2<f64>> {
        Ok(self.forward_batch_cached(z, t)?.0)
    }

    pub fn forward_batch_cached(
        &self,
        z: ArrayView2<f64>,
        t: &[f64],
    ) -> Result<(Array2<f64>, ForwardCache)> {
        let mut h = self.build_input(z, t)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = h.dot(&layer.weight.t());
            out += &layer.bias;
            if l < last {
                out.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut h, out));
        }
        Ok((h, ForwardCache { inputs }))
    }

    /// Parameter gradients of `sum_i <upstream_i, f(z_i, t_i)>`.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<Gradients> {
        check_dims(self.arch.data_dim, upstream.ncols())?;
        check_dims(cache.inputs[0].nrows(), upstream.nrows())?;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[l];
            let weight = delta.t().dot(input);
            let bias = delta.sum_axis(Axis(0));
            grads.push(Layer { weight, bias });
            if l > 0 {
                let mut back = delta.dot(&layer.weight);
                // ReLU mask: the layer's output is the next layer's input.
                Zip::from(&mut back).and(input).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    pub fn forward(&self, z: &[f64], t: TimePoint) -> Result<Prediction> {
        let zv = ArrayView2::from_shape((1, z.len()), z).expect("row vector");
        check_dims(self.arch.data_dim, z.len())?;
        let out = self.forward_batch(zv, &[t.get()])?;
        Ok(Prediction::new(self.predict_space, out.row(0).to_vec()))
    }

    pub fn backward(&self, z: &[f64], t: TimePoint, upstream: &[f64]) -> Result<Gradients> {
        check_dims(self.arch.data_dim, z.len())?;
        check_dims(self.arch.data_dim, upstream.len())?;
        let zv = ArrayView2::from_shape((1, z.len()), z).expect("row vector");
        let (_, cache) = self.forward_batch_cached(zv, &[t.get()])?;
        let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row vector");
        self.backward_batch(&cache, up)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tp(t: f64) -> TimePoint {
        TimePoint::new(t).unwrap()
    }

    #[test]
    fn time_feature_examples() {
        assert_eq!(time_features(TimePoint::ZERO), [0.0, 0.0, 1.0, 0.0, 1.0]);
        let expect = [[0.5, 0.0, -1.0, 0.0, 1.0], [0.25, 1.0, 0.0, 0.0, -1.0]];
        for (t, e) in [0.5, 0.25].iter().zip(expect) {
            let f = time_features(tp(*t));
            for k in 0..TIME_FEATURES {
                assert!((f[k] - e[k]).abs() < 1e-12, "t={t} k={k}");
            }
        }
    }

    #[test]
    fn parameter_count_width_128() {
        let arch = Architecture::new(2, 128);
        let by_hand = (7 * 128 + 128) + 5 * (128 * 128 + 128) + (128 * 2 + 2);
        assert_eq!(by_hand, 83_842);
        assert_eq!(arch.parameter_count(), by_hand);
        let m = DenoiserModel::init(arch, TargetSpace::Eps, 0).unwrap();
        assert_eq!(m.parameter_count(), by_hand);
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = DenoiserModel::zeros(Architecture::new(2, 16), TargetSpace::X).unwrap();
        let p = m.forward(&[3.0, -4.0], tp(0.3)).unwrap();
        assert_eq!(p.value, vec![0.0, 0.0]);
        assert_eq!(p.space, TargetSpace::X);
    }

    #[test]
    fn hand_set_chain() {
        // Width-1 chain: layer 0 reads z[0] with weight 2 and t with weight 1,
        // inner layers multiply by 3 and add 1, the head writes w * h to each output.
        let mut m = DenoiserModel::zeros(Architecture::new(2, 1), TargetSpace::V).unwrap();
        m.layers[0].weight[[0, 0]] = 2.0;
        m.layers[0].weight[[0, 2]] = 1.0;
        for l in 1..6 {
            m.layers[l].weight[[0, 0]] = 3.0;
            m.layers[l].bias[0] = 1.0;
        }
        m.layers[6].weight[[0, 0]] = 0.5;
        m.layers[6].weight[[1, 0]] = -1.0;
        m.layers[6].bias[1] = 0.25;
        // h0 = relu(2 * 0.3 + 0.5) = 1.1, then h <- 3h + 1 five times.
        let mut h: f64 = 1.1;
        for _ in 0..5 {
            h = 3.0 * h + 1.0;
        }
        let out = m.forward(&[0.3, 7.0], tp(0.5)).unwrap();
        assert_relative_eq!(out.value[0], 0.5 * h, epsilon = 1e-12);
        assert_relative_eq!(out.value[1], -h + 0.25, epsilon = 1e-12);

        // Negative pre-activation in layer 0 cuts the chain.
        let out = m.forward(&[-1.0, 7.0], tp(0.5)).unwrap();
        let mut h: f64 = 0.0;
        for _ in 0..5 {
            h = 3.0 * h + 1.0;
        }
        assert_relative_eq!(out.value[0], 0.5 * h, epsilon = 1e-12);
    }

    #[test]
    fn init_properties() {
        let arch = Architecture::new(2, 128);
        let a = DenoiserModel::init(arch, TargetSpace::X, 3).unwrap();
        assert_eq!(a, DenoiserModel::init(arch, TargetSpace::X, 3).unwrap());
        assert_ne!(a, DenoiserModel::init(arch, TargetSpace::X, 4).unwrap());
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let inner_bound = (6.0f64 / 256.0).sqrt();
        for l in &a.layers[1..6] {
            assert!(l.weight.iter().all(|w| w.abs() <= inner_bound));
        }
        for (l, (o, i)) in a.layers.iter().zip(arch.layer_shapes()) {
            let bound = (6.0 / (o + i) as f64).sqrt();
            assert!(l.weight.iter().all(|w| w.abs() <= bound));
        }
    }

    #[test]
    fn architecture_validation() {
        let mut a = Architecture::new(2, 8);
        a.num_layers = 3;
        assert!(DenoiserModel::init(a, TargetSpace::X, 0).is_err());
        let m = DenoiserModel::init(Architecture::new(2, 8), TargetSpace::X, 0).unwrap();
        assert!(matches!(
            m.forward(&[1.0], tp(0.5)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(m.backward(&[1.0, 1.0], tp(0.5), &[1.0]).is_err());
    }

    #[test]
    fn zero_upstream_zero_gradients() {
        let m = DenoiserModel::init(Architecture::new(2, 8), TargetSpace::X, 1).unwrap();
        let g = m.backward(&[0.3, -0.2], tp(0.4), &[0.0, 0.0]).unwrap();
        assert!(g.slices().all(|s| s.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let m = DenoiserModel::init(Architecture::new(2, 8), TargetSpace::X, 1).unwrap();
        let g1 = m.backward(&[0.3, -0.2], tp(0.4), &[0.7, -1.1]).unwrap();
        let mut g2 = m.backward(&[0.3, -0.2], tp(0.4), &[1.4, -2.2]).unwrap();
        g2.scale(0.5);
        for (a, b) in g1.slices().zip(g2.slices()) {
            for (x, y) in a.iter().zip(b) {
                assert_relative_eq!(x, y, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn batch_gradient_is_sum_of_singles() {
        let m = DenoiserModel::init(Architecture::new(2, 8), TargetSpace::X, 2).unwrap();
        let z = ndarray::array![[0.3, -0.2], [1.0, 0.5], [-0.7, 0.1]];
        let t = [0.2, 0.5, 0.9];
        let up = ndarray::array![[1.0, 0.0], [0.5, -0.5], [0.0, 2.0]];
        let (_, cache) = m.forward_batch_cached(z.view(), &t).unwrap();
        let batch = m.backward_batch(&cache, up.view()).unwrap();
        let mut sum = Gradients::zeros_like(&m);
        for i in 0..3 {
            let g = m
                .backward(
                    z.row(i).as_slice().unwrap(),
                    tp(t[i]),
                    up.row(i).as_slice().unwrap(),
                )
                .unwrap();
            sum.add_assign(&g);
        }
        for (a, b) in batch.slices().zip(sum.slices()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
