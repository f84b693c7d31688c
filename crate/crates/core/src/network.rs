//! The feature-to-parameter map: a ReLU network (or a plain linear map when
//! there are no hidden layers) with a positive output link.
//!
//! The output columns are the nonstationary kernel parameters evaluated at
//! each input row. Hidden layers form the learned basis; the output layer
//! takes linear combinations of that basis before the link is applied.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, DenseMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputLink {
    #[default]
    Softplus,
    Exp,
}

impl OutputLink {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            OutputLink::Softplus => softplus(z),
            OutputLink::Exp => z.exp(),
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            OutputLink::Softplus => sigmoid(z),
            OutputLink::Exp => z.exp(),
        }
    }

    /// Pre-activation that maps to `value`.
    pub fn inverse(self, value: f64) -> f64 {
        match self {
            OutputLink::Softplus => value.exp_m1().ln(),
            OutputLink::Exp => value.ln(),
        }
    }
}

/// Bias whose link output is exactly 1, correcting the last-ulp error of the inverse.
fn unit_bias(link: OutputLink) -> f64 {
    let mut b = link.inverse(1.0);
    for _ in 0..16 {
        let v = link.apply(b);
        if v == 1.0 {
            break;
        }
        let step = f64::EPSILON * b.abs().max(f64::MIN_POSITIVE);
        b += if v < 1.0 { step } else { -step };
    }
    b
}

/// `ln(1 + eᶻ)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    /// Hidden widths; empty means the linear variant.
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
    #[serde(default)]
    pub output_link: OutputLink,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, hidden_layers: Vec<usize>, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers,
            output_dim,
            output_link: OutputLink::Softplus,
        }
    }

    pub fn with_link(mut self, link: OutputLink) -> Self {
        self.output_link = link;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.output_dim) {
            return Err(Error::InvalidConfig(format!(
                "network output_dim must be 1 or 2, got {}",
                self.output_dim
            )));
        }
        if self.input_dim == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::InvalidConfig(
                "network widths must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend(&self.hidden_layers);
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn is_linear(&self) -> bool {
        self.hidden_layers.is_empty()
    }
}

/// One affine layer: `out = input · weights + bias`, weights stored `fan_in × fan_out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkWeights {
    pub layers: Vec<Layer>,
}

impl NetworkWeights {
    pub fn zeros_like(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Layer {
                weights: DenseMatrix::zeros(i, o),
                bias: vec![0.0; o],
            })
            .collect();
        Self { layers }
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Layer by layer, weights then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Inverse of [`NetworkWeights::to_flat`]; returns the number of values consumed.
    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<usize> {
        let need = self.num_params();
        if flat.len() < need {
            return Err(Error::dims(need, flat.len()));
        }
        let mut k = 0;
        for l in &mut self.layers {
            let w = l.weights.as_mut_slice();
            w.copy_from_slice(&flat[k..k + w.len()]);
            k += w.len();
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
        Ok(k)
    }

    fn check_shapes(&self, spec: &NetworkSpec) -> Result<()> {
        let shapes = spec.layer_shapes();
        if shapes.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "spec has {} layers, weights have {}",
                shapes.len(),
                self.layers.len()
            )));
        }
        for (k, ((i, o), l)) in shapes.iter().zip(&self.layers).enumerate() {
            if l.weights.rows() != *i || l.weights.cols() != *o || l.bias.len() != *o {
                return Err(Error::ShapeMismatch(format!(
                    "layer {k}: expected {i}x{o}, got {}x{} with {} biases",
                    l.weights.rows(),
                    l.weights.cols(),
                    l.bias.len()
                )));
            }
        }
        Ok(())
    }
}

/// Activations kept by [`net_forward`] for [`net_backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer (the features first, then post-ReLU activations).
    inputs: Vec<DenseMatrix>,
    /// Pre-activation of each layer.
    pre: Vec<DenseMatrix>,
}

impl ForwardCache {
    /// Pre-link values of the output layer.
    pub fn output_preactivation(&self) -> &DenseMatrix {
        self.pre.last().expect("at least one layer")
    }
}

fn affine(input: &DenseMatrix, layer: &Layer) -> DenseMatrix {
    let out_dim = layer.weights.cols();
    let mut z = DenseMatrix::zeros(input.rows(), out_dim);
    for i in 0..input.rows() {
        let zr = z.row_mut(i);
        zr.copy_from_slice(&layer.bias);
        for (k, &a) in input.row(i).iter().enumerate() {
            if a != 0.0 {
                axpy(a, layer.weights.row(k), zr);
            }
        }
    }
    z
}

/// Evaluates the network at every row of `x`, returning `n × output_dim`
/// positive values and the cache needed for backpropagation.
pub fn net_forward(
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    x: &DenseMatrix,
) -> Result<(DenseMatrix, ForwardCache)> {
    if x.cols() != spec.input_dim {
        return Err(Error::dims(format!("{} feature columns", spec.input_dim), x.cols()));
    }
    weights.check_shapes(spec)?;
    let n_layers = weights.layers.len();
    let mut inputs = Vec::with_capacity(n_layers);
    let mut pre = Vec::with_capacity(n_layers);
    let mut current = x.clone();
    for (k, layer) in weights.layers.iter().enumerate() {
        let z = affine(&current, layer);
        inputs.push(current);
        if k + 1 < n_layers {
            let mut a = z.clone();
            a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            current = a;
        } else {
            current = z.clone();
        }
        pre.push(z);
    }
    let mut out = current;
    let cols = out.cols();
    for (idx, v) in out.as_mut_slice().iter_mut().enumerate() {
        *v = spec.output_link.apply(*v);
        if !v.is_finite() || *v <= 0.0 {
            return Err(Error::NonFiniteOutput {
                row: idx / cols,
                col: idx % cols,
            });
        }
    }
    Ok((out, ForwardCache { inputs, pre }))
}

/// Reverse-mode gradient of `Σᵢⱼ upstream[i,j]·output[i,j]` with respect to
/// every weight and bias.
pub fn net_backward(
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    cache: &ForwardCache,
    upstream: &DenseMatrix,
) -> Result<NetworkWeights> {
    let n_layers = weights.layers.len();
    if cache.pre.len() != n_layers || cache.inputs.len() != n_layers {
        return Err(Error::ShapeMismatch("cache does not match network depth".into()));
    }
    let out_pre = cache.output_preactivation();
    if upstream.rows() != out_pre.rows() || upstream.cols() != out_pre.cols() {
        return Err(Error::ShapeMismatch(format!(
            "upstream is {}x{}, outputs are {}x{}",
            upstream.rows(),
            upstream.cols(),
            out_pre.rows(),
            out_pre.cols()
        )));
    }

    // Gradient with respect to the current layer's pre-activation.
    let mut delta = upstream.clone();
    for (d, &z) in delta.as_mut_slice().iter_mut().zip(out_pre.as_slice()) {
        *d *= spec.output_link.derivative(z);
    }

    let mut grads = NetworkWeights::zeros_like(spec);
    for k in (0..n_layers).rev() {
        let input = &cache.inputs[k];
        let g = &mut grads.layers[k];
        for i in 0..input.rows() {
            let drow = delta.row(i);
            axpy(1.0, drow, &mut g.bias);
            for (f, &a) in input.row(i).iter().enumerate() {
                if a != 0.0 {
                    axpy(a, drow, g.weights.row_mut(f));
                }
            }
        }
        if k == 0 {
            break;
        }
        let w = &weights.layers[k].weights;
        let below = &cache.pre[k - 1];
        let mut next = DenseMatrix::zeros(input.rows(), input.cols());
        for i in 0..input.rows() {
            let drow = delta.row(i);
            let nrow = next.row_mut(i);
            for (f, v) in nrow.iter_mut().enumerate() {
                if below[(i, f)] > 0.0 {
                    *v = dot(drow, w.row(f));
                }
            }
        }
        delta = next;
    }
    Ok(grads)
}

/// He-initialized hidden layers, zero output weights, and an output bias that
/// makes every initial parameter value exactly one.
pub fn net_init(spec: &NetworkSpec, seed: u64) -> NetworkWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = NetworkWeights::zeros_like(spec);
    let n_layers = weights.layers.len();
    for (k, layer) in weights.layers.iter_mut().enumerate() {
        if k + 1 == n_layers {
            let b = unit_bias(spec.output_link);
            layer.bias.iter_mut().for_each(|v| *v = b);
        } else {
            let fan_in = layer.weights.rows() as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
            for w in layer.weights.as_mut_slice() {
                *w = normal.sample(&mut rng);
            }
        }
    }
    weights
}

/// A network spec together with its weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamNetwork {
    pub spec: NetworkSpec,
    pub weights: NetworkWeights,
}

impl ParamNetwork {
    pub fn init(spec: NetworkSpec, seed: u64) -> Self {
        let weights = net_init(&spec, seed);
        Self { spec, weights }
    }

    pub fn forward(&self, x: &DenseMatrix) -> Result<(DenseMatrix, ForwardCache)> {
        net_forward(&self.spec, &self.weights, x)
    }

    pub fn backward(&self, cache: &ForwardCache, upstream: &DenseMatrix) -> Result<NetworkWeights> {
        net_backward(&self.spec, &self.weights, cache, upstream)
    }

    /// Parameter values only.
    pub fn evaluate(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.forward(x).map(|(out, _)| out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_ln2() {
        let spec = NetworkSpec::new(2, vec![4], 1);
        let w = NetworkWeights::zeros_like(&spec);
        let x = DenseMatrix::from_rows(&[[0.3, -1.0], [2.0, 5.0]]);
        let (out, _) = net_forward(&spec, &w, &x).unwrap();
        for v in out.as_slice() {
            assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
            assert_eq!(*v, 2f64.ln());
        }
    }

    #[test]
    fn linear_constant_map() {
        let spec = NetworkSpec::new(2, vec![], 1);
        let mut w = NetworkWeights::zeros_like(&spec);
        w.layers[0].bias[0] = OutputLink::Softplus.inverse(1.0);
        let (out, _) = net_forward(&spec, &w, &DenseMatrix::from_rows(&[[1.0, 0.0]])).unwrap();
        assert!((out[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn softplus_inverse_of_one() {
        let b = OutputLink::Softplus.inverse(1.0);
        assert!((b - 0.541325).abs() < 1e-6);
        assert!((b - (std::f64::consts::E - 1.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn init_outputs_exactly_one() {
        for link in [OutputLink::Softplus, OutputLink::Exp] {
            for hidden in [vec![], vec![50], vec![50, 50]] {
                let spec = NetworkSpec::new(3, hidden, 2).with_link(link);
                let w = net_init(&spec, 11);
                let x = DenseMatrix::from_fn(7, 3, |i, j| (i as f64 - 3.0) * (j as f64 + 0.5));
                let (out, _) = net_forward(&spec, &w, &x).unwrap();
                assert!(out.as_slice().iter().all(|&v| v == 1.0), "{link:?}: {out:?}");
            }
        }
    }

    #[test]
    fn init_is_deterministic() {
        let spec = NetworkSpec::new(4, vec![50], 1);
        assert_eq!(net_init(&spec, 3), net_init(&spec, 3));
        assert_ne!(net_init(&spec, 3), net_init(&spec, 4));
    }

    #[test]
    fn linear_init_is_zero_weights() {
        let spec = NetworkSpec::new(3, vec![], 1);
        let w = net_init(&spec, 0);
        assert!(w.layers[0].weights.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let spec = NetworkSpec::new(2, vec![5], 2);
        let w = net_init(&spec, 1);
        let x = DenseMatrix::from_rows(&[[0.1, 0.2], [0.3, -0.4]]);
        let (_, cache) = net_forward(&spec, &w, &x).unwrap();
        let g = net_backward(&spec, &w, &cache, &DenseMatrix::zeros(2, 2)).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_layer_chain_rule() {
        let spec = NetworkSpec::new(2, vec![], 1);
        let mut w = NetworkWeights::zeros_like(&spec);
        w.layers[0].weights.as_mut_slice().copy_from_slice(&[0.4, -0.7]);
        w.layers[0].bias[0] = 0.1;
        let x = [1.5, 2.0];
        let (_, cache) = net_forward(&spec, &w, &DenseMatrix::from_rows(&[x])).unwrap();
        let u = 0.8;
        let g = net_backward(&spec, &w, &cache, &DenseMatrix::from_rows(&[[u]])).unwrap();
        let z: f64 = 0.4 * x[0] - 0.7 * x[1] + 0.1;
        let sp_prime = 1.0 / (1.0 + (-z).exp());
        for k in 0..2 {
            let expected = u * sp_prime * x[k];
            assert!((g.layers[0].weights.as_slice()[k] - expected).abs() < 1e-15);
        }
        assert!((g.layers[0].bias[0] - u * sp_prime).abs() < 1e-15);
    }

    #[test]
    fn zero_output_weights_kill_hidden_gradients() {
        let spec = NetworkSpec::new(3, vec![6], 1);
        let w = net_init(&spec, 5);
        let x = DenseMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 * 0.1 - 0.5);
        let (_, cache) = net_forward(&spec, &w, &x).unwrap();
        let up = DenseMatrix::from_fn(4, 1, |i, _| i as f64 + 1.0);
        let g = net_backward(&spec, &w, &cache, &up).unwrap();
        assert!(g.layers[0].weights.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.layers[0].bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let spec = NetworkSpec::new(2, vec![], 1);
        let w = net_init(&spec, 0);
        assert!(matches!(
            net_forward(&spec, &w, &DenseMatrix::zeros(3, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exp_link_overflow_is_reported() {
        let spec = NetworkSpec::new(1, vec![], 1).with_link(OutputLink::Exp);
        let mut w = NetworkWeights::zeros_like(&spec);
        w.layers[0].weights[(0, 0)] = 1.0;
        let x = DenseMatrix::from_rows(&[[1.0], [1000.0]]);
        assert!(matches!(
            net_forward(&spec, &w, &x),
            Err(Error::NonFiniteOutput { row: 1, col: 0 })
        ));
    }

    #[test]
    fn upstream_shape_is_checked() {
        let spec = NetworkSpec::new(1, vec![2], 1);
        let w = net_init(&spec, 0);
        let (_, cache) = net_forward(&spec, &w, &DenseMatrix::zeros(3, 1)).unwrap();
        assert!(matches!(
            net_backward(&spec, &w, &cache, &DenseMatrix::zeros(2, 1)),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
