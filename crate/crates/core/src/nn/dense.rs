//! Fully connected networks with hand-written reverse mode.
//!
//! Batches are matrices with one sample per row. Weights are stored
//! `out × in`, so a layer computes `Z = X Wᵀ + 1 bᵀ`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spectral::{is_zero, SpectralNormState};
use crate::{Error, Result};

/// Negative-side slope of [`Activation::LeakyRelu`].
pub const LEAKY_RELU_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_RELU_SLOPE * z
                }
            }
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative at pre-activation `z`, given the activated value `y`.
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    /// Largest absolute slope; the Lipschitz constant of the activation.
    pub fn max_slope(self) -> f64 {
        match self {
            Activation::Sigmoid => 0.25,
            _ => 1.0,
        }
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Gradients for every parameter tensor, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub layers: Vec<LayerGradient>,
}

impl ParamGradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weight: DMatrix::zeros(l.weight.nrows(), l.weight.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &ParamGradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    /// Flat views in the same order as [`DenseNet::parameters_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }
}

/// Effective weight actually used by a forward pass.
#[derive(Debug, Clone, PartialEq)]
struct EffectiveWeight {
    weight: DMatrix<f64>,
    sigma: f64,
    /// Singular vector estimates `(u, v)` behind `sigma`, when normalised.
    direction: Option<(DVector<f64>, DVector<f64>)>,
}

/// Intermediates retained for [`DenseNet::backward`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardCache {
    inputs: Vec<DMatrix<f64>>,
    pre_activations: Vec<DMatrix<f64>>,
    outputs: Vec<DMatrix<f64>>,
    effective: Vec<EffectiveWeight>,
}

impl ForwardCache {
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Result of a forward pass: final pre-activation, activated output and cache.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub logits: DMatrix<f64>,
    pub output: DMatrix<f64>,
    pub cache: ForwardCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backward {
    pub params: ParamGradients,
    pub input: DMatrix<f64>,
}

/// A multilayer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
    hidden_activation: Activation,
    output_activation: Activation,
    spectral: Option<Vec<SpectralNormState>>,
}

impl DenseNet {
    /// Glorot-uniform weights and zero biases, drawn from a ChaCha stream
    /// seeded with `seed`.
    pub fn new(
        layer_dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(layer_dims, hidden_activation, output_activation, &mut rng)
    }

    pub fn with_rng<R: Rng + ?Sized>(
        layer_dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::Configuration(
                "a network needs at least an input and an output dimension".into(),
            ));
        }
        if layer_dims.contains(&0) {
            return Err(Error::Configuration(format!(
                "layer dimensions must be positive, got {layer_dims:?}"
            )));
        }
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    weight: DMatrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-bound..=bound)),
                    bias: DVector::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            layers,
            hidden_activation,
            output_activation,
            spectral: None,
        })
    }

    /// Builds a network from explicit layers.
    pub fn from_layers(
        layers: Vec<Layer>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Configuration("a network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.nrows() {
                return Err(Error::Shape(format!(
                    "layer {i}: bias has {} entries, weight has {} rows",
                    l.bias.len(),
                    l.weight.nrows()
                )));
            }
            if i > 0 && layers[i - 1].weight.nrows() != l.weight.ncols() {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs, previous layer emits {}",
                    l.weight.ncols(),
                    layers[i - 1].weight.nrows()
                )));
            }
        }
        Ok(Self {
            layers,
            hidden_activation,
            output_activation,
            spectral: None,
        })
    }

    /// Turns on spectral normalisation for every layer.
    pub fn enable_spectral_norm<R: Rng + ?Sized>(&mut self, power_iterations: usize, rng: &mut R) {
        self.spectral = Some(
            self.layers
                .iter()
                .map(|l| {
                    SpectralNormState::new(l.weight.nrows(), l.weight.ncols(), power_iterations, rng)
                })
                .collect(),
        );
        self.refresh_spectral_norm()
            .expect("non-zero finite weights have a singular direction");
    }

    pub fn spectral_states(&self) -> Option<&[SpectralNormState]> {
        self.spectral.as_deref()
    }

    pub fn spectral_states_mut(&mut self) -> Option<&mut [SpectralNormState]> {
        self.spectral.as_deref_mut()
    }

    /// Advances every layer's power iteration. All-zero weights are skipped:
    /// they have no singular direction and are used unnormalised.
    pub fn refresh_spectral_norm(&mut self) -> Result<()> {
        if let Some(states) = self.spectral.as_mut() {
            for (state, layer) in states.iter_mut().zip(&self.layers) {
                if !is_zero(&layer.weight) {
                    state.power_iterate(&layer.weight)?;
                }
            }
        }
        Ok(())
    }

    /// Zeroes the final layer, so every input maps to the output activation of 0.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("networks have at least one layer");
        last.weight.fill(0.0);
        last.bias.fill(0.0);
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.weight.nrows()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.weight.nrows()).unwrap_or(0)
    }

    /// Element counts of the parameter tensors, weight then bias per layer.
    pub fn parameter_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.len(), l.bias.len()])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn effective_weight(&self, index: usize) -> Result<EffectiveWeight> {
        let weight = &self.layers[index].weight;
        match &self.spectral {
            Some(states) if !is_zero(weight) => {
                let mut state = states[index].clone();
                let mut sigma = state.sigma(weight);
                if !(sigma.is_finite() && sigma > 0.0) {
                    // Stale vectors, e.g. a layer that was all zero at the
                    // last refresh: estimate from a private copy instead.
                    state.iterate_n(weight, state.power_iterations())?;
                    sigma = state.sigma(weight);
                }
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::Degenerate(format!(
                        "layer {index}: spectral estimate {sigma} is not positive"
                    )));
                }
                Ok(EffectiveWeight {
                    weight: weight / sigma,
                    sigma,
                    direction: Some((state.u().clone(), state.v().clone())),
                })
            }
            _ => Ok(EffectiveWeight {
                weight: weight.clone(),
                sigma: 1.0,
                direction: None,
            }),
        }
    }

    /// Weights as the forward pass sees them (normalised when enabled).
    pub fn effective_weights(&self) -> Result<Vec<DMatrix<f64>>> {
        (0..self.layers.len())
            .map(|i| self.effective_weight(i).map(|e| e.weight))
            .collect()
    }

    pub fn forward(&self, batch: &DMatrix<f64>) -> Result<ForwardPass> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::InputShape {
                expected: self.input_dim(),
                got: batch.ncols(),
            });
        }
        let depth = self.layers.len();
        let mut cache = ForwardCache::default();
        let mut current = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let eff = self.effective_weight(i)?;
            let mut z = &current * eff.weight.transpose();
            for mut row in z.row_iter_mut() {
                row += layer.bias.transpose();
            }
            let activation = if i + 1 == depth {
                self.output_activation
            } else {
                self.hidden_activation
            };
            let y = z.map(|v| activation.apply(v));
            cache.inputs.push(current);
            cache.pre_activations.push(z);
            cache.outputs.push(y.clone());
            cache.effective.push(eff);
            current = y;
        }
        Ok(ForwardPass {
            logits: cache.pre_activations[depth - 1].clone(),
            output: current,
            cache,
        })
    }

    /// Reverse-mode gradients given `∂L/∂output` for the pass in `cache`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &DMatrix<f64>) -> Result<Backward> {
        let depth = self.layers.len();
        if cache.inputs.len() != depth {
            return Err(Error::MissingForwardCache);
        }
        if cache
            .inputs
            .iter()
            .zip(&self.layers)
            .any(|(input, layer)| input.ncols() != layer.weight.ncols())
        {
            return Err(Error::MissingForwardCache);
        }
        let last = &cache.outputs[depth - 1];
        if upstream.shape() != last.shape() {
            return Err(Error::Shape(format!(
                "upstream gradient is {:?}, output is {:?}",
                upstream.shape(),
                last.shape()
            )));
        }

        let mut grads = Vec::with_capacity(depth);
        let mut grad_y = upstream.clone();
        for i in (0..depth).rev() {
            let activation = if i + 1 == depth {
                self.output_activation
            } else {
                self.hidden_activation
            };
            let z = &cache.pre_activations[i];
            let y = &cache.outputs[i];
            let grad_z = DMatrix::from_fn(z.nrows(), z.ncols(), |r, c| {
                grad_y[(r, c)] * activation.derivative(z[(r, c)], y[(r, c)])
            });
            let eff = &cache.effective[i];
            let grad_eff = grad_z.tr_mul(&cache.inputs[i]);
            let grad_bias = DVector::from_iterator(
                grad_z.ncols(),
                grad_z.column_iter().map(|c| c.sum()),
            );
            let grad_weight = match &eff.direction {
                Some((u, v)) => {
                    let w = &self.layers[i].weight;
                    let inner = grad_eff.dot(w);
                    let sigma = eff.sigma;
                    &grad_eff / sigma - (u * v.transpose()) * (inner / (sigma * sigma))
                }
                None => grad_eff,
            };
            grad_y = &grad_z * &eff.weight;
            grads.push(LayerGradient {
                weight: grad_weight,
                bias: grad_bias,
            });
        }
        grads.reverse();
        Ok(Backward {
            params: ParamGradients { layers: grads },
            input: grad_y,
        })
    }
}
