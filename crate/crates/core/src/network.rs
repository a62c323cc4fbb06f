//! Fully connected trial-function network.
//!
//! `u(x) = g(T_l(...T_1(x)))` with hidden maps `T_i(a) = sigma(W_i a + b_i)`
//! and a linear output map `g`. Parameters flatten layer by layer: the
//! weight matrix of each layer in row-major order followed by its bias.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffengine::ParamVector;
use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sine,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sine => z.sin(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// `[sigma, sigma', sigma'', sigma''']` at `z`.
    #[inline]
    pub fn derivatives(self, z: f64) -> [f64; 4] {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let d1 = 1.0 - t * t;
                let d2 = -2.0 * t * d1;
                [t, d1, d2, -2.0 * (d1 * d1 + t * d2)]
            }
            Activation::Sine => {
                let (s, c) = z.sin_cos();
                [s, c, -s, -c]
            }
            Activation::Relu => {
                if z > 0.0 {
                    [z, 1.0, 0.0, 0.0]
                } else {
                    [0.0, 0.0, 0.0, 0.0]
                }
            }
        }
    }

    /// ReLU networks carry the `no_second_derivative` capability flag.
    pub fn supports_second_derivative(self) -> bool {
        !matches!(self, Activation::Relu)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Sine => "sine",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sine" | "sin" => Ok(Activation::Sine),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
    activation: Activation,
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 3 {
        return Err(contract(format!(
            "network needs input, at least one hidden and an output layer, got sizes {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(contract(format!("zero-width layer in {layer_sizes:?}")));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(contract("network output must be scalar"));
    }
    Ok(())
}

/// Number of trainable network parameters for the given layer sizes.
pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Network with all weights and biases zero.
    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer {
                weights: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            activation,
        })
    }

    /// Builds a network from explicit layers; shapes must chain.
    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        let mut sizes = vec![layers
            .first()
            .ok_or_else(|| contract("no layers"))?
            .weights
            .ncols()];
        for l in &layers {
            if l.weights.ncols() != *sizes.last().unwrap() || l.bias.len() != l.weights.nrows() {
                return Err(contract("layer shapes do not chain"));
            }
            sizes.push(l.weights.nrows());
        }
        check_sizes(&sizes)?;
        Ok(Self {
            layer_sizes: sizes,
            layers,
            activation,
        })
    }

    pub fn from_params(
        layer_sizes: &[usize],
        activation: Activation,
        params: &[f64],
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, activation)?;
        net.set_params(params)?;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn hidden_layers(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.layer_sizes)
    }

    pub fn supports_second_derivative(&self) -> bool {
        self.activation.supports_second_derivative()
    }

    pub fn params(&self) -> ParamVector {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        ParamVector::new(out)
    }

    /// Overwrites the parameters from the front of `params`; trailing entries
    /// (physical parameters) are ignored.
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() < self.param_count() {
            return Err(contract(format!(
                "parameter vector has {} entries, network needs {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&params[offset..offset + n]);
            offset += n;
            let m = l.bias.len();
            l.bias
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&params[offset..offset + m]);
            offset += m;
        }
        Ok(())
    }

    /// Plain scalar evaluation of the network at one point.
    pub fn forward(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.input_dim() {
            return Err(contract(format!(
                "point has dimension {}, network expects {}",
                point.len(),
                self.input_dim()
            )));
        }
        let mut a = point.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = l.bias.to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                for (c, ac) in a.iter().enumerate() {
                    *zr += l.weights[[r, c]] * ac;
                }
            }
            if i < last {
                for zr in &mut z {
                    *zr = self.activation.apply(*zr);
                }
            }
            a = z;
        }
        Ok(a[0])
    }

    pub fn snapshot(&self) -> NetworkSnapshot {
        NetworkSnapshot {
            layer_sizes: self.layer_sizes.clone(),
            activation: self.activation,
            params: self.params().into_vec(),
            physical: Vec::new(),
        }
    }
}

/// Seeded Glorot-uniform initialization with zero biases.
pub fn init_mlp(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Mlp> {
    let mut net = Mlp::zeros(layer_sizes, activation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for l in &mut net.layers {
        let (fan_out, fan_in) = l.weights.dim();
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        l.weights.mapv_inplace(|_| dist.sample(&mut rng));
    }
    Ok(net)
}

/// Text snapshot of a network (and any physical parameters) for checkpointing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
    #[serde(default)]
    pub physical: Vec<f64>,
}

impl NetworkSnapshot {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn network(&self) -> Result<Mlp> {
        if self.params.len() != param_count(&self.layer_sizes) {
            return Err(contract(
                "snapshot parameter count does not match layer sizes",
            ));
        }
        Mlp::from_params(&self.layer_sizes, self.activation, &self.params)
    }
}
