//! Exact input derivatives of the network and parameter gradients of losses.
//!
//! Input derivatives (up to pure second order per axis) come from forward
//! propagation of truncated Taylor jets. Parameter gradients come from
//! reverse accumulation: layer-wise adjoints for network losses
//! ([`batch::ForwardPass::backward`]) and a scalar tape ([`tape::Tape`]) for
//! losses written as arbitrary closures.

pub mod batch;
pub mod jet;
pub mod tape;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use batch::{slot_count, ForwardPass, JetOrder, Slot};
pub use jet::{Jet, Real};
pub use tape::{Tape, Var};

use crate::error::{contract, Error, Result};
use crate::loss::LossBreakdown;
use crate::network::Mlp;

/// Flat trainable parameters: network weights and biases in layer order
/// (row-major weights, then bias, per layer), followed by any trainable
/// physical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Appends physical parameters after the network block.
    pub fn with_physical(mut self, physical: &[f64]) -> Self {
        self.0.extend_from_slice(physical);
        self
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Value, gradient and pure second derivatives of a scalar field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct JetValue {
    pub value: f64,
    pub d_dx: Vec<f64>,
    pub d2_dx2: Vec<f64>,
}

impl<const D: usize> From<Jet<D>> for JetValue {
    fn from(j: Jet<D>) -> Self {
        Self {
            value: j.v,
            d_dx: j.d1.to_vec(),
            d2_dx2: j.d2.to_vec(),
        }
    }
}

/// Network output with exact first and pure second input derivatives.
///
/// For ReLU networks the second derivatives are reported as zero (their
/// almost-everywhere value); residual forms that need them reject ReLU.
pub fn evaluate_jet(net: &Mlp, point: &[f64]) -> Result<JetValue> {
    let dim = net.input_dim();
    if point.len() != dim {
        return Err(contract(format!(
            "point has dimension {}, network expects {dim}",
            point.len()
        )));
    }
    let pts = Array2::from_shape_vec((1, dim), point.to_vec()).expect("1 x dim");
    let order = if net.supports_second_derivative() {
        JetOrder::Second
    } else {
        JetOrder::First
    };
    let pass = ForwardPass::new(net, pts.view(), order)?;
    let out = pass.output();
    let d2_dx2 = if order == JetOrder::Second {
        (0..dim).map(|i| out[[Slot::D2(i).index(dim), 0]]).collect()
    } else {
        vec![0.0; dim]
    };
    Ok(JetValue {
        value: out[[0, 0]],
        d_dx: (0..dim).map(|i| out[[Slot::D1(i).index(dim), 0]]).collect(),
        d2_dx2,
    })
}

/// A scalar training objective over a [`ParamVector`].
pub trait Objective: Sync {
    fn param_count(&self) -> usize;

    fn evaluate(&self, params: &ParamVector) -> Result<LossBreakdown>;

    fn evaluate_with_gradient(&self, params: &ParamVector) -> Result<(LossBreakdown, ParamVector)>;
}

/// Gradient of `loss` at `params`; fails if the loss is not finite.
pub fn loss_gradient(loss: &dyn Objective, params: &ParamVector) -> Result<ParamVector> {
    if params.len() != loss.param_count() {
        return Err(contract(format!(
            "parameter vector has {} entries, objective expects {}",
            params.len(),
            loss.param_count()
        )));
    }
    let (breakdown, grad) = loss.evaluate_with_gradient(params)?;
    breakdown.check_finite()?;
    if let Some(i) = grad.as_slice().iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient component {i} is {}",
            grad[i]
        )));
    }
    Ok(grad)
}

/// Objective defined by a closure recorded on a [`Tape`].
pub struct TapeObjective<F> {
    len: usize,
    f: F,
}

impl<F> TapeObjective<F>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t> + Sync,
{
    pub fn new(len: usize, f: F) -> Self {
        Self { len, f }
    }
}

impl<F> Objective for TapeObjective<F>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t> + Sync,
{
    fn param_count(&self) -> usize {
        self.len
    }

    fn evaluate(&self, params: &ParamVector) -> Result<LossBreakdown> {
        let tape = Tape::new();
        let vars: Vec<_> = params.as_slice().iter().map(|&v| tape.var(v)).collect();
        Ok(LossBreakdown::variational_only(
            (self.f)(&tape, &vars).value(),
        ))
    }

    fn evaluate_with_gradient(&self, params: &ParamVector) -> Result<(LossBreakdown, ParamVector)> {
        let (v, g) = Tape::gradient(&self.f, params.as_slice());
        Ok((LossBreakdown::variational_only(v), ParamVector::new(g)))
    }
}
