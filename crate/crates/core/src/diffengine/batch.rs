//! Batched jet propagation through an [`Mlp`] and its adjoint.
//!
//! For a batch of `B` points the forward pass carries, for every neuron, the
//! value, the first derivative along each input axis and the pure second
//! derivative along each axis. These "slots" are stored side by side as
//! column blocks of width `B`, so every affine layer is one matrix product.
//!
//! [`ForwardPass::backward`] runs reverse accumulation through the same
//! computation: given cotangents for every output slot it returns the
//! gradient with respect to all weights and biases.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis};

use crate::error::{contract, Error, Result};
use crate::network::Mlp;

/// Highest input-derivative order propagated through the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JetOrder {
    Value,
    First,
    Second,
}

/// One derivative slot of the network output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Value,
    /// `d/dx_axis`
    D1(usize),
    /// `d^2/dx_axis^2`
    D2(usize),
}

impl Slot {
    pub fn order(self) -> JetOrder {
        match self {
            Slot::Value => JetOrder::Value,
            Slot::D1(_) => JetOrder::First,
            Slot::D2(_) => JetOrder::Second,
        }
    }

    /// Row of this slot in a slot-major table with `dim` input axes.
    pub fn index(self, dim: usize) -> usize {
        match self {
            Slot::Value => 0,
            Slot::D1(i) => 1 + i,
            Slot::D2(i) => 1 + dim + i,
        }
    }
}

pub fn slot_count(dim: usize, order: JetOrder) -> usize {
    match order {
        JetOrder::Value => 1,
        JetOrder::First => 1 + dim,
        JetOrder::Second => 1 + 2 * dim,
    }
}

struct HiddenCache {
    /// Pre-activations, `width x (S*B)`.
    z: Array2<f64>,
    /// `sigma', sigma'', sigma'''` at the value block, each `width x B`.
    s1: Array2<f64>,
    s2: Array2<f64>,
    s3: Array2<f64>,
}

/// Cached forward pass over a batch of points.
pub struct ForwardPass<'n> {
    net: &'n Mlp,
    order: JetOrder,
    dim: usize,
    batch: usize,
    /// Layer inputs `A_0 .. A_l`, each `width x (S*B)`.
    inputs: Vec<Array2<f64>>,
    hidden: Vec<HiddenCache>,
    /// Output slots, `S x B`.
    output: Array2<f64>,
}

impl<'n> ForwardPass<'n> {
    /// `points` is `B x dim`.
    pub fn new(net: &'n Mlp, points: ArrayView2<'_, f64>, order: JetOrder) -> Result<Self> {
        let dim = net.input_dim();
        if points.ncols() != dim {
            return Err(contract(format!(
                "points have dimension {}, network expects {dim}",
                points.ncols()
            )));
        }
        if order == JetOrder::Second && !net.supports_second_derivative() {
            return Err(Error::Capability(
                "no_second_derivative: relu network cannot supply second input derivatives".into(),
            ));
        }
        let batch = points.nrows();
        let slots = slot_count(dim, order);
        let cols = slots * batch;

        let mut a0 = Array2::zeros((dim, cols));
        a0.slice_mut(s![.., 0..batch]).assign(&points.t());
        if order >= JetOrder::First {
            for i in 0..dim {
                let c0 = (1 + i) * batch;
                a0.slice_mut(s![i, c0..c0 + batch]).fill(1.0);
            }
        }

        let act = net.activation();
        let layers = net.layers();
        let n_hidden = layers.len() - 1;
        let mut inputs = Vec::with_capacity(layers.len());
        let mut hidden = Vec::with_capacity(n_hidden);
        inputs.push(a0);

        for layer in &layers[..n_hidden] {
            let width = layer.weights.nrows();
            let mut z = Array2::zeros((width, cols));
            general_mat_mul(1.0, &layer.weights, inputs.last().unwrap(), 0.0, &mut z);
            let mut a = Array2::zeros((width, cols));
            let mut s1 = Array2::zeros((width, batch));
            let mut s2 = Array2::zeros((width, batch));
            let mut s3 = Array2::zeros((width, batch));
            for r in 0..width {
                let b = layer.bias[r];
                let zr = z.row_mut(r).into_slice().expect("contiguous row");
                let ar = a.row_mut(r).into_slice().expect("contiguous row");
                let (s1r, s2r, s3r) = (
                    s1.row_mut(r).into_slice().unwrap(),
                    s2.row_mut(r).into_slice().unwrap(),
                    s3.row_mut(r).into_slice().unwrap(),
                );
                for p in 0..batch {
                    zr[p] += b;
                    let [f0, f1, f2, f3] = act.derivatives(zr[p]);
                    ar[p] = f0;
                    s1r[p] = f1;
                    s2r[p] = f2;
                    s3r[p] = f3;
                }
                if order >= JetOrder::First {
                    for i in 0..dim {
                        let c1 = (1 + i) * batch;
                        for p in 0..batch {
                            ar[c1 + p] = s1r[p] * zr[c1 + p];
                        }
                        if order == JetOrder::Second {
                            let c2 = (1 + dim + i) * batch;
                            for p in 0..batch {
                                let d = zr[c1 + p];
                                ar[c2 + p] = s2r[p] * d * d + s1r[p] * zr[c2 + p];
                            }
                        }
                    }
                }
            }
            hidden.push(HiddenCache { z, s1, s2, s3 });
            inputs.push(a);
        }

        let out_layer = &layers[n_hidden];
        let mut y = Array2::zeros((1, cols));
        general_mat_mul(1.0, &out_layer.weights, inputs.last().unwrap(), 0.0, &mut y);
        let mut output = y
            .into_shape_with_order((slots, batch))
            .expect("slot-major layout");
        output.row_mut(0).mapv_inplace(|v| v + out_layer.bias[0]);
        if let Some(bad) = output.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "network forward pass produced {bad}"
            )));
        }

        Ok(Self {
            net,
            order,
            dim,
            batch,
            inputs,
            hidden,
            output,
        })
    }

    pub fn order(&self) -> JetOrder {
        self.order
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Output slots, `S x B` (row `Slot::index`).
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn slot(&self, slot: Slot) -> ndarray::ArrayView1<'_, f64> {
        self.output.row(slot.index(self.dim))
    }

    /// Gradient of `sum(cotangent * output)` with respect to all network
    /// parameters, in flattening order. `cotangent` has the shape of
    /// [`Self::output`].
    pub fn backward(&self, cotangent: &Array2<f64>) -> Vec<f64> {
        let layers = self.net.layers();
        let n_hidden = layers.len() - 1;
        let (batch, dim, order) = (self.batch, self.dim, self.order);
        let cols = cotangent.len();
        let mut grads: Vec<(Array2<f64>, Vec<f64>)> = Vec::with_capacity(layers.len());

        let ybar = cotangent
            .to_owned()
            .into_shape_with_order((1, cols))
            .expect("slot-major layout");
        let mut w_out = Array2::zeros(layers[n_hidden].weights.dim());
        general_mat_mul(1.0, &ybar, &self.inputs[n_hidden].t(), 0.0, &mut w_out);
        let b_out = vec![cotangent.row(0).sum()];
        grads.push((w_out, b_out));

        let mut abar = layers[n_hidden].weights.t().dot(&ybar);
        for l in (0..n_hidden).rev() {
            let cache = &self.hidden[l];
            let width = abar.nrows();
            let mut zbar = Array2::zeros((width, cols));
            for r in 0..width {
                let ab = abar.row(r);
                let ab = ab.as_slice().expect("contiguous row");
                let zr = cache.z.row(r);
                let zr = zr.as_slice().unwrap();
                let zb = zbar.row_mut(r).into_slice().unwrap();
                let (s1, s2, s3) = (
                    cache.s1.row(r).to_slice().unwrap(),
                    cache.s2.row(r).to_slice().unwrap(),
                    cache.s3.row(r).to_slice().unwrap(),
                );
                for p in 0..batch {
                    zb[p] = ab[p] * s1[p];
                }
                if order >= JetOrder::First {
                    for i in 0..dim {
                        let c1 = (1 + i) * batch;
                        if order == JetOrder::Second {
                            let c2 = (1 + dim + i) * batch;
                            for p in 0..batch {
                                let d = zr[c1 + p];
                                let a1 = ab[c1 + p];
                                let a2 = ab[c2 + p];
                                zb[p] += a1 * s2[p] * d + a2 * (s3[p] * d * d + s2[p] * zr[c2 + p]);
                                zb[c1 + p] = a1 * s1[p] + 2.0 * a2 * s2[p] * d;
                                zb[c2 + p] = a2 * s1[p];
                            }
                        } else {
                            for p in 0..batch {
                                let d = zr[c1 + p];
                                let a1 = ab[c1 + p];
                                zb[p] += a1 * s2[p] * d;
                                zb[c1 + p] = a1 * s1[p];
                            }
                        }
                    }
                }
            }
            let mut w_bar = Array2::zeros(layers[l].weights.dim());
            general_mat_mul(1.0, &zbar, &self.inputs[l].t(), 0.0, &mut w_bar);
            let b_bar = zbar.slice(s![.., 0..batch]).sum_axis(Axis(1)).to_vec();
            grads.push((w_bar, b_bar));
            if l > 0 {
                abar = layers[l].weights.t().dot(&zbar);
            }
        }

        let mut flat = Vec::with_capacity(self.net.param_count());
        for (w, b) in grads.into_iter().rev() {
            flat.extend(w.iter());
            flat.extend(b);
        }
        flat
    }
}
