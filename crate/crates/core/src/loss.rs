//! Scalar training losses.
//!
//! A loss is a weighted sum of squared residual blocks,
//! `L = sum_b w_b |r_b|^2`, each block tagged with the loss component it
//! contributes to. [`AssembledLoss`] evaluates all blocks with one batched
//! forward pass over the union of their points and returns the exact gradient
//! with respect to network weights and any trainable physical parameters.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::basis::TestBasis;
use crate::diffengine::{slot_count, ForwardPass, JetOrder, Objective, ParamVector, Slot};
use crate::error::{contract, Error, Result};
use crate::mesh::{Decomposition1D, Decomposition2D};
use crate::network::{Activation, Mlp};
use crate::quadrature::{tensor_product, QuadratureRule};
use crate::residuals::{
    poisson1d_block, poisson2d_block, Coefficient, Operator, ResidualBlock, Term, TrialFunction,
    VariationalForm,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Variational,
    Boundary,
    Initial,
    Data,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::Variational => "variational",
            Component::Boundary => "boundary",
            Component::Initial => "initial",
            Component::Data => "data",
        }
    }
}

/// Loss value split by component; `total` is their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub variational: f64,
    pub boundary: f64,
    pub initial: f64,
    pub data: f64,
}

impl LossBreakdown {
    pub fn variational_only(v: f64) -> Self {
        Self {
            total: v,
            variational: v,
            ..Self::default()
        }
    }

    pub fn get(&self, c: Component) -> f64 {
        match c {
            Component::Variational => self.variational,
            Component::Boundary => self.boundary,
            Component::Initial => self.initial,
            Component::Data => self.data,
        }
    }

    pub fn add(&mut self, c: Component, v: f64) {
        match c {
            Component::Variational => self.variational += v,
            Component::Boundary => self.boundary += v,
            Component::Initial => self.initial += v,
            Component::Data => self.data += v,
        }
        self.total = self.variational + self.boundary + self.initial + self.data;
    }

    /// Fails with the first non-finite component.
    pub fn check_finite(&self) -> Result<()> {
        for c in [
            Component::Variational,
            Component::Boundary,
            Component::Initial,
            Component::Data,
        ] {
            let v = self.get(c);
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss {
                    term: c.name(),
                    value: v,
                });
            }
        }
        if !self.total.is_finite() {
            return Err(Error::NonFiniteLoss {
                term: "total",
                value: self.total,
            });
        }
        Ok(())
    }
}

/// Penalty multipliers for boundary, initial and data terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    pub tau_b: f64,
    pub tau_0: f64,
    pub tau_star: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self {
            tau_b: 1.0,
            tau_0: 1.0,
            tau_star: 1.0,
        }
    }
}

impl PenaltyWeights {
    pub fn new(tau_b: f64, tau_0: f64, tau_star: f64) -> Result<Self> {
        let w = Self {
            tau_b,
            tau_0,
            tau_star,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_b", self.tau_b),
            ("tau_0", self.tau_0),
            ("tau_star", self.tau_star),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One residual block and its contribution `weight * |r|^2` to a component.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBlock {
    pub component: Component,
    pub weight: f64,
    pub block: ResidualBlock,
}

impl WeightedBlock {
    pub fn new(component: Component, weight: f64, block: ResidualBlock) -> Self {
        Self {
            component,
            weight,
            block,
        }
    }
}

/// Network architecture a loss is evaluated for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
}

impl Architecture {
    pub fn of(net: &Mlp) -> Self {
        Self {
            layer_sizes: net.layer_sizes().to_vec(),
            activation: net.activation(),
        }
    }
}

/// A loss ready for training: all blocks with their points concatenated.
#[derive(Debug, Clone)]
pub struct AssembledLoss {
    arch: Architecture,
    blocks: Vec<WeightedBlock>,
    points: Array2<f64>,
    offsets: Vec<usize>,
    order: JetOrder,
    n_physical: usize,
}

impl AssembledLoss {
    pub fn new(arch: Architecture, blocks: Vec<WeightedBlock>, n_physical: usize) -> Result<Self> {
        let dim = arch.layer_sizes[0];
        if blocks.is_empty() {
            return Err(contract("loss has no terms"));
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut total = 0;
        for b in &blocks {
            if b.block.dim() != dim {
                return Err(contract(format!(
                    "residual block has dimension {}, network expects {dim}",
                    b.block.dim()
                )));
            }
            if !(b.weight.is_finite() && b.weight >= 0.0) {
                return Err(contract(format!("block weight {} is not >= 0", b.weight)));
            }
            for t in &b.block.terms {
                if let Coefficient::Physical { index, .. } = t.coefficient {
                    if index >= n_physical {
                        return Err(contract(format!(
                            "term uses physical parameter {index}, only {n_physical} declared"
                        )));
                    }
                }
            }
            offsets.push(total);
            total += b.block.points.nrows();
        }
        let mut points = Array2::zeros((total, dim));
        for (b, &off) in blocks.iter().zip(&offsets) {
            let n = b.block.points.nrows();
            points
                .slice_mut(s![off..off + n, ..])
                .assign(&b.block.points);
        }
        let order = blocks.iter().map(|b| b.block.order()).max().unwrap();
        Ok(Self {
            arch,
            blocks,
            points,
            offsets,
            order,
            n_physical,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn blocks(&self) -> &[WeightedBlock] {
        &self.blocks
    }

    pub fn n_physical(&self) -> usize {
        self.n_physical
    }

    pub fn network_param_count(&self) -> usize {
        crate::network::param_count(&self.arch.layer_sizes)
    }

    fn block_slots<'a>(&self, slots: &'a Array2<f64>, i: usize) -> ndarray::ArrayView2<'a, f64> {
        let n = self.blocks[i].block.points.nrows();
        slots.slice(s![.., self.offsets[i]..self.offsets[i] + n])
    }

    fn breakdown_from_slots(
        &self,
        slots: &Array2<f64>,
        physical: &[f64],
    ) -> (LossBreakdown, Vec<Array1<f64>>) {
        let mut out = LossBreakdown::default();
        let mut residuals = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            let r = b
                .block
                .residual_from_slots(self.block_slots(slots, i), physical);
            out.add(b.component, b.weight * r.dot(&r));
            residuals.push(r);
        }
        (out, residuals)
    }

    /// Loss of an arbitrary trial function (a network or an exact solution).
    pub fn breakdown_for(
        &self,
        trial: &dyn TrialFunction,
        physical: &[f64],
    ) -> Result<LossBreakdown> {
        if physical.len() != self.n_physical {
            return Err(contract(format!(
                "{} physical parameters given, loss expects {}",
                physical.len(),
                self.n_physical
            )));
        }
        let slots = trial.slots(self.points.view(), self.order)?;
        Ok(self.breakdown_from_slots(&slots, physical).0)
    }

    fn split<'p>(&self, params: &'p ParamVector) -> Result<(Mlp, &'p [f64])> {
        if params.len() != self.param_count() {
            return Err(contract(format!(
                "parameter vector has {} entries, loss expects {}",
                params.len(),
                self.param_count()
            )));
        }
        let n = self.network_param_count();
        let net = Mlp::from_params(
            &self.arch.layer_sizes,
            self.arch.activation,
            params.as_slice(),
        )?;
        Ok((net, &params.as_slice()[n..]))
    }
}

impl Objective for AssembledLoss {
    fn param_count(&self) -> usize {
        self.network_param_count() + self.n_physical
    }

    fn evaluate(&self, params: &ParamVector) -> Result<LossBreakdown> {
        let (net, physical) = self.split(params)?;
        self.breakdown_for(&net, physical)
    }

    fn evaluate_with_gradient(&self, params: &ParamVector) -> Result<(LossBreakdown, ParamVector)> {
        let (net, physical) = self.split(params)?;
        let pass = ForwardPass::new(&net, self.points.view(), self.order)?;
        let slots = pass.output();
        let (breakdown, residuals) = self.breakdown_from_slots(slots, physical);
        breakdown.check_finite()?;
        let mut cot = Array2::zeros(slots.raw_dim());
        let mut phys_grad = vec![0.0; self.n_physical];
        for (i, (b, r)) in self.blocks.iter().zip(&residuals).enumerate() {
            let n = b.block.points.nrows();
            let off = self.offsets[i];
            let g = r * (2.0 * b.weight);
            b.block.pull_back(
                g.view(),
                self.block_slots(slots, i),
                physical,
                cot.slice_mut(s![.., off..off + n]),
                &mut phys_grad,
            );
        }
        let mut grad = pass.backward(&cot);
        grad.extend(phys_grad);
        Ok((breakdown, ParamVector::new(grad)))
    }
}

fn identity_block(points: Array2<f64>, slot: Slot, values: Vec<f64>) -> Result<ResidualBlock> {
    let n = points.nrows();
    ResidualBlock::new(
        points,
        vec![Term {
            slot,
            operator: Operator::Diagonal(Array1::ones(n)),
            coefficient: Coefficient::Const(1.0),
        }],
        Array1::from(values),
    )
}

/// `weight * sum_i |u(p_i) - values_i|^2`
pub fn pointwise_block(
    component: Component,
    weight: f64,
    points: &[Vec<f64>],
    values: &[f64],
) -> Result<WeightedBlock> {
    if points.len() != values.len() {
        return Err(contract("point and value counts differ"));
    }
    if points.is_empty() {
        return Err(contract("pointwise term needs at least one point"));
    }
    let dim = points[0].len();
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    if flat.len() != dim * points.len() {
        return Err(contract("points have mixed dimensions"));
    }
    let pts = Array2::from_shape_vec((points.len(), dim), flat).expect("point matrix");
    Ok(WeightedBlock::new(
        component,
        weight,
        identity_block(pts, Slot::Value, values.to_vec())?,
    ))
}

/// Strong-form differential operators used by collocation losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrongOperator {
    /// Approximation: `u`
    Identity,
    /// `-u''`
    NegLaplace1d,
    /// `u_xx + u_yy`
    Laplace2d,
    /// `u_t + v u_x - kappa u_xx` with inputs `(t, x)`
    AdvectionDiffusion { v: f64, kappa: Coefficient },
}

/// Pointwise strong-form residual `L u(p_i) - f(p_i)`.
pub fn strong_block(
    op: StrongOperator,
    points: &[Vec<f64>],
    forcing: &[f64],
) -> Result<ResidualBlock> {
    let n = points.len();
    if n == 0 || forcing.len() != n {
        return Err(contract(
            "strong-form residual needs matching, nonempty points and forcing",
        ));
    }
    let dim = points[0].len();
    let pts = Array2::from_shape_vec((n, dim), points.iter().flatten().copied().collect())
        .map_err(|_| contract("points have mixed dimensions"))?;
    let diag = |slot, c| Term {
        slot,
        operator: Operator::Diagonal(Array1::ones(n)),
        coefficient: c,
    };
    let terms = match op {
        StrongOperator::Identity => vec![diag(Slot::Value, Coefficient::Const(1.0))],
        StrongOperator::NegLaplace1d => vec![diag(Slot::D2(0), Coefficient::Const(-1.0))],
        StrongOperator::Laplace2d => vec![
            diag(Slot::D2(0), Coefficient::Const(1.0)),
            diag(Slot::D2(1), Coefficient::Const(1.0)),
        ],
        StrongOperator::AdvectionDiffusion { v, kappa } => {
            let neg = match kappa {
                Coefficient::Const(k) => Coefficient::Const(-k),
                Coefficient::Physical { index, scale } => Coefficient::Physical {
                    index,
                    scale: -scale,
                },
            };
            vec![
                diag(Slot::D1(0), Coefficient::Const(1.0)),
                diag(Slot::D1(1), Coefficient::Const(v)),
                diag(Slot::D2(1), neg),
            ]
        }
    };
    ResidualBlock::new(pts, terms, Array1::from(forcing.to_vec()))
}

/// Boundary data of a 1D problem: `u(a) = g`, `u(b) = h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryValues1D {
    pub g: f64,
    pub h: f64,
}

/// Blocks of the 1D VPINN loss
/// `sum_e (1/K) sum_k |R_k^(e)|^2 + (tau_b/2)(|u(a) - g|^2 + |u(b) - h|^2)`.
pub fn vpinn_blocks_1d(
    form: VariationalForm,
    decomposition: &Decomposition1D,
    basis: &TestBasis,
    rule: &QuadratureRule,
    f: &dyn Fn(&[f64]) -> f64,
    bc: BoundaryValues1D,
    weights: &PenaltyWeights,
) -> Result<Vec<WeightedBlock>> {
    weights.validate()?;
    let mut blocks = Vec::with_capacity(decomposition.len() + 1);
    for (a, b) in decomposition.elements() {
        let er = rule.map_to_element(a, b)?;
        blocks.push(WeightedBlock::new(
            Component::Variational,
            1.0 / basis.count as f64,
            poisson1d_block(form, &er, basis, f)?,
        ));
    }
    blocks.push(pointwise_block(
        Component::Boundary,
        weights.tau_b / 2.0,
        &[vec![decomposition.start()], vec![decomposition.end()]],
        &[bc.g, bc.h],
    )?);
    Ok(blocks)
}

/// Blocks of the 2D VPINN loss: element sum of mean-squared flattened
/// residuals plus `tau_b` times the mean-squared misfit at boundary points.
#[allow(clippy::too_many_arguments)]
pub fn vpinn_blocks_2d(
    form: VariationalForm,
    decomposition: &Decomposition2D,
    basis_x: &TestBasis,
    basis_y: &TestBasis,
    rule_x: &QuadratureRule,
    rule_y: &QuadratureRule,
    f: &dyn Fn(&[f64]) -> f64,
    boundary_points: &[Vec<f64>],
    boundary_values: &[f64],
    weights: &PenaltyWeights,
) -> Result<Vec<WeightedBlock>> {
    weights.validate()?;
    let k = (basis_x.count * basis_y.count) as f64;
    let mut blocks = Vec::with_capacity(decomposition.len() + 1);
    for e in decomposition.elements() {
        let rule = tensor_product(
            &rule_x.map_to_element(e.x.0, e.x.1)?,
            &rule_y.map_to_element(e.y.0, e.y.1)?,
        );
        blocks.push(WeightedBlock::new(
            Component::Variational,
            1.0 / k,
            poisson2d_block(form, &rule, basis_x, basis_y, f)?,
        ));
    }
    if weights.tau_b > 0.0 {
        if boundary_points.is_empty() {
            return Err(Error::Config(
                "tau_b > 0 but no boundary points were supplied".into(),
            ));
        }
        blocks.push(pointwise_block(
            Component::Boundary,
            weights.tau_b / boundary_points.len() as f64,
            boundary_points,
            boundary_values,
        )?);
    }
    Ok(blocks)
}

/// One labelled point set of a collocation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        Self { points, values }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new())
    }
}

/// Blocks of the PINN loss: mean squared strong residual plus
/// `tau_b` / `tau_0` times mean squared boundary / initial misfits.
pub fn pinn_blocks(
    op: StrongOperator,
    residual: &PointSet,
    boundary: &PointSet,
    initial: &PointSet,
    weights: &PenaltyWeights,
) -> Result<Vec<WeightedBlock>> {
    weights.validate()?;
    if residual.points.is_empty() {
        return Err(Error::Config("PINN loss needs residual points".into()));
    }
    let mut blocks = vec![WeightedBlock::new(
        Component::Variational,
        1.0 / residual.points.len() as f64,
        strong_block(op, &residual.points, &residual.values)?,
    )];
    for (set, tau, comp, name) in [
        (boundary, weights.tau_b, Component::Boundary, "boundary"),
        (initial, weights.tau_0, Component::Initial, "initial"),
    ] {
        if tau > 0.0 {
            if set.points.is_empty() {
                return Err(Error::Config(format!(
                    "tau for {name} term > 0 but no {name} points"
                )));
            }
            blocks.push(pointwise_block(
                comp,
                tau / set.points.len() as f64,
                &set.points,
                &set.values,
            )?);
        }
    }
    Ok(blocks)
}

/// A sparse measurement `u(t, x) = value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub x: f64,
    pub value: f64,
}

/// Data block `tau_star * (1/N) sum_i |u(t_i, x_i) - u*_i|^2`.
pub fn data_block(observations: &[Observation], tau_star: f64) -> Result<WeightedBlock> {
    if observations.is_empty() {
        return Err(contract("data misfit needs at least one observation"));
    }
    let pts: Vec<Vec<f64>> = observations.iter().map(|o| vec![o.t, o.x]).collect();
    let vals: Vec<f64> = observations.iter().map(|o| o.value).collect();
    pointwise_block(
        Component::Data,
        tau_star / observations.len() as f64,
        &pts,
        &vals,
    )
}

/// `(1/N) sum_i |u(t_i, x_i) - u*_i|^2`
pub fn data_misfit(trial: &dyn TrialFunction, observations: &[Observation]) -> Result<f64> {
    let block = data_block(observations, 1.0)?;
    let r = block.block.evaluate(trial, &[])?;
    Ok(r.dot(&r) / observations.len() as f64)
}

fn breakdown_of(
    trial: &dyn TrialFunction,
    blocks: Vec<WeightedBlock>,
    physical: &[f64],
) -> Result<LossBreakdown> {
    let mut out = LossBreakdown::default();
    for b in blocks {
        let r = b.block.evaluate(trial, physical)?;
        out.add(b.component, b.weight * r.dot(&r));
    }
    Ok(out)
}

/// 1D hp-VPINN loss of `trial`.
#[allow(clippy::too_many_arguments)]
pub fn vpinn_loss_1d(
    trial: &dyn TrialFunction,
    form: VariationalForm,
    decomposition: &Decomposition1D,
    basis: &TestBasis,
    rule: &QuadratureRule,
    f: &dyn Fn(&[f64]) -> f64,
    bc: BoundaryValues1D,
    weights: &PenaltyWeights,
) -> Result<LossBreakdown> {
    let blocks = vpinn_blocks_1d(form, decomposition, basis, rule, f, bc, weights)?;
    breakdown_of(trial, blocks, &[])
}

/// 2D hp-VPINN loss of `trial`.
#[allow(clippy::too_many_arguments)]
pub fn vpinn_loss_2d(
    trial: &dyn TrialFunction,
    form: VariationalForm,
    decomposition: &Decomposition2D,
    basis_x: &TestBasis,
    basis_y: &TestBasis,
    rule: &QuadratureRule,
    f: &dyn Fn(&[f64]) -> f64,
    boundary_points: &[Vec<f64>],
    boundary_values: &[f64],
    weights: &PenaltyWeights,
) -> Result<LossBreakdown> {
    let blocks = vpinn_blocks_2d(
        form,
        decomposition,
        basis_x,
        basis_y,
        rule,
        rule,
        f,
        boundary_points,
        boundary_values,
        weights,
    )?;
    breakdown_of(trial, blocks, &[])
}

/// PINN loss of `trial`.
pub fn pinn_loss(
    trial: &dyn TrialFunction,
    op: StrongOperator,
    residual: &PointSet,
    boundary: &PointSet,
    initial: &PointSet,
    weights: &PenaltyWeights,
    physical: &[f64],
) -> Result<LossBreakdown> {
    let blocks = pinn_blocks(op, residual, boundary, initial, weights)?;
    breakdown_of(trial, blocks, physical)
}

/// Number of derivative slots any loss over `dim` inputs may touch.
pub fn max_slots(dim: usize) -> usize {
    slot_count(dim, JetOrder::Second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffengine::loss_gradient;
    use crate::mesh::uniform_partition;
    use crate::network::init_mlp;
    use crate::quadrature::gauss_lobatto;

    fn zero(_: &[f64]) -> f64 {
        0.0
    }

    #[test]
    fn breakdown_total_is_sum() {
        let mut b = LossBreakdown::default();
        b.add(Component::Variational, 1.5);
        b.add(Component::Boundary, 0.25);
        b.add(Component::Data, 0.125);
        assert_eq!(b.total, 1.875);
        b.variational = f64::NAN;
        assert!(matches!(
            b.check_finite(),
            Err(Error::NonFiniteLoss {
                term: "variational",
                ..
            })
        ));
    }

    #[test]
    fn penalty_weights_reject_negative_values() {
        assert!(PenaltyWeights::new(-1.0, 0.0, 0.0).is_err());
        assert!(PenaltyWeights::new(1.0, f64::NAN, 0.0).is_err());
        assert!(PenaltyWeights::new(10.0, 10.0, 10.0).is_ok());
    }

    #[test]
    fn zero_problem_has_zero_loss() {
        let net = Mlp::zeros(&[1, 5, 1], Activation::Tanh).unwrap();
        let d = uniform_partition(-1.0, 1.0, 3).unwrap();
        let basis = TestBasis::compact_poisson(4).unwrap();
        let rule = gauss_lobatto(10).unwrap();
        let l = vpinn_loss_1d(
            &net,
            VariationalForm::R1,
            &d,
            &basis,
            &rule,
            &zero,
            BoundaryValues1D { g: 0.0, h: 0.0 },
            &PenaltyWeights::default(),
        )
        .unwrap();
        assert_eq!(l.total, 0.0);
    }

    #[test]
    fn boundary_component_scales_with_tau() {
        let net = init_mlp(&[1, 5, 1], Activation::Tanh, 4).unwrap();
        let d = uniform_partition(-1.0, 1.0, 2).unwrap();
        let basis = TestBasis::compact_poisson(3).unwrap();
        let rule = gauss_lobatto(8).unwrap();
        let bc = BoundaryValues1D { g: 0.3, h: -0.2 };
        let f = |x: &[f64]| x[0];
        let at = |tau| {
            let w = PenaltyWeights::new(tau, 0.0, 0.0).unwrap();
            vpinn_loss_1d(&net, VariationalForm::R2, &d, &basis, &rule, &f, bc, &w).unwrap()
        };
        let (a, b) = (at(1.0), at(7.0));
        assert!((b.boundary - 7.0 * a.boundary).abs() <= 1e-15 * b.boundary.abs());
        assert_eq!(a.variational, b.variational);
    }

    #[test]
    fn data_misfit_of_single_observation() {
        let net = Mlp::zeros(&[2, 3, 1], Activation::Tanh).unwrap();
        let obs = [Observation {
            t: 0.1,
            x: 0.5,
            value: 0.3,
        }];
        assert!((data_misfit(&net, &obs).unwrap() - 0.09).abs() < 1e-16);
        assert!(data_misfit(&net, &[]).is_err());
        let net = init_mlp(&[2, 4, 1], Activation::Tanh, 1).unwrap();
        let obs: Vec<_> = [(0.1, -0.5), (0.7, 0.5)]
            .iter()
            .map(|&(t, x)| Observation {
                t,
                x,
                value: net.forward(&[t, x]).unwrap(),
            })
            .collect();
        assert_eq!(data_misfit(&net, &obs).unwrap(), 0.0);
    }

    #[test]
    fn empty_boundary_with_positive_tau_is_a_config_error() {
        let d = Decomposition2D::uniform(-1.0, 1.0, 1, 1).unwrap();
        let b = TestBasis::compact_poisson(2).unwrap();
        let r = gauss_lobatto(4).unwrap();
        let w = PenaltyWeights::new(10.0, 0.0, 0.0).unwrap();
        let err = vpinn_blocks_2d(VariationalForm::R1, &d, &b, &b, &r, &r, &zero, &[], &[], &w);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn assembled_gradient_matches_finite_differences() {
        let net = init_mlp(&[1, 6, 6, 1], Activation::Tanh, 21).unwrap();
        let d = uniform_partition(-1.0, 1.0, 2).unwrap();
        let basis = TestBasis::compact_poisson(4).unwrap();
        let rule = gauss_lobatto(12).unwrap();
        let f = |x: &[f64]| (2.0 * x[0]).sin();
        let blocks = vpinn_blocks_1d(
            VariationalForm::R1,
            &d,
            &basis,
            &rule,
            &f,
            BoundaryValues1D { g: 0.1, h: 0.4 },
            &PenaltyWeights::default(),
        )
        .unwrap();
        let loss = AssembledLoss::new(Architecture::of(&net), blocks, 0).unwrap();
        let p = net.params();
        let g = loss_gradient(&loss, &p).unwrap();
        let h = 1e-6;
        for i in 0..p.len() {
            let mut up = p.clone().into_vec();
            let mut dn = up.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (loss.evaluate(&up.into()).unwrap().total
                - loss.evaluate(&dn.into()).unwrap().total)
                / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-6 * fd.abs().max(1e-3),
                "i={i} fd={fd} g={}",
                g[i]
            );
        }
    }
}
