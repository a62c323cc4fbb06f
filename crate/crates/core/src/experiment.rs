//! Experiment configuration and runner.
//!
//! An [`ExperimentConfig`] is parsed from TOML with every field optional
//! except the problem name. [`ExperimentConfig::resolve`] fills the gaps from
//! the problem's defaults; the resolved configuration is what gets written as
//! the run manifest, so feeding a manifest back in reproduces the run.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hpvpinn_oracle::spectrum;

use crate::basis::{BasisKind, TestBasis};
use crate::diffengine::{ForwardPass, JetOrder, ParamVector, Slot};
use crate::error::{Error, Result};
use crate::loss::{
    data_block, pinn_blocks, pointwise_block, vpinn_blocks_1d, vpinn_blocks_2d, Architecture,
    AssembledLoss, BoundaryValues1D, Component, PenaltyWeights, PointSet, StrongOperator,
    WeightedBlock,
};
use crate::mesh::{explicit_partition, lshape_partition, uniform_partition, Decomposition2D};
use crate::network::{init_mlp, Activation, Mlp, NetworkSnapshot};
use crate::optimizer::{train, PhysicalParam, TraceEntry, TrainConfig, TrainingTrace};
use crate::problems::{
    find, observations_for_inverse, Domain, MeshDefault, ProblemKind, ProblemSpec,
};
use crate::quadrature::{gauss_legendre, rule, tensor_product, QuadratureFamily};
use crate::residuals::{ade_block, vnn_block, Coefficient, VariationalForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vpinn,
    Pinn,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// Number of hidden layers.
    pub depth: Option<usize>,
    /// Neurons per hidden layer.
    pub width: Option<usize>,
    pub activation: Option<Activation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// Element boundaries of a 1D problem.
    pub boundaries: Option<Vec<f64>>,
    /// Uniform element count (per axis in 2D).
    pub elements: Option<usize>,
    pub elements_x: Option<usize>,
    pub elements_y: Option<usize>,
    pub x_boundaries: Option<Vec<f64>>,
    pub y_boundaries: Option<Vec<f64>>,
    /// `"coarse"` or `"fine"` for the L-shaped domain.
    pub lshape: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub kind: Option<BasisKind>,
    pub count: Option<usize>,
    /// Test functions along the second axis (defaults to `count`).
    pub count_y: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub family: Option<QuadratureFamily>,
    pub points: Option<usize>,
    pub points_y: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualsSection {
    pub method: Option<Method>,
    pub form: Option<VariationalForm>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    pub tau_b: Option<f64>,
    pub tau_0: Option<f64>,
    pub tau_star: Option<f64>,
    pub n_boundary: Option<usize>,
    pub n_initial: Option<usize>,
    pub n_residual: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub learning_rate: Option<f64>,
    pub iterations: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub report_every: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseSection {
    pub kappa_init: Option<f64>,
    pub sensors: Option<Vec<f64>>,
    pub per_sensor: Option<usize>,
    /// Seed of the observation draw; each run's own seed when absent.
    pub observation_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Evaluation points per axis (1001 in 1D, 101 in 2D by default).
    pub grid: Option<usize>,
    pub spectrum: Option<bool>,
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub basis: BasisSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub residuals: ResidualsSection,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub inverse: InverseSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn for_problem(name: &str) -> Self {
        Self {
            problem: ProblemSection {
                name: name.to_string(),
            },
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg_err(e.to_string()))
    }

    /// Fills every unset field from the problem defaults and checks the result.
    pub fn resolve(&self) -> Result<Self> {
        let spec = find(&self.problem.name)?;
        let d = &spec.defaults;
        let mut c = self.clone();

        c.network.depth.get_or_insert(d.hidden.len());
        c.network.width.get_or_insert(d.hidden[0]);
        c.network.activation.get_or_insert(d.activation);

        let m = &mut c.mesh;
        match spec.domain {
            Domain::Interval(a, b) => {
                if m.boundaries.is_none() {
                    m.boundaries = Some(match (m.elements, &d.mesh) {
                        (Some(n), _) => uniform_partition(a, b, n)?.boundaries().to_vec(),
                        (None, MeshDefault::Boundaries(bs)) => bs.clone(),
                        (None, _) => vec![a, b],
                    });
                }
                m.elements = None;
            }
            Domain::LShape => {
                let fine = match (m.lshape.as_deref(), &d.mesh) {
                    (Some("fine"), _) => true,
                    (Some("coarse"), _) => false,
                    (Some(other), _) => {
                        return Err(cfg_err(format!(
                            "mesh.lshape must be \"coarse\" or \"fine\", got {other:?}"
                        )))
                    }
                    (None, MeshDefault::LShape { fine }) => *fine,
                    (None, _) => true,
                };
                m.lshape = Some(if fine { "fine" } else { "coarse" }.into());
                m.elements = None;
            }
            Domain::Rectangle { x, y } | Domain::SpaceTime { t: x, x: y } => {
                let (dx, dy) = match d.mesh {
                    MeshDefault::Grid { nx, ny } => (nx, ny),
                    _ => (1, 1),
                };
                let nx = m.elements_x.or(m.elements).unwrap_or(dx);
                let ny = m.elements_y.or(m.elements).unwrap_or(dy);
                if m.x_boundaries.is_none() {
                    m.x_boundaries = Some(uniform_partition(x.0, x.1, nx)?.boundaries().to_vec());
                }
                if m.y_boundaries.is_none() {
                    m.y_boundaries = Some(uniform_partition(y.0, y.1, ny)?.boundaries().to_vec());
                }
                m.elements = None;
                m.elements_x = None;
                m.elements_y = None;
            }
        }

        c.basis.kind.get_or_insert(d.basis_kind);
        let count = *c.basis.count.get_or_insert(d.test_count);
        if spec.dim() == 2 {
            c.basis.count_y.get_or_insert(count);
        }
        c.quadrature.family.get_or_insert(d.quadrature);
        let q = *c.quadrature.points.get_or_insert(d.quadrature_points);
        if spec.dim() == 2 {
            c.quadrature.points_y.get_or_insert(q);
        }
        c.residuals.method.get_or_insert(Method::Vpinn);
        c.residuals.form.get_or_insert(d.form);

        let l = &mut c.loss;
        let pinn = c.residuals.method == Some(Method::Pinn);
        // the PINN baselines weight boundaries by 10
        let tau_b = if pinn && spec.dim() == 1 {
            10.0
        } else {
            d.tau_b
        };
        l.tau_b.get_or_insert(tau_b);
        l.tau_0.get_or_insert(d.tau_0);
        l.tau_star.get_or_insert(d.tau_star);
        l.n_boundary.get_or_insert(d.n_boundary);
        l.n_initial.get_or_insert(d.n_initial);
        l.n_residual.get_or_insert(d.n_residual);

        let o = &mut c.optimizer;
        o.learning_rate.get_or_insert(d.learning_rate);
        o.iterations.get_or_insert(d.iterations);
        o.seeds.get_or_insert_with(|| d.seeds.clone());
        o.report_every.get_or_insert(100);

        if spec.kind == ProblemKind::AdeInverse {
            let inv = &mut c.inverse;
            inv.kappa_init.get_or_insert(1.0);
            inv.sensors.get_or_insert_with(|| vec![-0.5, 0.0, 0.5]);
            inv.per_sensor.get_or_insert(5);
        }

        c.output
            .grid
            .get_or_insert(if spec.dim() == 1 { 1001 } else { 101 });
        c.output
            .spectrum
            .get_or_insert(spec.kind == ProblemKind::Approx);
        let every = c.optimizer.report_every.unwrap();
        c.output.checkpoint_every.get_or_insert(every);

        c.validate(&spec)?;
        Ok(c)
    }

    fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        let n = &self.network;
        if n.depth == Some(0) || n.width == Some(0) {
            return Err(cfg_err("network depth and width must be at least 1"));
        }
        if self.basis.count == Some(0) || self.basis.count_y == Some(0) {
            return Err(cfg_err("basis.count must be at least 1"));
        }
        let o = &self.optimizer;
        if !(o.learning_rate.unwrap() > 0.0) {
            return Err(cfg_err("optimizer.learning_rate must be positive"));
        }
        if o.seeds.as_ref().unwrap().is_empty() {
            return Err(cfg_err("optimizer.seeds is empty"));
        }
        if o.report_every == Some(0) || self.output.checkpoint_every == Some(0) {
            return Err(cfg_err(
                "report and checkpoint intervals must be at least 1",
            ));
        }
        if self.output.grid.unwrap() < 2 {
            return Err(cfg_err("output.grid must be at least 2"));
        }
        let method = self.residuals.method.unwrap();
        if method == Method::Vpinn
            && spec.kind != ProblemKind::Approx
            && self.basis.kind != Some(BasisKind::CompactPoisson)
        {
            return Err(cfg_err(
                "PDE problems need basis.kind = \"compact_poisson\"",
            ));
        }
        if matches!(spec.kind, ProblemKind::AdeForward | ProblemKind::AdeInverse)
            && self.residuals.form == Some(VariationalForm::R3)
        {
            return Err(cfg_err("advection-diffusion supports forms R1 and R2"));
        }
        PenaltyWeights::new(
            self.loss.tau_b.unwrap(),
            self.loss.tau_0.unwrap(),
            self.loss.tau_star.unwrap(),
        )?;
        Ok(())
    }
}

/// A resolved configuration bound to its problem.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spec: ProblemSpec,
}

/// One evaluation point of a trained network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionPoint {
    pub coords: Vec<f64>,
    pub prediction: f64,
    pub reference: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// Max point-wise error over the evaluation grid.
    pub linf: f64,
    /// `|u - u_ref|_{H^1}` seminorm, when the reference has known derivatives.
    pub h1_semi: Option<f64>,
    /// Max error restricted to the elements (for partial-domain training).
    pub linf_mesh: f64,
    pub final_loss: f64,
    pub physical: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub points: Vec<SolutionPoint>,
    pub metrics: Metrics,
    /// `(k, |exact_k|, |prediction_k|)` for 1D problems.
    pub spectrum: Option<Vec<(usize, f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub params: ParamVector,
    pub network: Mlp,
    pub trace: TrainingTrace,
    pub evaluation: Evaluation,
}

impl RunOutput {
    pub fn snapshot(&self) -> NetworkSnapshot {
        let mut s = self.network.snapshot();
        s.physical = self.evaluation.metrics.physical.clone();
        s
    }
}

const PINN_STREAM: u64 = 0x005E_ED0F_C011_0CA7;

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let config = config.resolve()?;
        let spec = find(&config.problem.name)?;
        Ok(Self { config, spec })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::new(&ExperimentConfig::from_toml(text)?)
    }

    pub fn seeds(&self) -> &[u64] {
        self.config.optimizer.seeds.as_deref().unwrap()
    }

    pub fn method(&self) -> Method {
        self.config.residuals.method.unwrap()
    }

    pub fn architecture(&self) -> Architecture {
        let n = &self.config.network;
        let mut sizes = vec![self.spec.dim()];
        sizes.extend(std::iter::repeat_n(n.width.unwrap(), n.depth.unwrap()));
        sizes.push(1);
        Architecture {
            layer_sizes: sizes,
            activation: n.activation.unwrap(),
        }
    }

    fn weights(&self) -> PenaltyWeights {
        let l = &self.config.loss;
        PenaltyWeights {
            tau_b: l.tau_b.unwrap(),
            tau_0: l.tau_0.unwrap(),
            tau_star: l.tau_star.unwrap(),
        }
    }

    fn is_inverse(&self) -> bool {
        self.spec.kind == ProblemKind::AdeInverse
    }

    fn physical_params(&self) -> Vec<PhysicalParam> {
        if self.is_inverse() {
            vec![PhysicalParam {
                name: "kappa".into(),
                initial: self.config.inverse.kappa_init.unwrap(),
            }]
        } else {
            Vec::new()
        }
    }

    fn decomposition_2d(&self) -> Result<Decomposition2D> {
        let m = &self.config.mesh;
        if self.spec.domain == Domain::LShape {
            return Ok(lshape_partition(m.lshape.as_deref() == Some("fine")));
        }
        Ok(Decomposition2D::rectangular(
            explicit_partition(m.x_boundaries.clone().unwrap())?,
            explicit_partition(m.y_boundaries.clone().unwrap())?,
        ))
    }

    fn bases(&self) -> Result<(TestBasis, TestBasis)> {
        let b = &self.config.basis;
        let kind = b.kind.unwrap();
        let k = b.count.unwrap();
        Ok((
            TestBasis::new(kind, k)?,
            TestBasis::new(kind, b.count_y.unwrap_or(k))?,
        ))
    }

    fn forcing(&self) -> fn(&[f64]) -> f64 {
        self.spec.forcing.unwrap_or(|_| 0.0)
    }

    fn kappa_coefficient(&self) -> Coefficient {
        if self.is_inverse() {
            Coefficient::Physical {
                index: 0,
                scale: 1.0,
            }
        } else {
            Coefficient::Const(self.spec.advection.unwrap().1)
        }
    }

    /// Observations of the inverse problem for a run with `seed`.
    pub fn observations(&self, seed: u64) -> Result<Vec<crate::loss::Observation>> {
        let inv = &self.config.inverse;
        observations_for_inverse(
            &self.spec,
            inv.sensors.as_deref().unwrap(),
            inv.per_sensor.unwrap(),
            inv.observation_seed.unwrap_or(seed),
        )
    }

    /// Points on the spatial boundary and the initial line of the space-time
    /// domain, equispaced in time and space respectively.
    fn space_time_constraints(&self) -> (PointSet, PointSet) {
        let Domain::SpaceTime { t, x } = self.spec.domain else {
            unreachable!("space-time problem")
        };
        let l = &self.config.loss;
        let per_side = l.n_boundary.unwrap() / 2;
        let mut bpts = Vec::with_capacity(2 * per_side);
        for &xb in &[x.0, x.1] {
            for i in 0..per_side {
                bpts.push(vec![lin(t.0, t.1, i, per_side), xb]);
            }
        }
        let n_i = l.n_initial.unwrap();
        let ipts: Vec<Vec<f64>> = (0..n_i).map(|i| vec![t.0, lin(x.0, x.1, i, n_i)]).collect();
        let bvals = vec![0.0; bpts.len()];
        let ivals = ipts.iter().map(|p| self.spec.initial_value(p[1])).collect();
        (PointSet::new(bpts, bvals), PointSet::new(ipts, ivals))
    }

    fn random_interior(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let bounds = self.spec.domain.bounds();
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let p: Vec<f64> = bounds
                .iter()
                .map(|&(a, b)| a + (b - a) * rng.random::<f64>())
                .collect();
            if self.spec.domain.contains(&p) {
                pts.push(p);
            }
        }
        pts
    }

    /// The training loss for a run with `seed` (the seed only matters for
    /// random collocation points and observation draws).
    pub fn build_loss(&self, seed: u64) -> Result<AssembledLoss> {
        let arch = self.architecture();
        let weights = self.weights();
        let f = self.forcing();
        let (bx, by) = self.bases()?;
        let c = &self.config;
        let family = c.quadrature.family.unwrap();
        let qx = rule(family, c.quadrature.points.unwrap())?;
        let qy = rule(family, c.quadrature.points_y.unwrap_or(qx.len()))?;
        let form = c.residuals.form.unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PINN_STREAM);
        let n_r = c.loss.n_residual.unwrap();

        let mut blocks: Vec<WeightedBlock> = Vec::new();
        match (self.spec.kind, self.method()) {
            (ProblemKind::Approx, Method::Vpinn) => {
                let target = |p: &[f64]| self.spec.exact_value(p).unwrap();
                let d = explicit_partition(c.mesh.boundaries.clone().unwrap())?;
                for (a, b) in d.elements() {
                    let cuts: Vec<f64> = self
                        .spec
                        .discontinuities
                        .iter()
                        .copied()
                        .filter(|&s| a < s && s < b)
                        .collect();
                    let er = if cuts.is_empty() {
                        qx.map_to_element(a, b)?
                    } else {
                        // interior nodes only, so no node sits on a jump
                        let g = gauss_legendre(qx.len())?;
                        let mut edges = vec![a];
                        edges.extend(cuts);
                        edges.push(b);
                        let mut joined = g.map_to_element(edges[0], edges[1])?;
                        for w in edges[1..].windows(2) {
                            joined = joined.join(&g.map_to_element(w[0], w[1])?)?;
                        }
                        joined
                    };
                    blocks.push(WeightedBlock::new(
                        Component::Variational,
                        1.0 / bx.count as f64,
                        vnn_block(&er, &bx, &target)?,
                    ));
                }
            }
            (ProblemKind::Poisson1d, Method::Vpinn) => {
                let d = explicit_partition(c.mesh.boundaries.clone().unwrap())?;
                let bc = BoundaryValues1D {
                    g: self.spec.boundary_value(&[d.start()]),
                    h: self.spec.boundary_value(&[d.end()]),
                };
                blocks = vpinn_blocks_1d(form, &d, &bx, &qx, &f, bc, &weights)?;
            }
            (ProblemKind::Poisson2d, Method::Vpinn) => {
                let d = self.decomposition_2d()?;
                let bpts = perimeter_points(&d, c.loss.n_boundary.unwrap(), None);
                let bvals: Vec<f64> = bpts.iter().map(|p| self.spec.boundary_value(p)).collect();
                blocks =
                    vpinn_blocks_2d(form, &d, &bx, &by, &qx, &qy, &f, &bpts, &bvals, &weights)?;
            }
            (ProblemKind::AdeForward | ProblemKind::AdeInverse, Method::Vpinn) => {
                let d = self.decomposition_2d()?;
                let (v, _) = self.spec.advection.unwrap();
                let k = (bx.count * by.count) as f64;
                for e in d.elements() {
                    let r2 = tensor_product(
                        &qx.map_to_element(e.x.0, e.x.1)?,
                        &qy.map_to_element(e.y.0, e.y.1)?,
                    );
                    blocks.push(WeightedBlock::new(
                        Component::Variational,
                        1.0 / k,
                        ade_block(form, &r2, &bx, &by, v, self.kappa_coefficient())?,
                    ));
                }
                self.push_space_time_constraints(&mut blocks, &weights)?;
            }
            (kind, Method::Pinn) => {
                let residual_pts = self.random_interior(n_r, &mut rng);
                let op = match kind {
                    ProblemKind::Approx => StrongOperator::Identity,
                    ProblemKind::Poisson1d => StrongOperator::NegLaplace1d,
                    ProblemKind::Poisson2d => StrongOperator::Laplace2d,
                    ProblemKind::AdeForward | ProblemKind::AdeInverse => {
                        StrongOperator::AdvectionDiffusion {
                            v: self.spec.advection.unwrap().0,
                            kappa: self.kappa_coefficient(),
                        }
                    }
                };
                let rhs: Vec<f64> = residual_pts
                    .iter()
                    .map(|p| match kind {
                        ProblemKind::Approx => self.spec.exact_value(p).unwrap(),
                        _ => f(p),
                    })
                    .collect();
                let residual = PointSet::new(residual_pts, rhs);
                match kind {
                    ProblemKind::AdeForward | ProblemKind::AdeInverse => {
                        blocks = pinn_blocks(
                            op,
                            &residual,
                            &PointSet::empty(),
                            &PointSet::empty(),
                            &PenaltyWeights {
                                tau_b: 0.0,
                                tau_0: 0.0,
                                ..weights
                            },
                        )?;
                        self.push_space_time_constraints(&mut blocks, &weights)?;
                    }
                    _ => {
                        let boundary = match self.spec.domain {
                            Domain::Interval(a, b) => vec![vec![a], vec![b]],
                            _ => {
                                let d = self.decomposition_2d()?;
                                perimeter_points(&d, c.loss.n_boundary.unwrap(), Some(&mut rng))
                            }
                        };
                        let bvals = boundary
                            .iter()
                            .map(|p| self.spec.boundary_value(p))
                            .collect();
                        let w = if kind == ProblemKind::Approx {
                            PenaltyWeights {
                                tau_b: 0.0,
                                ..weights
                            }
                        } else {
                            weights
                        };
                        blocks = pinn_blocks(
                            op,
                            &residual,
                            &PointSet::new(boundary, bvals),
                            &PointSet::empty(),
                            &PenaltyWeights { tau_0: 0.0, ..w },
                        )?;
                    }
                }
            }
        }
        if self.is_inverse() {
            blocks.push(data_block(&self.observations(seed)?, weights.tau_star)?);
        }
        AssembledLoss::new(arch, blocks, self.physical_params().len())
    }

    fn push_space_time_constraints(
        &self,
        blocks: &mut Vec<WeightedBlock>,
        weights: &PenaltyWeights,
    ) -> Result<()> {
        let (boundary, initial) = self.space_time_constraints();
        for (set, tau, comp) in [
            (boundary, weights.tau_b, Component::Boundary),
            (initial, weights.tau_0, Component::Initial),
        ] {
            if tau > 0.0 {
                if set.points.is_empty() {
                    return Err(cfg_err(format!(
                        "{} term has weight > 0 but no points",
                        comp.name()
                    )));
                }
                let w = tau / set.points.len() as f64;
                blocks.push(pointwise_block(comp, w, &set.points, &set.values)?);
            }
        }
        Ok(())
    }

    pub fn initial_params(&self, seed: u64) -> Result<ParamVector> {
        let arch = self.architecture();
        let net = init_mlp(&arch.layer_sizes, arch.activation, seed)?;
        let phys: Vec<f64> = self.physical_params().iter().map(|p| p.initial).collect();
        Ok(net.params().with_physical(&phys))
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let o = &self.config.optimizer;
        TrainConfig {
            learning_rate: o.learning_rate.unwrap(),
            iterations: o.iterations.unwrap(),
            seed,
            report_every: o.report_every.unwrap(),
            trainable_physical: self.physical_params(),
        }
    }

    /// Trains one seed; `observer` sees every trace entry as it is recorded.
    pub fn run(
        &self,
        seed: u64,
        observer: &mut dyn FnMut(&TraceEntry, &ParamVector),
    ) -> Result<RunOutput> {
        let loss = self.build_loss(seed)?;
        let out = train(
            &loss,
            self.initial_params(seed)?,
            &self.train_config(seed),
            observer,
        )?;
        let arch = self.architecture();
        let network = Mlp::from_params(&arch.layer_sizes, arch.activation, out.params.as_slice())?;
        let physical = out.params.as_slice()[network.param_count()..].to_vec();
        let final_loss = out.trace.last().map_or(f64::NAN, |e| e.loss.total);
        let evaluation = self.evaluate(&network, physical, final_loss)?;
        Ok(RunOutput {
            seed,
            params: out.params,
            network,
            trace: out.trace,
            evaluation,
        })
    }

    /// Trains every configured seed, in parallel.
    pub fn run_all(&self) -> Result<Vec<RunOutput>> {
        self.seeds()
            .par_iter()
            .map(|&s| self.run(s, &mut |_, _| {}))
            .collect()
    }

    /// Errors of `net` on the fixed evaluation grid.
    pub fn evaluate(&self, net: &Mlp, physical: Vec<f64>, final_loss: f64) -> Result<Evaluation> {
        let n = self.config.output.grid.unwrap();
        let bounds = self.spec.domain.bounds();
        let dim = self.spec.dim();
        let axis = |i: usize| -> Vec<f64> {
            (0..n)
                .map(|k| lin(bounds[i].0, bounds[i].1, k, n))
                .collect()
        };
        let coords: Vec<Vec<f64>> = if dim == 1 {
            axis(0).into_iter().map(|x| vec![x]).collect()
        } else {
            let (a0, a1) = (axis(0), axis(1));
            a0.iter()
                .flat_map(|&u| a1.iter().map(move |&v| vec![u, v]))
                .filter(|p| self.spec.domain.contains(p))
                .collect()
        };
        let flat: Vec<f64> = coords.iter().flatten().copied().collect();
        let pts = Array2::from_shape_vec((coords.len(), dim), flat).expect("grid points");
        let pass = ForwardPass::new(net, pts.view(), JetOrder::First)?;
        let pred = pass.slot(Slot::Value);
        let exact = self.spec.exact_trial();
        let exact_slots = match &exact {
            Some(e) => Some(crate::residuals::TrialFunction::slots(
                e,
                pts.view(),
                JetOrder::First,
            )?),
            None => None,
        };

        let mesh_box = self.mesh_box();
        let mut points = Vec::with_capacity(coords.len());
        let (mut linf, mut linf_mesh) = (0.0_f64, 0.0_f64);
        for (i, c) in coords.iter().enumerate() {
            let reference = match &exact_slots {
                Some(s) => s[[0, i]],
                None => self.spec.reference_value(c).unwrap_or(f64::NAN),
            };
            let error = (pred[i] - reference).abs();
            linf = linf.max(error);
            if c.iter()
                .zip(&mesh_box)
                .all(|(&v, &(a, b))| a <= v && v <= b)
            {
                linf_mesh = linf_mesh.max(error);
            }
            points.push(SolutionPoint {
                coords: c.clone(),
                prediction: pred[i],
                reference,
                error,
            });
        }

        let h1_semi = exact_slots.as_ref().map(|s| {
            let h: Vec<f64> = bounds
                .iter()
                .map(|&(a, b)| (b - a) / (n - 1) as f64)
                .collect();
            let on_edge = |v: f64, (a, b): (f64, f64)| v == a || v == b;
            let mut acc = 0.0;
            for (i, c) in coords.iter().enumerate() {
                let mut w: f64 = h.iter().product();
                for (k, &v) in c.iter().enumerate() {
                    if on_edge(v, bounds[k]) {
                        w *= 0.5;
                    }
                }
                let mut g2 = 0.0;
                for k in 0..dim {
                    let row = Slot::D1(k).index(dim);
                    g2 += (pass.output()[[row, i]] - s[[row, i]]).powi(2);
                }
                acc += w * g2;
            }
            acc.sqrt()
        });

        let spectrum = if self.config.output.spectrum.unwrap() && dim == 1 {
            Some(self.spectrum_of(net)?)
        } else {
            None
        };

        Ok(Evaluation {
            points,
            metrics: Metrics {
                linf,
                h1_semi,
                linf_mesh,
                final_loss,
                physical,
            },
            spectrum,
        })
    }

    /// Bounding box of the elements per axis.
    fn mesh_box(&self) -> Vec<(f64, f64)> {
        let m = &self.config.mesh;
        let span = |b: &Vec<f64>| (b[0], *b.last().unwrap());
        match (&m.boundaries, &m.x_boundaries, &m.y_boundaries) {
            (Some(b), _, _) => vec![span(b)],
            (_, Some(x), Some(y)) => vec![span(x), span(y)],
            _ => self.spec.domain.bounds(),
        }
    }

    /// Fourier magnitudes of exact and predicted samples on a periodic grid.
    fn spectrum_of(&self, net: &Mlp) -> Result<Vec<(usize, f64, f64)>> {
        const SAMPLES: usize = 1024;
        let (a, b) = self.spec.domain.bounds()[0];
        let xs: Vec<f64> = (0..SAMPLES)
            .map(|j| a + (b - a) * j as f64 / SAMPLES as f64)
            .collect();
        let exact: Vec<f64> = xs
            .iter()
            .map(|&x| self.spec.exact_value(&[x]).unwrap_or(f64::NAN))
            .collect();
        let pred = xs
            .iter()
            .map(|&x| net.forward(&[x]))
            .collect::<Result<Vec<f64>>>()?;
        let (se, sp) = (spectrum(&exact), spectrum(&pred));
        Ok(se
            .into_iter()
            .zip(sp)
            .enumerate()
            .map(|(k, (e, p))| (k, e, p))
            .collect())
    }
}

fn lin(a: f64, b: f64, i: usize, n: usize) -> f64 {
    if n == 1 {
        return a;
    }
    if i == n - 1 {
        return b;
    }
    a + (b - a) * i as f64 / (n - 1) as f64
}

/// The boundary of a 2D decomposition as one closed, counter-clockwise
/// polyline of maximal straight edges.
pub fn perimeter_loop(d: &Decomposition2D) -> Vec<[f64; 2]> {
    let mut segs = d.boundary_segments();
    let mut path = vec![segs[0].0, segs[0].1];
    segs.swap_remove(0);
    while !segs.is_empty() {
        let end = *path.last().unwrap();
        let i = segs
            .iter()
            .position(|s| s.0 == end)
            .expect("boundary segments form a closed loop");
        path.push(segs.swap_remove(i).1);
    }
    path.pop();
    // drop collinear interior vertices
    let n = path.len();
    let corners: Vec<[f64; 2]> = (0..n)
        .filter(|&i| {
            let (p, q, r) = (path[(i + n - 1) % n], path[i], path[(i + 1) % n]);
            let cross = (q[0] - p[0]) * (r[1] - q[1]) - (q[1] - p[1]) * (r[0] - q[0]);
            cross != 0.0
        })
        .map(|i| path[i])
        .collect();
    // start at the lowest, then leftmost corner
    let start = (0..corners.len())
        .min_by(|&i, &j| {
            let (a, b) = (corners[i], corners[j]);
            a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0]))
        })
        .unwrap();
    corners[start..]
        .iter()
        .chain(&corners[..start])
        .copied()
        .collect()
}

/// `n` points on the boundary of `d`: equispaced in arclength from a corner,
/// or uniformly random in arclength when `rng` is given.
pub fn perimeter_points(
    d: &Decomposition2D,
    n: usize,
    rng: Option<&mut ChaCha8Rng>,
) -> Vec<Vec<f64>> {
    let corners = perimeter_loop(d);
    let m = corners.len();
    let lengths: Vec<f64> = (0..m)
        .map(|i| {
            let (a, b) = (corners[i], corners[(i + 1) % m]);
            (b[0] - a[0]).abs() + (b[1] - a[1]).abs()
        })
        .collect();
    let total: f64 = lengths.iter().sum();
    let positions: Vec<f64> = match rng {
        None => (0..n).map(|i| total * i as f64 / n as f64).collect(),
        Some(r) => (0..n).map(|_| total * r.random::<f64>()).collect(),
    };
    positions
        .into_iter()
        .map(|mut s| {
            let mut i = 0;
            while i + 1 < m && s >= lengths[i] {
                s -= lengths[i];
                i += 1;
            }
            let (a, b) = (corners[i], corners[(i + 1) % m]);
            let t = s / lengths[i];
            vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect()
}

/// Parses a sweep axis `key=v1,v2,...`.
pub fn parse_axis(spec: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| cfg_err(format!("sweep axis `{spec}` is not of the form key=v1,v2")))?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if key.trim().is_empty() || values.is_empty() {
        return Err(cfg_err(format!(
            "sweep axis `{spec}` has no key or no values"
        )));
    }
    Ok((key.trim().to_string(), values))
}

fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(v) = raw.parse::<toml::Value>() {
        return v;
    }
    format!("x = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets the dotted `section.key` of a TOML configuration to `raw`
/// (integers, floats, booleans and bracketed arrays are recognised; anything
/// else is a string).
pub fn apply_override(config: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| cfg_err(format!("override key `{key}` must be section.field")))?;
    let mut value = parse_scalar(raw);
    // seeds and boundary lists are arrays; a single scalar means a one-element list
    if matches!(
        field,
        "seeds" | "boundaries" | "x_boundaries" | "y_boundaries" | "sensors"
    ) && !value.is_array()
    {
        value = toml::Value::Array(vec![value]);
    }
    if matches!(
        field,
        "learning_rate" | "tau_b" | "tau_0" | "tau_star" | "kappa_init"
    ) {
        if let toml::Value::Integer(i) = value {
            value = toml::Value::Float(i as f64);
        }
    }
    let entry = config
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let table = entry
        .as_table_mut()
        .ok_or_else(|| cfg_err(format!("`{section}` is not a section")))?;
    table.insert(field.to_string(), value);
    Ok(())
}

/// One cell of a sweep: the override values and the configuration they give.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub assignment: Vec<(String, String)>,
    pub config: ExperimentConfig,
}

/// Cross product of all axes over a base TOML configuration.
pub fn sweep_cells(base: &str, axes: &[(String, Vec<String>)]) -> Result<Vec<SweepCell>> {
    let table: toml::Table = base
        .parse()
        .map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
    let mut cells = vec![(Vec::new(), table)];
    for (key, values) in axes {
        let mut next = Vec::with_capacity(cells.len() * values.len());
        for (assign, t) in &cells {
            for v in values {
                let mut t = t.clone();
                apply_override(&mut t, key, v)?;
                let mut a: Vec<(String, String)> = assign.clone();
                a.push((key.clone(), v.clone()));
                next.push((a, t));
            }
        }
        cells = next;
    }
    cells
        .into_iter()
        .map(|(assignment, t)| {
            let config: ExperimentConfig = t
                .try_into()
                .map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
            Ok(SweepCell { assignment, config })
        })
        .collect()
}

/// Mean of a metric over runs, ignoring missing values.
pub fn mean<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (s, n) = values
        .into_iter()
        .filter(|v| !v.is_nan())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffengine::Objective;

    #[test]
    fn near_empty_config_resolves_to_problem_defaults() {
        let c = ExperimentConfig::from_toml("[problem]\nname = \"approx_smooth\"\n")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(c.network.depth, Some(4));
        assert_eq!(c.network.width, Some(20));
        assert_eq!(c.basis.count, Some(60));
        assert_eq!(c.quadrature.points, Some(80));
        assert_eq!(c.quadrature.family, Some(QuadratureFamily::GaussLobatto));
        assert_eq!(c.optimizer.learning_rate, Some(1e-3));
        assert_eq!(c.output.grid, Some(1001));
        assert_eq!(c.optimizer.seeds.as_ref().unwrap().len(), 8);
    }

    #[test]
    fn resolved_manifest_round_trips() {
        for name in [
            "poisson1d_steep",
            "poisson2d_lshape",
            "ade_inverse",
            "poisson2d_steep",
        ] {
            let c = ExperimentConfig::for_problem(name).resolve().unwrap();
            let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(again.resolve().unwrap(), c, "{name}");
        }
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            ExperimentConfig::from_toml("[problem]\nname = 3\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("[problem]\nname = \"x\"\n[bogus]\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::for_problem("nope").resolve(),
            Err(Error::UnknownProblem(_))
        ));
        let mut c = ExperimentConfig::for_problem("poisson1d_steep");
        c.basis.kind = Some(BasisKind::LegendreRaw);
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        let mut c = ExperimentConfig::for_problem("ade_forward");
        c.residuals.form = Some(VariationalForm::R3);
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn perimeter_points_on_square_and_lshape() {
        let sq = Decomposition2D::uniform(-1.0, 1.0, 2, 2).unwrap();
        let pts = perimeter_points(&sq, 80, None);
        assert_eq!(pts.len(), 80);
        assert_eq!(pts[0], vec![-1.0, -1.0]);
        let bottom = pts.iter().filter(|p| p[1] == -1.0 && p[0] < 1.0).count();
        assert_eq!(bottom, 20);
        let l = lshape_partition(true);
        assert_eq!(perimeter_loop(&l).len(), 6);
        for p in perimeter_points(&l, 120, None) {
            assert!(Domain::LShape.contains(&p));
            let on_edge = p[0].abs() == 1.0
                || p[1].abs() == 1.0
                || (p[0] == 0.0 && p[1] <= 0.0)
                || (p[1] == 0.0 && p[0] >= 0.0);
            assert!(on_edge, "{p:?}");
        }
    }

    #[test]
    fn sweep_cross_product() {
        let base = "[problem]\nname = \"approx_smooth\"\n";
        let axes = vec![
            parse_axis("network.depth=1,2,3").unwrap(),
            parse_axis("network.activation=sine,tanh").unwrap(),
        ];
        let cells = sweep_cells(base, &axes).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[5].config.network.depth, Some(3));
        assert_eq!(cells[5].config.network.activation, Some(Activation::Tanh));
        assert!(parse_axis("network.depth").is_err());
        let one = sweep_cells(base, &[parse_axis("optimizer.seeds=4").unwrap()]).unwrap();
        assert_eq!(one[0].config.optimizer.seeds, Some(vec![4]));
    }

    #[test]
    fn every_problem_builds_a_finite_loss() {
        for spec in crate::problems::registry() {
            for method in [Method::Vpinn, Method::Pinn] {
                let mut c = ExperimentConfig::for_problem(spec.name);
                c.residuals.method = Some(method);
                c.basis.count = Some(4);
                c.quadrature.points = Some(6);
                c.mesh.lshape = Some("coarse".into());
                if spec.dim() == 2 {
                    c.mesh.elements = Some(2);
                }
                let e = Experiment::new(&c).unwrap();
                let loss = e.build_loss(1).unwrap();
                let p = e.initial_params(1).unwrap();
                let b = loss.evaluate(&p).unwrap();
                assert!(
                    b.total.is_finite() && b.total > 0.0,
                    "{} {method:?}",
                    spec.name
                );
            }
        }
    }

    #[test]
    fn short_run_records_trace_and_metrics() {
        let mut c = ExperimentConfig::for_problem("approx_smooth");
        c.network.depth = Some(2);
        c.network.width = Some(8);
        c.basis.count = Some(10);
        c.quadrature.points = Some(20);
        c.optimizer.iterations = Some(50);
        c.optimizer.report_every = Some(10);
        c.output.grid = Some(101);
        let e = Experiment::new(&c).unwrap();
        let out = e.run(3, &mut |_, _| {}).unwrap();
        assert_eq!(out.trace.entries.len(), 6);
        assert_eq!(out.evaluation.points.len(), 101);
        assert!(out.evaluation.metrics.linf > 0.0);
        assert!(out.evaluation.metrics.h1_semi.unwrap() > 0.0);
        let spec = out.evaluation.spectrum.as_ref().unwrap();
        assert_eq!(spec.len(), 513);
        let again = e.run(3, &mut |_, _| {}).unwrap();
        assert_eq!(again.params, out.params);
    }
}
