//! Registry of the benchmark problems: targets, exact solutions, forcings,
//! boundary data and default experiment settings.
//!
//! Exact solutions are written once over [`Real`] so the same code yields
//! plain values and exact derivatives. Forcings are derived by hand; the
//! tests compare each one with the jet of its exact solution.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use hpvpinn_oracle::{ade_reference, AdeGrid};

use crate::basis::BasisKind;
use crate::diffengine::{Jet, Real};
use crate::error::{contract, Error, Result};
use crate::loss::Observation;
use crate::network::Activation;
use crate::quadrature::QuadratureFamily;
use crate::residuals::{ExactTrial, JetField, VariationalForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Approx,
    Poisson1d,
    Poisson2d,
    AdeForward,
    AdeInverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval(f64, f64),
    Rectangle {
        x: (f64, f64),
        y: (f64, f64),
    },
    /// `[-1, 1]^2` without `(0, 1) x (-1, 0)`
    LShape,
    /// Inputs `(t, x)`.
    SpaceTime {
        t: (f64, f64),
        x: (f64, f64),
    },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval(..) => 1,
            _ => 2,
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let inside = |v: f64, (a, b): (f64, f64)| a <= v && v <= b;
        match *self {
            Domain::Interval(a, b) => inside(p[0], (a, b)),
            Domain::Rectangle { x, y } => inside(p[0], x) && inside(p[1], y),
            Domain::LShape => {
                inside(p[0], (-1.0, 1.0))
                    && inside(p[1], (-1.0, 1.0))
                    && !(p[0] > 0.0 && p[1] < 0.0)
            }
            Domain::SpaceTime { t, x } => inside(p[0], t) && inside(p[1], x),
        }
    }

    /// Bounding box per axis.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match *self {
            Domain::Interval(a, b) => vec![(a, b)],
            Domain::Rectangle { x, y } => vec![x, y],
            Domain::LShape => vec![(-1.0, 1.0), (-1.0, 1.0)],
            Domain::SpaceTime { t, x } => vec![t, x],
        }
    }
}

/// Default element layout of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshDefault {
    Boundaries(Vec<f64>),
    Grid { nx: usize, ny: usize },
    LShape { fine: bool },
}

/// Settings a near-empty experiment configuration resolves to.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDefaults {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub mesh: MeshDefault,
    pub basis_kind: BasisKind,
    pub test_count: usize,
    pub quadrature: QuadratureFamily,
    pub quadrature_points: usize,
    pub form: VariationalForm,
    pub tau_b: f64,
    pub tau_0: f64,
    pub tau_star: f64,
    pub n_boundary: usize,
    pub n_initial: usize,
    pub n_residual: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: &'static str,
    pub kind: ProblemKind,
    pub domain: Domain,
    /// Closed-form solution (or approximation target).
    pub exact: Option<JetField>,
    /// Right-hand side of the PDE.
    pub forcing: Option<fn(&[f64]) -> f64>,
    /// Points where the target jumps; quadrature is split there.
    pub discontinuities: &'static [f64],
    /// Advection speed and diffusivity of the space-time problems.
    pub advection: Option<(f64, f64)>,
    pub defaults: ProblemDefaults,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn exact_trial(&self) -> Option<ExactTrial> {
        self.exact.map(|f| ExactTrial::new(self.dim(), f))
    }

    pub fn exact_value(&self, p: &[f64]) -> Option<f64> {
        self.exact_trial().map(|e| e.jet(p).v)
    }

    /// Reference solution at `p`: the exact solution if known, otherwise the
    /// finite-difference reference of the space-time problems.
    pub fn reference_value(&self, p: &[f64]) -> Option<f64> {
        if let Some(v) = self.exact_value(p) {
            return Some(v);
        }
        match self.kind {
            ProblemKind::AdeForward | ProblemKind::AdeInverse => Some(ade_grid().at(p[0], p[1])),
            _ => None,
        }
    }

    /// Dirichlet data on the spatial boundary.
    pub fn boundary_value(&self, p: &[f64]) -> f64 {
        match self.kind {
            ProblemKind::AdeForward | ProblemKind::AdeInverse => 0.0,
            _ => self.exact_value(p).unwrap_or(0.0),
        }
    }

    /// Initial condition of the space-time problems.
    pub fn initial_value(&self, x: f64) -> f64 {
        -(PI * x).sin()
    }
}

fn tanh_sech2<R: Real>(z: R) -> R {
    let t = z.tanh();
    t * (R::cst(1.0) - t * t)
}

pub fn approx_smooth<R: Real>(x: R) -> R {
    x.scale(4.0 * PI).sin().scale(0.1) + x.scale(20.0).tanh()
}

/// `2 sin(4 pi x)` left of 0, `6 + e^{1.2x} sin(12 pi x)` right of it; the
/// mean of the one-sided limits at 0.
pub fn approx_jump<R: Real>(x: R) -> R {
    let v = x.value();
    if v < 0.0 {
        x.scale(4.0 * PI).sin().scale(2.0)
    } else if v > 0.0 {
        R::cst(6.0) + x.scale(1.2).exp() * x.scale(12.0 * PI).sin()
    } else {
        R::cst(3.0)
    }
}

pub fn approx_oob<R: Real>(x: R) -> R {
    x.scale(8.0 * PI).sin()
}

pub fn steep<R: Real>(x: R) -> R {
    x.scale(8.0 * PI).sin().scale(0.1) + x.scale(80.0).tanh()
}

pub fn steep_forcing(x: f64) -> f64 {
    0.1 * (8.0 * PI).powi(2) * (8.0 * PI * x).sin() + 2.0 * 6400.0 * tanh_sech2(80.0 * x)
}

pub fn boundary_layer<R: Real>(x: R) -> R {
    x.scale(5.0 * PI).sin().scale(0.1) + ((R::cst(0.01) - (x + R::cst(1.0))).scale(100.0)).exp()
}

pub fn boundary_layer_forcing(x: f64) -> f64 {
    0.1 * (5.0 * PI).powi(2) * (5.0 * PI * x).sin() - 1e4 * ((0.01 - (x + 1.0)) / 0.01).exp()
}

pub fn asym_steep<R: Real>(x: R) -> R {
    x.scale(8.0 * PI).sin().scale(0.1) + (x + R::cst(0.1)).scale(80.0).tanh()
}

pub fn asym_steep_forcing(x: f64) -> f64 {
    0.1 * (8.0 * PI).powi(2) * (8.0 * PI * x).sin() + 2.0 * 6400.0 * tanh_sech2(80.0 * (x + 0.1))
}

pub fn harmonic<R: Real>(x: R, y: R) -> R {
    let a = x + R::cst(3.0);
    let b = y + R::cst(1.0);
    b.scale(2.0) / (a * a + b * b)
}

pub fn steep_2d<R: Real>(x: R, y: R) -> R {
    (x.scale(2.0 * PI).sin().scale(0.1) + x.scale(10.0).tanh()) * y.scale(2.0 * PI).sin()
}

/// `u_xx + u_yy` of [`steep_2d`].
pub fn steep_2d_forcing(x: f64, y: f64) -> f64 {
    let g = 0.1 * (2.0 * PI * x).sin() + (10.0 * x).tanh();
    let g2 = -0.1 * (2.0 * PI).powi(2) * (2.0 * PI * x).sin() - 200.0 * tanh_sech2(10.0 * x);
    let s = (2.0 * PI * y).sin();
    g2 * s - g * (2.0 * PI).powi(2) * s
}

/// `r^{2/3} sin(2 theta / 3)` with `theta` in `[0, 2 pi)`: harmonic on the
/// L-shape and zero on both edges meeting at the reentrant corner.
pub fn lshape_corner<R: Real>(x: R, y: R) -> R {
    if x.value() == 0.0 && y.value() == 0.0 {
        return R::cst(0.0);
    }
    let mut theta = y.atan2(x);
    if theta.value() < 0.0 {
        theta = theta + R::cst(2.0 * PI);
    }
    let r2 = x * x + y * y;
    r2.powf(1.0 / 3.0) * theta.scale(2.0 / 3.0).sin()
}

macro_rules! field_1d {
    ($name:ident, $f:ident) => {
        fn $name(x: &[Jet<2>]) -> Jet<2> {
            $f(x[0])
        }
    };
}

macro_rules! field_2d {
    ($name:ident, $f:ident) => {
        fn $name(x: &[Jet<2>]) -> Jet<2> {
            $f(x[0], x[1])
        }
    };
}

field_1d!(approx_smooth_field, approx_smooth);
field_1d!(approx_jump_field, approx_jump);
field_1d!(approx_oob_field, approx_oob);
field_1d!(steep_field, steep);
field_1d!(boundary_layer_field, boundary_layer);
field_1d!(asym_steep_field, asym_steep);
field_2d!(harmonic_field, harmonic);
field_2d!(steep_2d_field, steep_2d);
field_2d!(lshape_field, lshape_corner);

pub const ADE_VELOCITY: f64 = 1.0;
pub const ADE_KAPPA: f64 = 0.1 / PI;
/// Reference grid resolution `(nx, nt)`.
pub const ADE_REFERENCE_GRID: (usize, usize) = (2001, 4001);

/// Crank-Nicolson reference of the advection-diffusion problem, computed once.
pub fn ade_grid() -> &'static AdeGrid {
    static GRID: OnceLock<AdeGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        ade_reference(
            ADE_VELOCITY,
            ADE_KAPPA,
            ADE_REFERENCE_GRID.0,
            ADE_REFERENCE_GRID.1,
        )
    })
}

fn vnn_defaults(mesh: Vec<f64>) -> ProblemDefaults {
    ProblemDefaults {
        hidden: vec![20; 4],
        activation: Activation::Tanh,
        mesh: MeshDefault::Boundaries(mesh),
        basis_kind: BasisKind::LegendreRaw,
        test_count: 60,
        quadrature: QuadratureFamily::GaussLobatto,
        quadrature_points: 80,
        form: VariationalForm::R1,
        tau_b: 0.0,
        tau_0: 0.0,
        tau_star: 0.0,
        n_boundary: 0,
        n_initial: 0,
        n_residual: 500,
        iterations: 50_000,
        learning_rate: 1e-3,
        seeds: (1..=8).collect(),
    }
}

fn poisson1d_defaults(mesh: Vec<f64>) -> ProblemDefaults {
    ProblemDefaults {
        activation: Activation::Sine,
        basis_kind: BasisKind::CompactPoisson,
        tau_b: 1.0,
        n_boundary: 2,
        iterations: 20_000,
        ..vnn_defaults(mesh)
    }
}

fn poisson2d_defaults(mesh: MeshDefault, width: usize) -> ProblemDefaults {
    ProblemDefaults {
        hidden: vec![width; 3],
        activation: Activation::Tanh,
        mesh,
        basis_kind: BasisKind::CompactPoisson,
        test_count: 5,
        quadrature: QuadratureFamily::GaussLegendre,
        quadrature_points: 10,
        form: VariationalForm::R2,
        tau_b: 10.0,
        tau_0: 0.0,
        tau_star: 0.0,
        n_boundary: 80,
        n_initial: 0,
        n_residual: 100,
        iterations: 10_000,
        learning_rate: 1e-3,
        seeds: (1..=8).collect(),
    }
}

fn ade_defaults(
    n_boundary: usize,
    tau_star: f64,
    cells: usize,
    iterations: usize,
) -> ProblemDefaults {
    ProblemDefaults {
        iterations,
        form: VariationalForm::R1,
        tau_0: 10.0,
        tau_star,
        n_boundary,
        n_initial: 80,
        n_residual: 1000,
        seeds: (1..=10).collect(),
        ..poisson2d_defaults(
            MeshDefault::Grid {
                nx: cells,
                ny: cells,
            },
            5,
        )
    }
}

/// All registered problems.
pub fn registry() -> Vec<ProblemSpec> {
    let unit = Domain::Interval(-1.0, 1.0);
    let square = Domain::Rectangle {
        x: (-1.0, 1.0),
        y: (-1.0, 1.0),
    };
    let space_time = Domain::SpaceTime {
        t: (0.0, 1.0),
        x: (-1.0, 1.0),
    };
    vec![
        ProblemSpec {
            name: "approx_smooth",
            kind: ProblemKind::Approx,
            domain: unit,
            exact: Some(approx_smooth_field),
            forcing: None,
            discontinuities: &[],
            advection: None,
            defaults: vnn_defaults(vec![-1.0, 1.0]),
        },
        ProblemSpec {
            name: "approx_jump",
            kind: ProblemKind::Approx,
            domain: unit,
            exact: Some(approx_jump_field),
            forcing: None,
            discontinuities: &[0.0],
            advection: None,
            defaults: vnn_defaults(vec![-1.0, 1.0]),
        },
        ProblemSpec {
            name: "approx_oob",
            kind: ProblemKind::Approx,
            domain: unit,
            exact: Some(approx_oob_field),
            forcing: None,
            discontinuities: &[],
            advection: None,
            defaults: vnn_defaults(vec![-0.2, 0.2]),
        },
        ProblemSpec {
            name: "poisson1d_steep",
            kind: ProblemKind::Poisson1d,
            domain: unit,
            exact: Some(steep_field),
            forcing: Some(|x| steep_forcing(x[0])),
            discontinuities: &[],
            advection: None,
            defaults: poisson1d_defaults(vec![-1.0, -0.1, 0.1, 1.0]),
        },
        ProblemSpec {
            name: "poisson1d_bl",
            kind: ProblemKind::Poisson1d,
            domain: unit,
            exact: Some(boundary_layer_field),
            forcing: Some(|x| boundary_layer_forcing(x[0])),
            discontinuities: &[],
            advection: None,
            defaults: poisson1d_defaults(vec![-1.0, 1.0]),
        },
        ProblemSpec {
            name: "poisson1d_asym",
            kind: ProblemKind::Poisson1d,
            domain: unit,
            exact: Some(asym_steep_field),
            forcing: Some(|x| asym_steep_forcing(x[0])),
            discontinuities: &[],
            advection: None,
            defaults: poisson1d_defaults(vec![-1.0, -0.05, 0.15, 1.0]),
        },
        ProblemSpec {
            name: "poisson2d_harmonic",
            kind: ProblemKind::Poisson2d,
            domain: square,
            exact: Some(harmonic_field),
            forcing: Some(|_| 0.0),
            discontinuities: &[],
            advection: None,
            defaults: poisson2d_defaults(MeshDefault::Grid { nx: 1, ny: 1 }, 5),
        },
        ProblemSpec {
            name: "poisson2d_steep",
            kind: ProblemKind::Poisson2d,
            domain: square,
            exact: Some(steep_2d_field),
            forcing: Some(|p| steep_2d_forcing(p[0], p[1])),
            discontinuities: &[],
            advection: None,
            defaults: poisson2d_defaults(MeshDefault::Grid { nx: 8, ny: 8 }, 20),
        },
        ProblemSpec {
            name: "poisson2d_lshape",
            kind: ProblemKind::Poisson2d,
            domain: Domain::LShape,
            exact: Some(lshape_field),
            forcing: Some(|_| 0.0),
            discontinuities: &[],
            advection: None,
            defaults: ProblemDefaults {
                n_boundary: 120,
                ..poisson2d_defaults(MeshDefault::LShape { fine: true }, 20)
            },
        },
        ProblemSpec {
            name: "ade_forward",
            kind: ProblemKind::AdeForward,
            domain: space_time,
            exact: None,
            forcing: Some(|_| 0.0),
            discontinuities: &[],
            advection: Some((ADE_VELOCITY, ADE_KAPPA)),
            defaults: ade_defaults(80, 0.0, 2, 10_000),
        },
        ProblemSpec {
            name: "ade_inverse",
            kind: ProblemKind::AdeInverse,
            domain: space_time,
            exact: None,
            forcing: Some(|_| 0.0),
            discontinuities: &[],
            advection: Some((ADE_VELOCITY, ADE_KAPPA)),
            defaults: ade_defaults(160, 10.0, 1, 100_000),
        },
    ]
}

pub fn find(name: &str) -> Result<ProblemSpec> {
    registry()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))
}

/// `count_per_sensor` samples of the reference solution at uniformly random
/// times for each sensor location.
pub fn observations_for_inverse(
    spec: &ProblemSpec,
    sensor_xs: &[f64],
    count_per_sensor: usize,
    seed: u64,
) -> Result<Vec<Observation>> {
    let Domain::SpaceTime { t, x } = spec.domain else {
        return Err(contract(format!(
            "{} has no space-time reference",
            spec.name
        )));
    };
    if let Some(&bad) = sensor_xs.iter().find(|&&s| !(x.0 <= s && s <= x.1)) {
        return Err(contract(format!(
            "sensor at x = {bad} outside [{}, {}]",
            x.0, x.1
        )));
    }
    let grid = ade_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sensor_xs.len() * count_per_sensor);
    for &xs in sensor_xs {
        for _ in 0..count_per_sensor {
            let ts = t.0 + (t.1 - t.0) * rng.random::<f64>();
            out.push(Observation {
                t: ts,
                x: xs,
                value: grid.at(ts, xs),
            });
        }
    }
    Ok(out)
}
