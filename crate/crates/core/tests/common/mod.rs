//! Shared helpers for the integration and acceptance tests.
#![allow(dead_code)]

use ndarray::Array2;

use hpvpinn::basis::TestBasis;
use hpvpinn::diffengine::{ForwardPass, JetOrder, Objective, ParamVector};
use hpvpinn::experiment::{Experiment, ExperimentConfig, Method};
use hpvpinn::network::{init_mlp, Activation, Mlp};
use hpvpinn::quadrature::ElementRule;
use hpvpinn::residuals::VariationalForm;
use hpvpinn_oracle::{dense_integral, fd_gradient};

/// A cheap configuration of `problem`: tiny network, few test functions and
/// quadrature points, two elements per axis in 2D.
pub fn small_experiment(
    problem: &str,
    method: Method,
    form: Option<VariationalForm>,
) -> Experiment {
    let mut c = ExperimentConfig::for_problem(problem);
    c.network.depth = Some(2);
    c.network.width = Some(6);
    c.basis.count = Some(4);
    c.quadrature.points = Some(8);
    c.residuals.method = Some(method);
    c.residuals.form = form;
    c.loss.n_residual = Some(40);
    c.loss.n_boundary = Some(16);
    c.loss.n_initial = Some(10);
    c.mesh.lshape = Some("coarse".into());
    if problem.starts_with("poisson2d") || problem.starts_with("ade") {
        c.mesh.elements = Some(2);
    }
    Experiment::new(&c).expect("small configuration resolves")
}

/// Relative 2-norm distance between the analytic gradient of the
/// experiment's loss and a central-difference gradient, at the network
/// initialised with `seed` (physical parameters perturbed away from their
/// initial value so they carry a nonzero gradient).
pub fn gradient_mismatch(exp: &Experiment, seed: u64) -> f64 {
    let loss = exp.build_loss(seed).unwrap();
    let mut p = exp.initial_params(seed).unwrap();
    let n_net = loss.network_param_count();
    for v in &mut p.as_mut_slice()[n_net..] {
        *v = 0.3;
    }
    let (_, grad) = loss.evaluate_with_gradient(&p).unwrap();
    let f = |x: &[f64]| loss.evaluate(&ParamVector::new(x.to_vec())).unwrap().total;
    let fd = fd_gradient(f, p.as_slice(), 1e-6);
    let num: f64 = grad
        .as_slice()
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

/// A seeded sine network on one input.
pub fn seeded_net_1d(seed: u64) -> Mlp {
    init_mlp(&[1, 10, 10, 1], Activation::Sine, seed).unwrap()
}

/// Network value, first and second derivative on `n + 1` equispaced points
/// of `[a, b]`.
pub fn net_on_grid(net: &Mlp, a: f64, b: f64, n: usize) -> [Vec<f64>; 3] {
    let h = (b - a) / n as f64;
    let pts = Array2::from_shape_fn((n + 1, 1), |(i, _)| a + i as f64 * h);
    let pass = ForwardPass::new(net, pts.view(), JetOrder::Second).unwrap();
    let out = pass.output();
    [
        out.row(0).to_vec(),
        out.row(1).to_vec(),
        out.row(2).to_vec(),
    ]
}

/// Brute-force 1D Poisson residuals of `net` on the element of `rule`:
/// every integral is a 20000-panel trapezoid sum.
pub fn dense_poisson_residuals(
    form: VariationalForm,
    net: &Mlp,
    rule: &ElementRule,
    basis: &TestBasis,
    f: &dyn Fn(f64) -> f64,
) -> Vec<f64> {
    const PANELS: usize = 20_000;
    let (a, b) = (rule.a, rule.b);
    let jac = 2.0 / (b - a);
    let h = (b - a) / PANELS as f64;
    let [u, du, d2u] = net_on_grid(net, a, b, PANELS);
    let idx = |x: f64| ((x - a) / h).round() as usize;
    let xi = |x: f64| (2.0 * x - a - b) / (b - a);
    (1..=basis.count)
        .map(|k| {
            let phi = |x: f64, order: usize| {
                basis.test_fn(k, xi(x), order).unwrap() * jac.powi(order as i32)
            };
            let forcing = dense_integral(|x| f(x) * phi(x, 0), a, b, PANELS);
            let lhs = match form {
                VariationalForm::R1 => -dense_integral(|x| d2u[idx(x)] * phi(x, 0), a, b, PANELS),
                VariationalForm::R2 => dense_integral(|x| du[idx(x)] * phi(x, 1), a, b, PANELS),
                VariationalForm::R3 => {
                    -dense_integral(|x| u[idx(x)] * phi(x, 2), a, b, PANELS) + u[PANELS] * phi(b, 1)
                        - u[0] * phi(a, 1)
                }
            };
            lhs - forcing
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
