//! Checks against the independent reference computations.

mod common;

use common::*;
use hpvpinn::basis::TestBasis;
use hpvpinn::experiment::Method;
use hpvpinn::problems::{find, lshape_corner, Domain};
use hpvpinn::quadrature::gauss_lobatto;
use hpvpinn::residuals::{poisson1d_residual, VariationalForm};
use hpvpinn_oracle::laplace_reference;

const FORMS: [VariationalForm; 3] = [
    VariationalForm::R1,
    VariationalForm::R2,
    VariationalForm::R3,
];

#[test]
fn vnn_and_vpinn_1d_gradients_match_finite_differences() {
    for seed in [1, 2, 3] {
        let e = small_experiment("approx_smooth", Method::Vpinn, None);
        assert!(gradient_mismatch(&e, seed) < 1e-5, "vnn seed {seed}");
        for form in FORMS {
            let e = small_experiment("poisson1d_steep", Method::Vpinn, Some(form));
            let m = gradient_mismatch(&e, seed);
            assert!(m < 1e-5, "{form:?} seed {seed}: {m:e}");
        }
    }
}

#[test]
fn vpinn_2d_gradients_match_finite_differences() {
    for seed in [1, 2, 3] {
        for form in FORMS {
            let e = small_experiment("poisson2d_steep", Method::Vpinn, Some(form));
            let m = gradient_mismatch(&e, seed);
            assert!(m < 1e-5, "{form:?} seed {seed}: {m:e}");
        }
    }
}

#[test]
fn pinn_and_inverse_gradients_match_finite_differences() {
    for seed in [1, 2, 3] {
        for problem in ["poisson1d_steep", "poisson2d_harmonic", "ade_forward"] {
            let e = small_experiment(problem, Method::Pinn, None);
            let m = gradient_mismatch(&e, seed);
            assert!(m < 1e-5, "pinn {problem} seed {seed}: {m:e}");
        }
        let e = small_experiment("ade_inverse", Method::Vpinn, None);
        let m = gradient_mismatch(&e, seed);
        assert!(m < 1e-5, "inverse seed {seed}: {m:e}");
    }
}

#[test]
fn quadrature_residuals_match_dense_integration() {
    let basis = TestBasis::compact_poisson(5).unwrap();
    let rule = gauss_lobatto(80)
        .unwrap()
        .map_to_element(-1.0, 1.0)
        .unwrap();
    let g = |x: f64| (3.0 * x).sin() + x * x;
    let f = |p: &[f64]| g(p[0]);
    for seed in [4, 5] {
        let net = seeded_net_1d(seed);
        for form in FORMS {
            let quad = poisson1d_residual(form, &net, &rule, &basis, &f).unwrap();
            let dense = dense_poisson_residuals(form, &net, &rule, &basis, &g);
            let d = max_abs_diff(quad.as_slice().unwrap(), &dense);
            assert!(d < 1e-6, "{form:?} seed {seed}: {d:e}");
        }
    }
}

#[test]
fn lshape_reference_matches_corner_function_away_from_corner() {
    let spec = find("poisson2d_lshape").unwrap();
    let corner = |x: f64, y: f64| lshape_corner(x, y);
    let grid = laplace_reference(|x, y| Domain::LShape.contains(&[x, y]), corner, 64);
    let mut worst: f64 = 0.0;
    for i in 0..=20 {
        for j in 0..=20 {
            let (x, y) = (-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64);
            if !Domain::LShape.contains(&[x, y]) || x.hypot(y) < 0.3 {
                continue;
            }
            let exact = spec.exact_value(&[x, y]).unwrap();
            worst = worst.max((grid.at(x, y) - exact).abs());
        }
    }
    assert!(worst < 2e-3, "five-point solution differs by {worst:e}");
}
