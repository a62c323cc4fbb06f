//! Property tests of the numerical building blocks.

mod common;

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use hpvpinn::basis::TestBasis;
use hpvpinn::diffengine::{ForwardPass, JetOrder, Objective, Slot};
use hpvpinn::experiment::{Experiment, ExperimentConfig};
use hpvpinn::loss::Component;
use hpvpinn::network::{init_mlp, Activation};
use hpvpinn::quadrature::{gauss_legendre, gauss_lobatto};
use hpvpinn::residuals::{poisson1d_block, VariationalForm};

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_integral(coeffs: &[f64], a: f64, b: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c * (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k + 1) as f64)
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn gauss_legendre_is_exact_on_mapped_polynomials(
        q in 1usize..12,
        coeffs in prop::collection::vec(-1.0f64..1.0, 24),
        a in -2.0f64..0.0,
        len in 0.1f64..2.0,
    ) {
        let deg = 2 * q - 1;
        let c = &coeffs[..=deg.min(23)];
        let b = a + len;
        let rule = gauss_legendre(q).unwrap().map_to_element(a, b).unwrap();
        let got = rule.integrate(|x| poly(c, x));
        let want = poly_integral(c, a, b);
        prop_assert!((got - want).abs() <= 1e-11 * (1.0 + want.abs()), "{got} vs {want}");
    }

    #[test]
    fn gauss_lobatto_is_exact_and_symmetric(
        q in 2usize..14,
        coeffs in prop::collection::vec(-1.0f64..1.0, 26),
    ) {
        let deg = 2 * q - 3;
        let c = &coeffs[..=deg];
        let r = gauss_lobatto(q).unwrap();
        let got = r.integrate(|x| poly(c, x));
        let want = poly_integral(c, -1.0, 1.0);
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
        for i in 0..q {
            prop_assert!((r.nodes[i] + r.nodes[q - 1 - i]).abs() < 1e-14);
            prop_assert!((r.weights[i] - r.weights[q - 1 - i]).abs() < 1e-14);
        }
    }

    #[test]
    fn jet_values_agree_with_plain_forward(seed in 0u64..1000, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let net = init_mlp(&[2, 7, 7, 1], Activation::Tanh, seed).unwrap();
        let pts = Array2::from_shape_vec((1, 2), vec![x, y]).unwrap();
        let pass = ForwardPass::new(&net, pts.view(), JetOrder::Second).unwrap();
        let plain = net.forward(&[x, y]).unwrap();
        prop_assert!((pass.slot(Slot::Value)[0] - plain).abs() < 1e-13);
        let h = 1e-5;
        let fd = (net.forward(&[x + h, y]).unwrap() - net.forward(&[x - h, y]).unwrap()) / (2.0 * h);
        prop_assert!((pass.slot(Slot::D1(0))[0] - fd).abs() < 1e-7);
        let fd2 = (net.forward(&[x, y + h]).unwrap() - 2.0 * plain + net.forward(&[x, y - h]).unwrap()) / (h * h);
        prop_assert!((pass.slot(Slot::D2(1))[0] - fd2).abs() < 1e-4);
    }

    #[test]
    fn jet_derivatives_are_linear_in_the_output_layer(seed in 0u64..1000, s in -3.0f64..3.0, x in -1.0f64..1.0) {
        let net = init_mlp(&[1, 5, 1], Activation::Sine, seed).unwrap();
        let mut scaled = net.clone();
        let mut p = net.params();
        let n = p.len();
        for v in &mut p.as_mut_slice()[n - 6..n - 1] {
            *v *= s;
        }
        scaled.set_params(p.as_slice()).unwrap();
        let pts = Array2::from_elem((1, 1), x);
        let a = ForwardPass::new(&net, pts.view(), JetOrder::Second).unwrap();
        let b = ForwardPass::new(&scaled, pts.view(), JetOrder::Second).unwrap();
        for slot in [Slot::D1(0), Slot::D2(0)] {
            prop_assert!((b.slot(slot)[0] - s * a.slot(slot)[0]).abs() < 1e-12 * (1.0 + a.slot(slot)[0].abs()));
        }
    }

    #[test]
    fn residuals_are_affine_in_the_trial_slots(
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        seed in 0u64..1000,
        form_idx in 0usize..3,
    ) {
        let form = [VariationalForm::R1, VariationalForm::R2, VariationalForm::R3][form_idx];
        let rule = gauss_lobatto(12).unwrap().map_to_element(-0.5, 0.25).unwrap();
        let basis = TestBasis::compact_poisson(5).unwrap();
        let block = poisson1d_block(form, &rule, &basis, &|p: &[f64]| p[0].sin()).unwrap();
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a = Array2::from_shape_fn((3, block.points.nrows()), |_| next());
        let b = Array2::from_shape_fn((3, block.points.nrows()), |_| next());
        let combo = &a * alpha + &b * beta;
        let ra = block.residual_from_slots(a.view(), &[]);
        let rb = block.residual_from_slots(b.view(), &[]);
        let rc = block.residual_from_slots(combo.view(), &[]);
        let rhs: &Array1<f64> = &block.rhs;
        let want = (&ra + rhs) * alpha + (&rb + rhs) * beta - rhs;
        for (x, y) in rc.iter().zip(want.iter()) {
            prop_assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn penalty_weight_scales_its_component_exactly(c in 0.1f64..50.0, seed in 0u64..100) {
        let base = ExperimentConfig::for_problem("poisson2d_harmonic");
        let make = |tau: f64| {
            let mut cfg = base.clone();
            cfg.mesh.elements = Some(1);
            cfg.network.width = Some(3);
            cfg.loss.tau_b = Some(tau);
            Experiment::new(&cfg).unwrap()
        };
        let (e1, e2) = (make(2.0), make(2.0 * c));
        let p = e1.initial_params(seed).unwrap();
        let l1 = e1.build_loss(seed).unwrap().evaluate(&p).unwrap();
        let l2 = e2.build_loss(seed).unwrap().evaluate(&p).unwrap();
        let (b1, b2) = (l1.get(Component::Boundary), l2.get(Component::Boundary));
        prop_assert!((b2 - c * b1).abs() <= 1e-12 * b2.abs());
        prop_assert_eq!(l1.variational, l2.variational);
    }
}
