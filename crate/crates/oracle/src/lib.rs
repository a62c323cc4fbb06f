//! Brute-force reference computations.
//!
//! Nothing in here shares code with the main solver crate: the integrators,
//! difference formulas and grid solvers are written from scratch so that they
//! can serve as independent checks on the quadrature-based assembly, the
//! reverse-mode gradients and the trained solutions.

mod fd;
mod grid;
mod spectrum;

pub use fd::{ade_reference, fd_gradient, laplace_reference, AdeGrid, LaplaceGrid};
pub use grid::write_grid_csv;
pub use spectrum::spectrum;

/// Composite trapezoid rule with `n` equal panels on `[a, b]`.
///
/// Panics if `n < 10`; the oracle is meant for dense integration only.
pub fn dense_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 10, "dense_integral needs at least 10 panels, got {n}");
    let h = (b - a) / n as f64;
    let mut sum = 0.5 * (f(a) + f(b));
    for i in 1..n {
        sum += f(a + i as f64 * h);
    }
    sum * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_constant_is_exact() {
        assert_eq!(dense_integral(|_| 1.0, 0.0, 1.0, 10), 1.0);
    }

    #[test]
    fn trapezoid_square() {
        let v = dense_integral(|x| x * x, -1.0, 1.0, 20000);
        assert!((v - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    #[should_panic]
    fn trapezoid_rejects_coarse_grids() {
        dense_integral(|x| x, 0.0, 1.0, 5);
    }
}
