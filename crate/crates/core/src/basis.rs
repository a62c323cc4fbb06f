//! Legendre polynomials and element-local test functions.
//!
//! Values come from the Bonnet recurrence and derivatives from
//! `P'_{n+1} = P'_{n-1} + (2n+1) P_n` and `P''_{n+1} = P''_{n-1} + (2n+1) P'_n`,
//! which stay well conditioned at `+-1` where the usual `1 - x^2` forms divide
//! by zero. At `+-1` every recurrence step is exact in floating point, so the
//! compact test functions vanish there exactly.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

const XI_SLACK: f64 = 1e-12;

/// `(P_n, P'_n, P''_n)` at `x`.
pub fn legendre_triple(n: usize, x: f64) -> (f64, f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    let (mut s0, mut s1) = (0.0, 0.0);
    if n == 0 {
        return (p0, d0, s0);
    }
    for k in 1..n {
        let kf = k as f64;
        let c = 2.0 * kf + 1.0;
        let p2 = (c * x * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + c * p1;
        let s2 = s0 + c * d1;
        (p0, p1) = (p1, p2);
        (d0, d1) = (d1, d2);
        (s0, s1) = (s1, s2);
    }
    (p1, d1, s1)
}

fn check_xi(xi: f64) -> Result<()> {
    if xi.abs() <= 1.0 + XI_SLACK {
        Ok(())
    } else {
        Err(contract(format!(
            "reference coordinate {xi} outside [-1, 1]"
        )))
    }
}

fn pick(triple: (f64, f64, f64), order: usize) -> Result<f64> {
    match order {
        0 => Ok(triple.0),
        1 => Ok(triple.1),
        2 => Ok(triple.2),
        _ => Err(contract(format!("derivative order {order} not in 0..=2"))),
    }
}

/// `d^order/dxi^order P_k(xi)`.
pub fn legendre(k: usize, xi: f64, order: usize) -> Result<f64> {
    check_xi(xi)?;
    pick(legendre_triple(k, xi), order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// `v_k = P_{k-1}`
    LegendreRaw,
    /// `phi_k = P_{k+1} - P_{k-1}`, vanishing at both element endpoints.
    CompactPoisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestBasis {
    pub kind: BasisKind,
    pub count: usize,
}

/// Test-function values and reference-coordinate derivatives at a set of
/// nodes, each `K x Q` (row `k - 1`, column node).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTable {
    pub value: Array2<f64>,
    pub d1: Array2<f64>,
    pub d2: Array2<f64>,
}

impl TestBasis {
    pub fn new(kind: BasisKind, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(contract("test basis needs at least one function"));
        }
        Ok(Self { kind, count })
    }

    pub fn legendre_raw(count: usize) -> Result<Self> {
        Self::new(BasisKind::LegendreRaw, count)
    }

    pub fn compact_poisson(count: usize) -> Result<Self> {
        Self::new(BasisKind::CompactPoisson, count)
    }

    fn triple(&self, k: usize, xi: f64) -> (f64, f64, f64) {
        match self.kind {
            BasisKind::LegendreRaw => legendre_triple(k - 1, xi),
            BasisKind::CompactPoisson => {
                let a = legendre_triple(k + 1, xi);
                let b = legendre_triple(k - 1, xi);
                (a.0 - b.0, a.1 - b.1, a.2 - b.2)
            }
        }
    }

    /// `d^order/dxi^order` of the `k`-th test function, `k` in `1..=K`.
    pub fn test_fn(&self, k: usize, xi: f64, order: usize) -> Result<f64> {
        if k == 0 || k > self.count {
            return Err(contract(format!(
                "test function index {k} not in 1..={}",
                self.count
            )));
        }
        check_xi(xi)?;
        pick(self.triple(k, xi), order)
    }

    /// All test functions and their first two derivatives at `xis`.
    pub fn table(&self, xis: &[f64]) -> Result<BasisTable> {
        let shape = (self.count, xis.len());
        let mut t = BasisTable {
            value: Array2::zeros(shape),
            d1: Array2::zeros(shape),
            d2: Array2::zeros(shape),
        };
        for (q, &xi) in xis.iter().enumerate() {
            check_xi(xi)?;
            for k in 1..=self.count {
                let (v, d1, d2) = self.triple(k, xi);
                t.value[[k - 1, q]] = v;
                t.d1[[k - 1, q]] = d1;
                t.d2[[k - 1, q]] = d2;
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    #[test]
    fn low_degree_closed_forms() {
        for xi in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_eq!(legendre(0, xi, 0).unwrap(), 1.0);
            assert_eq!(legendre(0, xi, 1).unwrap(), 0.0);
            assert_eq!(legendre(1, xi, 0).unwrap(), xi);
        }
        assert_eq!(legendre(2, 0.5, 0).unwrap(), -0.125);
        assert_eq!(legendre(2, 0.5, 1).unwrap(), 1.5);
        assert_eq!(legendre(2, 0.5, 2).unwrap(), 3.0);
        let x = 0.4_f64;
        let p3 = 0.5 * (5.0 * x.powi(3) - 3.0 * x);
        assert!((legendre(3, x, 0).unwrap() - p3).abs() < 1e-15);
        assert!((legendre(3, x, 2).unwrap() - 15.0 * x).abs() < 1e-14);
    }

    #[test]
    fn endpoint_values() {
        for n in 0..60 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let (p, d, s) = legendre_triple(n, 1.0);
            let nf = n as f64;
            assert_eq!(p, 1.0);
            assert_eq!(d, nf * (nf + 1.0) / 2.0);
            assert_eq!(s, (nf - 1.0) * nf * (nf + 1.0) * (nf + 2.0) / 8.0);
            assert_eq!(legendre_triple(n, -1.0).0, sign);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(legendre(2, 1.1, 0).is_err());
        assert!(legendre(2, 0.0, 3).is_err());
        assert!(legendre(2, 1.0 + 1e-13, 0).is_ok());
        let b = TestBasis::compact_poisson(3).unwrap();
        assert!(b.test_fn(0, 0.0, 0).is_err());
        assert!(b.test_fn(4, 0.0, 0).is_err());
        assert!(TestBasis::legendre_raw(0).is_err());
    }

    #[test]
    fn orthogonality() {
        let rule = gauss_legendre(12).unwrap();
        let i = rule.integrate(|x| legendre(3, x, 0).unwrap() * legendre(5, x, 0).unwrap());
        assert!(i.abs() <= 1e-14);
        let rule = gauss_legendre(21).unwrap();
        for i in 0..=20 {
            for j in 0..=20 {
                let v = rule.integrate(|x| legendre_triple(i, x).0 * legendre_triple(j, x).0);
                let e = if i == j {
                    2.0 / (2 * i + 1) as f64
                } else {
                    0.0
                };
                assert!((v - e).abs() <= 1e-13, "i={i} j={j}");
            }
        }
    }

    #[test]
    fn compact_functions_vanish_at_endpoints() {
        let b = TestBasis::compact_poisson(60).unwrap();
        for k in 1..=60 {
            assert_eq!(b.test_fn(k, -1.0, 0).unwrap(), 0.0);
            assert_eq!(b.test_fn(k, 1.0, 0).unwrap(), 0.0);
        }
        assert_eq!(b.test_fn(1, 0.0, 0).unwrap(), -1.5);
        let raw = TestBasis::legendre_raw(4).unwrap();
        for xi in [-1.0, 0.2, 1.0] {
            assert_eq!(raw.test_fn(1, xi, 0).unwrap(), 1.0);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for kind in [BasisKind::LegendreRaw, BasisKind::CompactPoisson] {
            let b = TestBasis::new(kind, 12).unwrap();
            for k in 1..=12 {
                for xi in [-0.9, -0.41, 0.0, 0.33, 0.87] {
                    let f = |x| b.test_fn(k, x, 0).unwrap();
                    let g = |x| b.test_fn(k, x, 1).unwrap();
                    let fd1 = (f(xi + h) - f(xi - h)) / (2.0 * h);
                    let fd2 = (g(xi + h) - g(xi - h)) / (2.0 * h);
                    let d1 = b.test_fn(k, xi, 1).unwrap();
                    let d2 = b.test_fn(k, xi, 2).unwrap();
                    assert!(
                        (d1 - fd1).abs() <= 1e-8 * d1.abs().max(1.0),
                        "{kind:?} k={k}"
                    );
                    assert!(
                        (d2 - fd2).abs() <= 1e-7 * d2.abs().max(1.0),
                        "{kind:?} k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn table_matches_pointwise() {
        let b = TestBasis::compact_poisson(5).unwrap();
        let xis = [-1.0, -0.2, 0.6, 1.0];
        let t = b.table(&xis).unwrap();
        for k in 1..=5 {
            for (q, &xi) in xis.iter().enumerate() {
                assert_eq!(t.value[[k - 1, q]], b.test_fn(k, xi, 0).unwrap());
                assert_eq!(t.d1[[k - 1, q]], b.test_fn(k, xi, 1).unwrap());
                assert_eq!(t.d2[[k - 1, q]], b.test_fn(k, xi, 2).unwrap());
            }
        }
    }
}
