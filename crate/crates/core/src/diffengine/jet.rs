//! Truncated second-order Taylor arithmetic in several input directions.
//!
//! A [`Jet`] carries a value together with its first derivative and its pure
//! second derivative along each of `D` input axes. Mixed partials are never
//! formed: the product and chain rules for `d^2/dx_i^2` only ever involve
//! derivatives along the same axis `i`, so each axis propagates independently.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar operations shared by `f64` and [`Jet`], so closed-form solutions can
/// be written once and evaluated either plainly or with derivatives.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(c: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn atan2(self, x: Self) -> Self;

    fn scale(self, c: f64) -> Self {
        self * Self::cst(c)
    }
}

impl Real for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const D: usize> {
    pub v: f64,
    pub d1: [f64; D],
    pub d2: [f64; D],
}

impl<const D: usize> Jet<D> {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            d1: [0.0; D],
            d2: [0.0; D],
        }
    }

    /// The coordinate function `x_axis` evaluated at `v`.
    pub fn variable(v: f64, axis: usize) -> Self {
        let mut j = Self::constant(v);
        j.d1[axis] = 1.0;
        j
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Self::constant(f0);
        for i in 0..D {
            out.d1[i] = f1 * self.d1[i];
            out.d2[i] = f2 * self.d1[i] * self.d1[i] + f1 * self.d2[i];
        }
        out
    }
}

impl<const D: usize> Add for Jet<D> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        out.v += o.v;
        for i in 0..D {
            out.d1[i] += o.d1[i];
            out.d2[i] += o.d2[i];
        }
        out
    }
}

impl<const D: usize> Sub for Jet<D> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<const D: usize> Neg for Jet<D> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut out = self;
        out.v = -out.v;
        for i in 0..D {
            out.d1[i] = -out.d1[i];
            out.d2[i] = -out.d2[i];
        }
        out
    }
}

impl<const D: usize> Mul for Jet<D> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::constant(self.v * o.v);
        for i in 0..D {
            out.d1[i] = self.d1[i] * o.v + self.v * o.d1[i];
            out.d2[i] = self.d2[i] * o.v + 2.0 * self.d1[i] * o.d1[i] + self.v * o.d2[i];
        }
        out
    }
}

impl<const D: usize> Div for Jet<D> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let r = 1.0 / o.v;
        self * o.chain(r, -r * r, 2.0 * r * r * r)
    }
}

impl<const D: usize> Real for Jet<D> {
    fn cst(c: f64) -> Self {
        Self::constant(c)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        let d = 1.0 - t * t;
        self.chain(t, d, -2.0 * t * d)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn powf(self, p: f64) -> Self {
        let v = self.v;
        self.chain(
            v.powf(p),
            p * v.powf(p - 1.0),
            p * (p - 1.0) * v.powf(p - 2.0),
        )
    }
    fn atan2(self, x: Self) -> Self {
        let y = self;
        let r2 = x.v * x.v + y.v * y.v;
        let mut out = Self::constant(y.v.atan2(x.v));
        for i in 0..D {
            let num = x.v * y.d1[i] - y.v * x.d1[i];
            let dnum = x.v * y.d2[i] - y.v * x.d2[i];
            let dr2 = 2.0 * (x.v * x.d1[i] + y.v * y.d1[i]);
            out.d1[i] = num / r2;
            out.d2[i] = (dnum * r2 - num * dr2) / (r2 * r2);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> (f64, f64) {
        let h = 1e-4;
        (
            (f(x + h) - f(x - h)) / (2.0 * h),
            (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        )
    }

    #[test]
    fn composite_matches_finite_differences() {
        let f = |x: Jet<1>| (x * x).sin() / (Jet::cst(2.0) + x.tanh()) + x.scale(3.0).exp();
        let x0 = 0.37;
        let j = f(Jet::variable(x0, 0));
        let (d1, d2) = fd(|x| f(Jet::constant(x)).v, x0);
        assert!((j.d1[0] - d1).abs() < 1e-7 * d1.abs().max(1.0));
        assert!((j.d2[0] - d2).abs() < 1e-5 * d2.abs().max(1.0));
    }

    #[test]
    fn atan2_and_powf_in_two_axes() {
        let f = |x: Jet<2>, y: Jet<2>| {
            (x * x + y * y).powf(1.0 / 3.0) * y.atan2(x).scale(2.0 / 3.0).sin()
        };
        let (x0, y0) = (-0.4, 0.3);
        let j = f(Jet::variable(x0, 0), Jet::variable(y0, 1));
        let plain = |x: f64, y: f64| f(Jet::constant(x), Jet::constant(y)).v;
        let (dx, dxx) = fd(|x| plain(x, y0), x0);
        let (dy, dyy) = fd(|y| plain(x0, y), y0);
        assert!((j.d1[0] - dx).abs() < 1e-7);
        assert!((j.d1[1] - dy).abs() < 1e-7);
        assert!((j.d2[0] - dxx).abs() < 1e-5);
        assert!((j.d2[1] - dyy).abs() < 1e-5);
        // r^{2/3} sin(2 theta / 3) is harmonic
        assert!((j.d2[0] + j.d2[1]).abs() < 1e-12);
    }

    #[test]
    fn identity_and_constant() {
        let c = Jet::<2>::constant(4.0);
        assert_eq!(c.d1, [0.0; 2]);
        assert_eq!(c.d2, [0.0; 2]);
        let x = Jet::<2>::variable(0.5, 1);
        assert_eq!(x.d1, [0.0, 1.0]);
        assert_eq!(x.d2, [0.0, 0.0]);
    }
}
