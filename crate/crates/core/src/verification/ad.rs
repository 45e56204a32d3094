//! Hyper-dual numbers: exact first and mixed second derivatives of closed-form
//! expressions, used to check hand-derived forcing terms.

use core::ops::{Add, Div, Mul, Neg, Sub};
#[allow(unused_imports)]
use num_traits::Float;

/// Scalar arithmetic shared by `f64` and [`HyperDual`].
pub trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn value(self) -> f64;
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn sin(self) -> Self {
        Float::sin(self)
    }
    fn cos(self) -> Self {
        Float::cos(self)
    }
    fn exp(self) -> Self {
        Float::exp(self)
    }
    fn value(self) -> f64 {
        self
    }
}

/// `a + b ε₁ + c ε₂ + d ε₁ε₂` with `ε₁² = ε₂² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        HyperDual { re, e1, e2, e12 }
    }

    /// Apply a scalar function given its value and first two derivatives.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        HyperDual {
            re: f,
            e1: df * self.e1,
            e2: df * self.e2,
            e12: df * self.e12 + d2f * self.e1 * self.e2,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        HyperDual::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        HyperDual::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        HyperDual::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = o.chain(1.0 / o.re, -1.0 / (o.re * o.re), 2.0 / (o.re * o.re * o.re));
        self * inv
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        HyperDual::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}

impl Real for HyperDual {
    fn cst(v: f64) -> Self {
        HyperDual::new(v, 0.0, 0.0, 0.0)
    }
    fn sin(self) -> Self {
        let (s, c) = (Float::sin(self.re), Float::cos(self.re));
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = (Float::sin(self.re), Float::cos(self.re));
        self.chain(c, -s, -c)
    }
    fn exp(self) -> Self {
        let e = Float::exp(self.re);
        self.chain(e, e, e)
    }
    fn value(self) -> f64 {
        self.re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_derivative_of_product() {
        // f(x, y) = sin(x) exp(x y), ∂x∂y f = cos(x) x e^{xy} + sin(x) (e^{xy} + x y e^{xy})
        let (x, y) = (0.7, -0.4);
        let hx = HyperDual::new(x, 1.0, 0.0, 0.0);
        let hy = HyperDual::new(y, 0.0, 1.0, 0.0);
        let f = hx.sin() * (hx * hy).exp();
        let e = (x * y).exp();
        let expected = x.cos() * x * e + x.sin() * (e + x * y * e);
        assert!((f.e12 - expected).abs() < 1e-14);
        let g = HyperDual::cst(1.0) / (hx * hx);
        assert!((g.e1 + 2.0 / (x * x * x)).abs() < 1e-12);
    }
}
