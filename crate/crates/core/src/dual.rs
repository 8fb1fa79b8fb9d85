//! Forward-mode differentiation with hyper-dual numbers.
//!
//! A [`HyperDual`] carries a value together with two independent first-order
//! perturbations `e1`, `e2` and their mixed second-order term `e12`
//! (`e1² = e2² = 0`, `e1·e2 = e12`). Seeding both perturbations with the same
//! direction `d` yields the directional derivative in `e1` and the second
//! directional derivative `f''[d, d]` in `e12`, which is exactly what the
//! residual accelerations need.

use std::ops::{Add, Mul, Neg, Sub};

/// Scalar arithmetic needed by the frame chain.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + std::fmt::Debug
{
    fn cst(x: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn value(self) -> f64;
}

impl Real for f64 {
    #[inline]
    fn cst(x: f64) -> Self {
        x
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub const fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        Self { re, e1, e2, e12 }
    }

    /// `x + d·e1`
    pub const fn first(x: f64, d: f64) -> Self {
        Self::new(x, d, 0.0, 0.0)
    }

    /// `x + d·e1 + d·e2`, for second directional derivatives along `d`.
    pub const fn both(x: f64, d: f64) -> Self {
        Self::new(x, d, d, 0.0)
    }

    #[inline]
    fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        Self {
            re: f,
            e1: df * self.e1,
            e2: df * self.e2,
            e12: df * self.e12 + ddf * self.e1 * self.e2,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        )
    }
}

impl Neg for HyperDual {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}

impl Real for HyperDual {
    #[inline]
    fn cst(x: f64) -> Self {
        Self::new(x, 0.0, 0.0, 0.0)
    }
    #[inline]
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c, -s)
    }
    #[inline]
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s, -c)
    }
    #[inline]
    fn value(self) -> f64 {
        self.re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_and_second_derivative() {
        // f(x) = x^3 at x = 2: f' = 12, f'' = 12
        let x = HyperDual::both(2.0, 1.0);
        let f = x * x * x;
        assert_eq!(f.re, 8.0);
        assert_eq!(f.e1, 12.0);
        assert_eq!(f.e2, 12.0);
        assert_eq!(f.e12, 12.0);
    }

    #[test]
    fn trig_derivatives() {
        let a = 0.7;
        let x = HyperDual::both(a, 1.0);
        let s = x.sin();
        assert!((s.e1 - a.cos()).abs() < 1e-15);
        assert!((s.e12 + a.sin()).abs() < 1e-15);
        let c = x.cos();
        assert!((c.e1 + a.sin()).abs() < 1e-15);
        assert!((c.e12 + a.cos()).abs() < 1e-15);
    }

    #[test]
    fn composition_matches_finite_difference() {
        let f = |x: HyperDual| (x * x).sin() * x.cos();
        let g = |x: f64| (x * x).sin() * x.cos();
        let x0 = 0.9;
        let h = 1e-4;
        let fd1 = (g(x0 + h) - g(x0 - h)) / (2.0 * h);
        let fd2 = (g(x0 + h) - 2.0 * g(x0) + g(x0 - h)) / (h * h);
        let d = f(HyperDual::both(x0, 1.0));
        assert!((d.e1 - fd1).abs() < 1e-7);
        assert!((d.e12 - fd2).abs() < 1e-5);
    }
}
