//! Truncated second-order Taylor jets in the scalar time variable.
//!
//! A [`Jet2`] carries `(f, f', f'')` at a point. Elementary operations apply the
//! truncated Taylor rules, so pushing the seed jet `(t, 1, 0)` through a smooth
//! expression yields the expression's value and its first two time derivatives.
//! The coefficient type is generic: `Jet2<f64>` for plain evaluation and
//! `Jet2<Var>` when every coefficient must stay differentiable with respect to
//! the tape's parameters.

use std::ops::{Add, Mul, Neg, Sub};

/// Scalar types a jet can be built over.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn value(self) -> f64;
    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn tanh(self) -> f64 {
        f64::tanh(self)
    }
    #[inline]
    fn sin(self) -> f64 {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> f64 {
        f64::cos(self)
    }
}

/// Value, first and second derivative with respect to time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<T = f64> {
    pub v0: T,
    pub v1: T,
    pub v2: T,
}

impl<T> Jet2<T> {
    pub const fn new(v0: T, v1: T, v2: T) -> Self {
        Self { v0, v1, v2 }
    }
}

impl Jet2<f64> {
    /// The independent variable: `(t, 1, 0)`.
    pub const fn seed(t: f64) -> Self {
        Self::new(t, 1.0, 0.0)
    }

    pub const fn constant(c: f64) -> Self {
        Self::new(c, 0.0, 0.0)
    }
}

impl<T: Scalar> Jet2<T> {
    /// Multiplies every coefficient by a scalar of the same kind.
    #[inline]
    pub fn scale_by(self, c: T) -> Self {
        Self::new(self.v0 * c, self.v1 * c, self.v2 * c)
    }

    #[inline]
    pub fn scale(self, c: f64) -> Self {
        self * c
    }

    /// Applies a scalar function given its value and first two derivatives at `v0`.
    #[inline]
    fn compose(self, f: T, df: T, d2f: T) -> Self {
        Self::new(f, df * self.v1, d2f * self.v1 * self.v1 + df * self.v2)
    }

    pub fn tanh(self) -> Self {
        let y = self.v0.tanh();
        let dy = -(y * y) + 1.0;
        let d2y = y * dy * -2.0;
        self.compose(y, dy, d2y)
    }

    pub fn sin(self) -> Self {
        let s = self.v0.sin();
        let c = self.v0.cos();
        self.compose(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let s = self.v0.sin();
        let c = self.v0.cos();
        self.compose(c, -s, -c)
    }

    /// Coefficients as plain floats.
    pub fn values(self) -> Jet2<f64> {
        Jet2::new(self.v0.value(), self.v1.value(), self.v2.value())
    }
}

impl<T: Scalar> Add for Jet2<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.v0 + rhs.v0, self.v1 + rhs.v1, self.v2 + rhs.v2)
    }
}

impl<T: Scalar> Sub for Jet2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.v0 - rhs.v0, self.v1 - rhs.v1, self.v2 - rhs.v2)
    }
}

impl<T: Scalar> Mul for Jet2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.v0 * rhs.v0,
            self.v0 * rhs.v1 + self.v1 * rhs.v0,
            self.v0 * rhs.v2 + self.v1 * rhs.v1 * 2.0 + self.v2 * rhs.v0,
        )
    }
}

impl<T: Scalar> Neg for Jet2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.v0, -self.v1, -self.v2)
    }
}

impl<T: Scalar> Mul<f64> for Jet2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, c: f64) -> Self {
        Self::new(self.v0 * c, self.v1 * c, self.v2 * c)
    }
}

/// Shifts the value; derivatives of a constant are zero.
impl<T: Scalar> Add<f64> for Jet2<T> {
    type Output = Self;
    #[inline]
    fn add(self, c: f64) -> Self {
        Self::new(self.v0 + c, self.v1, self.v2)
    }
}

impl<T: Scalar> Sub<f64> for Jet2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, c: f64) -> Self {
        Self::new(self.v0 - c, self.v1, self.v2)
    }
}
