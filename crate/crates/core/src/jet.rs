//! Truncated derivative arithmetic in one variable.
//!
//! A [`Jet`] carries `f(t), f'(t), ..., f^(k)(t)` at a fixed point. Products
//! and quotients use the Leibniz rule, so applying differential operators to
//! closed-form profiles stays exact up to rounding.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::Real;

/// Highest derivative tracked.
pub const MAX_ORDER: usize = 4;

const BINOM: [[u32; MAX_ORDER + 1]; MAX_ORDER + 1] = [
    [1, 0, 0, 0, 0],
    [1, 1, 0, 0, 0],
    [1, 2, 1, 0, 0],
    [1, 3, 3, 1, 0],
    [1, 4, 6, 4, 1],
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    d: [T; MAX_ORDER + 1],
    order: usize,
}

impl<T: Real> Jet<T> {
    pub fn constant(c: T) -> Self {
        let mut d = [T::zero(); MAX_ORDER + 1];
        d[0] = c;
        Self { d, order: MAX_ORDER }
    }

    /// The independent variable itself, evaluated at `t`.
    pub fn variable(t: T) -> Self {
        let mut d = [T::zero(); MAX_ORDER + 1];
        d[0] = t;
        d[1] = T::one();
        Self { d, order: MAX_ORDER }
    }

    pub fn from_derivatives(derivs: &[T]) -> Self {
        assert!(!derivs.is_empty() && derivs.len() <= MAX_ORDER + 1);
        let mut d = [T::zero(); MAX_ORDER + 1];
        d[..derivs.len()].copy_from_slice(derivs);
        Self {
            d,
            order: derivs.len() - 1,
        }
    }

    /// `cos(t)` as a jet in `t`.
    pub fn cos_of(t: T) -> Self {
        let (s, c) = t.sin_cos();
        Self {
            d: [c, -s, -c, s, c],
            order: MAX_ORDER,
        }
    }

    /// `sin(t)` as a jet in `t`.
    pub fn sin_of(t: T) -> Self {
        let (s, c) = t.sin_cos();
        Self {
            d: [s, c, -s, -c, s],
            order: MAX_ORDER,
        }
    }

    #[inline]
    pub fn value(&self) -> T {
        self.d[0]
    }

    /// k-th derivative; panics past the tracked order.
    #[inline]
    pub fn deriv(&self, k: usize) -> T {
        assert!(k <= self.order, "derivative {k} beyond jet order {}", self.order);
        self.d[k]
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    /// The jet of `f'`, one order lower.
    pub fn differentiate(&self) -> Self {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let mut d = [T::zero(); MAX_ORDER + 1];
        d[..self.order].copy_from_slice(&self.d[1..=self.order]);
        Self {
            d,
            order: self.order - 1,
        }
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for v in out.d.iter_mut().take(self.order + 1) {
            *v *= s;
        }
        out
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut acc = Self::constant(T::one());
        for _ in 0..n {
            acc = acc * *self;
        }
        acc
    }

    pub fn recip(&self) -> Self {
        Self::constant(T::one()) / *self
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let order = self.order.min(rhs.order);
        let mut d = [T::zero(); MAX_ORDER + 1];
        for k in 0..=order {
            d[k] = self.d[k] + rhs.d[k];
        }
        Self { d, order }
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let order = self.order.min(rhs.order);
        let mut d = [T::zero(); MAX_ORDER + 1];
        for n in 0..=order {
            let mut s = T::zero();
            for k in 0..=n {
                s += T::lit(BINOM[n][k] as f64) * self.d[k] * rhs.d[n - k];
            }
            d[n] = s;
        }
        Self { d, order }
    }
}

impl<T: Real> Div for Jet<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let order = self.order.min(rhs.order);
        let mut q = [T::zero(); MAX_ORDER + 1];
        let g0 = rhs.d[0];
        for n in 0..=order {
            let mut s = self.d[n];
            for k in 1..=n {
                s -= T::lit(BINOM[n][k] as f64) * rhs.d[k] * q[n - k];
            }
            q[n] = s / g0;
        }
        Self { d: q, order }
    }
}

impl<T: Real> Add<T> for Jet<T> {
    type Output = Self;
    fn add(self, rhs: T) -> Self {
        let mut out = self;
        out.d[0] += rhs;
        out
    }
}

impl<T: Real> Sub<T> for Jet<T> {
    type Output = Self;
    fn sub(self, rhs: T) -> Self {
        self + (-rhs)
    }
}

impl<T: Real> Mul<T> for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}
