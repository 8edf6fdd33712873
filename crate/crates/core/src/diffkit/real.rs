//! Arithmetic shared by plain scalars and tape variables, so model code is
//! written once and evaluated either directly or while recording a tape.

use std::ops::{Add, Mul, Neg, Sub};

use super::tape::Var;
use crate::scalar::Scalar;

/// SeLU scale.
pub const SELU_LAMBDA: f64 = 1.0507009873554805;
/// SeLU negative-branch coefficient.
pub const SELU_ALPHA: f64 = 1.6732632423543772;

pub fn selu<T: Scalar>(x: T) -> T {
    let l = T::lit(SELU_LAMBDA);
    if x >= T::zero() {
        l * x
    } else {
        l * T::lit(SELU_ALPHA) * (x.exp() - T::one())
    }
}

/// Derivative of SeLU; the positive branch is used at exactly zero.
pub fn selu_prime<T: Scalar>(x: T) -> T {
    let l = T::lit(SELU_LAMBDA);
    if x >= T::zero() {
        l
    } else {
        l * T::lit(SELU_ALPHA) * x.exp()
    }
}

pub fn selu_second<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::zero()
    } else {
        T::lit(SELU_LAMBDA * SELU_ALPHA) * x.exp()
    }
}

/// Number-like type usable in differentiable model code.
pub trait Real<T: Scalar>:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<T, Output = Self>
    + Sub<T, Output = Self>
    + Mul<T, Output = Self>
{
    fn value(&self) -> T;

    /// A constant living alongside `self` (on the same tape, if any).
    fn lift(&self, c: T) -> Self;

    fn selu(self) -> Self;

    fn selu_prime(self) -> Self;

    fn abs(self) -> Self;

    fn square(self) -> Self {
        self * self
    }

    /// `Σ aᵢ bᵢ` over non-empty slices of equal length.
    fn dot(a: &[Self], b: &[Self]) -> Self;

    /// `Σ wᵢ xᵢ + bias`.
    fn affine(w: &[Self], x: &[Self], bias: Self) -> Self;

    /// `Σ cᵢ xᵢ` with constant coefficients over a non-empty slice.
    fn scaled_sum(coeffs: &[T], xs: &[Self]) -> Self;

    fn sum(xs: &[Self]) -> Self;
}

impl<T: Scalar> Real<T> for T {
    #[inline]
    fn value(&self) -> T {
        *self
    }
    #[inline]
    fn lift(&self, c: T) -> T {
        c
    }
    #[inline]
    fn selu(self) -> T {
        selu(self)
    }
    #[inline]
    fn selu_prime(self) -> T {
        selu_prime(self)
    }
    #[inline]
    fn abs(self) -> T {
        num_traits::Float::abs(self)
    }
    #[inline]
    fn dot(a: &[T], b: &[T]) -> T {
        a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
    }
    #[inline]
    fn affine(w: &[T], x: &[T], bias: T) -> T {
        w.iter().zip(x).fold(bias, |acc, (a, b)| acc + *a * *b)
    }
    #[inline]
    fn scaled_sum(coeffs: &[T], xs: &[T]) -> T {
        Self::dot(coeffs, xs)
    }
    #[inline]
    fn sum(xs: &[T]) -> T {
        xs.iter().fold(T::zero(), |acc, x| acc + *x)
    }
}

impl<'t, T: Scalar> Real<T> for Var<'t, T> {
    #[inline]
    fn value(&self) -> T {
        Var::value(self)
    }

    fn lift(&self, c: T) -> Self {
        self.tape().var(c)
    }

    fn selu(self) -> Self {
        let x = self.value();
        self.unary(selu(x), selu_prime(x))
    }

    fn selu_prime(self) -> Self {
        let x = self.value();
        self.unary(selu_prime(x), selu_second(x))
    }

    fn abs(self) -> Self {
        let x = self.value();
        let s = if x > T::zero() {
            T::one()
        } else if x < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        self.unary(x.abs(), s)
    }

    fn dot(a: &[Self], b: &[Self]) -> Self {
        let tape = a[0].tape();
        let v = a.iter().zip(b).map(|(x, y)| x.value() * y.value()).sum();
        tape.push(
            v,
            a.iter().zip(b).flat_map(|(x, y)| {
                [(x.index() as u32, y.value()), (y.index() as u32, x.value())]
            }),
        )
    }

    fn affine(w: &[Self], x: &[Self], bias: Self) -> Self {
        let tape = bias.tape();
        let v = w
            .iter()
            .zip(x)
            .fold(bias.value(), |acc, (a, b)| acc + a.value() * b.value());
        tape.push(
            v,
            w.iter()
                .zip(x)
                .flat_map(|(a, b)| [(a.index() as u32, b.value()), (b.index() as u32, a.value())])
                .chain(std::iter::once((bias.index() as u32, T::one()))),
        )
    }

    fn scaled_sum(coeffs: &[T], xs: &[Self]) -> Self {
        let tape = xs[0].tape();
        let v = coeffs.iter().zip(xs).map(|(c, x)| *c * x.value()).sum();
        tape.push(
            v,
            coeffs.iter().zip(xs).map(|(c, x)| (x.index() as u32, *c)),
        )
    }

    fn sum(xs: &[Self]) -> Self {
        let tape = xs[0].tape();
        let v = xs.iter().map(|x| x.value()).sum();
        tape.push(v, xs.iter().map(|x| (x.index() as u32, T::one())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffkit::tape::grad;

    #[test]
    fn selu_positive_branch() {
        assert!((selu(1.0f64) - 1.0507010).abs() < 1e-7);
        assert_eq!(selu_prime(0.0f64), SELU_LAMBDA);
        assert!(selu(-1.0f64) < 0.0);
    }

    #[test]
    fn nary_nodes_match_plain_values() {
        let w = [0.5, -1.0, 2.0];
        let x = [1.0, 3.0, -0.25];
        let plain = <f64 as Real<f64>>::affine(&w, &x, 0.1);
        let (v, g) = grad(&[w, x].concat(), |t, p| {
            let b = t.var(0.1);
            Real::affine(&p[..3], &p[3..], b)
        });
        assert_eq!(v, plain);
        assert_eq!(g, vec![1.0, 3.0, -0.25, 0.5, -1.0, 2.0]);
    }

    #[test]
    fn selu_prime_node_uses_second_derivative() {
        let (_, g) = grad(&[-0.7], |_, p| p[0].selu_prime());
        assert!((g[0] - selu_second(-0.7)).abs() < 1e-15);
        let (_, g) = grad(&[0.7], |_, p| p[0].selu_prime());
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn abs_subgradient() {
        let (_, g) = grad(&[-2.0, 0.0, 3.0], |_, p| {
            let a = [p[0].abs(), p[1].abs(), p[2].abs()];
            Real::sum(&a)
        });
        assert_eq!(g, vec![-1.0, 0.0, 1.0]);
    }
}
