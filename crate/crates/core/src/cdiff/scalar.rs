//! Scalar algebras shared by plain complex numbers, tape variables and jets.
//!
//! Network and representation code is written once against these traits and
//! then evaluated either on plain [`C64`] values (inference), on tape
//! variables (reverse-mode gradients) or on [`Jet2`](super::Jet2) values
//! (derivatives with respect to the complex input).

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Holomorphic operations. Every implementation must keep the result
/// complex-differentiable in its operands.
pub trait Holo:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn value(&self) -> C64;

    /// A constant living in the same context as `self` (same tape, zero jet part).
    fn lift(&self, c: C64) -> Self;

    fn exp(self) -> Self;

    /// Principal branch, argument in (-pi, pi].
    fn ln(self) -> Self;

    fn powi(self, n: i32) -> Self;

    fn scaled(self, c: C64) -> Self;

    fn offset(self, c: C64) -> Self {
        self + self.lift(c)
    }

    fn recip(self) -> Self {
        self.lift(ONE) / self
    }
}

/// Non-holomorphic extensions, only meaningful outside jets.
pub trait Field: Holo {
    fn conj(self) -> Self;
    /// Real part, returned as a complex value with zero imaginary part.
    fn real(self) -> Self;
    /// Imaginary part, returned as a complex value with zero imaginary part.
    fn imag(self) -> Self;
    /// Squared modulus.
    fn abs2(self) -> Self;
}

impl Holo for C64 {
    fn value(&self) -> C64 {
        *self
    }

    fn lift(&self, c: C64) -> Self {
        c
    }

    fn exp(self) -> Self {
        Complex64::exp(self)
    }

    fn ln(self) -> Self {
        Complex64::ln(self)
    }

    fn powi(self, n: i32) -> Self {
        Complex64::powi(&self, n)
    }

    fn scaled(self, c: C64) -> Self {
        self * c
    }

    fn offset(self, c: C64) -> Self {
        self + c
    }
}

impl Field for C64 {
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }

    fn real(self) -> Self {
        C64::new(self.re, 0.0)
    }

    fn imag(self) -> Self {
        C64::new(self.im, 0.0)
    }

    fn abs2(self) -> Self {
        C64::new(self.norm_sqr(), 0.0)
    }
}
