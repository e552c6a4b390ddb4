//! Order-2 forward jets with respect to the complex network input.
//!
//! A jet `(v, d1, d2)` carries a value and its first two derivatives along
//! the input `z`. Propagation is the truncated Faa di Bruno rule; only
//! holomorphic primitives are admitted.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::{Holo, C64, ONE, ZERO};
use super::tape::Primitive;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2<T> {
    pub v: T,
    pub d1: T,
    pub d2: T,
}

impl<T: Holo> Jet2<T> {
    pub fn new(v: T, d1: T, d2: T) -> Self {
        Jet2 { v, d1, d2 }
    }

    /// Seed jet of the independent variable: `(z, 1, 0)`.
    pub fn seed(z: T) -> Self {
        Jet2 {
            v: z,
            d1: z.lift(ONE),
            d2: z.lift(ZERO),
        }
    }

    pub fn constant(c: T) -> Self {
        Jet2 {
            v: c,
            d1: c.lift(ZERO),
            d2: c.lift(ZERO),
        }
    }

    /// Lifts plain complex jet components into the context of `like`.
    pub fn lift_from(like: &T, v: C64, d1: C64, d2: C64) -> Self {
        Jet2 {
            v: like.lift(v),
            d1: like.lift(d1),
            d2: like.lift(d2),
        }
    }

    pub fn values(&self) -> [C64; 3] {
        [self.v.value(), self.d1.value(), self.d2.value()]
    }

    /// Applies `f` with derivatives `f0, f1, f2` evaluated at `v`.
    fn chain(&self, f0: T, f1: T, f2: T) -> Self {
        Jet2 {
            v: f0,
            d1: f1 * self.d1,
            d2: f2 * self.d1 * self.d1 + f1 * self.d2,
        }
    }
}

/// Propagates jets through a named primitive.
pub fn jet_forward<T: Holo>(primitive: Primitive, jets: &[Jet2<T>]) -> Result<Jet2<T>> {
    if !primitive.is_holomorphic() {
        return Err(Error::Unsupported(format!(
            "`{}` is not holomorphic and cannot appear inside a jet",
            primitive.name()
        )));
    }
    if jets.len() != primitive.arity() {
        return Err(Error::Contract(format!(
            "`{}` takes {} operand(s), got {}",
            primitive.name(),
            primitive.arity(),
            jets.len()
        )));
    }
    let a = jets[0];
    let out = match primitive {
        Primitive::Add => a + jets[1],
        Primitive::Sub => a - jets[1],
        Primitive::Mul => a * jets[1],
        Primitive::Div => a / jets[1],
        Primitive::Exp => a.exp(),
        Primitive::Log => a.ln(),
        Primitive::Powi(n) => a.powi(n),
        Primitive::Scale(c) => a.scaled(c),
        Primitive::Conj | Primitive::Re | Primitive::Im | Primitive::Abs2 => unreachable!(),
    };
    let vals = out.values();
    if vals.iter().all(|c| c.is_finite()) {
        Ok(out)
    } else {
        Err(Error::diverged(
            primitive.name(),
            format!("non-finite jet {vals:?}"),
        ))
    }
}

impl<T: Holo> Add for Jet2<T> {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        Jet2::new(self.v + r.v, self.d1 + r.d1, self.d2 + r.d2)
    }
}

impl<T: Holo> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        Jet2::new(self.v - r.v, self.d1 - r.d1, self.d2 - r.d2)
    }
}

impl<T: Holo> Mul for Jet2<T> {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        let two = self.v.lift(C64::new(2.0, 0.0));
        Jet2::new(
            self.v * r.v,
            self.d1 * r.v + self.v * r.d1,
            self.d2 * r.v + two * self.d1 * r.d1 + self.v * r.d2,
        )
    }
}

impl<T: Holo> Div for Jet2<T> {
    type Output = Self;
    fn div(self, r: Self) -> Self {
        let q = self.v / r.v;
        let q1 = (self.d1 - q * r.d1) / r.v;
        let q2 = (self.d2 - (q1 * r.d1).scaled(C64::new(2.0, 0.0)) - q * r.d2) / r.v;
        Jet2::new(q, q1, q2)
    }
}

impl<T: Holo> Neg for Jet2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet2::new(-self.v, -self.d1, -self.d2)
    }
}

impl<T: Holo> Holo for Jet2<T> {
    fn value(&self) -> C64 {
        self.v.value()
    }

    fn lift(&self, c: C64) -> Self {
        Jet2::constant(self.v.lift(c))
    }

    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    fn ln(self) -> Self {
        let inv = self.v.recip();
        Jet2::new(
            self.v.ln(),
            self.d1 * inv,
            self.d2 * inv - self.d1 * self.d1 * inv * inv,
        )
    }

    fn powi(self, n: i32) -> Self {
        let v = self.v;
        match n {
            0 => Jet2::constant(v.lift(ONE)),
            1 => self,
            _ => {
                let nf = n as f64;
                let f1 = v.powi(n - 1).scaled(C64::new(nf, 0.0));
                let f2 = if n == 2 {
                    v.lift(C64::new(2.0, 0.0))
                } else {
                    v.powi(n - 2).scaled(C64::new(nf * (nf - 1.0), 0.0))
                };
                self.chain(v.powi(n), f1, f2)
            }
        }
    }

    fn scaled(self, c: C64) -> Self {
        Jet2::new(self.v.scaled(c), self.d1.scaled(c), self.d2.scaled(c))
    }

    fn offset(self, c: C64) -> Self {
        Jet2::new(self.v.offset(c), self.d1, self.d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn cube_at_two() {
        let j = jet_forward(Primitive::Powi(3), &[Jet2::seed(c(2.0))]).unwrap();
        assert_eq!(j.values(), [c(8.0), c(12.0), c(12.0)]);
    }

    #[test]
    fn exp_at_zero_has_unit_derivatives() {
        let j = jet_forward(Primitive::Exp, &[Jet2::seed(c(0.0))]).unwrap();
        assert_eq!(j.values(), [c(1.0), c(1.0), c(1.0)]);
    }

    #[test]
    fn exp_of_square_matches_symbolic_derivatives() {
        // d/dz exp(z^2) = 2z exp(z^2); d2 = (2 + 4z^2) exp(z^2); at z = 1: (e, 2e, 6e).
        let z = Jet2::seed(c(1.0));
        let sq = jet_forward(Primitive::Mul, &[z, z]).unwrap();
        let j = jet_forward(Primitive::Exp, &[sq]).unwrap();
        let e = std::f64::consts::E;
        let want = [e, 2.0 * e, 6.0 * e];
        for (got, w) in j.values().iter().zip(want) {
            assert!((got - c(w)).norm() < 1e-14 * w);
        }
    }

    #[test]
    fn non_holomorphic_primitives_are_rejected() {
        let z = Jet2::seed(c(1.0));
        for p in [Primitive::Conj, Primitive::Re, Primitive::Im, Primitive::Abs2] {
            assert!(matches!(jet_forward(p, &[z]), Err(Error::Unsupported(_))));
        }
    }

    #[test]
    fn log_and_division_rules() {
        // log z: (log z, 1/z, -1/z^2); 1/z: (1/z, -1/z^2, 2/z^3)
        let z0 = C64::new(0.5, -1.5);
        let z = Jet2::seed(z0);
        let l = jet_forward(Primitive::Log, &[z]).unwrap();
        let want = [z0.ln(), 1.0 / z0, -1.0 / (z0 * z0)];
        for (g, w) in l.values().iter().zip(want) {
            assert!((g - w).norm() < 1e-14);
        }
        let one = Jet2::constant(ONE);
        let r = jet_forward(Primitive::Div, &[one, z]).unwrap();
        let want = [1.0 / z0, -1.0 / (z0 * z0), 2.0 / (z0 * z0 * z0)];
        for (g, w) in r.values().iter().zip(want) {
            assert!((g - w).norm() < 1e-14);
        }
    }

    #[test]
    fn log_of_zero_diverges() {
        assert!(matches!(
            jet_forward(Primitive::Log, &[Jet2::seed(ZERO)]),
            Err(Error::Diverged { .. })
        ));
    }
}
