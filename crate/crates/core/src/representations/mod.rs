//! From holomorphic potentials to physical fields.
//!
//! A [`ProblemSpec`] decides which potential evaluations ("taps") a quantity
//! needs at a point, then assembles fields from the resulting jets. Both steps
//! are generic over [`Field`], so the same code runs on plain numbers and on
//! tape variables.

mod bessel;
mod quadrature;

use serde::{Deserialize, Serialize};

use crate::cdiff::{Field, C64, ZERO};
use crate::error::{Error, Result};

pub use bessel::{bessel_j, bessel_j01};
pub use quadrature::{gauss_legendre, QuadratureRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    PlaneStress,
    #[default]
    PlaneStrain,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    Laplace,
    Biharmonic,
    Elasticity {
        mu: f64,
        /// Effective Lame constant for the regime.
        lambda_eff: f64,
        kappa: f64,
        regime: Regime,
    },
    Helmholtz {
        beta: f64,
        quad: QuadratureRule,
    },
}

impl ProblemKind {
    /// Elasticity from the material Lame constants; `kappa` is always derived.
    pub fn elasticity(mu: f64, lambda: f64, regime: Regime) -> Result<Self> {
        if !(mu > 0.0) || !lambda.is_finite() {
            return Err(Error::Contract(format!("invalid Lame constants mu = {mu}, lambda = {lambda}")));
        }
        let lambda_eff = match regime {
            Regime::PlaneStrain => lambda,
            Regime::PlaneStress => 2.0 * lambda * mu / (lambda + 2.0 * mu),
        };
        if !(lambda_eff + mu > 0.0) {
            return Err(Error::Contract(format!("lambda + mu must be positive, got {}", lambda_eff + mu)));
        }
        Ok(ProblemKind::Elasticity {
            mu,
            lambda_eff,
            kappa: (lambda_eff + 3.0 * mu) / (lambda_eff + mu),
            regime,
        })
    }

    pub fn helmholtz(beta: f64, n_quad: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Contract(format!("wave number must be positive, got {beta}")));
        }
        Ok(ProblemKind::Helmholtz {
            beta,
            quad: gauss_legendre(n_quad)?,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Laplace => "laplace",
            ProblemKind::Biharmonic => "biharmonic",
            ProblemKind::Elasticity { .. } => "elasticity",
            ProblemKind::Helmholtz { .. } => "helmholtz",
        }
    }

    pub fn is_scalar(&self) -> bool {
        !matches!(self, ProblemKind::Elasticity { .. })
    }
}

/// Number of independent potentials of a problem kind.
pub fn n_potentials(kind: &ProblemKind) -> usize {
    match kind {
        ProblemKind::Laplace | ProblemKind::Helmholtz { .. } => 1,
        ProblemKind::Biharmonic | ProblemKind::Elasticity { .. } => 2,
    }
}

fn default_quadrature() -> usize {
    20
}

fn no_particular(p: &Particular) -> bool {
    *p == Particular::None
}

/// Serializable problem description (configs and checkpoints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemDef {
    Laplace {
        #[serde(default, skip_serializing_if = "no_particular")]
        particular: Particular,
    },
    Biharmonic {
        #[serde(default, skip_serializing_if = "no_particular")]
        particular: Particular,
    },
    Elasticity {
        mu: f64,
        lambda: f64,
        #[serde(default)]
        regime: Regime,
    },
    Helmholtz {
        beta: f64,
        #[serde(default = "default_quadrature")]
        quadrature: usize,
    },
}

impl ProblemDef {
    pub fn build(&self) -> Result<ProblemSpec> {
        match *self {
            ProblemDef::Laplace { particular } => ProblemSpec::new(ProblemKind::Laplace, particular),
            ProblemDef::Biharmonic { particular } => ProblemSpec::new(ProblemKind::Biharmonic, particular),
            ProblemDef::Elasticity { mu, lambda, regime } => {
                ProblemSpec::new(ProblemKind::elasticity(mu, lambda, regime)?, Particular::None)
            }
            ProblemDef::Helmholtz { beta, quadrature } => {
                ProblemSpec::new(ProblemKind::helmholtz(beta, quadrature)?, Particular::None)
            }
        }
    }
}

/// Known particular solution added to scalar fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Particular {
    #[default]
    None,
    /// `u_p = -f (x^2 + y^2) / 4`, solving `-lap u = f`.
    Poisson { f: f64 },
    /// `u_p = a x + b y + c`.
    Affine { a: f64, b: f64, c: f64 },
}

impl Particular {
    pub fn value(&self, z: C64) -> f64 {
        match *self {
            Particular::None => 0.0,
            Particular::Poisson { f } => -0.25 * f * z.norm_sqr(),
            Particular::Affine { a, b, c } => a * z.re + b * z.im + c,
        }
    }

    pub fn gradient(&self, z: C64) -> [f64; 2] {
        match *self {
            Particular::None => [0.0, 0.0],
            Particular::Poisson { f } => [-0.5 * f * z.re, -0.5 * f * z.im],
            Particular::Affine { a, b, .. } => [a, b],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub particular: Particular,
    /// Expansion center of the Vekua operator; set from the base normalization mean.
    pub center: C64,
}

/// One potential evaluation: potential index, point, derivative order needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub potential: usize,
    pub point: C64,
    pub order: usize,
}

/// What a caller needs at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demand {
    /// Scalar `u`.
    Value,
    /// Scalar `u` and its gradient.
    Gradient,
    /// Elastic displacement.
    Displacement,
    /// Elastic stress.
    Stress,
    /// Everything the problem defines.
    Full,
}

/// Field values at one point; components not demanded stay `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValues<T> {
    pub u: Option<T>,
    pub grad: Option<[T; 2]>,
    pub disp: Option<[T; 2]>,
    /// `(sxx, syy, sxy)`.
    pub stress: Option<[T; 3]>,
}

impl<T> Default for FieldValues<T> {
    fn default() -> Self {
        FieldValues {
            u: None,
            grad: None,
            disp: None,
            stress: None,
        }
    }
}

pub fn laplace_field<T: Field>(phi: T) -> T {
    phi.real()
}

/// Goursat form `Re(conj(z) phi1 + phi2)`.
pub fn biharmonic_field<T: Field>(z: C64, phi1: T, phi2: T) -> T {
    (phi1.scaled(z.conj()) + phi2).real()
}

/// Kolosov-Muskhelishvili displacement and stresses. `phi1` needs order 2 and
/// `phi2` order 1 for stresses; displacement uses `phi1`, `phi1'`, `phi2`.
pub fn elasticity_fields<T: Field>(
    z: C64,
    phi1: [T; 3],
    phi2: [T; 3],
    mu: f64,
    kappa: f64,
    demand: Demand,
) -> FieldValues<T> {
    let mut out = FieldValues::default();
    if matches!(demand, Demand::Displacement | Demand::Full) {
        let d = (phi1[0].scaled(C64::new(kappa, 0.0)) - phi1[1].conj().scaled(z) - phi2[0].conj())
            .scaled(C64::new(0.5 / mu, 0.0));
        out.disp = Some([d.real(), d.imag()]);
    }
    if matches!(demand, Demand::Stress | Demand::Full) {
        let two_d1 = phi1[1].scaled(C64::new(2.0, 0.0));
        let w = phi1[2].scaled(z.conj()) + phi2[1];
        out.stress = Some([(two_d1 - w).real(), (two_d1 + w).real(), w.imag()]);
    }
    out
}

/// `w_q beta r J1(beta r s_q)` and its derivative in `r`.
pub fn vekua_kernel(r: f64, beta: f64, s: f64, w: f64) -> Result<(f64, f64)> {
    let x = beta * r * s;
    let (j0, j1) = bessel_j01(x)?;
    let dj1 = if x < 1e-8 { 0.5 } else { j0 - j1 / x };
    Ok((w * beta * r * j1, w * (beta * j1 + beta * beta * r * s * dj1)))
}

/// Vekua operator on a plain evaluator: `Re phi(z) - sum_q w_q beta r J1(beta r s_q) Re phi(c + (z-c)(1-s_q^2))`.
pub fn vekua_apply(
    phi: impl Fn(C64) -> Result<C64>,
    z: C64,
    center: C64,
    beta: f64,
    quad: &QuadratureRule,
) -> Result<f64> {
    let d = z - center;
    let r = d.norm();
    let mut u = phi(z)?.re;
    for (&s, &w) in quad.nodes.iter().zip(&quad.weights) {
        let (k, _) = vekua_kernel(r, beta, s, w)?;
        if k != 0.0 {
            u -= k * phi(center + d * (1.0 - s * s))?.re;
        }
    }
    Ok(u)
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, particular: Particular) -> Result<Self> {
        if !kind.is_scalar() && particular != Particular::None {
            return Err(Error::Contract("particular solutions are only supported for scalar problems".into()));
        }
        Ok(ProblemSpec {
            kind,
            particular,
            center: ZERO,
        })
    }

    pub fn n_potentials(&self) -> usize {
        n_potentials(&self.kind)
    }

    /// Potential evaluations required for `demand` at `z`, in the order
    /// [`ProblemSpec::evaluate`] consumes them.
    pub fn taps(&self, z: C64, demand: Demand) -> Result<Vec<Tap>> {
        let tap = |potential, point, order| Tap { potential, point, order };
        match &self.kind {
            ProblemKind::Laplace => {
                let order = self.scalar_order(demand)?;
                Ok(vec![tap(0, z, order)])
            }
            ProblemKind::Biharmonic => {
                let order = self.scalar_order(demand)?;
                Ok(vec![tap(0, z, order), tap(1, z, order)])
            }
            ProblemKind::Elasticity { .. } => match demand {
                Demand::Displacement => Ok(vec![tap(0, z, 1), tap(1, z, 0)]),
                Demand::Stress | Demand::Full => Ok(vec![tap(0, z, 2), tap(1, z, 1)]),
                _ => Err(Error::Contract(format!("{demand:?} is not an elasticity quantity"))),
            },
            ProblemKind::Helmholtz { quad, .. } => {
                let order = self.scalar_order(demand)?;
                let d = z - self.center;
                let mut taps = Vec::with_capacity(quad.len() + 1);
                taps.push(tap(0, z, order));
                for &s in &quad.nodes {
                    taps.push(tap(0, self.center + d * (1.0 - s * s), order));
                }
                Ok(taps)
            }
        }
    }

    fn scalar_order(&self, demand: Demand) -> Result<usize> {
        match demand {
            Demand::Value => Ok(0),
            Demand::Gradient | Demand::Full => Ok(1),
            _ => Err(Error::Contract(format!(
                "{demand:?} is not defined for the scalar {} problem",
                self.kind.name()
            ))),
        }
    }

    /// Assembles fields from tap jets (`jets[i]` belongs to `taps(z, demand)[i]`).
    pub fn evaluate<T: Field>(&self, z: C64, demand: Demand, jets: &[[T; 3]]) -> Result<FieldValues<T>> {
        let like = jets
            .first()
            .ok_or_else(|| Error::Contract("no potential evaluations supplied".into()))?[0];
        let c = |v: f64| like.lift(C64::new(v, 0.0));
        let mut out = FieldValues::default();
        let want_grad = matches!(demand, Demand::Gradient | Demand::Full);
        match &self.kind {
            ProblemKind::Laplace => {
                out.u = Some(laplace_field(jets[0][0]));
                if want_grad {
                    out.grad = Some([jets[0][1].real(), -jets[0][1].imag()]);
                }
            }
            ProblemKind::Biharmonic => {
                let (a, b) = (jets[0], jets[1]);
                out.u = Some(biharmonic_field(z, a[0], b[0]));
                if want_grad {
                    let w = a[1].scaled(z.conj()) + b[1];
                    out.grad = Some([(a[0] + w).real(), -(w - a[0]).imag()]);
                }
            }
            ProblemKind::Elasticity { mu, kappa, .. } => {
                return Ok(elasticity_fields(z, jets[0], jets[1], *mu, *kappa, demand));
            }
            ProblemKind::Helmholtz { beta, quad } => {
                let d = z - self.center;
                let r = d.norm();
                let mut u = jets[0][0].real();
                let mut g = [jets[0][1].real(), -jets[0][1].imag()];
                for (q, (&s, &w)) in quad.nodes.iter().zip(&quad.weights).enumerate() {
                    let (k, dk) = vekua_kernel(r, *beta, s, w)?;
                    let jq = jets[q + 1];
                    let re_q = jq[0].real();
                    u = u - re_q.scaled(C64::new(k, 0.0));
                    if want_grad {
                        let t = 1.0 - s * s;
                        let radial = if r > 1e-14 { dk / r } else { 0.0 };
                        g[0] = g[0] - re_q.scaled(C64::new(radial * d.re, 0.0)) - jq[1].real().scaled(C64::new(k * t, 0.0));
                        g[1] = g[1] - re_q.scaled(C64::new(radial * d.im, 0.0)) + jq[1].imag().scaled(C64::new(k * t, 0.0));
                    }
                }
                out.u = Some(u);
                if want_grad {
                    out.grad = Some(g);
                }
            }
        }
        if self.particular != Particular::None {
            out.u = out.u.map(|u| u + c(self.particular.value(z)));
            if let Some(g) = out.grad.as_mut() {
                let pg = self.particular.gradient(z);
                g[0] = g[0] + c(pg[0]);
                g[1] = g[1] + c(pg[1]);
            }
        }
        Ok(out)
    }
}
