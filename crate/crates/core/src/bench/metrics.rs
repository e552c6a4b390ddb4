use rand::Rng;

use crate::cdiff::C64;
use crate::error::{Error, Result};
use crate::geometry::Domain;

/// `sqrt(sum (u - v)^2 / sum u^2)` per field over the given points, where
/// `reference` yields `u` and `candidate` yields `v`.
pub fn relative_l2_at(
    points: &[C64],
    candidate: impl Fn(C64) -> Result<Vec<f64>>,
    reference: impl Fn(C64) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let mut num: Vec<f64> = Vec::new();
    let mut den: Vec<f64> = Vec::new();
    for &z in points {
        let v = candidate(z)?;
        let u = reference(z)?;
        if u.len() != v.len() {
            return Err(Error::Contract(format!(
                "candidate has {} fields, reference {}",
                v.len(),
                u.len()
            )));
        }
        if num.is_empty() {
            num = vec![0.0; u.len()];
            den = vec![0.0; u.len()];
        }
        for i in 0..u.len() {
            num[i] += (u[i] - v[i]).powi(2);
            den[i] += u[i] * u[i];
        }
    }
    if points.is_empty() {
        return Err(Error::Contract("no evaluation points".into()));
    }
    num.iter()
        .zip(&den)
        .enumerate()
        .map(|(i, (n, d))| {
            if *d > 0.0 {
                Ok((n / d).sqrt())
            } else {
                Err(Error::Degenerate(format!("reference field {i} vanishes at every evaluation point")))
            }
        })
        .collect()
}

/// Scalar relative L2 error over `n_mc` uniform interior points.
pub fn relative_l2<R: Rng + ?Sized>(
    candidate: impl Fn(C64) -> Result<f64>,
    reference: impl Fn(C64) -> Result<f64>,
    domain: &Domain,
    n_mc: usize,
    rng: &mut R,
) -> Result<f64> {
    let points = domain.sample_interior(n_mc, rng)?;
    Ok(relative_l2_at(&points, |z| Ok(vec![candidate(z)?]), |z| Ok(vec![reference(z)?]))?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarFn;
    use crate::geometry::{rectangle, BoundaryCondition};
    use crate::nets::rng_for;

    fn square() -> Domain {
        let bc = BoundaryCondition::dirichlet(ScalarFn::constant(0.0));
        Domain::new(
            rectangle(C64::new(0.0, 0.0), C64::new(1.0, 1.0), [bc.clone(), bc.clone(), bc.clone(), bc]),
            vec![],
        )
        .unwrap()
    }

    fn u(z: C64) -> Result<f64> {
        Ok((3.0 * z.re).sin() + z.im * z.im)
    }

    #[test]
    fn identical_fields_give_zero() {
        let e = relative_l2(u, u, &square(), 1000, &mut rng_for(1, 5)).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn zero_candidate_gives_one() {
        let e = relative_l2(|_| Ok(0.0), u, &square(), 1000, &mut rng_for(1, 5)).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn scaled_candidate() {
        let e = relative_l2(|z| Ok(1.1 * u(z)?), u, &square(), 10_000, &mut rng_for(1, 5)).unwrap();
        assert!((e - 0.1).abs() < 1e-3, "{e}");
    }

    #[test]
    fn zero_reference_is_an_error() {
        let r = relative_l2(u, |_| Ok(0.0), &square(), 100, &mut rng_for(1, 5));
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }
}
