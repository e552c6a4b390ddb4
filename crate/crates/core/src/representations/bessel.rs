//! Bessel functions of the first kind for real non-negative arguments.

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 12.0;
const MAX_ARG: f64 = 100.0;
const MAX_ORDER: u32 = 50;

/// `J_n(x)` for `0 <= x <= 100`: ascending series up to `x = 12`, Hankel
/// asymptotics for `J_0`, `J_1` beyond, upward recurrence for higher orders.
pub fn bessel_j(n: u32, x: f64) -> Result<f64> {
    if !(0.0..=MAX_ARG).contains(&x) || n > MAX_ORDER {
        return Err(Error::Range(format!(
            "bessel_j supports orders <= {MAX_ORDER} and 0 <= x <= {MAX_ARG}, got n = {n}, x = {x}"
        )));
    }
    if x <= SERIES_LIMIT {
        return Ok(series(n, x));
    }
    let j0 = hankel(0, x);
    if n == 0 {
        return Ok(j0);
    }
    let j1 = hankel(1, x);
    if (n as f64) > x {
        // upward recurrence is unstable past the turning point
        return Err(Error::Range(format!("bessel_j order {n} exceeds argument {x}")));
    }
    let (mut prev, mut cur) = (j0, j1);
    for k in 1..n {
        let next = 2.0 * k as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `J_0` and `J_1` together; both orders are always in range for valid `x`.
pub fn bessel_j01(x: f64) -> Result<(f64, f64)> {
    Ok((bessel_j(0, x)?, bessel_j(1, x)?))
}

fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    for k in 1..200 {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 2 {
            break;
        }
    }
    sum
}

fn hankel(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64).powi(2);
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        if a.abs() > last {
            break;
        }
        last = a.abs();
        match k % 4 {
            0 => p += a,
            1 => q += a,
            2 => p -= a,
            _ => q -= a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * n as f64 + 0.25) * std::f64::consts::PI;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_zero() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn reference_values() {
        // J1(1) from a 30-term ascending series
        assert!((bessel_j(1, 1.0).unwrap() - 0.4400505857449335).abs() < 1e-15);
        assert!(bessel_j(0, 2.404825557695773).unwrap().abs() < 1e-14);
    }

    #[test]
    fn series_and_asymptotic_agree_near_switch() {
        for x in [10.0, 11.0, 12.0] {
            for n in [0, 1] {
                let s = series(n, x);
                let h = hankel(n, x);
                assert!((s - h).abs() < 1e-10, "n = {n}, x = {x}: {s} vs {h}");
            }
        }
    }

    #[test]
    fn far_field_values() {
        // J0(50), J1(50), J0(100) from arbitrary-precision evaluation
        assert!((bessel_j(0, 50.0).unwrap() - 0.0558123276692518).abs() < 1e-12);
        assert!((bessel_j(1, 50.0).unwrap() - -0.0975118281251751).abs() < 1e-12);
        assert!((bessel_j(0, 100.0).unwrap() - 0.0199858503042231).abs() < 1e-12);
    }

    #[test]
    fn out_of_range() {
        assert!(bessel_j(0, 100.5).is_err());
        assert!(bessel_j(0, -1.0).is_err());
        assert!(bessel_j(80, 1.0).is_err());
    }
}
