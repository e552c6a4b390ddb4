//! Closed-form reference solutions.

use std::f64::consts::PI;

use crate::cdiff::C64;
use crate::error::{Error, Result};

/// Polar stresses `(s_rr, s_tt)` of a thick cylinder under internal pressure
/// `p` with a traction-free outer surface.
pub fn lame_polar(a: f64, b: f64, p: f64, r: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > a) {
        return Err(Error::Range(format!("annulus radii must satisfy 0 < a < b, got a={a}, b={b}")));
    }
    if r < a * (1.0 - 1e-9) || r > b * (1.0 + 1e-9) {
        return Err(Error::Range(format!("radius {r} lies outside the annulus [{a}, {b}]")));
    }
    let d = b * b - a * a;
    let big_a = p * a * a / d;
    let big_b = p * a * a * b * b / d;
    Ok((big_a - big_b / (r * r), big_a + big_b / (r * r)))
}

/// Cartesian stresses `(s_xx, s_yy, s_xy)` of the annulus centered at the origin.
pub fn lame_annulus_exact(a: f64, b: f64, p: f64, z: C64) -> Result<[f64; 3]> {
    let (srr, stt) = lame_polar(a, b, p, z.norm())?;
    let th = z.arg();
    let (s, c) = th.sin_cos();
    Ok([
        srr * c * c + stt * s * s,
        srr * s * s + stt * c * c,
        (srr - stt) * s * c,
    ])
}

/// Dirichlet problem `lap u + beta^2 u = 0` on `[0, side]^2` with `u = 1` on
/// the boundary, by its double sine series over odd modes up to `2 terms - 1`.
/// `z` is measured from the lower-left corner.
pub fn helmholtz_square_series(side: f64, beta: f64, z: C64, terms: usize) -> Result<f64> {
    let modes: Vec<usize> = (1..2 * terms).step_by(2).collect();
    let sx: Vec<f64> = modes.iter().map(|&m| (m as f64 * PI * z.re / side).sin()).collect();
    let sy: Vec<f64> = modes.iter().map(|&n| (n as f64 * PI * z.im / side).sin()).collect();
    let b2 = beta * beta;
    let mut u = 1.0;
    for (a, &m) in modes.iter().enumerate() {
        for (b, &n) in modes.iter().enumerate() {
            let (mf, nf) = (m as f64, n as f64);
            let k2 = (PI / side).powi(2) * (mf * mf + nf * nf);
            let gap = k2 - b2;
            if gap.abs() < 1e-12 * k2 {
                return Err(Error::Range(format!("wave number {beta} is a Dirichlet eigenvalue of the square")));
            }
            u += b2 * 16.0 / (PI * PI * mf * nf) * sx[a] * sy[b] / gap;
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lame_boundary_values() {
        let (srr, _) = lame_polar(1.0, 2.0, 1.0, 1.0).unwrap();
        assert!((srr + 1.0).abs() < 1e-15);
        let (srr, _) = lame_polar(1.0, 2.0, 1.0, 2.0).unwrap();
        assert!(srr.abs() < 1e-15);
    }

    #[test]
    fn lame_mid_radius() {
        let (srr, stt) = lame_polar(1.0, 2.0, 1.0, 2f64.sqrt()).unwrap();
        assert!((srr + 1.0 / 3.0).abs() < 1e-15);
        assert!((stt - 1.0).abs() < 1e-15);
        // on the x axis Cartesian and polar components coincide
        let s = lame_annulus_exact(1.0, 2.0, 1.0, C64::new(2f64.sqrt(), 0.0)).unwrap();
        assert!((s[0] + 1.0 / 3.0).abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15 && s[2].abs() < 1e-15);
        // invariants at 45 degrees
        let s = lame_annulus_exact(1.0, 2.0, 1.0, C64::new(1.0, 1.0)).unwrap();
        assert!((s[0] + s[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!((s[2] + 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn lame_rejects_points_outside() {
        assert!(lame_annulus_exact(1.0, 2.0, 1.0, C64::new(0.5, 0.0)).is_err());
        assert!(lame_polar(2.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn series_boundary_and_low_frequency() {
        // on the boundary every sine vanishes
        assert_eq!(helmholtz_square_series(1.5, 18.3, C64::new(0.0, 0.7), 50).unwrap(), 1.0);
        // beta -> 0: harmonic with constant data
        let u = helmholtz_square_series(1.0, 1e-6, C64::new(0.4, 0.3), 50).unwrap();
        assert!((u - 1.0).abs() < 1e-10);
    }
}
