//! Reference stresses for a square plate with a central circular hole under
//! uniaxial tension along x.
//!
//! Both complex potentials are truncated Laurent series with odd powers and
//! real coefficients (the load is symmetric about both axes). The
//! coefficients are fitted to the traction conditions at boundary collocation
//! points by least squares.

use nalgebra::{DMatrix, DVector};

use crate::cdiff::C64;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PlateOracle {
    pub half_side: f64,
    pub radius: f64,
    /// Odd powers `1, 3, ..., 2 terms - 1` and their negatives.
    pub terms: usize,
    /// `phi` coefficients, then `psi` coefficients; each block lists positive
    /// powers then negative powers.
    coeffs: Vec<f64>,
    /// RMS traction residual at the collocation points.
    pub residual_rms: f64,
}

/// Basis entries `(power, scale)`: `(z / scale)^power`.
fn basis(terms: usize, half_side: f64, radius: f64) -> Vec<(i32, f64)> {
    let outer = half_side * 2f64.sqrt();
    let mut b: Vec<(i32, f64)> = (0..terms).map(|k| (2 * k as i32 + 1, outer)).collect();
    b.extend((0..terms).map(|k| (-(2 * k as i32 + 1), radius)));
    b
}

/// First and second derivatives of `(z / s)^n`.
fn derivs(n: i32, s: f64, z: C64) -> (C64, C64) {
    let nf = n as f64;
    let w = z / s;
    (w.powi(n - 1) * (nf / s), w.powi(n - 2) * (nf * (nf - 1.0) / (s * s)))
}

/// `(sxx, syy, sxy)` from `phi'`, `phi''` and `psi'`.
fn stress_of(z: C64, dphi: C64, ddphi: C64, dpsi: C64) -> [f64; 3] {
    let w = z.conj() * ddphi + dpsi;
    [(2.0 * dphi - w).re, (2.0 * dphi + w).re, w.im]
}

impl PlateOracle {
    /// Fits `terms` odd powers per sign and potential using `per_unit` collocation
    /// points per unit boundary length.
    pub fn fit(half_side: f64, radius: f64, terms: usize, per_unit: f64) -> Result<PlateOracle> {
        if !(radius > 0.0 && half_side > radius) || terms == 0 {
            return Err(Error::Range(format!(
                "plate oracle needs 0 < radius < half side and at least one term, got {radius}, {half_side}, {terms}"
            )));
        }
        let b = basis(terms, half_side, radius);
        let l = half_side;
        // (point, normal, traction)
        let mut rows: Vec<(C64, C64, C64)> = Vec::new();
        let n_edge = (2.0 * l * per_unit).ceil() as usize;
        for i in 0..n_edge {
            // cosine spacing clusters points at the corners
            let t = -(std::f64::consts::PI * (i as f64 + 0.5) / n_edge as f64).cos() * l;
            rows.push((C64::new(l, t), C64::new(1.0, 0.0), C64::new(1.0, 0.0)));
            rows.push((C64::new(-l, t), C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)));
            rows.push((C64::new(t, l), C64::new(0.0, 1.0), C64::new(0.0, 0.0)));
            rows.push((C64::new(t, -l), C64::new(0.0, -1.0), C64::new(0.0, 0.0)));
        }
        let n_hole = (2.0 * std::f64::consts::PI * radius * per_unit).ceil() as usize;
        for i in 0..n_hole {
            let th = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n_hole as f64;
            let e = C64::from_polar(1.0, th);
            rows.push((e * radius, -e, C64::new(0.0, 0.0)));
        }
        let nc = 2 * b.len();
        let mut a = DMatrix::<f64>::zeros(2 * rows.len(), nc);
        let mut rhs = DVector::<f64>::zeros(2 * rows.len());
        for (r, &(z, n, t)) in rows.iter().enumerate() {
            for (c, &(pw, s)) in b.iter().enumerate() {
                let (d1, d2) = derivs(pw, s, z);
                let sp = stress_of(z, d1, d2, C64::new(0.0, 0.0));
                let ss = stress_of(z, C64::new(0.0, 0.0), C64::new(0.0, 0.0), d1);
                for (col, st) in [(c, sp), (b.len() + c, ss)] {
                    a[(2 * r, col)] = st[0] * n.re + st[2] * n.im;
                    a[(2 * r + 1, col)] = st[2] * n.re + st[1] * n.im;
                }
            }
            rhs[2 * r] = t.re;
            rhs[2 * r + 1] = t.im;
        }
        let svd = a.clone().svd(true, true);
        let x = svd
            .solve(&rhs, 1e-13)
            .map_err(|e| Error::Solver(format!("plate least squares: {e}")))?;
        let res = &a * &x - &rhs;
        let residual_rms = (res.norm_squared() / res.len() as f64).sqrt();
        Ok(PlateOracle {
            half_side,
            radius,
            terms,
            coeffs: x.iter().copied().collect(),
            residual_rms,
        })
    }

    /// `(sxx, syy, sxy)` at `z`.
    pub fn stress(&self, z: C64) -> Result<[f64; 3]> {
        if z.norm() < self.radius * (1.0 - 1e-9)
            || z.re.abs() > self.half_side * (1.0 + 1e-9)
            || z.im.abs() > self.half_side * (1.0 + 1e-9)
        {
            return Err(Error::Range(format!("point {z} lies outside the plate")));
        }
        let b = basis(self.terms, self.half_side, self.radius);
        let (mut dphi, mut ddphi, mut dpsi) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for (c, &(pw, s)) in b.iter().enumerate() {
            let (d1, d2) = derivs(pw, s, z);
            dphi += d1 * self.coeffs[c];
            ddphi += d2 * self.coeffs[c];
            dpsi += d1 * self.coeffs[b.len() + c];
        }
        Ok(stress_of(z, dphi, ddphi, dpsi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{PLATE_HALF, PLATE_RADIUS};

    fn oracle() -> PlateOracle {
        PlateOracle::fit(PLATE_HALF, PLATE_RADIUS, 30, 400.0).unwrap()
    }

    #[test]
    fn traction_conditions_and_equilibrium() {
        let o = oracle();
        assert!(o.residual_rms < 1e-4, "{}", o.residual_rms);
        // the resultant across the section x = 0 carries the applied load
        let n = 400;
        let (a, b) = (PLATE_RADIUS, PLATE_HALF);
        let mut force = 0.0;
        for i in 0..n {
            let y = a + (b - a) * (i as f64 + 0.5) / n as f64;
            force += o.stress(C64::new(0.0, y)).unwrap()[0] * (b - a) / n as f64;
        }
        assert!((2.0 * force - 2.0 * PLATE_HALF).abs() < 1e-3, "{force}");
    }

    #[test]
    fn truncation_converges() {
        let a = oracle();
        let b = PlateOracle::fit(PLATE_HALF, PLATE_RADIUS, 24, 400.0).unwrap();
        let mut worst: f64 = 0.0;
        for &(x, y) in &[(0.0, 1.1), (1.1, 0.3), (0.9, 0.9), (-2.4, -2.4), (0.0, -2.0), (2.5, 1.0)] {
            let (sa, sb) = (a.stress(C64::new(x, y)).unwrap(), b.stress(C64::new(x, y)).unwrap());
            for k in 0..3 {
                worst = worst.max((sa[k] - sb[k]).abs());
            }
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn tractions_hold_between_collocation_points() {
        let o = oracle();
        let (l, r) = (PLATE_HALF, PLATE_RADIUS);
        let mut worst: f64 = 0.0;
        let n = 997;
        for i in 0..n {
            let u = -1.0 + 2.0 * (i as f64 + 0.37) / n as f64;
            let t = l * u;
            // right, left, top and bottom edges: (point, normal, traction)
            let edges = [
                (C64::new(l, t), (1.0, 0.0), (1.0, 0.0)),
                (C64::new(-l, t), (-1.0, 0.0), (-1.0, 0.0)),
                (C64::new(t, l), (0.0, 1.0), (0.0, 0.0)),
                (C64::new(t, -l), (0.0, -1.0), (0.0, 0.0)),
            ];
            let th = std::f64::consts::PI * u;
            let hole = (C64::from_polar(r, th), (-th.cos(), -th.sin()), (0.0, 0.0));
            for (z, (nx, ny), (tx, ty)) in edges.into_iter().chain([hole]) {
                let [sxx, syy, sxy] = o.stress(z).unwrap();
                worst = worst.max((sxx * nx + sxy * ny - tx).abs()).max((sxy * nx + syy * ny - ty).abs());
            }
        }
        assert!(worst < 1e-3, "{worst}");
        let top = o.stress(C64::new(0.0, r)).unwrap()[0];
        println!("sxx at the top of the hole: {top}");
        assert!(top > 3.0, "{top}");
    }
}
