//! Finite-difference reference solvers on uniform grids.

use std::f64::consts::PI;

use crate::cdiff::C64;
use crate::error::{Error, Result};
use crate::geometry::{Curve, Domain};

/// Nodal values on a uniform grid. Nodes outside `mask` hold boundary data.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub origin: C64,
    pub h: f64,
    /// Node counts along x and y.
    pub nx: usize,
    pub ny: usize,
    /// Row-major in y: `values[j * nx + i]` at `origin + (i h, j h)`.
    pub values: Vec<f64>,
    /// Unknown (interior) nodes.
    pub mask: Vec<bool>,
}

impl GridSolution {
    pub fn node(&self, i: usize, j: usize) -> C64 {
        self.origin + C64::new(i as f64 * self.h, j as f64 * self.h)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Bicubic (Catmull-Rom) interpolation where all sixteen surrounding nodes
    /// are unknowns, bilinear elsewhere.
    pub fn interpolate(&self, z: C64) -> Result<f64> {
        let s = (z - self.origin) / self.h;
        let eps = 1e-9;
        if s.re < -eps || s.im < -eps || s.re > (self.nx - 1) as f64 + eps || s.im > (self.ny - 1) as f64 + eps {
            return Err(Error::Range(format!("point {z} lies outside the grid")));
        }
        let i = (s.re.floor().max(0.0) as usize).min(self.nx - 2);
        let j = (s.im.floor().max(0.0) as usize).min(self.ny - 2);
        let (tx, ty) = (s.re - i as f64, s.im - j as f64);
        let cubic = i >= 1
            && j >= 1
            && i + 2 < self.nx
            && j + 2 < self.ny
            && (j - 1..=j + 2).all(|b| (i - 1..=i + 2).all(|a| self.mask[b * self.nx + a]));
        if cubic {
            let wx = catmull_rom(tx);
            let wy = catmull_rom(ty);
            let mut v = 0.0;
            for (b, wb) in wy.iter().enumerate() {
                for (a, wa) in wx.iter().enumerate() {
                    v += wa * wb * self.value(i + a - 1, j + b - 1);
                }
            }
            return Ok(v);
        }
        Ok((1.0 - tx) * (1.0 - ty) * self.value(i, j)
            + tx * (1.0 - ty) * self.value(i + 1, j)
            + (1.0 - tx) * ty * self.value(i, j + 1)
            + tx * ty * self.value(i + 1, j + 1))
    }
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let (t2, t3) = (t * t, t * t * t);
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

fn grid_dims(lo: C64, hi: C64, h: f64) -> Result<(usize, usize)> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Range(format!("grid spacing must be positive, got {h}")));
    }
    let nx = ((hi.re - lo.re) / h).ceil() as usize + 1;
    let ny = ((hi.im - lo.im) / h).ceil() as usize + 1;
    if nx < 4 || ny < 4 {
        return Err(Error::Range(format!("grid spacing {h} does not resolve the domain")));
    }
    if nx.saturating_mul(ny) > 50_000_000 {
        return Err(Error::Range(format!("grid spacing {h} gives too many nodes")));
    }
    Ok((nx, ny))
}

pub const CG_TOLERANCE: f64 = 1e-10;

/// Solves `-lap u = rhs` with `u = g` on the boundary using the 5-point
/// stencil and conjugate gradients. Nodes within `1e-9` of the boundary, or
/// outside the domain, take the value `g`.
pub fn fd_poisson_solve(
    domain: &Domain,
    h: f64,
    rhs: impl Fn(C64) -> f64,
    g: impl Fn(C64) -> f64,
) -> Result<GridSolution> {
    let (lo, hi) = domain.bounding_box();
    let (nx, ny) = grid_dims(lo, hi, h)?;
    let mut sol = GridSolution {
        origin: lo,
        h,
        nx,
        ny,
        values: vec![0.0; nx * ny],
        mask: vec![false; nx * ny],
    };
    let tol = 1e-9 * h.max(1e-300);
    let mut index = vec![usize::MAX; nx * ny];
    let mut unknowns = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let z = sol.node(i, j);
            let k = j * nx + i;
            let inside = i > 0
                && j > 0
                && i + 1 < nx
                && j + 1 < ny
                && domain.contains(z)
                && (0..domain.n_curves()).all(|c| domain.curve(c).curve.distance(z) > tol);
            if inside {
                sol.mask[k] = true;
                index[k] = unknowns.len();
                unknowns.push(k);
            } else {
                sol.values[k] = g(z);
            }
        }
    }
    let n = unknowns.len();
    if n == 0 {
        return Err(Error::Range("no interior grid nodes".into()));
    }
    let h2 = h * h;
    // usize::MAX marks a known neighbour
    let mut nbr = vec![[usize::MAX; 4]; n];
    let mut b = vec![0.0; n];
    for (u, &k) in unknowns.iter().enumerate() {
        let (i, j) = (k % nx, k / nx);
        b[u] = rhs(sol.node(i, j)) * h2;
        for (slot, kk) in [k - 1, k + 1, k - nx, k + nx].into_iter().enumerate() {
            if sol.mask[kk] {
                nbr[u][slot] = index[kk];
            } else {
                b[u] += sol.values[kk];
            }
        }
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for u in 0..n {
            let mut s = 4.0 * x[u];
            for &v in &nbr[u] {
                if v != usize::MAX {
                    s -= x[v];
                }
            }
            y[u] = s;
        }
    };
    let x = conjugate_gradient(apply, &b, 20 * (nx + ny) + 1000)?;
    for (u, &k) in unknowns.iter().enumerate() {
        sol.values[k] = x[u];
    }
    Ok(sol)
}

/// Unpreconditioned CG to relative residual [`CG_TOLERANCE`].
fn conjugate_gradient(apply: impl Fn(&[f64], &mut [f64]), b: &[f64], max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= CG_TOLERANCE * bnorm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::Solver(format!(
        "conjugate gradients did not reach relative residual {CG_TOLERANCE:e} in {max_iter} iterations (reached {:e})",
        rr.sqrt() / bnorm
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// Second order.
    FivePoint,
    /// Fourth-order compact nine-point scheme.
    Compact,
}

/// Corners of `domain` when it is an axis-aligned rectangle without holes.
fn rectangle_of(domain: &Domain) -> Result<(C64, C64)> {
    let not_rect = || Error::Unsupported("the Helmholtz grid solver handles axis-aligned rectangles only".into());
    if domain.n_holes() > 0 || domain.outer().len() != 4 {
        return Err(not_rect());
    }
    for c in domain.outer() {
        match c.curve {
            Curve::Segment { a, b } if a.re == b.re || a.im == b.im => {}
            _ => return Err(not_rect()),
        }
    }
    Ok(domain.bounding_box())
}

/// `(sin(pi m i / n))` for `m, i = 1..n-1`.
fn sine_matrix(n: usize) -> Vec<f64> {
    let m = n - 1;
    let mut s = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            s[a * m + b] = (PI * ((a + 1) * (b + 1)) as f64 / n as f64).sin();
        }
    }
    s
}

/// Applies the sine transform along both axes of an `(ny-1) x (nx-1)` array.
fn sine_transform_2d(data: &mut [f64], sx: &[f64], sy: &[f64], mx: usize, my: usize) {
    let mut tmp = vec![0.0; mx];
    for row in data.chunks_mut(mx) {
        for a in 0..mx {
            tmp[a] = sx[a * mx..(a + 1) * mx].iter().zip(row.iter()).map(|(s, v)| s * v).sum();
        }
        row.copy_from_slice(&tmp);
    }
    let mut col = vec![0.0; my];
    let mut out = vec![0.0; my];
    for i in 0..mx {
        for j in 0..my {
            col[j] = data[j * mx + i];
        }
        for a in 0..my {
            out[a] = sy[a * my..(a + 1) * my].iter().zip(&col).map(|(s, v)| s * v).sum();
        }
        for j in 0..my {
            data[j * mx + i] = out[j];
        }
    }
}

/// Solves `lap u + beta^2 u = 0` with `u = g` on the boundary of an
/// axis-aligned rectangle, diagonalizing the discrete operator with sine
/// transforms. Requires `h <= lambda / 30`.
pub fn fd_helmholtz_solve(
    domain: &Domain,
    h: f64,
    beta: f64,
    g: impl Fn(C64) -> f64,
    stencil: Stencil,
) -> Result<GridSolution> {
    let (lo, hi) = rectangle_of(domain)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Range(format!("wave number must be non-negative, got {beta}")));
    }
    if beta > 0.0 && h > 2.0 * PI / beta / 30.0 {
        return Err(Error::Range(format!(
            "grid spacing {h} exceeds a thirtieth of the wavelength {}",
            2.0 * PI / beta
        )));
    }
    let (w, ht) = (hi.re - lo.re, hi.im - lo.im);
    let cx = (w / h).round().max(1.0) as usize;
    let cy = (ht / h).round().max(1.0) as usize;
    let h = w / cx as f64;
    if ((ht / cy as f64) - h).abs() > 1e-12 * w {
        return Err(Error::Range(format!("side lengths {w} and {ht} admit no common grid spacing near {h}")));
    }
    if cx < 4 || cy < 4 {
        return Err(Error::Range(format!("grid spacing {h} does not resolve the domain")));
    }
    let (nx, ny) = (cx + 1, cy + 1);
    let mut sol = GridSolution {
        origin: lo,
        h,
        nx,
        ny,
        values: vec![0.0; nx * ny],
        mask: vec![false; nx * ny],
    };
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if i == 0 || j == 0 || i == cx || j == cy {
                sol.values[k] = g(sol.node(i, j));
            } else {
                sol.mask[k] = true;
            }
        }
    }
    let (mx, my) = (cx - 1, cy - 1);
    let h2 = h * h;
    let b2 = beta * beta;
    // right-hand side: minus the operator applied to the boundary lift
    let lift = |i: usize, j: usize| if sol.mask[j * nx + i] { 0.0 } else { sol.values[j * nx + i] };
    let mut f = vec![0.0; mx * my];
    for j in 1..cy {
        for i in 1..cx {
            let edges = lift(i - 1, j) + lift(i + 1, j) + lift(i, j - 1) + lift(i, j + 1);
            let op = match stencil {
                Stencil::FivePoint => edges / h2,
                Stencil::Compact => {
                    let corners =
                        lift(i - 1, j - 1) + lift(i + 1, j - 1) + lift(i - 1, j + 1) + lift(i + 1, j + 1);
                    (4.0 * edges + corners) / (6.0 * h2) + b2 * edges / 12.0
                }
            };
            f[(j - 1) * mx + (i - 1)] = -op;
        }
    }
    let sx = sine_matrix(cx);
    let sy = sine_matrix(cy);
    sine_transform_2d(&mut f, &sx, &sy, mx, my);
    let lam = |m: usize, n: usize| -4.0 / h2 * (PI * m as f64 / (2.0 * n as f64)).sin().powi(2);
    let mut smallest = f64::INFINITY;
    for b in 0..my {
        let ly = lam(b + 1, cy);
        for a in 0..mx {
            let lx = lam(a + 1, cx);
            let eig = match stencil {
                Stencil::FivePoint => lx + ly + b2,
                Stencil::Compact => lx + ly + h2 / 6.0 * lx * ly + b2 * (1.0 + h2 / 12.0 * (lx + ly)),
            };
            smallest = smallest.min(eig.abs());
            f[b * mx + a] /= eig;
        }
    }
    if smallest < 1e-10 * (8.0 / h2) {
        return Err(Error::Solver(format!(
            "wave number {beta} is resonant on this grid (smallest eigenvalue {smallest:e})"
        )));
    }
    sine_transform_2d(&mut f, &sx, &sy, mx, my);
    let norm = 4.0 / (cx * cy) as f64;
    for j in 1..cy {
        for i in 1..cx {
            sol.values[j * nx + i] = norm * f[(j - 1) * mx + (i - 1)];
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::exact::helmholtz_square_series;
    use crate::expr::ScalarFn;
    use crate::geometry::{polygon, rectangle, BoundaryCondition};
    use crate::representations::bessel_j;

    fn rect(lo: C64, hi: C64) -> Domain {
        let bc = BoundaryCondition::dirichlet(ScalarFn::constant(0.0));
        Domain::new(rectangle(lo, hi, [bc.clone(), bc.clone(), bc.clone(), bc]), vec![]).unwrap()
    }

    fn max_nodal_error(sol: &GridSolution, exact: impl Fn(C64) -> f64) -> f64 {
        let mut e: f64 = 0.0;
        for j in 0..sol.ny {
            for i in 0..sol.nx {
                if sol.mask[j * sol.nx + i] {
                    e = e.max((sol.value(i, j) - exact(sol.node(i, j))).abs());
                }
            }
        }
        e
    }

    /// `sum_{m,n odd} 16 / (pi^2 m n) sin(m pi x) sin(n pi y) / (pi^2 (m^2 + n^2))`.
    fn square_poisson_series(x: f64, y: f64, terms: usize) -> f64 {
        let mut s = 0.0;
        for m in (1..2 * terms).step_by(2) {
            for n in (1..2 * terms).step_by(2) {
                let (mf, nf) = (m as f64, n as f64);
                s += 16.0 / (PI.powi(4) * mf * nf * (mf * mf + nf * nf)) * (mf * PI * x).sin() * (nf * PI * y).sin();
            }
        }
        s
    }

    #[test]
    fn unit_square_center_value() {
        let series = square_poisson_series(0.5, 0.5, 200);
        assert!((series - 0.0736713).abs() < 1e-6, "{series}");
        let sol = fd_poisson_solve(&rect(C64::new(0.0, 0.0), C64::new(1.0, 1.0)), 1.0 / 200.0, |_| 1.0, |_| 0.0).unwrap();
        let c = sol.interpolate(C64::new(0.5, 0.5)).unwrap();
        assert!((c - series).abs() < 2e-5, "{c} vs {series}");
        assert!((c - 0.07367).abs() < 1e-5);
    }

    #[test]
    fn harmonic_quadratic_is_reproduced() {
        let g = |z: C64| z.re * z.re - z.im * z.im;
        let sol = fd_poisson_solve(&rect(C64::new(-1.0, 0.0), C64::new(1.0, 1.0)), 0.05, |_| 0.0, g).unwrap();
        assert!(max_nodal_error(&sol, g) < 1e-8);
    }

    #[test]
    fn poisson_converges_at_second_order() {
        let exact = |z: C64| z.re.sin() * z.im.exp() + (2.0 * z.re).cos() * (2.0 * z.im).cosh();
        let bc = BoundaryCondition::dirichlet(ScalarFn::constant(0.0));
        let v = [
            C64::new(-1.0, -1.0),
            C64::new(1.0, -1.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(-1.0, 1.0),
        ];
        let domain = Domain::new(polygon(&v, &bc), vec![]).unwrap();
        let e1 = max_nodal_error(&fd_poisson_solve(&domain, 0.04, |_| 0.0, exact).unwrap(), exact);
        let e2 = max_nodal_error(&fd_poisson_solve(&domain, 0.02, |_| 0.0, exact).unwrap(), exact);
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn helmholtz_bessel_solution() {
        let beta = 10.0;
        let x0 = C64::new(-0.5, -0.3);
        let exact = |z: C64| bessel_j(0, beta * (z - x0).norm()).unwrap();
        let domain = rect(C64::new(0.0, 0.0), C64::new(1.0, 1.0));
        let mut errs = Vec::new();
        for n in [60, 120] {
            let sol5 = fd_helmholtz_solve(&domain, 1.0 / n as f64, beta, exact, Stencil::FivePoint).unwrap();
            let sol9 = fd_helmholtz_solve(&domain, 1.0 / n as f64, beta, exact, Stencil::Compact).unwrap();
            errs.push((max_nodal_error(&sol5, exact), max_nodal_error(&sol9, exact)));
        }
        let r5 = errs[0].0 / errs[1].0;
        let r9 = errs[0].1 / errs[1].1;
        assert!((3.5..=4.5).contains(&r5), "five-point ratio {r5}");
        assert!(r9 > 12.0, "compact ratio {r9}");
        assert!(errs[1].1 < 1e-6, "{errs:?}");
    }

    #[test]
    fn helmholtz_zero_wave_number_matches_poisson() {
        let g = |z: C64| (z.re * 2.0).sin() * (2.0 * z.im).sinh() + z.re;
        let domain = rect(C64::new(0.0, 0.0), C64::new(1.0, 0.5));
        let a = fd_helmholtz_solve(&domain, 0.025, 0.0, g, Stencil::FivePoint).unwrap();
        let b = fd_poisson_solve(&domain, 0.025, |_| 0.0, g).unwrap();
        assert_eq!((a.nx, a.ny), (b.nx, b.ny));
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn helmholtz_separable_sine() {
        let beta = 6.0;
        let g = |z: C64| (beta * z.re).sin();
        let domain = rect(C64::new(0.0, 0.0), C64::new(1.0, 0.4));
        let five = fd_helmholtz_solve(&domain, 0.01, beta, g, Stencil::FivePoint).unwrap();
        assert!(max_nodal_error(&five, g) < 5e-3);
        let compact = fd_helmholtz_solve(&domain, 0.01, beta, g, Stencil::Compact).unwrap();
        assert!(max_nodal_error(&compact, g) < 1e-6);
    }

    #[test]
    fn helmholtz_square_matches_series() {
        let beta = 2.0 * PI * 1000.0 / 343.0;
        let bc = BoundaryCondition::dirichlet(ScalarFn::constant(1.0));
        let domain = Domain::new(
            rectangle(C64::new(-0.75, -0.75), C64::new(0.75, 0.75), [bc.clone(), bc.clone(), bc.clone(), bc]),
            vec![],
        )
        .unwrap();
        let sol = fd_helmholtz_solve(&domain, 1.5 / 300.0, beta, |_| 1.0, Stencil::Compact).unwrap();
        let mut worst: f64 = 0.0;
        for &(x, y) in &[(0.0, 0.0), (0.3, -0.2), (-0.6, 0.5), (0.7, 0.7)] {
            let z = C64::new(x, y);
            let s = helmholtz_square_series(1.5, beta, z - C64::new(-0.75, -0.75), 600).unwrap();
            worst = worst.max((sol.interpolate(z).unwrap() - s).abs());
        }
        assert!(worst < 2e-3, "{worst}");
    }

    #[test]
    fn coarse_helmholtz_grid_rejected() {
        let domain = rect(C64::new(0.0, 0.0), C64::new(1.0, 1.0));
        assert!(matches!(
            fd_helmholtz_solve(&domain, 0.1, 18.0, |_| 1.0, Stencil::Compact),
            Err(Error::Range(_))
        ));
    }
}
