//! Domains bounded by segments and arcs, boundary conditions, sampling.

mod curve;
mod rad;

use rand::Rng;

use crate::cdiff::C64;
use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::representations::Demand;

pub use curve::Curve;
pub use rad::{rad_probabilities, rad_resample};

/// Tolerance for loop closure.
pub const CLOSURE_TOL: f64 = 1e-9;

/// Fraction of a curve's parameter range kept away from its endpoints.
const CORNER_OFFSET: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum BcSpec {
    Dirichlet(ScalarFn),
    Neumann(ScalarFn),
    Displacement([ScalarFn; 2]),
    Traction([ScalarFn; 2]),
}

#[derive(Debug, Clone)]
pub struct BoundaryCondition {
    pub spec: BcSpec,
    /// Loss weight per residual component.
    pub weights: Vec<f64>,
}

impl BoundaryCondition {
    pub fn new(spec: BcSpec) -> BoundaryCondition {
        let dims = match spec {
            BcSpec::Dirichlet(_) | BcSpec::Neumann(_) => 1,
            BcSpec::Displacement(_) | BcSpec::Traction(_) => 2,
        };
        BoundaryCondition {
            spec,
            weights: vec![1.0; dims],
        }
    }

    pub fn dirichlet(g: ScalarFn) -> Self {
        Self::new(BcSpec::Dirichlet(g))
    }

    pub fn neumann(g: ScalarFn) -> Self {
        Self::new(BcSpec::Neumann(g))
    }

    pub fn traction(tx: ScalarFn, ty: ScalarFn) -> Self {
        Self::new(BcSpec::Traction([tx, ty]))
    }

    pub fn displacement(gx: ScalarFn, gy: ScalarFn) -> Self {
        Self::new(BcSpec::Displacement([gx, gy]))
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.dims() || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Contract(format!(
                "boundary condition needs {} positive weight(s), got {weights:?}",
                self.dims()
            )));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn dims(&self) -> usize {
        match self.spec {
            BcSpec::Dirichlet(_) | BcSpec::Neumann(_) => 1,
            BcSpec::Displacement(_) | BcSpec::Traction(_) => 2,
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.dims() == 1
    }

    pub fn demand(&self) -> Demand {
        match self.spec {
            BcSpec::Dirichlet(_) => Demand::Value,
            BcSpec::Neumann(_) => Demand::Gradient,
            BcSpec::Displacement(_) => Demand::Displacement,
            BcSpec::Traction(_) => Demand::Stress,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.spec {
            BcSpec::Dirichlet(_) => "dirichlet",
            BcSpec::Neumann(_) => "neumann",
            BcSpec::Displacement(_) => "displacement",
            BcSpec::Traction(_) => "traction",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    pub curve: Curve,
    pub bc: BoundaryCondition,
    /// Negates the computed outward normal.
    pub flip_normal: bool,
}

impl BoundaryCurve {
    pub fn new(curve: Curve, bc: BoundaryCondition) -> Self {
        BoundaryCurve {
            curve,
            bc,
            flip_normal: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Hole {
    pub curves: Vec<BoundaryCurve>,
    /// Point inside the hole used by the Laurent terms.
    pub center: C64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub z: C64,
    /// Unit outward normal of the material.
    pub normal: C64,
    /// Global curve index (outer curves first, then holes in order).
    pub curve: usize,
}

#[derive(Debug, Clone)]
pub struct Domain {
    outer: Vec<BoundaryCurve>,
    holes: Vec<Hole>,
    /// Flattened view: (curve, loop index, normal sign). Loop 0 is the outer boundary.
    flat: Vec<(BoundaryCurve, usize, f64)>,
    cum_len: Vec<f64>,
    clearance: Vec<f64>,
}

impl Domain {
    pub fn new(outer: Vec<BoundaryCurve>, holes: Vec<Hole>) -> Result<Domain> {
        let check_loop = |curves: &[BoundaryCurve], what: &str| -> Result<f64> {
            if curves.is_empty() {
                return Err(Error::Geometry(format!("{what} has no curves")));
            }
            let mut area = 0.0;
            for (i, c) in curves.iter().enumerate() {
                c.curve
                    .validate()
                    .map_err(|e| Error::Geometry(format!("{what}, curve {i}: {e}")))?;
                let next = &curves[(i + 1) % curves.len()].curve;
                let gap = (c.curve.end() - next.start()).norm();
                if gap > CLOSURE_TOL {
                    return Err(Error::Geometry(format!(
                        "{what} is not closed: curve {i} ends {gap:.3e} away from the next start"
                    )));
                }
                area += c.curve.area_term();
            }
            if area.abs() < 1e-14 {
                return Err(Error::Geometry(format!("{what} encloses no area")));
            }
            Ok(area)
        };
        let outer_area = check_loop(&outer, "outer boundary")?;
        let mut flat: Vec<_> = outer
            .iter()
            .map(|c| (c.clone(), 0, outer_area.signum()))
            .collect();
        let mut clearance = Vec::with_capacity(holes.len());
        for (s, hole) in holes.iter().enumerate() {
            let what = format!("hole {s}");
            let area = check_loop(&hole.curves, &what)?;
            if !hole.center.is_finite() || loop_crossings(&hole.curves, hole.center) % 2 == 0 {
                return Err(Error::Geometry(format!(
                    "center {} of hole {s} is not inside the hole",
                    hole.center
                )));
            }
            for c in &hole.curves {
                for p in [c.curve.start(), c.curve.point(0.5)] {
                    if loop_crossings(&outer, p) % 2 == 0 {
                        return Err(Error::Geometry(format!("{what} is not inside the outer boundary")));
                    }
                }
            }
            clearance.push(
                hole.curves
                    .iter()
                    .map(|c| c.curve.distance(hole.center))
                    .fold(f64::INFINITY, f64::min),
            );
            flat.extend(hole.curves.iter().map(|c| (c.clone(), s + 1, -area.signum())));
        }
        let mut cum_len = Vec::with_capacity(flat.len() + 1);
        cum_len.push(0.0);
        for (c, _, _) in &flat {
            cum_len.push(cum_len.last().unwrap() + c.curve.length());
        }
        Ok(Domain {
            outer,
            holes,
            flat,
            cum_len,
            clearance,
        })
    }

    pub fn outer(&self) -> &[BoundaryCurve] {
        &self.outer
    }

    pub fn holes(&self) -> &[Hole] {
        &self.holes
    }

    pub fn n_holes(&self) -> usize {
        self.holes.len()
    }

    pub fn n_curves(&self) -> usize {
        self.flat.len()
    }

    pub fn curve(&self, idx: usize) -> &BoundaryCurve {
        &self.flat[idx].0
    }

    /// Loop of a global curve index: 0 for the outer boundary, `s + 1` for hole `s`.
    pub fn curve_loop(&self, idx: usize) -> usize {
        self.flat[idx].1
    }

    pub fn hole_centers(&self) -> Vec<C64> {
        self.holes.iter().map(|h| h.center).collect()
    }

    /// Distance from each hole center to its hole boundary.
    pub fn hole_clearance(&self) -> &[f64] {
        &self.clearance
    }

    pub fn perimeter(&self) -> f64 {
        *self.cum_len.last().unwrap()
    }

    /// Strict interior test (points exactly on the boundary are unspecified).
    pub fn contains(&self, z: C64) -> bool {
        loop_crossings(&self.outer, z) % 2 == 1
            && self.holes.iter().all(|h| loop_crossings(&h.curves, z) % 2 == 0)
    }

    pub fn bounding_box(&self) -> (C64, C64) {
        let mut lo = C64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in &self.outer {
            for p in c.curve.extremes() {
                lo = C64::new(lo.re.min(p.re), lo.im.min(p.im));
                hi = C64::new(hi.re.max(p.re), hi.im.max(p.im));
            }
        }
        (lo, hi)
    }

    /// Sample at global arclength position `s` in `[0, perimeter)`.
    pub fn sample_at(&self, s: f64) -> BoundarySample {
        let idx = match self.cum_len.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.flat.len() - 1),
            Err(i) => i - 1,
        };
        let (bc, _, sign) = &self.flat[idx];
        let len = bc.curve.length();
        let t = ((s - self.cum_len[idx]) / len).clamp(CORNER_OFFSET, 1.0 - CORNER_OFFSET);
        let flip = if bc.flip_normal { -1.0 } else { 1.0 };
        BoundarySample {
            z: bc.curve.point(t),
            normal: C64::new(0.0, -1.0) * bc.curve.tangent(t) * (sign * flip),
            curve: idx,
        }
    }

    /// `n` points with density proportional to arclength.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<BoundarySample>> {
        if n == 0 {
            return Err(Error::Contract("sample count must be positive".into()));
        }
        let total = self.perimeter();
        Ok((0..n).map(|_| self.sample_at(rng.gen::<f64>() * total)).collect())
    }

    /// `n` equally spaced points in arclength, shifted by `shift` in `[0, 1)` spacings.
    pub fn sample_stratified(&self, n: usize, shift: f64) -> Result<Vec<BoundarySample>> {
        if n == 0 {
            return Err(Error::Contract("sample count must be positive".into()));
        }
        let step = self.perimeter() / n as f64;
        Ok((0..n).map(|i| self.sample_at((i as f64 + shift) * step)).collect())
    }

    /// Fine stratified pool for adaptive resampling.
    pub fn build_pool<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Vec<BoundarySample>> {
        if m == 0 {
            return Err(Error::Contract("pool size must be positive".into()));
        }
        self.sample_stratified(m, rng.gen::<f64>())
    }

    /// Uniform interior points by rejection from the bounding box.
    pub fn sample_interior<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<C64>> {
        let (lo, hi) = self.bounding_box();
        let mut out = Vec::with_capacity(n);
        let mut tries = 0usize;
        while out.len() < n {
            tries += 1;
            if tries > 1000 * n.max(1) {
                return Err(Error::Geometry("interior rejection sampling failed".into()));
            }
            let z = C64::new(
                lo.re + rng.gen::<f64>() * (hi.re - lo.re),
                lo.im + rng.gen::<f64>() * (hi.im - lo.im),
            );
            if self.contains(z) {
                out.push(z);
            }
        }
        Ok(out)
    }

    /// Checks that segments from `center` to sampled boundary points stay inside
    /// the domain at the scale factors `ts`.
    pub fn check_star_shaped(&self, center: C64, ts: &[f64], n: usize) -> Result<()> {
        if !self.contains(center) {
            return Err(Error::Geometry(format!("expansion center {center} lies outside the domain")));
        }
        for b in self.sample_stratified(n, 0.5)? {
            for &t in ts {
                let p = center + (b.z - center) * t;
                if !self.contains(p) {
                    return Err(Error::Geometry(format!(
                        "domain is not star-shaped about {center}: segment to {} leaves it near {p}",
                        b.z
                    )));
                }
            }
        }
        Ok(())
    }
}

fn loop_crossings(curves: &[BoundaryCurve], z: C64) -> usize {
    curves.iter().map(|c| c.curve.ray_crossings(z)).sum()
}

/// Axis-aligned rectangle as four segments, counter-clockwise from `lo`,
/// with one boundary condition per edge (bottom, right, top, left).
pub fn rectangle(lo: C64, hi: C64, bcs: [BoundaryCondition; 4]) -> Vec<BoundaryCurve> {
    let corners = [lo, C64::new(hi.re, lo.im), hi, C64::new(lo.re, hi.im)];
    bcs.into_iter()
        .enumerate()
        .map(|(i, bc)| BoundaryCurve::new(Curve::segment(corners[i], corners[(i + 1) % 4]), bc))
        .collect()
}

/// Closed polygon through `vertices` with one condition for every edge.
pub fn polygon(vertices: &[C64], bc: &BoundaryCondition) -> Vec<BoundaryCurve> {
    (0..vertices.len())
        .map(|i| {
            BoundaryCurve::new(
                Curve::segment(vertices[i], vertices[(i + 1) % vertices.len()]),
                bc.clone(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::rng_for;
    use proptest::prelude::*;

    fn zero_dirichlet() -> BoundaryCondition {
        BoundaryCondition::dirichlet(ScalarFn::constant(0.0))
    }

    fn unit_disc() -> Domain {
        Domain::new(
            vec![BoundaryCurve::new(Curve::circle(C64::new(0.0, 0.0), 1.0, true), zero_dirichlet())],
            vec![],
        )
        .unwrap()
    }

    fn annulus() -> Domain {
        let bc = zero_dirichlet();
        Domain::new(
            vec![BoundaryCurve::new(Curve::circle(C64::new(0.0, 0.0), 2.0, true), bc.clone())],
            vec![Hole {
                curves: vec![BoundaryCurve::new(Curve::circle(C64::new(0.0, 0.0), 1.0, false), bc)],
                center: C64::new(0.0, 0.0),
            }],
        )
        .unwrap()
    }

    fn lshape() -> Domain {
        let v = [(-1.0, -1.0), (1.0, -1.0), (1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (-1.0, 1.0)]
            .map(|(x, y)| C64::new(x, y));
        Domain::new(polygon(&v, &zero_dirichlet()), vec![]).unwrap()
    }

    #[test]
    fn circle_normals_are_radial() {
        for s in unit_disc().sample_stratified(4, 0.0).unwrap() {
            assert!((s.normal - s.z / s.z.norm()).norm() < 1e-12);
        }
    }

    #[test]
    fn bottom_edge_normal_points_down() {
        let sq = Domain::new(
            rectangle(C64::new(0.0, 0.0), C64::new(1.0, 1.0), std::array::from_fn(|_| zero_dirichlet())),
            vec![],
        )
        .unwrap();
        let s = sq.sample_at(0.5);
        assert!((s.normal - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn hole_normals_point_into_the_hole() {
        let d = annulus();
        for s in d.sample_stratified(64, 0.3).unwrap() {
            let radial = s.z / s.z.norm();
            let want = if d.curve_loop(s.curve) == 0 { radial } else { -radial };
            assert!((s.normal - want).norm() < 1e-12);
        }
    }

    #[test]
    fn clockwise_outer_loop_gives_same_normals() {
        let d = Domain::new(
            vec![BoundaryCurve::new(Curve::circle(C64::new(0.0, 0.0), 1.0, false), zero_dirichlet())],
            vec![],
        )
        .unwrap();
        for s in d.sample_stratified(8, 0.1).unwrap() {
            assert!((s.normal - s.z).norm() < 1e-12);
        }
    }

    #[test]
    fn flip_flag_negates_normal() {
        let mut c = BoundaryCurve::new(Curve::circle(C64::new(0.0, 0.0), 1.0, true), zero_dirichlet());
        let a = Domain::new(vec![c.clone()], vec![]).unwrap().sample_at(1.0);
        c.flip_normal = true;
        let b = Domain::new(vec![c], vec![]).unwrap().sample_at(1.0);
        assert_eq!(a.normal, -b.normal);
    }

    #[test]
    fn containment() {
        let l = lshape();
        assert!(l.contains(C64::new(-0.5, 0.5)));
        assert!(l.contains(C64::new(0.5, -0.5)));
        assert!(!l.contains(C64::new(0.5, 0.5)));
        assert!(!l.contains(C64::new(1.5, 0.0)));
        let a = annulus();
        assert!(a.contains(C64::new(1.5, 0.0)));
        assert!(!a.contains(C64::new(0.5, 0.0)));
        assert!(!a.contains(C64::new(2.5, 0.0)));
    }

    #[test]
    fn validation_errors() {
        let bc = zero_dirichlet();
        let open = vec![BoundaryCurve::new(Curve::segment(C64::new(0.0, 0.0), C64::new(1.0, 0.0)), bc.clone())];
        assert!(matches!(Domain::new(open, vec![]), Err(Error::Geometry(_))));
        let bad_hole = Hole {
            curves: vec![BoundaryCurve::new(Curve::circle(C64::new(0.0, 0.0), 1.0, false), bc.clone())],
            center: C64::new(1.5, 0.0),
        };
        let outer = vec![BoundaryCurve::new(Curve::circle(C64::new(0.0, 0.0), 2.0, true), bc)];
        assert!(matches!(Domain::new(outer, vec![bad_hole]), Err(Error::Geometry(_))));
        assert!(unit_disc().sample_uniform(0, &mut rng_for(0, 0)).is_err());
        assert!(unit_disc().build_pool(0, &mut rng_for(0, 0)).is_err());
    }

    #[test]
    fn hole_clearance_is_inradius() {
        assert!((annulus().hole_clearance()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn star_shape_check() {
        let l = lshape();
        assert!(l.check_star_shaped(C64::new(-0.5, -0.5), &[0.25, 0.5, 0.99], 200).is_ok());
        assert!(l.check_star_shaped(C64::new(-0.9, 0.9), &[0.25, 0.5, 0.99], 200).is_err());
    }

    #[test]
    fn arclength_proportional_allocation() {
        // 3-4-5 triangle: chi-square over its edges at n = 1e5
        let v = [(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)].map(|(x, y)| C64::new(x, y));
        let d = Domain::new(polygon(&v, &zero_dirichlet()), vec![]).unwrap();
        let n = 100_000;
        let mut counts = [0usize; 3];
        for s in d.sample_uniform(n, &mut rng_for(5, 1)).unwrap() {
            counts[s.curve] += 1;
        }
        let expected = [3.0, 5.0, 4.0].map(|l| l / 12.0 * n as f64);
        let chi2: f64 = counts
            .iter()
            .zip(expected)
            .map(|(&c, e)| (c as f64 - e).powi(2) / e)
            .sum();
        // 99.9% quantile of chi-square with 2 degrees of freedom
        assert!(chi2 < 13.8, "chi2 = {chi2}, counts = {counts:?}");
    }

    proptest! {
        #[test]
        fn normals_are_unit_and_orthogonal(s in 0.0f64..1.0, seed in 0u64..50) {
            for d in [lshape(), annulus(), unit_disc()] {
                let b = d.sample_at(s * d.perimeter());
                let c = d.curve(b.curve);
                let t = match c.curve {
                    Curve::Segment { .. } => c.curve.tangent(0.5),
                    Curve::Arc { center, .. } => C64::new(0.0, 1.0) * (b.z - center),
                };
                prop_assert!((b.normal.norm() - 1.0).abs() < 1e-12);
                prop_assert!((b.normal * t.conj()).re.abs() < 1e-10);
            }
            let d = annulus();
            let a = d.sample_uniform(10, &mut rng_for(seed, 2)).unwrap();
            let b = d.sample_uniform(10, &mut rng_for(seed, 2)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
