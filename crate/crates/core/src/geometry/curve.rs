//! Boundary curves: segments and circular arcs.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::cdiff::C64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    Segment {
        a: C64,
        b: C64,
    },
    /// Traversed from `theta_start` to `theta_end`; clockwise when `theta_end < theta_start`.
    Arc {
        center: C64,
        radius: f64,
        theta_start: f64,
        theta_end: f64,
    },
}

impl Curve {
    pub fn segment(a: C64, b: C64) -> Curve {
        Curve::Segment { a, b }
    }

    pub fn arc(center: C64, radius: f64, theta_start: f64, theta_end: f64) -> Curve {
        Curve::Arc {
            center,
            radius,
            theta_start,
            theta_end,
        }
    }

    /// Full circle starting at angle 0; `ccw = false` traverses it clockwise.
    pub fn circle(center: C64, radius: f64, ccw: bool) -> Curve {
        let end = if ccw { 2.0 * PI } else { -2.0 * PI };
        Curve::arc(center, radius, 0.0, end)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Curve::Segment { a, b } => a.is_finite() && b.is_finite() && (b - a).norm() > 0.0,
            Curve::Arc {
                center,
                radius,
                theta_start,
                theta_end,
            } => {
                center.is_finite()
                    && radius > 0.0
                    && radius.is_finite()
                    && theta_start.is_finite()
                    && theta_end.is_finite()
                    && theta_start != theta_end
                    && (theta_end - theta_start).abs() <= 2.0 * PI + 1e-12
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Geometry(format!("degenerate curve {self:?}")))
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Curve::Segment { a, b } => (b - a).norm(),
            Curve::Arc {
                radius,
                theta_start,
                theta_end,
                ..
            } => radius * (theta_end - theta_start).abs(),
        }
    }

    /// Point at normalized arclength `t` in `[0, 1]`.
    pub fn point(&self, t: f64) -> C64 {
        match *self {
            Curve::Segment { a, b } => a + (b - a) * t,
            Curve::Arc {
                center,
                radius,
                theta_start,
                theta_end,
            } => center + C64::from_polar(radius, theta_start + t * (theta_end - theta_start)),
        }
    }

    /// Unit tangent in the traversal direction.
    pub fn tangent(&self, t: f64) -> C64 {
        match *self {
            Curve::Segment { a, b } => (b - a) / (b - a).norm(),
            Curve::Arc {
                theta_start,
                theta_end,
                ..
            } => {
                let th = theta_start + t * (theta_end - theta_start);
                C64::new(0.0, 1.0) * C64::from_polar(1.0, th) * (theta_end - theta_start).signum()
            }
        }
    }

    pub fn start(&self) -> C64 {
        self.point(0.0)
    }

    pub fn end(&self) -> C64 {
        self.point(1.0)
    }

    /// Contribution to the loop's signed area, `1/2 * integral (x dy - y dx)`.
    pub fn area_term(&self) -> f64 {
        match *self {
            Curve::Segment { a, b } => 0.5 * (a.re * b.im - a.im * b.re),
            Curve::Arc {
                center: c,
                radius: r,
                theta_start: t0,
                theta_end: t1,
            } => {
                0.5 * (r * c.re * (t1.sin() - t0.sin()) - r * c.im * (t1.cos() - t0.cos())
                    + r * r * (t1 - t0))
            }
        }
    }

    /// Crossings of the ray from `z` towards `+x`, half-open in `y` so that
    /// shared endpoints are counted once.
    pub fn ray_crossings(&self, z: C64) -> usize {
        match *self {
            Curve::Segment { a, b } => usize::from(segment_crosses(a, b, z)),
            Curve::Arc {
                center,
                radius,
                theta_start,
                theta_end,
            } => {
                let mut n = 0;
                for (ta, tb) in monotone_pieces(theta_start, theta_end) {
                    let p0 = center + C64::from_polar(radius, ta);
                    let p1 = center + C64::from_polar(radius, tb);
                    if above(p0, z) != above(p1, z) {
                        let dy = z.im - center.im;
                        let h = (radius * radius - dy * dy).max(0.0).sqrt();
                        let side = (0.5 * (ta + tb)).cos().signum();
                        if center.re + side * h > z.re {
                            n += 1;
                        }
                    }
                }
                n
            }
        }
    }

    pub fn distance(&self, z: C64) -> f64 {
        match *self {
            Curve::Segment { a, b } => {
                let d = b - a;
                let t = (((z - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
                (a + d * t - z).norm()
            }
            Curve::Arc {
                center,
                radius,
                theta_start,
                theta_end,
            } => {
                let rel = z - center;
                let ends = (self.start() - z).norm().min((self.end() - z).norm());
                if rel.norm() == 0.0 {
                    return radius;
                }
                if angle_in_sweep(rel.arg(), theta_start, theta_end) {
                    (rel.norm() - radius).abs().min(ends)
                } else {
                    ends
                }
            }
        }
    }

    /// Points whose bounding box contains the curve.
    pub fn extremes(&self) -> Vec<C64> {
        let mut pts = vec![self.start(), self.end()];
        if let Curve::Arc {
            center,
            radius,
            theta_start,
            theta_end,
        } = *self
        {
            for k in 0..4 {
                let th = k as f64 * FRAC_PI_2;
                if angle_in_sweep(th, theta_start, theta_end) {
                    pts.push(center + C64::from_polar(radius, th));
                }
            }
        }
        pts
    }
}

/// Endpoint copies that differ by rounding (closed circles, welded loops)
/// must land on the same side of the ray.
fn above(p: C64, z: C64) -> bool {
    p.im - z.im > 1e-12
}

fn segment_crosses(a: C64, b: C64, z: C64) -> bool {
    if above(a, z) == above(b, z) {
        return false;
    }
    let x = a.re + (z.im - a.im) * (b.re - a.re) / (b.im - a.im);
    x > z.re
}

/// Whether angle `th` lies on the sweep from `t0` to `t1` (either direction).
pub(crate) fn angle_in_sweep(th: f64, t0: f64, t1: f64) -> bool {
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    let k = ((th - lo) / (2.0 * PI)).floor();
    let shifted = th - k * 2.0 * PI;
    shifted <= hi + 1e-15
}

/// Splits an angular sweep at the points where `sin` is extremal so that `y`
/// is monotone on each piece.
fn monotone_pieces(t0: f64, t1: f64) -> Vec<(f64, f64)> {
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    let mut cuts = vec![lo];
    let mut k = ((lo - FRAC_PI_2) / PI).floor() + 1.0;
    loop {
        let c = FRAC_PI_2 + k * PI;
        if c >= hi {
            break;
        }
        if c > lo {
            cuts.push(c);
        }
        k += 1.0;
    }
    cuts.push(hi);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_tangent_and_area() {
        let c = Curve::circle(C64::new(1.0, -1.0), 2.0, true);
        assert!((c.length() - 4.0 * PI).abs() < 1e-14);
        assert!((c.area_term() - 4.0 * PI).abs() < 1e-12);
        let cw = Curve::circle(C64::new(1.0, -1.0), 2.0, false);
        assert!((cw.area_term() + 4.0 * PI).abs() < 1e-12);
        let t = c.tangent(0.25);
        assert!((t - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn arc_crossings_count_circle_once_or_twice() {
        let c = Curve::circle(C64::new(0.0, 0.0), 1.0, true);
        assert_eq!(c.ray_crossings(C64::new(0.2, 0.3)), 1);
        assert_eq!(c.ray_crossings(C64::new(-2.0, 0.3)), 2);
        assert_eq!(c.ray_crossings(C64::new(2.0, 0.3)), 0);
        assert_eq!(c.ray_crossings(C64::new(0.0, 1.5)), 0);
        // level of the start point: half-open rule still counts once
        assert_eq!(c.ray_crossings(C64::new(0.0, 0.0)), 1);
    }

    #[test]
    fn distances() {
        let s = Curve::segment(C64::new(0.0, 0.0), C64::new(2.0, 0.0));
        assert_eq!(s.distance(C64::new(1.0, 3.0)), 3.0);
        assert_eq!(s.distance(C64::new(3.0, 0.0)), 1.0);
        let a = Curve::arc(C64::new(0.0, 0.0), 1.0, 0.0, PI);
        assert!((a.distance(C64::new(0.0, 0.25)) - 0.75).abs() < 1e-15);
        assert!((a.distance(C64::new(0.0, -2.0)) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_curves_rejected() {
        assert!(Curve::segment(C64::new(1.0, 1.0), C64::new(1.0, 1.0)).validate().is_err());
        assert!(Curve::arc(C64::new(0.0, 0.0), 0.0, 0.0, 1.0).validate().is_err());
    }
}
