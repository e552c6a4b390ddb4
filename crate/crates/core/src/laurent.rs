//! Composite potentials for domains with holes:
//! `phi(z) = base(z) + sum_s net_s(1 / (z - z_s)) + sum_s c_s log(z - z_s)`.
//!
//! With no holes this is just the base network. Each subnet has its own
//! input normalization; the `c_s` are real.

use serde::{Deserialize, Serialize};

use crate::cdiff::{Holo, Jet2, C64, ZERO};
use crate::error::{Error, Result};
use crate::nets::{JetTrace, Network, NetworkRecord, NormStats};

/// Fraction of the center-to-hole distance below which evaluation is refused.
pub const GUARD_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct HoleTerm {
    pub net: Network,
    pub stats: NormStats,
    pub center: C64,
    /// Minimum admissible `|z - center|`.
    pub guard: f64,
    pub log_coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPotential {
    pub base: Network,
    pub base_stats: NormStats,
    pub holes: Vec<HoleTerm>,
}

/// Per-evaluation cache for the hand-written backward pass.
#[derive(Debug, Clone, Default)]
pub struct LaurentTrace {
    base: JetTrace,
    holes: Vec<JetTrace>,
    logs: Vec<[C64; 3]>,
}

impl LaurentPotential {
    pub fn plain(base: Network, base_stats: NormStats) -> Self {
        LaurentPotential {
            base,
            base_stats,
            holes: Vec::new(),
        }
    }

    /// Length of the complex parameter surface: every network coefficient,
    /// then one slot per log coefficient.
    pub fn n_surface(&self) -> usize {
        self.base.n_complex() + self.holes.iter().map(|h| h.net.n_complex() + 1).sum::<usize>()
    }

    /// Real parameter count (network coefficients count twice, `c_s` once).
    pub fn n_real(&self) -> usize {
        self.base.n_real() + self.holes.iter().map(|h| h.net.n_real() + 1).sum::<usize>()
    }

    /// Complex surface: base coefficients, hole coefficients by hole, then `c_s + 0i`.
    pub fn surface(&self) -> Vec<C64> {
        let mut out = self.base.flat();
        for h in &self.holes {
            out.extend(h.net.flat());
        }
        out.extend(self.holes.iter().map(|h| C64::new(h.log_coeff, 0.0)));
        out
    }

    /// Real view in the same order: `(re, im)` per coefficient, then each `c_s`.
    pub fn params_real(&self) -> Vec<f64> {
        let n_log = self.holes.len();
        let surf = self.surface();
        let (nets, logs) = surf.split_at(surf.len() - n_log);
        let mut out: Vec<f64> = nets.iter().flat_map(|c| [c.re, c.im]).collect();
        out.extend(logs.iter().map(|c| c.re));
        out
    }

    pub fn set_params_real(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_real() {
            return Err(Error::Contract(format!(
                "expected {} real parameters, got {}",
                self.n_real(),
                p.len()
            )));
        }
        let take = |net: &mut Network, off: &mut usize| -> Result<()> {
            let n = net.n_complex();
            let flat: Vec<C64> = p[*off..*off + 2 * n].chunks(2).map(|c| C64::new(c[0], c[1])).collect();
            *off += 2 * n;
            net.set_flat(&flat)
        };
        let mut off = 0;
        take(&mut self.base, &mut off)?;
        for h in &mut self.holes {
            take(&mut h.net, &mut off)?;
        }
        for h in &mut self.holes {
            h.log_coeff = p[off];
            off += 1;
        }
        Ok(())
    }

    /// Converts a complex surface gradient into the real parameter order.
    pub fn surface_to_real(&self, g: &[C64], out: &mut Vec<f64>) {
        let n_log = self.holes.len();
        let (nets, logs) = g.split_at(g.len() - n_log);
        out.extend(nets.iter().flat_map(|c| [c.re, c.im]));
        out.extend(logs.iter().map(|c| c.re));
    }

    pub fn check_point(&self, z: C64) -> Result<()> {
        for (s, h) in self.holes.iter().enumerate() {
            let d = (z - h.center).norm();
            if d < h.guard {
                return Err(Error::Geometry(format!(
                    "evaluation point {z} lies inside hole {s} (|z - z_s| = {d:.3e} < guard {:.3e})",
                    h.guard
                )));
            }
        }
        Ok(())
    }

    /// Potential jet in the physical variable at `z`, up to `order`.
    pub fn forward_jet(&self, z: C64, order: usize, trace: &mut LaurentTrace) -> Result<[C64; 3]> {
        self.check_point(z)?;
        let inv = 1.0 / self.base_stats.sigma;
        let mut out = self.base.forward_jet(
            [self.base_stats.apply(z), C64::new(inv, 0.0), ZERO],
            order,
            &mut trace.base,
        )?;
        trace.holes.resize_with(self.holes.len(), JetTrace::default);
        trace.logs.resize(self.holes.len(), [ZERO; 3]);
        for (s, h) in self.holes.iter().enumerate() {
            let w = 1.0 / (z - h.center);
            let inv = 1.0 / h.stats.sigma;
            let input = [h.stats.apply(w), -w * w * inv, w * w * w * (2.0 * inv)];
            let y = h.net.forward_jet(input, order, &mut trace.holes[s])?;
            let log = [(z - h.center).ln(), w, -w * w];
            trace.logs[s] = log;
            for m in 0..=order {
                out[m] += y[m] + log[m] * h.log_coeff;
            }
        }
        Ok(out)
    }

    /// Accumulates the surface gradient given output-jet adjoints in the
    /// `dL/dRe + i dL/dIm` convention.
    pub fn backward_jet(&self, trace: &LaurentTrace, adj: [C64; 3], order: usize, grad: &mut [C64]) {
        let nb = self.base.n_complex();
        self.base.backward_jet(&trace.base, adj, order, &mut grad[..nb]);
        let mut off = nb;
        for (s, h) in self.holes.iter().enumerate() {
            let n = h.net.n_complex();
            h.net.backward_jet(&trace.holes[s], adj, order, &mut grad[off..off + n]);
            off += n;
        }
        for (s, log) in trace.logs.iter().enumerate().take(self.holes.len()) {
            let mut g = 0.0;
            for m in 0..=order {
                g += (adj[m].conj() * log[m]).re;
            }
            grad[off + s] += C64::new(g, 0.0);
        }
    }

    /// Generic evaluation with the complex surface supplied as `T` values
    /// (log coefficients as `c + 0i`), on an input jet in the physical variable.
    pub fn forward_with<T: Holo>(&self, surface: &[T], z: Jet2<T>) -> Jet2<T> {
        let lift = |p: &[T]| -> Vec<Jet2<T>> { p.iter().map(|&v| Jet2::constant(v)).collect() };
        let nb = self.base.n_complex();
        let mut out = self.base.forward_with(&lift(&surface[..nb]), self.base_stats.apply_holo(z));
        let mut off = nb;
        let n_nets: usize = nb + self.holes.iter().map(|h| h.net.n_complex()).sum::<usize>();
        for (s, h) in self.holes.iter().enumerate() {
            let n = h.net.n_complex();
            let shifted = z.offset(-h.center);
            let w = shifted.recip();
            out = out + h.net.forward_with(&lift(&surface[off..off + n]), h.stats.apply_holo(w));
            off += n;
            out = out + shifted.ln() * Jet2::constant(surface[n_nets + s]);
        }
        out
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        let mut trace = LaurentTrace::default();
        Ok(self.forward_jet(z, 0, &mut trace)?[0])
    }

    pub fn to_record(&self) -> PotentialRecord {
        PotentialRecord {
            base: self.base.to_record(),
            base_stats: self.base_stats,
            holes: self
                .holes
                .iter()
                .map(|h| HoleRecord {
                    net: h.net.to_record(),
                    stats: h.stats,
                    center: h.center,
                    guard: h.guard,
                })
                .collect(),
            log_coeffs: self.holes.iter().map(|h| h.log_coeff).collect(),
        }
    }

    pub fn from_record(rec: &PotentialRecord) -> Result<Self> {
        if rec.log_coeffs.len() != rec.holes.len() {
            return Err(Error::Contract(format!(
                "{} hole sections but {} log coefficients",
                rec.holes.len(),
                rec.log_coeffs.len()
            )));
        }
        let holes = rec
            .holes
            .iter()
            .zip(&rec.log_coeffs)
            .map(|(h, &c)| {
                Ok(HoleTerm {
                    net: Network::from_record(&h.net)?,
                    stats: h.stats,
                    center: h.center,
                    guard: h.guard,
                    log_coeff: c,
                })
            })
            .collect::<Result<_>>()?;
        Ok(LaurentPotential {
            base: Network::from_record(&rec.base)?,
            base_stats: rec.base_stats,
            holes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleRecord {
    pub net: NetworkRecord,
    pub stats: NormStats,
    pub center: C64,
    pub guard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialRecord {
    pub base: NetworkRecord,
    pub base_stats: NormStats,
    pub holes: Vec<HoleRecord>,
    pub log_coeffs: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdiff::{Field, Tape, ONE};
    use crate::nets::{rng_for, Arch, KanLayer, KanParams};
    use proptest::prelude::*;

    fn zero_kan() -> Network {
        Network::Kan(KanParams {
            widths: vec![1, 1],
            degree: 1,
            layers: vec![KanLayer { n_in: 1, n_out: 1, weights: vec![ZERO], biases: vec![ZERO] }],
        })
    }

    fn identity_kan() -> Network {
        Network::Kan(KanParams {
            widths: vec![1, 1],
            degree: 1,
            layers: vec![KanLayer { n_in: 1, n_out: 1, weights: vec![ONE], biases: vec![ZERO] }],
        })
    }

    fn annulus_potential(hole_net: Network, c: f64) -> LaurentPotential {
        LaurentPotential {
            base: zero_kan(),
            base_stats: NormStats::IDENTITY,
            holes: vec![HoleTerm {
                net: hole_net,
                stats: NormStats::IDENTITY,
                center: ZERO,
                guard: 0.5,
                log_coeff: c,
            }],
        }
    }

    fn random_potential(seed: u64) -> LaurentPotential {
        let arch = Arch::Kan { widths: vec![1, 3, 1], degree: 3 };
        let mut holes = Vec::new();
        for (s, center) in [C64::new(0.1, -0.2), C64::new(2.5, 0.3)].into_iter().enumerate() {
            holes.push(HoleTerm {
                net: Arch::Mlp { widths: vec![1, 2, 1] }.init(&mut rng_for(seed, 10 + s as u64)).unwrap(),
                stats: NormStats { mu: C64::new(0.2, 0.1), sigma: 0.7 },
                center,
                guard: 0.3,
                log_coeff: 0.3 - 0.5 * s as f64,
            });
        }
        LaurentPotential {
            base: arch.init(&mut rng_for(seed, 1)).unwrap(),
            base_stats: NormStats { mu: C64::new(1.0, 0.5), sigma: 1.3 },
            holes,
        }
    }

    #[test]
    fn no_holes_reduces_to_base() {
        let base = Arch::Kan { widths: vec![1, 4, 1], degree: 2 }.init(&mut rng_for(3, 0)).unwrap();
        let stats = NormStats { mu: C64::new(0.5, 0.0), sigma: 2.0 };
        let p = LaurentPotential::plain(base.clone(), stats);
        let z = C64::new(0.3, 0.9);
        assert_eq!(p.eval(z).unwrap(), base.eval(stats.apply(z)).unwrap());
    }

    #[test]
    fn pure_log_term() {
        let p = annulus_potential(zero_kan(), 1.0);
        let z = C64::new(1.2, -0.7);
        let v = p.eval(z).unwrap();
        assert!((v - z.ln()).norm() < 1e-15);
        assert!((v.re - z.norm().ln()).abs() < 1e-15);
    }

    #[test]
    fn identity_hole_net_gives_reciprocal() {
        let p = annulus_potential(identity_kan(), 0.0);
        let z = C64::new(1.1, 0.4);
        let j = p.forward_jet(z, 2, &mut LaurentTrace::default()).unwrap();
        let want = [1.0 / z, -1.0 / (z * z), 2.0 / (z * z * z)];
        for (g, w) in j.iter().zip(want) {
            assert!((g - w).norm() < 1e-14);
        }
    }

    #[test]
    fn guard_rejects_points_in_hole() {
        let p = annulus_potential(zero_kan(), 1.0);
        assert!(matches!(p.eval(C64::new(0.2, 0.0)), Err(Error::Geometry(_))));
    }

    #[test]
    fn surface_round_trip_and_counts() {
        let mut p = random_potential(5);
        assert_eq!(p.n_real(), p.base.n_real() + p.holes.iter().map(|h| h.net.n_real()).sum::<usize>() + 2);
        let real = p.params_real();
        p.set_params_real(&real).unwrap();
        assert_eq!(p.params_real(), real);
        let json = serde_json::to_string(&p.to_record()).unwrap();
        let back = LaurentPotential::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn log_coefficient_update_only_changes_log_term() {
        let mut p = random_potential(2);
        let z = C64::new(1.5, 1.5);
        let before = p.eval(z).unwrap();
        let mut real = p.params_real();
        let n = real.len();
        real[n - 2] += 0.25;
        p.set_params_real(&real).unwrap();
        let after = p.eval(z).unwrap();
        assert!((after - before - (z - p.holes[0].center).ln() * 0.25).norm() < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn fast_path_matches_generic_route(seed in 0u64..500, x in 1.0f64..2.0, y in 0.8f64..2.0, order in 0usize..3) {
            let p = random_potential(seed);
            let z = C64::new(x, y);
            let fast = p.forward_jet(z, order, &mut LaurentTrace::default()).unwrap();
            let generic = p.forward_with(&p.surface(), Jet2::seed(z)).values();
            for m in 0..=order {
                prop_assert!((fast[m] - generic[m]).norm() <= 1e-10 * (1.0 + fast[m].norm()));
            }

            // gradients of L = Re(a . jet) through the tape and the hand-written pass
            let coef = [C64::new(0.4, 0.3), C64::new(-0.2, 0.8), C64::new(0.6, -0.1)];
            let tape = Tape::new();
            let surface: Vec<_> = p.surface().iter().map(|&c| tape.param(c)).collect();
            let out = p.forward_with(&surface, Jet2::seed(tape.constant(z)));
            let comps = [out.v, out.d1, out.d2];
            let mut loss = tape.constant(ZERO);
            for m in 0..=order {
                loss = loss + (comps[m] * tape.constant(coef[m])).real();
            }
            let g_tape = tape.backward(loss).unwrap().params();
            let mut trace = LaurentTrace::default();
            p.forward_jet(z, order, &mut trace).unwrap();
            let mut adj = [ZERO; 3];
            for m in 0..=order {
                adj[m] = coef[m].conj();
            }
            let mut g_fast = vec![ZERO; p.n_surface()];
            p.backward_jet(&trace, adj, order, &mut g_fast);
            let n_nets = p.n_surface() - p.holes.len();
            for (i, (a, b)) in g_tape.iter().zip(&g_fast).enumerate() {
                let (a, b) = if i >= n_nets { (C64::new(a.re, 0.0), *b) } else { (*a, *b) };
                prop_assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()), "slot {}: {} vs {}", i, a, b);
            }
        }

        #[test]
        fn real_part_is_harmonic(seed in 0u64..500, x in 1.0f64..2.0, y in 0.8f64..2.0) {
            let p = random_potential(seed);
            let h = 1e-3;
            let u = |dx: f64, dy: f64| p.eval(C64::new(x + dx, y + dy)).unwrap().re;
            let lap = (u(h, 0.0) + u(-h, 0.0) + u(0.0, h) + u(0.0, -h) - 4.0 * u(0.0, 0.0)) / (h * h);
            let scale = 1.0 + p.forward_jet(C64::new(x, y), 2, &mut LaurentTrace::default()).unwrap()[2].norm();
            prop_assert!(lap.abs() < 1e-5 * scale, "laplacian {}", lap);
        }
    }
}
