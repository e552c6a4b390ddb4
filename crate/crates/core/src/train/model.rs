//! The trainable object: one (possibly Laurent) potential per problem potential.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdiff::{C64, ZERO};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurve, Domain};
use crate::laurent::{HoleTerm, LaurentPotential, LaurentTrace, GUARD_FACTOR};
use crate::nets::{estimate_norm_stats, rng_for, Arch, NormStats};
use crate::representations::{Demand, FieldValues, ProblemKind, ProblemSpec};

/// RNG stream ids derived from the run seed.
pub mod streams {
    pub const NORM_STATS: u64 = 1;
    pub const TRAIN_POINTS: u64 = 2;
    pub const POOL: u64 = 3;
    pub const RAD: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const GRADCHECK: u64 = 6;

    /// Base network of potential `n`.
    pub fn base_net(n: usize) -> u64 {
        100 + 64 * n as u64
    }

    /// Hole network `s` of potential `n`.
    pub fn hole_net(n: usize, s: usize) -> u64 {
        base_net(n) + 1 + s as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    /// Architecture of the hole networks; half the base width when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hole_arch: Option<Arch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub problem: ProblemSpec,
    pub potentials: Vec<LaurentPotential>,
}

/// `n` arclength-uniform points on a closed loop of curves.
fn sample_loop<R: Rng + ?Sized>(curves: &[BoundaryCurve], n: usize, rng: &mut R) -> Vec<C64> {
    let lens: Vec<f64> = curves.iter().map(|c| c.curve.length()).collect();
    let total: f64 = lens.iter().sum();
    (0..n)
        .map(|_| {
            let mut s = rng.gen::<f64>() * total;
            for (c, len) in curves.iter().zip(&lens) {
                if s < *len {
                    return c.curve.point(s / len);
                }
                s -= len;
            }
            let last = curves.last().expect("hole has curves");
            last.curve.point(1.0)
        })
        .collect()
}

impl Model {
    /// Estimates normalization from `10 * n_train` boundary samples, initializes
    /// every network from its own RNG stream and fixes the Vekua center.
    pub fn new(mut problem: ProblemSpec, domain: &Domain, spec: &ModelSpec, seed: u64, n_train: usize) -> Result<Model> {
        let mut rng = rng_for(seed, streams::NORM_STATS);
        let samples: Vec<C64> = domain
            .sample_uniform(10 * n_train.max(1), &mut rng)?
            .iter()
            .map(|s| s.z)
            .collect();
        let base_stats = estimate_norm_stats(|_| Ok(samples.clone()), n_train)?;
        let centers = domain.hole_centers();
        // Hole inputs are normalized over their own hole boundary, so |w| stays
        // near 1 there and smaller elsewhere.
        let hole_stats = domain
            .holes()
            .iter()
            .map(|h| {
                let pts = sample_loop(&h.curves, 10 * n_train.max(1), &mut rng);
                NormStats::estimate(&pts.iter().map(|z| 1.0 / (z - h.center)).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let hole_arch = spec.hole_arch.clone().unwrap_or_else(|| spec.arch.scaled_hidden(0.5));

        let mut potentials = Vec::with_capacity(problem.n_potentials());
        for n in 0..problem.n_potentials() {
            let base = spec.arch.init(&mut rng_for(seed, streams::base_net(n)))?;
            let mut holes = Vec::with_capacity(centers.len());
            for (s, (&center, stats)) in centers.iter().zip(&hole_stats).enumerate() {
                holes.push(HoleTerm {
                    net: hole_arch.init(&mut rng_for(seed, streams::hole_net(n, s)))?,
                    stats: *stats,
                    center,
                    guard: GUARD_FACTOR * domain.hole_clearance()[s],
                    log_coeff: 0.0,
                });
            }
            potentials.push(LaurentPotential {
                base,
                base_stats,
                holes,
            });
        }

        if let ProblemKind::Helmholtz { quad, .. } = &problem.kind {
            if domain.n_holes() > 0 {
                return Err(Error::Unsupported("Helmholtz problems on domains with holes".into()));
            }
            problem.center = base_stats.mu;
            let ts: Vec<f64> = quad.nodes.iter().map(|s| 1.0 - s * s).collect();
            domain.check_star_shaped(problem.center, &ts, 400)?;
        }
        Ok(Model { problem, potentials })
    }

    pub fn n_real(&self) -> usize {
        self.potentials.iter().map(|p| p.n_real()).sum()
    }

    /// Concatenated real parameter views of all potentials.
    pub fn params_real(&self) -> Vec<f64> {
        self.potentials.iter().flat_map(|p| p.params_real()).collect()
    }

    pub fn set_params_real(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_real() {
            return Err(Error::Contract(format!(
                "expected {} real parameters, got {}",
                self.n_real(),
                params.len()
            )));
        }
        let mut off = 0;
        for p in &mut self.potentials {
            let n = p.n_real();
            p.set_params_real(&params[off..off + n])?;
            off += n;
        }
        Ok(())
    }

    /// Marks hole-network coefficients and log coefficients (in the real view).
    pub fn laurent_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.n_real());
        for p in &self.potentials {
            mask.extend(std::iter::repeat(false).take(p.base.n_real()));
            mask.extend(std::iter::repeat(true).take(p.n_real() - p.base.n_real()));
        }
        mask
    }

    /// Real-view index triples `(free, tied, factor)` keeping elastic displacements
    /// single-valued: the `φ₂` log coefficient of each hole is `-κ` times the `φ₁` one.
    /// Without this, a force-free dislocation with zero boundary tractions is
    /// invisible to a traction loss. Empty for other problems.
    pub fn log_ties(&self) -> Vec<(usize, usize, f64)> {
        let ProblemKind::Elasticity { kappa, .. } = self.problem.kind else {
            return Vec::new();
        };
        let mut log_offsets = Vec::with_capacity(self.potentials.len());
        let mut off = 0;
        for p in &self.potentials {
            off += p.n_real();
            log_offsets.push(off - p.holes.len());
        }
        (0..self.potentials[0].holes.len())
            .map(|s| (log_offsets[0] + s, log_offsets[1] + s, -kappa))
            .collect()
    }

    /// Zeroes every hole network and log coefficient.
    pub fn zero_laurent_terms(&mut self) -> Result<()> {
        let mask = self.laurent_mask();
        let mut params = self.params_real();
        for (p, m) in params.iter_mut().zip(mask) {
            if m {
                *p = 0.0;
            }
        }
        self.set_params_real(&params)
    }

    /// Plain field evaluation at an interior or boundary point.
    pub fn fields(&self, z: C64, demand: Demand) -> Result<FieldValues<C64>> {
        let taps = self.problem.taps(z, demand)?;
        let mut trace = LaurentTrace::default();
        let jets = taps
            .iter()
            .map(|t| self.potentials[t.potential].forward_jet(t.point, t.order, &mut trace))
            .collect::<Result<Vec<_>>>()?;
        self.problem.evaluate(z, demand, &jets)
    }

    /// Scalar field `u` (scalar problems) at `z`.
    pub fn scalar(&self, z: C64) -> Result<f64> {
        Ok(self.fields(z, Demand::Value)?.u.map_or(f64::NAN, |u| u.re))
    }

    /// Stress `(sxx, syy, sxy)` (elasticity) at `z`.
    pub fn stress(&self, z: C64) -> Result<[f64; 3]> {
        let s = self
            .fields(z, Demand::Stress)?
            .stress
            .ok_or_else(|| Error::Contract("stress requested for a scalar problem".into()))?;
        Ok([s[0].re, s[1].re, s[2].re])
    }

    pub fn potential_values(&self, z: C64) -> Result<Vec<C64>> {
        self.potentials.iter().map(|p| p.eval(z)).collect()
    }

    pub(crate) fn zero_surfaces(&self) -> Vec<Vec<C64>> {
        self.potentials.iter().map(|p| vec![ZERO; p.n_surface()]).collect()
    }
}
