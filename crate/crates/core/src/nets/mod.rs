//! Holomorphic networks: exp-MLP and monomial KAN.
//!
//! Parameters live in a flat complex vector in a fixed order (per layer:
//! weights then biases). Two evaluation routes exist:
//! [`Network::forward_with`] is generic over [`Holo`] and is what the tape
//! route differentiates, while [`Network::forward_jet`] and
//! [`Network::backward_jet`] are the hand-written batched path used in
//! training.

mod kan;
mod mlp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cdiff::{Holo, C64};
use crate::error::{Error, Result};

pub use kan::{init_kan, init_kan_layer, kan_weight_variance, KanLayer, KanParams};
pub use mlp::{init_mlp, mlp_weight_variance, MlpLayer, MlpParams, EXP_GUARD};

/// Deterministic generator for a `(seed, stream)` pair.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::Contract("a network needs at least an input and an output layer".into()));
    }
    if widths[0] != 1 || widths[widths.len() - 1] != 1 {
        return Err(Error::Contract(format!(
            "input and output widths must be 1, got {widths:?}"
        )));
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(Error::Contract(format!("zero-width layer in {widths:?}")));
    }
    Ok(())
}

/// Architecture description, enough to build a fresh network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Arch {
    Mlp { widths: Vec<usize> },
    Kan { widths: Vec<usize>, degree: usize },
}

impl Arch {
    pub fn widths(&self) -> &[usize] {
        match self {
            Arch::Mlp { widths } | Arch::Kan { widths, .. } => widths,
        }
    }

    /// Same family with hidden widths scaled by `factor` (at least 1 neuron).
    pub fn scaled_hidden(&self, factor: f64) -> Arch {
        let scale = |w: &Vec<usize>| {
            let n = w.len();
            w.iter()
                .enumerate()
                .map(|(i, &v)| {
                    if i == 0 || i == n - 1 {
                        v
                    } else {
                        ((v as f64 * factor).round() as usize).max(1)
                    }
                })
                .collect()
        };
        match self {
            Arch::Mlp { widths } => Arch::Mlp { widths: scale(widths) },
            Arch::Kan { widths, degree } => Arch::Kan {
                widths: scale(widths),
                degree: *degree,
            },
        }
    }

    pub fn init<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<Network> {
        match self {
            Arch::Mlp { widths } => Ok(Network::Mlp(init_mlp(widths, rng)?)),
            Arch::Kan { widths, degree } => Ok(Network::Kan(init_kan(widths, *degree, rng)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Mlp(MlpParams),
    Kan(KanParams),
}

/// Cached layer inputs of one jet forward pass.
#[derive(Debug, Clone, Default)]
pub struct JetTrace {
    pub(crate) inputs: Vec<Vec<[C64; 3]>>,
    pub(crate) pre: Vec<Vec<[C64; 3]>>,
}

impl JetTrace {
    fn reset(&mut self, n_layers: usize) {
        self.inputs.clear();
        self.inputs.resize(n_layers, Vec::new());
        self.pre.clear();
    }
}

impl Network {
    pub fn arch(&self) -> Arch {
        match self {
            Network::Mlp(p) => Arch::Mlp { widths: p.widths.clone() },
            Network::Kan(p) => Arch::Kan {
                widths: p.widths.clone(),
                degree: p.degree,
            },
        }
    }

    /// Number of complex parameters.
    pub fn n_complex(&self) -> usize {
        match self {
            Network::Mlp(p) => p.n_complex(),
            Network::Kan(p) => p.n_complex(),
        }
    }

    /// Number of real parameters (real and imaginary parts counted separately).
    pub fn n_real(&self) -> usize {
        2 * self.n_complex()
    }

    pub fn flat(&self) -> Vec<C64> {
        match self {
            Network::Mlp(p) => p.flat(),
            Network::Kan(p) => p.flat(),
        }
    }

    pub fn set_flat(&mut self, flat: &[C64]) -> Result<()> {
        if flat.len() != self.n_complex() {
            return Err(Error::Contract(format!(
                "expected {} complex parameters, got {}",
                self.n_complex(),
                flat.len()
            )));
        }
        match self {
            Network::Mlp(p) => p.set_flat(flat),
            Network::Kan(p) => p.set_flat(flat),
        }
        Ok(())
    }

    /// Forward pass with externally supplied parameters (flat order).
    pub fn forward_with<T: Holo>(&self, params: &[T], z: T) -> T {
        match self {
            Network::Mlp(p) => p.forward_with(params, z),
            Network::Kan(p) => p.forward_with(params, z),
        }
    }

    /// Plain evaluation at an already normalized input.
    pub fn eval(&self, z: C64) -> Result<C64> {
        let mut trace = JetTrace::default();
        Ok(self.forward_jet([z, C64::new(0.0, 0.0), C64::new(0.0, 0.0)], 0, &mut trace)?[0])
    }

    /// Propagates the input jet `(v, d1, d2)` up to derivative `order` (0..=2)
    /// and records what [`Network::backward_jet`] needs.
    pub fn forward_jet(&self, input: [C64; 3], order: usize, trace: &mut JetTrace) -> Result<[C64; 3]> {
        debug_assert!(order <= 2);
        let out = match self {
            Network::Mlp(p) => p.forward_jet(input, order, trace)?,
            Network::Kan(p) => p.forward_jet(input, order, trace),
        };
        if out[..=order].iter().all(|c| c.is_finite()) {
            Ok(out)
        } else {
            Err(Error::diverged("forward", format!("non-finite network output {out:?}")))
        }
    }

    /// Accumulates parameter gradients `dL/dRe + i dL/dIm` into `grad`, given
    /// output-jet adjoints in the same convention.
    pub fn backward_jet(&self, trace: &JetTrace, adj: [C64; 3], order: usize, grad: &mut [C64]) {
        match self {
            Network::Mlp(p) => p.backward_jet(trace, adj, order, grad),
            Network::Kan(p) => p.backward_jet(trace, adj, order, grad),
        }
    }

    pub fn to_record(&self) -> NetworkRecord {
        let coeffs = self.flat().iter().flat_map(|c| [c.re, c.im]).collect();
        NetworkRecord {
            arch: self.arch(),
            coeffs,
        }
    }

    pub fn from_record(rec: &NetworkRecord) -> Result<Network> {
        let mut net = rec.arch.init(&mut rng_for(0, 0))?;
        if rec.coeffs.len() != net.n_real() {
            return Err(Error::Contract(format!(
                "network record holds {} reals, architecture needs {}",
                rec.coeffs.len(),
                net.n_real()
            )));
        }
        let flat: Vec<C64> = rec.coeffs.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
        net.set_flat(&flat)?;
        Ok(net)
    }
}

/// Serialized network: architecture plus interleaved `(re, im)` coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    #[serde(flatten)]
    pub arch: Arch,
    pub coeffs: Vec<f64>,
}

/// Input normalization `(z - mu) / sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mu: C64,
    pub sigma: f64,
}

impl NormStats {
    pub const IDENTITY: NormStats = NormStats {
        mu: C64::new(0.0, 0.0),
        sigma: 1.0,
    };

    /// Mean and RMS distance to the mean of a sample.
    pub fn estimate(points: &[C64]) -> Result<NormStats> {
        if points.is_empty() {
            return Err(Error::Geometry("cannot estimate normalization from no points".into()));
        }
        let n = points.len() as f64;
        let mu = points.iter().sum::<C64>() / n;
        let sigma = (points.iter().map(|z| (z - mu).norm_sqr()).sum::<f64>() / n).sqrt();
        if !(sigma > 1e-12) || !mu.is_finite() {
            return Err(Error::Geometry(format!(
                "degenerate input spread (mu = {mu}, sigma = {sigma})"
            )));
        }
        Ok(NormStats { mu, sigma })
    }

    pub fn apply(&self, z: C64) -> C64 {
        (z - self.mu) / self.sigma
    }

    pub fn apply_holo<T: Holo>(&self, z: T) -> T {
        z.offset(-self.mu).scaled(C64::new(1.0 / self.sigma, 0.0))
    }
}

/// Draws `10 * n_train` points from `sampler` and estimates [`NormStats`].
pub fn estimate_norm_stats<F>(mut sampler: F, n_train: usize) -> Result<NormStats>
where
    F: FnMut(usize) -> Result<Vec<C64>>,
{
    NormStats::estimate(&sampler(10 * n_train.max(1))?)
}
