//! Complex-valued MLP with `exp` activation on hidden layers and a linear output.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{check_widths, JetTrace};
use crate::cdiff::{Holo, C64, ZERO};
use crate::error::{Error, Result};

/// Largest real part accepted by the hidden `exp` before reporting overflow.
pub const EXP_GUARD: f64 = 700.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayer {
    pub n_in: usize,
    pub n_out: usize,
    /// `[j][k]`.
    pub weights: Vec<C64>,
    pub biases: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub widths: Vec<usize>,
    pub layers: Vec<MlpLayer>,
}

pub fn mlp_weight_variance(n_in: usize, n_out: usize) -> f64 {
    1.0 / (2.0 * (n_in + n_out) as f64)
}

pub fn init_mlp<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<MlpParams> {
    check_widths(widths)?;
    let layers = widths
        .windows(2)
        .map(|w| {
            let (n_in, n_out) = (w[0], w[1]);
            let dist = Normal::new(0.0, mlp_weight_variance(n_in, n_out).sqrt()).unwrap();
            let weights = (0..n_in * n_out)
                .map(|_| {
                    let re = dist.sample(rng);
                    C64::new(re, dist.sample(rng))
                })
                .collect();
            MlpLayer {
                n_in,
                n_out,
                weights,
                biases: vec![ZERO; n_out],
            }
        })
        .collect();
    Ok(MlpParams {
        widths: widths.to_vec(),
        layers,
    })
}

impl MlpParams {
    pub fn n_complex(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn flat(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.n_complex());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[C64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
    }

    pub fn forward_with<T: Holo>(&self, params: &[T], z: T) -> T {
        let mut x = vec![z];
        let mut off = 0;
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let w = &params[off..off + l.weights.len()];
            let b = &params[off + l.weights.len()..off + l.weights.len() + l.n_out];
            off += l.weights.len() + l.n_out;
            x = (0..l.n_out)
                .map(|j| {
                    let mut s = b[j];
                    for (k, xk) in x.iter().enumerate() {
                        s = s + w[j * l.n_in + k] * *xk;
                    }
                    if li < last {
                        s.exp()
                    } else {
                        s
                    }
                })
                .collect();
        }
        x[0]
    }

    pub(super) fn forward_jet(
        &self,
        input: [C64; 3],
        order: usize,
        trace: &mut JetTrace,
    ) -> Result<[C64; 3]> {
        trace.reset(self.layers.len());
        let last = self.layers.len() - 1;
        let mut x = vec![input];
        for (li, l) in self.layers.iter().enumerate() {
            let mut s = vec![[ZERO; 3]; l.n_out];
            for (j, sj) in s.iter_mut().enumerate() {
                sj[0] = l.biases[j];
                for (k, xk) in x.iter().enumerate() {
                    let w = l.weights[j * l.n_in + k];
                    sj[0] += w * xk[0];
                    if order >= 1 {
                        sj[1] += w * xk[1];
                    }
                    if order >= 2 {
                        sj[2] += w * xk[2];
                    }
                }
            }
            let y = if li < last {
                let mut y = Vec::with_capacity(l.n_out);
                for sj in &s {
                    if sj[0].re.abs() > EXP_GUARD {
                        return Err(Error::diverged(
                            "exp",
                            format!("hidden pre-activation {} exceeds the overflow guard", sj[0]),
                        ));
                    }
                    let e = sj[0].exp();
                    y.push([e, e * sj[1], e * (sj[2] + sj[1] * sj[1])]);
                }
                y
            } else {
                s.clone()
            };
            trace.inputs[li] = std::mem::replace(&mut x, y);
            trace.pre.push(s);
        }
        Ok(x[0])
    }

    pub(super) fn backward_jet(&self, trace: &JetTrace, adj: [C64; 3], order: usize, grad: &mut [C64]) {
        let last = self.layers.len() - 1;
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.weights.len() + l.biases.len();
        }
        let mut ybar = vec![[adj[0].conj(), adj[1].conj(), adj[2].conj()]];
        for (li, l) in self.layers.iter().enumerate().rev() {
            let pre = &trace.pre[li];
            let sbar: Vec<[C64; 3]> = if li < last {
                ybar.iter()
                    .zip(pre)
                    .map(|(yb, s)| {
                        let e = s[0].exp();
                        [
                            e * (yb[0] + yb[1] * s[1] + yb[2] * (s[2] + s[1] * s[1])),
                            e * (yb[1] + yb[2] * s[1] * 2.0),
                            e * yb[2],
                        ]
                    })
                    .collect()
            } else {
                ybar
            };
            let x = &trace.inputs[li];
            let (wg, bg) = grad[offsets[li]..offsets[li] + l.weights.len() + l.n_out]
                .split_at_mut(l.weights.len());
            let mut xbar = vec![[ZERO; 3]; if li > 0 { l.n_in } else { 0 }];
            for (j, sb) in sbar.iter().enumerate() {
                bg[j] += sb[0].conj();
                for (k, xk) in x.iter().enumerate() {
                    let mut g = sb[0] * xk[0];
                    if order >= 1 {
                        g += sb[1] * xk[1];
                    }
                    if order >= 2 {
                        g += sb[2] * xk[2];
                    }
                    wg[j * l.n_in + k] += g.conj();
                    if li > 0 {
                        let w = l.weights[j * l.n_in + k];
                        for m in 0..=order {
                            xbar[k][m] += w * sb[m];
                        }
                    }
                }
            }
            ybar = xbar;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdiff::ONE;

    #[test]
    fn single_hidden_unit_is_shifted_exponential() {
        // widths (1, 1, 1): out = w2 exp(w1 z + b1) + b2
        let net = MlpParams {
            widths: vec![1, 1, 1],
            layers: vec![
                MlpLayer { n_in: 1, n_out: 1, weights: vec![ONE], biases: vec![ZERO] },
                MlpLayer { n_in: 1, n_out: 1, weights: vec![ONE], biases: vec![C64::new(-1.0, 0.0)] },
            ],
        };
        let z = C64::new(0.2, 0.9);
        let out = net.forward_with(&net.flat(), z);
        assert!((out - (z.exp() - ONE)).norm() < 1e-15);
    }

    #[test]
    fn init_variance_formula() {
        assert!((mlp_weight_variance(15, 15) - 1.0 / 60.0).abs() < 1e-16);
    }
}
