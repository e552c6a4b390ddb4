//! Holomorphic Kolmogorov-Arnold layers with monomial edge functions.
//!
//! Edge `(j, k)` of layer `l` evaluates `sum_p W[l,j,k,p] x^p + b[l,j,k]`
//! for `p = 1..=P`; neuron `j` sums its incoming edges.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{check_widths, JetTrace};
use crate::cdiff::{Holo, C64, ZERO};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer {
    pub n_in: usize,
    pub n_out: usize,
    /// `[j][k][p-1]`, power-minor.
    pub weights: Vec<C64>,
    /// `[j]`, one per output node.
    pub biases: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KanParams {
    pub widths: Vec<usize>,
    pub degree: usize,
    pub layers: Vec<KanLayer>,
}

/// Per-component variance of `Re W` and `Im W` for power `p`.
pub fn kan_weight_variance(n_in: usize, n_out: usize, p: usize, degree: usize) -> f64 {
    let fact: f64 = (1..=p).map(|i| i as f64).product();
    2.0 / ((n_in + p * n_out) as f64 * fact * degree as f64)
}

/// One variance-stable layer: zero biases, Gaussian weights scaled per power.
pub fn init_kan_layer<R: Rng + ?Sized>(n_in: usize, n_out: usize, degree: usize, rng: &mut R) -> Result<KanLayer> {
    if n_in == 0 || n_out == 0 || degree == 0 {
        return Err(Error::Contract(format!(
            "KAN layer needs positive widths and degree, got {n_in} -> {n_out}, P = {degree}"
        )));
    }
    let normals: Vec<Normal<f64>> = (1..=degree)
        .map(|p| Normal::new(0.0, kan_weight_variance(n_in, n_out, p, degree).sqrt()).unwrap())
        .collect();
    let mut weights = Vec::with_capacity(n_out * n_in * degree);
    for _ in 0..n_out * n_in {
        for dist in &normals {
            let re = dist.sample(rng);
            let im = dist.sample(rng);
            weights.push(C64::new(re, im));
        }
    }
    Ok(KanLayer {
        n_in,
        n_out,
        weights,
        biases: vec![ZERO; n_out],
    })
}

/// Variance-stable initialization of a scalar-to-scalar network.
pub fn init_kan<R: Rng + ?Sized>(widths: &[usize], degree: usize, rng: &mut R) -> Result<KanParams> {
    check_widths(widths)?;
    if degree == 0 {
        return Err(Error::Contract("KAN degree P must be at least 1".into()));
    }
    let layers = widths
        .windows(2)
        .map(|w| init_kan_layer(w[0], w[1], degree, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(KanParams {
        widths: widths.to_vec(),
        degree,
        layers,
    })
}

impl KanParams {
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

    /// Forward pass with parameters supplied as `T` values in flat order.
    pub fn forward_with<T: Holo>(&self, params: &[T], z: T) -> T {
        let p_max = self.degree;
        let mut x = vec![z];
        let mut off = 0;
        for l in &self.layers {
            let nw = l.weights.len();
            let (w, b) = (&params[off..off + nw], &params[off + nw..off + nw + l.biases.len()]);
            off += nw + l.biases.len();
            let powers: Vec<Vec<T>> = x
                .iter()
                .map(|&xk| {
                    let mut pw = Vec::with_capacity(p_max);
                    let mut acc = xk;
                    pw.push(acc);
                    for _ in 1..p_max {
                        acc = acc * xk;
                        pw.push(acc);
                    }
                    pw
                })
                .collect();
            let mut y = Vec::with_capacity(l.n_out);
            for j in 0..l.n_out {
                let mut sum = b[j];
                for (k, pw) in powers.iter().enumerate() {
                    let e = j * l.n_in + k;
                    for (p, xp) in pw.iter().enumerate() {
                        sum = sum + w[e * p_max + p] * *xp;
                    }
                }
                y.push(sum);
            }
            x = y;
        }
        x[0]
    }

    pub(super) fn forward_jet(&self, input: [C64; 3], order: usize, trace: &mut JetTrace) -> [C64; 3] {
        let p_max = self.degree;
        trace.reset(self.layers.len());
        let mut x = vec![input];
        let mut pw = vec![ZERO; p_max + 1];
        let mut dp = vec![ZERO; p_max + 1];
        let mut ddp = vec![ZERO; p_max + 1];
        for (li, l) in self.layers.iter().enumerate() {
            let mut y: Vec<[C64; 3]> = l.biases.iter().map(|b| [*b, ZERO, ZERO]).collect();
            for (k, a) in x.iter().enumerate() {
                monomials(a[0], p_max, order + 1, &mut pw, &mut dp, &mut ddp, None);
                for (j, yj) in y.iter_mut().enumerate() {
                    let e = j * l.n_in + k;
                    let w = &l.weights[e * p_max..(e + 1) * p_max];
                    let mut f0 = ZERO;
                    let mut f1 = ZERO;
                    let mut f2 = ZERO;
                    for p in 1..=p_max {
                        let wp = w[p - 1];
                        f0 += wp * pw[p];
                        if order >= 1 {
                            f1 += wp * dp[p];
                        }
                        if order >= 2 {
                            f2 += wp * ddp[p];
                        }
                    }
                    yj[0] += f0;
                    if order >= 1 {
                        yj[1] += f1 * a[1];
                    }
                    if order >= 2 {
                        yj[2] += f2 * a[1] * a[1] + f1 * a[2];
                    }
                }
            }
            trace.inputs[li] = std::mem::replace(&mut x, y);
        }
        x[0]
    }

    /// Accumulates `g = dL/dx + i dL/dy` into `grad` (flat order) given the
    /// output adjoints `adj` in the same convention.
    pub(super) fn backward_jet(&self, trace: &JetTrace, adj: [C64; 3], order: usize, grad: &mut [C64]) {
        let p_max = self.degree;
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.weights.len() + l.biases.len();
        }
        // conjugated adjoints propagate without conjugations
        let mut ybar = vec![[adj[0].conj(), adj[1].conj(), adj[2].conj()]];
        let mut pw = vec![ZERO; p_max + 1];
        let mut dp = vec![ZERO; p_max + 1];
        let mut ddp = vec![ZERO; p_max + 1];
        let mut dddp = vec![ZERO; p_max + 1];
        for (li, l) in self.layers.iter().enumerate().rev() {
            let x = &trace.inputs[li];
            let need_input = li > 0;
            let mut xbar = vec![[ZERO; 3]; if need_input { l.n_in } else { 0 }];
            let (wg, bg) = grad[offsets[li]..offsets[li] + l.weights.len() + l.biases.len()]
                .split_at_mut(l.weights.len());
            for (b, yb) in bg.iter_mut().zip(&ybar) {
                *b += yb[0].conj();
            }
            for (k, a) in x.iter().enumerate() {
                let deriv_order = if need_input { order + 1 } else { order };
                monomials(a[0], p_max, deriv_order, &mut pw, &mut dp, &mut ddp, Some(&mut dddp));
                let a1sq = a[1] * a[1];
                for (j, yb) in ybar.iter().enumerate() {
                    let e = j * l.n_in + k;
                    let c0 = yb[0];
                    let (c1, c2) = match order {
                        0 => (ZERO, ZERO),
                        1 => (yb[1] * a[1], ZERO),
                        _ => (yb[1] * a[1] + yb[2] * a[2], yb[2] * a1sq),
                    };
                    let w = &l.weights[e * p_max..(e + 1) * p_max];
                    let wgrad = &mut wg[e * p_max..(e + 1) * p_max];
                    let mut f1 = ZERO;
                    let mut f2 = ZERO;
                    let mut f3 = ZERO;
                    for p in 1..=p_max {
                        let mut gb = c0 * pw[p];
                        if order >= 1 {
                            gb += c1 * dp[p];
                        }
                        if order >= 2 {
                            gb += c2 * ddp[p];
                        }
                        wgrad[p - 1] += gb.conj();
                        if need_input {
                            let wp = w[p - 1];
                            f1 += wp * dp[p];
                            if order >= 1 {
                                f2 += wp * ddp[p];
                            }
                            if order >= 2 {
                                f3 += wp * dddp[p];
                            }
                        }
                    }
                    if need_input {
                        let xb = &mut xbar[k];
                        xb[0] += c0 * f1 + c1 * f2 + c2 * f3;
                        if order >= 1 {
                            xb[1] += yb[1] * f1;
                        }
                        if order >= 2 {
                            xb[1] += yb[2] * a[1] * f2 * 2.0;
                            xb[2] += yb[2] * f1;
                        }
                    }
                }
            }
            ybar = xbar;
        }
    }
}

/// Fills `pw[p] = a^p`, `dp[p] = p a^(p-1)`, `ddp[p] = p(p-1) a^(p-2)` and
/// optionally the third derivative, up to derivative order `deriv`.
fn monomials(
    a: C64,
    p_max: usize,
    deriv: usize,
    pw: &mut [C64],
    dp: &mut [C64],
    ddp: &mut [C64],
    dddp: Option<&mut [C64]>,
) {
    pw[0] = C64::new(1.0, 0.0);
    for p in 1..=p_max {
        pw[p] = pw[p - 1] * a;
    }
    if deriv >= 1 {
        dp[0] = ZERO;
        for p in 1..=p_max {
            dp[p] = pw[p - 1] * p as f64;
        }
    }
    if deriv >= 2 {
        ddp[0] = ZERO;
        ddp[1] = ZERO;
        for p in 2..=p_max {
            ddp[p] = pw[p - 2] * (p * (p - 1)) as f64;
        }
    }
    if deriv >= 3 {
        if let Some(d3) = dddp {
            for v in d3.iter_mut().take(3.min(p_max + 1)) {
                *v = ZERO;
            }
            for p in 3..=p_max {
                d3[p] = pw[p - 3] * (p * (p - 1) * (p - 2)) as f64;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdiff::ONE;

    fn single_edge(weights: Vec<C64>, bias: C64) -> KanParams {
        KanParams {
            widths: vec![1, 1],
            degree: weights.len(),
            layers: vec![KanLayer {
                n_in: 1,
                n_out: 1,
                weights,
                biases: vec![bias],
            }],
        }
    }

    #[test]
    fn degree_one_unit_weight_is_identity() {
        let net = single_edge(vec![ONE], ZERO);
        let z = C64::new(0.3, -1.7);
        assert_eq!(net.forward_with(&net.flat(), z), z);
    }

    #[test]
    fn quadratic_edge_with_bias() {
        let i = C64::new(0.0, 1.0);
        let net = single_edge(vec![ZERO, ONE], i);
        let z = C64::new(1.5, 0.5);
        assert!((net.forward_with(&net.flat(), z) - (z * z + i)).norm() < 1e-15);
    }

    #[test]
    fn stacked_squares() {
        let layer = KanLayer {
            n_in: 1,
            n_out: 1,
            weights: vec![ZERO, ONE],
            biases: vec![ZERO],
        };
        let net = KanParams {
            widths: vec![1, 1, 1],
            degree: 2,
            layers: vec![layer.clone(), layer],
        };
        let out = net.forward_with(&net.flat(), C64::new(1.0, 1.0));
        assert!((out - C64::new(-4.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn init_variance_examples() {
        assert!((kan_weight_variance(10, 10, 1, 5) - 0.02).abs() < 1e-15);
        assert!((kan_weight_variance(10, 10, 3, 5) - 1.0 / 600.0).abs() < 1e-15);
    }
}
