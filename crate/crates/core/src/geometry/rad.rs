//! Residual-based adaptive resampling of boundary points.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::BoundarySample;
use crate::error::{Error, Result};

/// Normalized selection probabilities `eps^k / mean(eps^k) + c`.
pub fn rad_probabilities(eps: &[f64], k: f64, c: f64) -> Result<Vec<f64>> {
    if eps.is_empty() {
        return Err(Error::Contract("empty residual pool".into()));
    }
    if eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) || !(c >= 0.0) || !(k >= 0.0) {
        return Err(Error::Contract("residuals, k and c must be finite and non-negative".into()));
    }
    let pow: Vec<f64> = eps.iter().map(|e| e.powf(k)).collect();
    let mean = pow.iter().sum::<f64>() / pow.len() as f64;
    let raw: Vec<f64> = if mean > 0.0 {
        pow.iter().map(|p| p / mean + c).collect()
    } else if c > 0.0 {
        vec![1.0; pow.len()]
    } else {
        return Err(Error::Degenerate(
            "all residuals vanish and c = 0: the resampling distribution is undefined".into(),
        ));
    };
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|r| r / total).collect())
}

/// Draws `n` points from `pool` with replacement, split equally over the
/// residual dimensions (`residuals[d][i]` belongs to `pool[i]`).
pub fn rad_resample<R: Rng + ?Sized>(
    pool: &[BoundarySample],
    residuals: &[Vec<f64>],
    n: usize,
    k: f64,
    c: f64,
    rng: &mut R,
) -> Result<Vec<BoundarySample>> {
    let dims = residuals.len();
    if dims == 0 || residuals.iter().any(|r| r.len() != pool.len()) {
        return Err(Error::Contract(format!(
            "need one residual per pool point and dimension (pool {}, got {:?})",
            pool.len(),
            residuals.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::with_capacity(n);
    for (d, eps) in residuals.iter().enumerate() {
        let n_d = n / dims + usize::from(d < n % dims);
        let probs = rad_probabilities(eps, k, c)?;
        let dist = WeightedIndex::new(&probs)
            .map_err(|e| Error::Degenerate(format!("resampling weights: {e}")))?;
        out.extend((0..n_d).map(|_| pool[dist.sample(rng)]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdiff::C64;
    use crate::nets::rng_for;

    fn pool(m: usize) -> Vec<BoundarySample> {
        (0..m)
            .map(|i| BoundarySample {
                z: C64::new(i as f64, 0.0),
                normal: C64::new(0.0, 1.0),
                curve: 0,
            })
            .collect()
    }

    #[test]
    fn constant_residual_gives_uniform() {
        let p = rad_probabilities(&[2.0; 10], 1.0, 1.0).unwrap();
        assert!(p.iter().all(|v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn single_nonzero_residual_takes_all_mass() {
        let mut eps = vec![0.0; 50];
        eps[0] = 1.0;
        let p = rad_probabilities(&eps, 1.0, 0.0).unwrap();
        assert_eq!(p[0], 1.0);
        let draws = rad_resample(&pool(50), &[eps], 200, 1.0, 0.0, &mut rng_for(1, 0)).unwrap();
        assert!(draws.iter().all(|s| s.z.re == 0.0));
    }

    #[test]
    fn all_zero_without_offset_is_degenerate() {
        assert!(matches!(rad_probabilities(&[0.0; 5], 1.0, 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn support_is_preserved_with_offset() {
        let eps: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 0.0 } else { i as f64 }).collect();
        assert!(rad_probabilities(&eps, 2.0, 0.1).unwrap().iter().all(|p| *p > 0.0));
    }

    #[test]
    fn budget_split_over_dimensions() {
        let eps = vec![1.0; 10];
        let draws = rad_resample(&pool(10), &[eps.clone(), eps], 7, 1.0, 1.0, &mut rng_for(2, 0)).unwrap();
        assert_eq!(draws.len(), 7);
    }

    #[test]
    fn frequencies_match_linear_residuals() {
        // eps_i = i + 1, k = c = 1: P_i = ((i+1)/mean + 1) / sum, mean = 50.5
        let m = 100;
        let eps: Vec<f64> = (0..m).map(|i| (i + 1) as f64).collect();
        let n = 100_000;
        let draws = rad_resample(&pool(m), &[eps], n, 1.0, 1.0, &mut rng_for(3, 0)).unwrap();
        let mut counts = vec![0usize; m];
        for s in &draws {
            counts[s.z.re as usize] += 1;
        }
        let total: f64 = (0..m).map(|i| (i + 1) as f64 / 50.5 + 1.0).sum();
        for (i, &cnt) in counts.iter().enumerate() {
            let p = ((i + 1) as f64 / 50.5 + 1.0) / total;
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((cnt as f64 - n as f64 * p).abs() < 4.0 * sd, "bin {i}");
        }
    }
}
