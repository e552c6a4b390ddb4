use serde::{Deserialize, Serialize};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// Adam moments over the real parameter view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One bias-corrected step; coordinates with `frozen[i]` are left untouched.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, frozen: Option<&[bool]>) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        let b1t = 1.0 - BETA1.powi(self.t as i32);
        let b2t = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            if frozen.is_some_and(|f| f[i]) {
                continue;
            }
            let g = grad[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= lr * mhat / (vhat.sqrt() + EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = AdamState::new(1);
        let mut p = [0.0];
        s.step(&mut p, &[1.0], 0.1, None);
        assert!((p[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_fixpoint() {
        let mut s = AdamState::new(3);
        let mut p = [1.0, -2.0, 0.5];
        for _ in 0..5 {
            s.step(&mut p, &[0.0; 3], 0.1, None);
        }
        assert_eq!(p, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        let mut s = AdamState::new(1);
        let mut p = [0.0];
        s.step(&mut p, &[-3.0], 0.01, None);
        let first = p[0];
        s.step(&mut p, &[-3.0], 0.01, None);
        assert!(first > 0.0 && p[0] > first);
    }

    #[test]
    fn frozen_coordinates_stay() {
        let mut s = AdamState::new(2);
        let mut p = [1.0, 1.0];
        s.step(&mut p, &[1.0, 1.0], 0.1, Some(&[true, false]));
        assert_eq!(p[0], 1.0);
        assert!(p[1] < 1.0);
    }
}
