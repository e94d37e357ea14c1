use serde::{Deserialize, Serialize};

use super::float::Float;

pub const DEFAULT_LR: f64 = 1e-4;

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Float> Adam<T> {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
        }
    }

    pub fn update(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        let m_scale = T::of(1.0 / (1.0 - self.beta1.powi(t)));
        let v_scale = T::of(1.0 / (1.0 - self.beta2.powi(t)));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + c1 * g;
            self.v[i] = b2 * self.v[i] + c2 * g * g;
            let m_hat = self.m[i] * m_scale;
            let v_hat = self.v[i] * v_scale;
            params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
