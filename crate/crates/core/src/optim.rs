//! Adam optimizer with bias correction.

use alloc::vec;
use alloc::vec::Vec;

// std's inherent float methods shadow the trait in test builds.
#[cfg_attr(test, allow(unused_imports))]
use crate::fmath::FloatExt;
use crate::tensor::{Tensor, TensorError};

/// Adam state over a fixed parameter list: per-parameter first and second
/// moment buffers, a shared step counter and the usual hyperparameters.
pub struct Adam {
    params: Vec<Tensor>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(params: Vec<Tensor>, lr: f64) -> Adam {
        let m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        let v = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        Adam { params, m, v, step: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn zero_grad(&self) {
        for p in &self.params {
            p.zero_grad();
        }
    }

    /// One bias-corrected update applied in place. Every parameter must
    /// have a populated gradient.
    pub fn step(&mut self) -> Result<(), TensorError> {
        for (i, p) in self.params.iter().enumerate() {
            if p.grad().is_none() {
                return Err(TensorError::MissingGradient { index: i });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - powi(self.beta1, t);
        let bc2 = 1.0 - powi(self.beta2, t);
        for (i, p) in self.params.iter().enumerate() {
            let g = p.grad().expect("checked above");
            let mut data = p.to_vec();
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for j in 0..data.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                data[j] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            p.set_data(&data)?;
        }
        Ok(())
    }
}

fn powi(base: f64, n: i32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= base;
    }
    acc
}
