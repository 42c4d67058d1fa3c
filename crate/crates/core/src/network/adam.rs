//! Bias-corrected Adam.

use super::params::{Grads, ModelParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParams<T>, lr: f64) -> Self {
        let zeros: Vec<Vec<T>> = params.values().iter().map(|p| vec![T::zero(); p.len()]).collect();
        Self {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update of every trainable parameter; running statistics are left
    /// alone.
    pub fn update(&mut self, params: &mut ModelParams<T>, grads: &Grads<T>) -> Result<()> {
        if grads.values().len() != self.m.len() || grads.values().iter().zip(&self.m).any(|(g, m)| g.len() != m.len()) {
            return Err(Error::InvalidArgument(
                "gradient layout does not match optimizer state".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - self.beta1), T::of(1.0 - self.beta2));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        let (c1, c2) = (T::of(c1), T::of(c2));
        let trainable: Vec<bool> = params.layout().iter().map(|p| p.kind.trainable()).collect();
        for ((((p, g), m), v), train) in params
            .values_mut()
            .iter_mut()
            .zip(grads.values())
            .zip(&mut self.m)
            .zip(&mut self.v)
            .zip(trainable)
        {
            if !train {
                continue;
            }
            for (((p, g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + one_b1 * *g;
                *v = b2 * *v + one_b2 * *g * *g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
