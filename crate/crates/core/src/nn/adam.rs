use super::weights::{ModelWeights, Weights, TENSORS};
use super::TrainParams;
use crate::error::{Error, Result};

/// Adam moments for every learnable tensor of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: ModelWeights,
    pub v: ModelWeights,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(input_len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            step: 0,
            m: Weights::zeros(input_len),
            v: Weights::zeros(input_len),
            lr,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn from_params(input_len: usize, hp: &TrainParams) -> Self {
        Self::new(input_len, hp.learning_rate, hp.beta1, hp.beta2, hp.eps)
    }

    /// Applies one bias-corrected Adam update to the learnable tensors of
    /// `w`. Running batch-norm statistics are left alone.
    pub fn step(&mut self, w: &mut ModelWeights, grads: &ModelWeights) -> Result<()> {
        if !w.same_shape(grads) || !w.same_shape(&self.m) {
            return Err(Error::ShapeMismatch("Adam state, weights and gradients disagree".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, spec) in TENSORS.iter().enumerate() {
            if !spec.learnable {
                continue;
            }
            let g = grads.tensor(i);
            let m = self.m.tensor_mut(i);
            let v = self.v.tensor_mut(i);
            let wt = w.tensor_mut(i);
            for j in 0..wt.len() {
                let gj = f64::from(g[j]);
                let mj = self.beta1 * f64::from(m[j]) + (1.0 - self.beta1) * gj;
                let vj = self.beta2 * f64::from(v[j]) + (1.0 - self.beta2) * gj * gj;
                m[j] = mj as f32;
                v[j] = vj as f32;
                let update = self.lr * (mj / c1) / ((vj / c2).sqrt() + self.eps);
                wt[j] = (f64::from(wt[j]) - update) as f32;
            }
        }
        Ok(())
    }
}
