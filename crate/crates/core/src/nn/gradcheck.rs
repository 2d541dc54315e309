use rand::Rng;
use rand_distr::StandardNormal;

use super::model::{
    activation_pattern, bce_loss, forward_with_masks, forward_with_pattern, loss_and_gradients, Batch, DropoutMasks,
};
use super::weights::{init_model, Param, Weights, TENSORS};
use crate::error::Result;
use crate::rng::{self, substream};

/// Denominator floor of the relative error, for components whose true
/// gradient is zero.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorError {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub seed: u64,
    pub tensors: Vec<TensorError>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.tensors.iter().map(|t| t.checked).sum()
    }
}

/// `|a - b| / max(|a|, |b|, REL_ERROR_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Compares every learnable gradient component of a randomly initialized
/// float64 model against the fourth-order central difference
/// `(8(f(+h) - f(-h)) - (f(+2h) - f(-2h))) / 12h`.
///
/// The differences are taken with ReLU gates and max-pool choices held at
/// the unperturbed point, so a step never straddles a kink. Biases and
/// batch-norm affine parameters are randomized, so no component is checked
/// only at its initial value.
pub fn check_gradients(m: usize, batch: usize, seed: u64, h: f64) -> Result<GradCheckReport> {
    check(m, batch, seed, h, true)
}

/// Like [`check_gradients`] but lets the perturbed passes re-select ReLU
/// gates and pool maxima, as a plain black-box difference would.
pub fn check_gradients_unfrozen(m: usize, batch: usize, seed: u64, h: f64) -> Result<GradCheckReport> {
    check(m, batch, seed, h, false)
}

fn check(m: usize, batch: usize, seed: u64, h: f64, freeze: bool) -> Result<GradCheckReport> {
    let mut r = substream(seed, &[rng::INIT]);
    let mut w: Weights<f64> = init_model(m, &mut r)?;
    for p in [Param::Conv1Bias, Param::Conv2Bias, Param::Dense1Bias, Param::OutBias, Param::Bn1Shift, Param::Bn2Shift] {
        w.get_mut(p).iter_mut().for_each(|v| *v = 0.1 * r.sample::<f64, _>(StandardNormal));
    }
    for p in [Param::Bn1Scale, Param::Bn2Scale] {
        w.get_mut(p).iter_mut().for_each(|v| *v = 1.0 + 0.1 * r.sample::<f64, _>(StandardNormal));
    }
    let mut data_rng = substream(seed, &[rng::DATA]);
    let x = Batch {
        n: batch,
        len: m,
        data: (0..2 * batch * m).map(|_| data_rng.sample(StandardNormal)).collect(),
    };
    let labels: Vec<f64> = (0..batch).map(|i| (i % 2) as f64).collect();
    let masks = DropoutMasks::sample(batch, m, &mut substream(seed, &[rng::TRAIN]));

    let analytic = loss_and_gradients(&w, &x, &labels, &masks)?.grads;
    let pattern = activation_pattern(&w, &x, &masks)?;
    let loss_at = |w: &Weights<f64>| -> Result<f64> {
        let p = if freeze {
            forward_with_pattern(w, &x, &masks, &pattern)?
        } else {
            forward_with_masks(w, &x, &masks)?
        };
        Ok(bce_loss(&p, &labels))
    };

    let mut tensors = Vec::new();
    for (i, spec) in TENSORS.iter().enumerate() {
        if !spec.learnable {
            continue;
        }
        let mut worst = TensorError { name: spec.name, max_rel_error: 0.0, max_abs_error: 0.0, checked: 0 };
        for j in 0..spec.len() {
            let orig = w.tensor(i)[j];
            let mut at = |offset: f64| -> Result<f64> {
                w.tensor_mut(i)[j] = orig + offset;
                loss_at(&w)
            };
            let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
            w.tensor_mut(i)[j] = orig;
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            let a = analytic.tensor(i)[j];
            worst.max_rel_error = worst.max_rel_error.max(relative_error(a, numeric));
            worst.max_abs_error = worst.max_abs_error.max((a - numeric).abs());
            worst.checked += 1;
        }
        tensors.push(worst);
    }
    Ok(GradCheckReport { seed, tensors })
}
