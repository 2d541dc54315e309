//! The edge model: two convolution blocks, global average pooling and a
//! small dense head ending in a sigmoid.
//!
//! ```text
//! 2×M ─ conv(10,30)+ReLU ─ BN ─ maxpool2 ─ dropout .3
//!     ─ conv(100,30)+ReLU ─ BN ─ maxpool2 ─ dropout .3
//!     ─ global average pool ─ dense(20)+ReLU ─ dropout .5 ─ dense(1)+sigmoid
//! ```

use rand::Rng;

use super::layers::*;
use super::real::Real;
use super::weights::{Param, Weights};
use super::{BN_EPS, CONV1_FILTERS, CONV2_FILTERS, DENSE_UNITS, DROPOUT_CONV, DROPOUT_DENSE, INPUT_CHANNELS, KERNEL};
use crate::dataset::Example;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the loss.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, batch statistics in batch normalization.
    Train,
    /// No dropout, running statistics in batch normalization.
    Infer,
}

/// A batch of IQ windows in channel-major layout: row 0 holds the in-phase
/// samples of every window back to back, row 1 the quadrature samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub n: usize,
    pub len: usize,
    pub data: Vec<T>,
}

impl<T: Real> Batch<T> {
    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a Example>, len: usize) -> Result<Self> {
        let examples: Vec<&Example> = examples.into_iter().collect();
        let n = examples.len();
        let mut data = vec![T::zero(); INPUT_CHANNELS * n * len];
        for (e, ex) in examples.iter().enumerate() {
            if ex.x.len() != INPUT_CHANNELS * len {
                return Err(Error::ShapeMismatch(format!(
                    "window has {} values, model expects 2×{len}",
                    ex.x.len()
                )));
            }
            for c in 0..INPUT_CHANNELS {
                let src = &ex.x[c * len..][..len];
                let dst = &mut data[c * n * len + e * len..][..len];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = T::lit(f64::from(s));
                }
            }
        }
        Ok(Self { n, len, data })
    }

    /// Builds a batch from windows given as `[Re..., Im...]` rows.
    pub fn from_windows(windows: &[Vec<T>], len: usize) -> Result<Self> {
        let n = windows.len();
        let mut data = vec![T::zero(); INPUT_CHANNELS * n * len];
        for (e, w) in windows.iter().enumerate() {
            if w.len() != INPUT_CHANNELS * len {
                return Err(Error::ShapeMismatch(format!("window has {} values, expected {}", w.len(), 2 * len)));
            }
            for c in 0..INPUT_CHANNELS {
                data[c * n * len + e * len..][..len].copy_from_slice(&w[c * len..][..len]);
            }
        }
        Ok(Self { n, len, data })
    }
}

/// Dropout multipliers (0 or `1/(1-p)`) for the three dropout layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks<T> {
    pub conv1: Vec<T>,
    pub conv2: Vec<T>,
    pub dense: Vec<T>,
}

impl<T: Real> DropoutMasks<T> {
    pub fn sample<R: Rng + ?Sized>(n: usize, len: usize, rng: &mut R) -> Self {
        let mut draw = |count: usize, p: f64| -> Vec<T> {
            let keep = T::lit(1.0 / (1.0 - p));
            (0..count)
                .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
                .collect()
        };
        let l2 = len / 2;
        Self {
            conv1: draw(CONV1_FILTERS * n * l2, DROPOUT_CONV),
            conv2: draw(CONV2_FILTERS * n * (l2 / 2), DROPOUT_CONV),
            dense: draw(n * DENSE_UNITS, DROPOUT_DENSE),
        }
    }

    /// Masks that keep every unit unscaled.
    pub fn identity(n: usize, len: usize) -> Self {
        let l2 = len / 2;
        Self {
            conv1: vec![T::one(); CONV1_FILTERS * n * l2],
            conv2: vec![T::one(); CONV2_FILTERS * n * (l2 / 2)],
            dense: vec![T::one(); n * DENSE_UNITS],
        }
    }
}

/// Batch-norm statistics measured on a training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<T> {
    pub bn1_mean: Vec<T>,
    pub bn1_var: Vec<T>,
    pub bn2_mean: Vec<T>,
    pub bn2_var: Vec<T>,
}

struct Cache<T> {
    cols1: Vec<T>,
    relu1: Vec<T>,
    bn1: BnCache<T>,
    pool1_arg: Vec<u32>,
    cols2: Vec<T>,
    relu2: Vec<T>,
    bn2: BnCache<T>,
    pool2_arg: Vec<u32>,
    pooled: Vec<T>,
    hidden: Vec<T>,
    hidden_dropped: Vec<T>,
    probs: Vec<T>,
}

fn check_input<T: Real>(w: &Weights<T>, x: &Batch<T>) -> Result<()> {
    if x.len != w.input_len {
        return Err(Error::ShapeMismatch(format!(
            "model built for windows of {} samples, batch has {}",
            w.input_len, x.len
        )));
    }
    if x.data.len() != INPUT_CHANNELS * x.n * x.len {
        return Err(Error::ShapeMismatch("batch buffer does not match its dimensions".into()));
    }
    if x.n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

fn check_masks<T: Real>(m: &DropoutMasks<T>, n: usize, len: usize) -> Result<()> {
    let l2 = len / 2;
    if m.conv1.len() != CONV1_FILTERS * n * l2
        || m.conv2.len() != CONV2_FILTERS * n * (l2 / 2)
        || m.dense.len() != n * DENSE_UNITS
    {
        return Err(Error::ShapeMismatch("dropout masks do not match the batch".into()));
    }
    Ok(())
}

fn apply_mask<T: Real>(x: &mut [T], mask: &[T]) {
    x.iter_mut().zip(mask).for_each(|(v, &m)| *v = *v * m);
}

fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        (T::one() + (-z).exp()).recip()
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Which ReLU units were active and which element every max-pool picked
/// during one training-mode pass.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ActivationPattern {
    relu1: Vec<bool>,
    pool1: Vec<u32>,
    relu2: Vec<bool>,
    pool2: Vec<u32>,
    relu3: Vec<bool>,
}

fn relu_with<T: Real>(x: &mut [T], frozen: Option<&[bool]>) {
    match frozen {
        Some(active) => x.iter_mut().zip(active).for_each(|(v, &a)| {
            if !a {
                *v = T::zero();
            }
        }),
        None => relu_inplace(x),
    }
}

fn pool_with<T: Real>(x: &[T], c: usize, n: usize, len: usize, frozen: Option<&[u32]>) -> (Vec<T>, Vec<u32>) {
    match frozen {
        Some(arg) => (arg.iter().map(|&i| x[i as usize]).collect(), arg.to_vec()),
        None => maxpool2_forward(x, c, n, len),
    }
}

fn active<T: Real>(x: &[T]) -> Vec<bool> {
    x.iter().map(|&v| v > T::zero()).collect()
}

fn run<T: Real>(w: &Weights<T>, x: &Batch<T>, masks: Option<&DropoutMasks<T>>) -> Result<Cache<T>> {
    run_frozen(w, x, masks, None)
}

fn run_frozen<T: Real>(
    w: &Weights<T>,
    x: &Batch<T>,
    masks: Option<&DropoutMasks<T>>,
    frozen: Option<&ActivationPattern>,
) -> Result<Cache<T>> {
    check_input(w, x)?;
    if let Some(m) = masks {
        check_masks(m, x.n, x.len)?;
    }
    let train = masks.is_some();
    let (n, len) = (x.n, x.len);
    let eps = T::lit(BN_EPS);
    let bn = |y: &mut Vec<T>, scale: Param, shift: Param, mean: Param, var: Param| -> Option<BnCache<T>> {
        if train {
            let (out, cache) = bn_train_forward(y, w.get(scale), w.get(shift), eps);
            *y = out;
            Some(cache)
        } else {
            bn_infer(y, w.get(scale), w.get(shift), w.get(mean), w.get(var), eps);
            None
        }
    };
    let empty = || BnCache { xhat: Vec::new(), inv_std: Vec::new(), mean: Vec::new(), var: Vec::new() };

    let (mut h, cols1) = conv_forward(&x.data, INPUT_CHANNELS, n, len, w.get(Param::Conv1Kernel), w.get(Param::Conv1Bias), KERNEL);
    relu_with(&mut h, frozen.map(|f| f.relu1.as_slice()));
    let relu1 = if train { h.clone() } else { Vec::new() };
    let bn1 = bn(&mut h, Param::Bn1Scale, Param::Bn1Shift, Param::Bn1Mean, Param::Bn1Var).unwrap_or_else(empty);
    let (mut h, pool1_arg) = pool_with(&h, CONV1_FILTERS, n, len, frozen.map(|f| f.pool1.as_slice()));
    let l2 = len / 2;
    if let Some(m) = masks {
        apply_mask(&mut h, &m.conv1);
    }

    let (mut h, cols2) = conv_forward(&h, CONV1_FILTERS, n, l2, w.get(Param::Conv2Kernel), w.get(Param::Conv2Bias), KERNEL);
    relu_with(&mut h, frozen.map(|f| f.relu2.as_slice()));
    let relu2 = if train { h.clone() } else { Vec::new() };
    let bn2 = bn(&mut h, Param::Bn2Scale, Param::Bn2Shift, Param::Bn2Mean, Param::Bn2Var).unwrap_or_else(empty);
    let (mut h, pool2_arg) = pool_with(&h, CONV2_FILTERS, n, l2, frozen.map(|f| f.pool2.as_slice()));
    let l4 = l2 / 2;
    if let Some(m) = masks {
        apply_mask(&mut h, &m.conv2);
    }

    let pooled = global_avg_pool(&h, CONV2_FILTERS, n, l4);
    let mut hidden = dense_forward(&pooled, n, w.get(Param::Dense1Weight), w.get(Param::Dense1Bias));
    relu_with(&mut hidden, frozen.map(|f| f.relu3.as_slice()));
    let mut hidden_dropped = hidden.clone();
    if let Some(m) = masks {
        apply_mask(&mut hidden_dropped, &m.dense);
    }
    let logits = dense_forward(&hidden_dropped, n, w.get(Param::OutWeight), w.get(Param::OutBias));
    let probs = logits.into_iter().map(sigmoid).collect();
    Ok(Cache {
        cols1: if train { cols1 } else { Vec::new() },
        relu1,
        bn1,
        pool1_arg,
        cols2: if train { cols2 } else { Vec::new() },
        relu2,
        bn2,
        pool2_arg,
        pooled,
        hidden,
        hidden_dropped,
        probs,
    })
}

/// Presence probabilities for every window of the batch. Training mode
/// draws fresh dropout masks from `rng`.
pub fn forward<T: Real, R: Rng + ?Sized>(w: &Weights<T>, x: &Batch<T>, mode: Mode, rng: &mut R) -> Result<Vec<T>> {
    match mode {
        Mode::Infer => predict(w, x),
        Mode::Train => {
            let masks = DropoutMasks::sample(x.n, x.len, rng);
            forward_with_masks(w, x, &masks)
        }
    }
}

/// Inference-mode probabilities.
pub fn predict<T: Real>(w: &Weights<T>, x: &Batch<T>) -> Result<Vec<T>> {
    Ok(run(w, x, None)?.probs)
}

/// Training-mode probabilities under fixed dropout masks.
pub fn forward_with_masks<T: Real>(w: &Weights<T>, x: &Batch<T>, masks: &DropoutMasks<T>) -> Result<Vec<T>> {
    Ok(run(w, x, Some(masks))?.probs)
}

/// The activation pattern of a training-mode pass under `masks`.
pub(crate) fn activation_pattern<T: Real>(
    w: &Weights<T>,
    x: &Batch<T>,
    masks: &DropoutMasks<T>,
) -> Result<ActivationPattern> {
    let c = run(w, x, Some(masks))?;
    Ok(ActivationPattern {
        relu1: active(&c.relu1),
        pool1: c.pool1_arg,
        relu2: active(&c.relu2),
        pool2: c.pool2_arg,
        relu3: active(&c.hidden),
    })
}

/// Training-mode probabilities with every ReLU gate and max-pool choice
/// held at `pattern`: the smooth piece of the network that contains the
/// point where the pattern was recorded.
pub(crate) fn forward_with_pattern<T: Real>(
    w: &Weights<T>,
    x: &Batch<T>,
    masks: &DropoutMasks<T>,
    pattern: &ActivationPattern,
) -> Result<Vec<T>> {
    Ok(run_frozen(w, x, Some(masks), Some(pattern))?.probs)
}

/// Mean binary cross-entropy with probabilities clamped away from 0 and 1.
pub fn bce_loss<T: Real>(p: &[T], labels: &[T]) -> T {
    let lo = T::lit(BCE_CLAMP);
    let hi = T::one() - lo;
    let total: T = p
        .iter()
        .zip(labels)
        .map(|(&pi, &yi)| {
            let q = pi.max(lo).min(hi);
            -(yi * q.ln() + (T::one() - yi) * (T::one() - q).ln())
        })
        .sum();
    total / T::lit(p.len().max(1) as f64)
}

/// Loss, gradients and batch statistics of one training step.
#[derive(Debug, Clone)]
pub struct TrainStep<T> {
    pub loss: T,
    pub probs: Vec<T>,
    /// Shaped like the weights; running-statistic entries are zero.
    pub grads: Weights<T>,
    pub stats: BatchStats<T>,
}

/// Exact gradients of the clamped cross-entropy through the training-mode
/// forward pass under the given masks.
pub fn loss_and_gradients<T: Real>(
    w: &Weights<T>,
    x: &Batch<T>,
    labels: &[T],
    masks: &DropoutMasks<T>,
) -> Result<TrainStep<T>> {
    if labels.len() != x.n {
        return Err(Error::ShapeMismatch(format!("{} labels for {} windows", labels.len(), x.n)));
    }
    let c = run(w, x, Some(masks))?;
    let (n, len) = (x.n, x.len);
    let (l2, l4) = (len / 2, len / 4);
    let inv_n = T::lit(1.0 / n as f64);
    let lo = T::lit(BCE_CLAMP);
    let mut g = Weights::zeros(w.input_len);

    let dz: Vec<T> = c
        .probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| if p < lo || p > T::one() - lo { T::zero() } else { (p - y) * inv_n })
        .collect();
    let (mut dh, dw, db) = dense_backward(&dz, &c.hidden_dropped, n, w.get(Param::OutWeight));
    g.get_mut(Param::OutWeight).copy_from_slice(&dw);
    g.get_mut(Param::OutBias).copy_from_slice(&db);

    apply_mask(&mut dh, &masks.dense);
    relu_backward_inplace(&mut dh, &c.hidden);
    let (dpooled, dw, db) = dense_backward(&dh, &c.pooled, n, w.get(Param::Dense1Weight));
    g.get_mut(Param::Dense1Weight).copy_from_slice(&dw);
    g.get_mut(Param::Dense1Bias).copy_from_slice(&db);

    let mut d = global_avg_pool_backward(&dpooled, CONV2_FILTERS, n, l4);
    apply_mask(&mut d, &masks.conv2);
    let d = maxpool2_backward(&d, &c.pool2_arg, CONV2_FILTERS * n * l2);
    let (mut d, dscale, dshift) = bn_backward(&d, &c.bn2, w.get(Param::Bn2Scale));
    g.get_mut(Param::Bn2Scale).copy_from_slice(&dscale);
    g.get_mut(Param::Bn2Shift).copy_from_slice(&dshift);
    relu_backward_inplace(&mut d, &c.relu2);
    let conv2 = conv_backward(&d, &c.cols2, w.get(Param::Conv2Kernel), CONV1_FILTERS, n, l2, KERNEL, true);
    g.get_mut(Param::Conv2Kernel).copy_from_slice(&conv2.kernel);
    g.get_mut(Param::Conv2Bias).copy_from_slice(&conv2.bias);

    let mut d = conv2.input.expect("requested input gradient");
    apply_mask(&mut d, &masks.conv1);
    let d = maxpool2_backward(&d, &c.pool1_arg, CONV1_FILTERS * n * len);
    let (mut d, dscale, dshift) = bn_backward(&d, &c.bn1, w.get(Param::Bn1Scale));
    g.get_mut(Param::Bn1Scale).copy_from_slice(&dscale);
    g.get_mut(Param::Bn1Shift).copy_from_slice(&dshift);
    relu_backward_inplace(&mut d, &c.relu1);
    let conv1 = conv_backward(&d, &c.cols1, w.get(Param::Conv1Kernel), INPUT_CHANNELS, n, len, KERNEL, false);
    g.get_mut(Param::Conv1Kernel).copy_from_slice(&conv1.kernel);
    g.get_mut(Param::Conv1Bias).copy_from_slice(&conv1.bias);

    Ok(TrainStep {
        loss: bce_loss(&c.probs, labels),
        probs: c.probs,
        grads: g,
        stats: BatchStats {
            bn1_mean: c.bn1.mean,
            bn1_var: c.bn1.var,
            bn2_mean: c.bn2.mean,
            bn2_var: c.bn2.var,
        },
    })
}

/// Gradients for one training-mode pass with masks drawn from `rng`.
pub fn backward<T: Real, R: Rng + ?Sized>(
    w: &Weights<T>,
    x: &Batch<T>,
    labels: &[T],
    rng: &mut R,
) -> Result<TrainStep<T>> {
    let masks = DropoutMasks::sample(x.n, x.len, rng);
    loss_and_gradients(w, x, labels, &masks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::weights::init_model;
    use crate::rng::substream;
    use rand_distr::StandardNormal;

    fn random_batch(n: usize, len: usize, seed: u64) -> Batch<f64> {
        let mut rng = substream(seed, &[]);
        let data = (0..2 * n * len).map(|_| rng.sample(StandardNormal)).collect();
        Batch { n, len, data }
    }

    #[test]
    fn zero_logit_gives_half() {
        let mut w: Weights<f64> = init_model(16, &mut substream(0, &[])).unwrap();
        w.get_mut(Param::OutWeight).iter_mut().for_each(|v| *v = 0.0);
        let x = random_batch(3, 16, 1);
        assert!(predict(&w, &x).unwrap().iter().all(|&p| p == 0.5));
        let zero = Weights::<f64>::zeros(16);
        assert!(predict(&zero, &x).unwrap().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn inference_is_repeatable() {
        let w: Weights<f64> = init_model(32, &mut substream(0, &[])).unwrap();
        let x = random_batch(4, 32, 2);
        let mut rng = substream(5, &[]);
        let a = forward(&w, &x, Mode::Infer, &mut rng).unwrap();
        let b = forward(&w, &x, Mode::Infer, &mut rng).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let w: Weights<f64> = init_model(32, &mut substream(0, &[])).unwrap();
        assert!(matches!(predict(&w, &random_batch(2, 16, 0)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn bce_examples() {
        assert!((bce_loss(&[0.5f64; 4], &[0.0, 1.0, 1.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(bce_loss(&[1.0f64, 0.0], &[1.0, 0.0]) <= 1e-6);
        assert!((bce_loss(&[0.9f64], &[0.0]) - (-(0.1f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn saturated_output_has_zero_head_gradient() {
        let mut w: Weights<f64> = init_model(16, &mut substream(0, &[])).unwrap();
        w.get_mut(Param::OutWeight).iter_mut().for_each(|v| *v = 0.0);
        w.get_mut(Param::OutBias)[0] = 40.0; // sigmoid(40) rounds to 1
        let x = random_batch(3, 16, 4);
        let step = loss_and_gradients(&w, &x, &[1.0; 3], &DropoutMasks::identity(3, 16)).unwrap();
        assert!(step.grads.get(Param::OutWeight).iter().all(|g| g.abs() < 1e-12));
        assert!(step.grads.get(Param::OutBias)[0].abs() < 1e-12);
    }

    #[test]
    fn dropout_preserves_mean_activation() {
        let mut rng = substream(6, &[]);
        let trials = 10_000;
        let mean: f64 = (0..trials)
            .map(|_| {
                let m = DropoutMasks::<f64>::sample(1, 8, &mut rng);
                m.dense.iter().sum::<f64>() / m.dense.len() as f64
            })
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }
}
