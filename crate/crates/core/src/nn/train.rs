use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::Rng;

use super::adam::AdamState;
use super::model::{loss_and_gradients, predict, Batch, DropoutMasks};
use super::weights::{ModelWeights, Param};
use super::TrainParams;
use crate::dataset::{ClientDataset, Example};
use crate::error::{Error, Result};

const EVAL_BATCH: usize = 256;

/// Random access to a labelled set of windows.
///
/// Implemented for slices of [`Example`]; larger sets can produce windows on
/// demand instead of holding them in memory.
pub trait ExampleSource: Sync {
    fn len(&self) -> usize;

    fn example(&self, index: usize) -> Result<Cow<'_, Example>>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ExampleSource for [Example] {
    fn len(&self) -> usize {
        <[Example]>::len(self)
    }

    fn example(&self, index: usize) -> Result<Cow<'_, Example>> {
        self.get(index)
            .map(Cow::Borrowed)
            .ok_or_else(|| Error::validation("index", format!("{index} out of range")))
    }
}

impl ExampleSource for Vec<Example> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn example(&self, index: usize) -> Result<Cow<'_, Example>> {
        self.as_slice().example(index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Mean training loss of the last epoch (0 when no epoch ran).
    pub final_loss: f64,
    pub stopped_early: bool,
    /// Accuracy of the training-mode predictions made during the last epoch.
    pub train_accuracy: f64,
    pub loss_history: Vec<f64>,
}

fn load_batch<S: ExampleSource + ?Sized>(src: &S, indices: &[usize], m: usize) -> Result<(Batch<f32>, Vec<f32>)> {
    let examples = indices.iter().map(|&i| src.example(i)).collect::<Result<Vec<_>>>()?;
    let batch = Batch::from_examples(examples.iter().map(|e| e.as_ref()), m)?;
    let labels = examples.iter().map(|e| f32::from(e.label)).collect();
    Ok((batch, labels))
}

fn update_running(w: &mut ModelWeights, param: Param, batch_value: &[f32], momentum: f64) {
    for (r, &b) in w.get_mut(param).iter_mut().zip(batch_value) {
        *r = (momentum * f64::from(*r) + (1.0 - momentum) * f64::from(b)) as f32;
    }
}

/// Mini-batch Adam training with per-epoch shuffling and early stopping on
/// the training loss. The optimizer starts from fresh moments.
pub fn train_on<S: ExampleSource + ?Sized, R: Rng + ?Sized>(
    w0: &ModelWeights,
    src: &S,
    hp: &TrainParams,
    rng: &mut R,
) -> Result<(ModelWeights, TrainReport)> {
    if src.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if hp.batch_size == 0 {
        return Err(Error::validation("batch_size", "must be positive"));
    }
    let m = w0.input_len;
    let mut w = w0.clone();
    let mut adam = AdamState::from_params(m, hp);
    let mut order: Vec<usize> = (0..src.len()).collect();
    let mut report = TrainReport {
        epochs_run: 0,
        final_loss: 0.0,
        stopped_early: false,
        train_accuracy: 0.0,
        loss_history: Vec::new(),
    };
    let mut best = f64::INFINITY;
    let mut wait = 0;

    for _ in 0..hp.max_epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(hp.batch_size) {
            let (batch, labels) = load_batch(src, chunk, m)?;
            let masks = DropoutMasks::sample(batch.n, m, rng);
            let step = loss_and_gradients(&w, &batch, &labels, &masks)?;
            adam.step(&mut w, &step.grads)?;
            update_running(&mut w, Param::Bn1Mean, &step.stats.bn1_mean, hp.bn_momentum);
            update_running(&mut w, Param::Bn1Var, &step.stats.bn1_var, hp.bn_momentum);
            update_running(&mut w, Param::Bn2Mean, &step.stats.bn2_mean, hp.bn_momentum);
            update_running(&mut w, Param::Bn2Var, &step.stats.bn2_var, hp.bn_momentum);
            loss_sum += f64::from(step.loss) * chunk.len() as f64;
            correct += step
                .probs
                .iter()
                .zip(&labels)
                .filter(|(&p, &y)| (p > 0.5) == (y > 0.5))
                .count();
        }
        let loss = loss_sum / src.len() as f64;
        report.epochs_run += 1;
        report.final_loss = loss;
        report.train_accuracy = correct as f64 / src.len() as f64;
        report.loss_history.push(loss);
        if !w.is_finite() {
            return Err(Error::Format("training diverged to non-finite weights".into()));
        }
        if loss < best - hp.min_delta {
            best = loss;
            wait = 0;
        } else {
            wait += 1;
            if wait >= hp.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    Ok((w, report))
}

/// Trains on the client's training windows.
pub fn train_local<R: Rng + ?Sized>(
    w0: &ModelWeights,
    ds: &ClientDataset,
    hp: &TrainParams,
    rng: &mut R,
) -> Result<(ModelWeights, TrainReport)> {
    train_on(w0, ds.train.as_slice(), hp, rng)
}

/// Fraction of windows whose inference-mode probability lands on the right
/// side of 0.5 (exactly 0.5 counts as "absent").
pub fn evaluate<S: ExampleSource + ?Sized>(w: &ModelWeights, examples: &S) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let indices: Vec<usize> = (0..examples.len()).collect();
    let mut correct = 0usize;
    for chunk in indices.chunks(EVAL_BATCH) {
        let (batch, labels) = load_batch(examples, chunk, w.input_len)?;
        let probs = predict(w, &batch)?;
        correct += probs.iter().zip(&labels).filter(|(&p, &y)| (p > 0.5) == (y > 0.5)).count();
    }
    Ok(correct as f64 / examples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::weights::init_model;
    use crate::rng::substream;

    fn toy(n: usize, m: usize, seed: u64) -> Vec<Example> {
        let mut rng = substream(seed, &[]);
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let x = (0..2 * m)
                    .map(|t| {
                        let noise: f32 = rng.random::<f32>() - 0.5;
                        let tone = if label == 1 { 3.0 * ((t as f32) * 0.4).sin() } else { 0.0 };
                        tone + noise
                    })
                    .collect();
                Example { x, label }
            })
            .collect()
    }

    #[test]
    fn zero_epochs_returns_initial_weights() {
        let w0 = init_model(32, &mut substream(1, &[])).unwrap();
        let data = toy(8, 32, 0);
        let hp = TrainParams { max_epochs: 0, ..TrainParams::default() };
        let (w, report) = train_on(&w0, &data, &hp, &mut substream(2, &[])).unwrap();
        assert_eq!(w, w0);
        assert_eq!(report.epochs_run, 0);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let w0 = init_model(32, &mut substream(1, &[])).unwrap();
        let empty: Vec<Example> = Vec::new();
        assert!(matches!(
            train_on(&w0, &empty, &TrainParams::default(), &mut substream(2, &[])),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(evaluate(&w0, &empty), Err(Error::EmptyDataset)));
    }

    #[test]
    fn learns_separable_toy_set() {
        let w0 = init_model(128, &mut substream(1, &[])).unwrap();
        let data = toy(64, 128, 3);
        let (_, report) = train_on(&w0, &data, &TrainParams::default(), &mut substream(2, &[])).unwrap();
        assert!(report.epochs_run <= 20);
        assert!(report.train_accuracy >= 0.95, "{report:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let w0 = init_model(32, &mut substream(1, &[])).unwrap();
        let data = toy(40, 32, 5);
        let hp = TrainParams { max_epochs: 3, ..TrainParams::default() };
        let a = train_on(&w0, &data, &hp, &mut substream(7, &[])).unwrap();
        let b = train_on(&w0, &data, &hp, &mut substream(7, &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_model_scores_half_on_balanced_set() {
        let w = ModelWeights::zeros(32);
        assert_eq!(evaluate(&w, &toy(10, 32, 0)).unwrap(), 0.5);
    }
}
