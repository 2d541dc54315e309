//! Rounds of local training and server-side aggregation, plus the
//! independently trained baseline.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::config::{Aggregator, SimulationConfig};
use crate::dataset::{example_at, make_client_dataset, Example, Scene, Split};
use crate::error::{Error, Result};
use crate::nn::{
    calibrate_bn, evaluate, init_model, train_local, train_on, ExampleSource, ModelWeights, TrainReport, Weights, TENSORS,
};
use crate::rng::{self, substream};

/// What a client sends back after local training.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub weights: ModelWeights,
    pub sample_count: usize,
    pub snr_linear: f64,
}

fn weighted_mean(updates: &[ClientUpdate], coeffs: &[f64]) -> Result<ModelWeights> {
    let first = &updates.first().ok_or(Error::EmptyUpdateSet)?.weights;
    if let Some(u) = updates.iter().find(|u| !u.weights.same_shape(first)) {
        return Err(Error::ShapeMismatch(format!(
            "client update for windows of {} samples does not match {}",
            u.weights.input_len, first.input_len
        )));
    }
    // Coefficients are divided by their maximum before accumulation.
    let top = coeffs.iter().copied().fold(0.0, f64::max);
    let scaled: Vec<f64> = coeffs.iter().map(|c| c / top).collect();
    let total: f64 = scaled.iter().sum();
    let mut out = Weights::zeros(first.input_len);
    let mut acc = Vec::new();
    for t in 0..TENSORS.len() {
        acc.clear();
        acc.resize(first.tensor(t).len(), 0.0f64);
        for (u, &c) in updates.iter().zip(&scaled) {
            for (a, &v) in acc.iter_mut().zip(u.weights.tensor(t)) {
                *a += c * f64::from(v);
            }
        }
        for (o, a) in out.tensor_mut(t).iter_mut().zip(&acc) {
            *o = (a / total) as f32;
        }
    }
    Ok(out)
}

/// Sample-count weighted mean of every tensor, running statistics included.
pub fn fed_avg(updates: &[ClientUpdate]) -> Result<ModelWeights> {
    if updates.iter().any(|u| u.sample_count == 0) {
        return Err(Error::EmptyDataset);
    }
    let n: Vec<f64> = updates.iter().map(|u| u.sample_count as f64).collect();
    weighted_mean(updates, &n)
}

/// SNR-weighted mean of every tensor, running statistics included.
pub fn fed_snr(updates: &[ClientUpdate]) -> Result<ModelWeights> {
    if let Some(u) = updates.iter().find(|u| !(u.snr_linear > 0.0 && u.snr_linear.is_finite())) {
        return Err(Error::NonPositiveSnr(u.snr_linear));
    }
    let g: Vec<f64> = updates.iter().map(|u| u.snr_linear).collect();
    weighted_mean(updates, &g)
}

pub fn aggregate(updates: &[ClientUpdate], rule: Aggregator) -> Result<ModelWeights> {
    match rule {
        Aggregator::FedAvg => fed_avg(updates),
        Aggregator::FedSnr => fed_snr(updates),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub round: usize,
    pub aggregator: Aggregator,
    /// Test accuracy of the aggregated model on each UAV's held-out windows.
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub snr_db: Vec<f64>,
    pub reports: Vec<TrainReport>,
}

/// Accuracy of `w` on `test` as deployed on a UAV: with calibration enabled
/// the batch-norm statistics are first re-estimated on the UAV's `train`
/// windows.
pub fn sensing_accuracy<A, B>(w: &ModelWeights, train: &A, test: &B, cfg: &SimulationConfig) -> Result<f64>
where
    A: ExampleSource + ?Sized,
    B: ExampleSource + ?Sized,
{
    if cfg.bn_calibration {
        evaluate(&calibrate_bn(w, train)?, test)
    } else {
        evaluate(w, test)
    }
}

/// The model every client starts from before the first round.
pub fn initial_model(cfg: &SimulationConfig) -> Result<ModelWeights> {
    init_model(cfg.signal_len, &mut substream(cfg.seed, &[rng::INIT]))
}

/// One setting of the federated loop: fresh scene and datasets, local
/// training from `global` on every UAV, aggregation and evaluation.
/// `global` itself is never modified.
pub fn run_round(global: &ModelWeights, setting: usize, cfg: &SimulationConfig) -> Result<(ModelWeights, RoundResult)> {
    let scene = Scene::generate(cfg, setting)?;
    let hp = cfg.train_params();
    let start = if cfg.fresh_init {
        Cow::Owned(init_model(cfg.signal_len, &mut substream(cfg.seed, &[rng::INIT, setting as u64]))?)
    } else {
        Cow::Borrowed(global)
    };
    let clients = (0..scene.num_uavs())
        .into_par_iter()
        .map(|uav| {
            let ds = make_client_dataset(&scene, uav, cfg)?;
            let mut r = substream(cfg.seed, &[rng::TRAIN, setting as u64, uav as u64]);
            let (weights, report) = train_local(&start, &ds, &hp, &mut r)?;
            let update = ClientUpdate { weights, sample_count: ds.sample_count, snr_linear: ds.snr_linear };
            Ok((update, report, ds))
        })
        .collect::<Result<Vec<_>>>()?;

    let updates: Vec<ClientUpdate> = clients.iter().map(|(u, _, _)| u.clone()).collect();
    let next = aggregate(&updates, cfg.aggregator)?;
    let accuracies = clients
        .par_iter()
        .map(|(_, _, data)| sensing_accuracy(&next, &data.train, &data.test, cfg))
        .collect::<Result<Vec<_>>>()?;
    let result = RoundResult {
        round: setting,
        aggregator: cfg.aggregator,
        mean_accuracy: mean(&accuracies),
        accuracies,
        snr_db: updates.iter().map(|u| 10.0 * u.snr_linear.log10()).collect(),
        reports: clients.into_iter().map(|(_, r, _)| r).collect(),
    };
    Ok((next, result))
}

/// Every setting in turn, each round warm-starting from the previous
/// aggregate. `on_round` sees each result as soon as it is ready.
pub fn run_experiment_with(
    cfg: &SimulationConfig,
    mut on_round: impl FnMut(&RoundResult),
) -> Result<(ModelWeights, Vec<RoundResult>)> {
    cfg.validate()?;
    let mut global = initial_model(cfg)?;
    let mut history = Vec::with_capacity(cfg.settings);
    for setting in 0..cfg.settings {
        let (next, result) = run_round(&global, setting, cfg)?;
        on_round(&result);
        global = next;
        history.push(result);
    }
    Ok((global, history))
}

pub fn run_experiment(cfg: &SimulationConfig) -> Result<Vec<RoundResult>> {
    Ok(run_experiment_with(cfg, |_| {})?.1)
}

/// Mean accuracy over the final 20% of rounds (at least one).
pub fn headline_accuracy(history: &[RoundResult]) -> f64 {
    let tail = history.len().div_ceil(5).max(1).min(history.len());
    let accs: Vec<f64> = history[history.len() - tail..].iter().map(|r| r.mean_accuracy).collect();
    mean(&accs)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// One UAV's windows from every setting, produced on demand in setting
/// order.
pub struct ConcatenatedData<'a> {
    scenes: &'a [Scene],
    uav: usize,
    cfg: &'a SimulationConfig,
    split: Split,
    per_setting: usize,
}

impl<'a> ConcatenatedData<'a> {
    pub fn new(scenes: &'a [Scene], uav: usize, cfg: &'a SimulationConfig, split: Split) -> Self {
        let per_setting = match split {
            Split::Train => cfg.data_per_uav,
            Split::Test => cfg.test_per_uav(),
        };
        Self { scenes, uav, cfg, split, per_setting }
    }
}

impl ExampleSource for ConcatenatedData<'_> {
    fn len(&self) -> usize {
        self.scenes.len() * self.per_setting
    }

    fn example(&self, index: usize) -> Result<Cow<'_, Example>> {
        let scene = self
            .scenes
            .get(index / self.per_setting.max(1))
            .ok_or_else(|| Error::validation("index", format!("{index} out of range")))?;
        example_at(scene, self.uav, self.cfg, self.split, index % self.per_setting).map(Cow::Owned)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub reports: Vec<TrainReport>,
}

/// Each UAV trains alone on its windows from every setting, starting from
/// the same initial model as the federated run, and is tested on its own
/// held-out windows from every setting.
pub fn baseline_independent(cfg: &SimulationConfig) -> Result<BaselineResult> {
    cfg.validate()?;
    let scenes = (0..cfg.settings).map(|s| Scene::generate(cfg, s)).collect::<Result<Vec<_>>>()?;
    let w0 = initial_model(cfg)?;
    let hp = cfg.train_params();
    let per_uav = (0..cfg.num_uavs)
        .into_par_iter()
        .map(|uav| {
            let train = ConcatenatedData::new(&scenes, uav, cfg, Split::Train);
            let test = ConcatenatedData::new(&scenes, uav, cfg, Split::Test);
            // Same stream as the UAV's first federated training call.
            let mut r = substream(cfg.seed, &[rng::TRAIN, 0, uav as u64]);
            let (w, report) = train_on(&w0, &train, &hp, &mut r)?;
            Ok((sensing_accuracy(&w, &train, &test, cfg)?, report))
        })
        .collect::<Result<Vec<_>>>()?;
    let (accuracies, reports): (Vec<f64>, Vec<TrainReport>) = per_uav.into_iter().unzip();
    Ok(BaselineResult { mean_accuracy: mean(&accuracies), accuracies, reports })
}
