use super::layers::{bn_infer, conv_forward, maxpool2_forward, relu_inplace};
use super::model::Batch;
use super::train::ExampleSource;
use super::weights::{ModelWeights, Param};
use super::{BN_EPS, CONV1_FILTERS, CONV2_FILTERS, INPUT_CHANNELS, KERNEL};
use crate::error::{Error, Result};

const CHUNK: usize = 128;

struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: usize,
}

impl Moments {
    fn new(channels: usize) -> Self {
        Self { sum: vec![0.0; channels], sum_sq: vec![0.0; channels], count: 0 }
    }

    fn add(&mut self, x: &[f32]) {
        let row_len = x.len() / self.sum.len();
        for (ch, row) in x.chunks(row_len).enumerate() {
            for &v in row {
                let v = f64::from(v);
                self.sum[ch] += v;
                self.sum_sq[ch] += v * v;
            }
        }
        self.count += row_len;
    }

    fn write(&self, mean: &mut [f32], var: &mut [f32]) {
        let n = self.count as f64;
        for ch in 0..self.sum.len() {
            let mu = self.sum[ch] / n;
            mean[ch] = mu as f32;
            var[ch] = (self.sum_sq[ch] / n - mu * mu).max(0.0) as f32;
        }
    }
}

fn batches<S: ExampleSource + ?Sized>(src: &S, m: usize) -> impl Iterator<Item = Result<Batch<f32>>> + '_ {
    (0..src.len()).step_by(CHUNK).map(move |start| {
        let end = (start + CHUNK).min(src.len());
        let examples = (start..end).map(|i| src.example(i)).collect::<Result<Vec<_>>>()?;
        Batch::from_examples(examples.iter().map(|e| e.as_ref()), m)
    })
}

/// Replaces the running batch-norm statistics of `w` with the exact
/// population statistics of `src` as seen at inference time (no dropout).
/// The first layer's statistics are fixed before the second layer's are
/// measured, so both describe the network the windows will pass through.
pub fn calibrate_bn<S: ExampleSource + ?Sized>(w: &ModelWeights, src: &S) -> Result<ModelWeights> {
    if src.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = w.input_len;
    let mut out = w.clone();
    let conv1 = |x: &Batch<f32>| {
        let (mut h, _) = conv_forward(&x.data, INPUT_CHANNELS, x.n, m, w.get(Param::Conv1Kernel), w.get(Param::Conv1Bias), KERNEL);
        relu_inplace(&mut h);
        h
    };

    let mut first = Moments::new(CONV1_FILTERS);
    for x in batches(src, m) {
        first.add(&conv1(&x?));
    }
    let (mean, var) = (&mut vec![0.0; CONV1_FILTERS], &mut vec![0.0; CONV1_FILTERS]);
    first.write(mean, var);
    out.get_mut(Param::Bn1Mean).copy_from_slice(mean);
    out.get_mut(Param::Bn1Var).copy_from_slice(var);

    let mut second = Moments::new(CONV2_FILTERS);
    let eps = BN_EPS as f32;
    for x in batches(src, m) {
        let x = x?;
        let mut h = conv1(&x);
        bn_infer(&mut h, w.get(Param::Bn1Scale), w.get(Param::Bn1Shift), mean, var, eps);
        let (h, _) = maxpool2_forward(&h, CONV1_FILTERS, x.n, m);
        let (mut h, _) = conv_forward(&h, CONV1_FILTERS, x.n, m / 2, w.get(Param::Conv2Kernel), w.get(Param::Conv2Bias), KERNEL);
        relu_inplace(&mut h);
        second.add(&h);
    }
    let mut var2 = vec![0.0; CONV2_FILTERS];
    let mut mean2 = vec![0.0; CONV2_FILTERS];
    second.write(&mut mean2, &mut var2);
    out.get_mut(Param::Bn2Mean).copy_from_slice(&mean2);
    out.get_mut(Param::Bn2Var).copy_from_slice(&var2);
    Ok(out)
}
