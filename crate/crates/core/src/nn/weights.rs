use rand::Rng;
use rand_distr::StandardNormal;

use super::real::Real;
use super::{CONV1_FILTERS, CONV2_FILTERS, DENSE_UNITS, INPUT_CHANNELS, KERNEL};
use crate::error::{Error, Result};

/// Name, shape and role of one stored tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: &'static str,
    pub shape: &'static [usize],
    pub learnable: bool,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

macro_rules! tensors {
    ($($variant:ident => $name:literal, [$($dim:expr),*], $learn:literal;)*) => {
        /// Index of a tensor in [`Weights`].
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum Param { $($variant),* }

        pub const TENSORS: &[TensorSpec] = &[
            $(TensorSpec { name: $name, shape: &[$($dim),*], learnable: $learn }),*
        ];
    };
}

tensors! {
    Conv1Kernel => "conv1.kernel", [CONV1_FILTERS, INPUT_CHANNELS, KERNEL], true;
    Conv1Bias => "conv1.bias", [CONV1_FILTERS], true;
    Bn1Scale => "bn1.scale", [CONV1_FILTERS], true;
    Bn1Shift => "bn1.shift", [CONV1_FILTERS], true;
    Bn1Mean => "bn1.running_mean", [CONV1_FILTERS], false;
    Bn1Var => "bn1.running_var", [CONV1_FILTERS], false;
    Conv2Kernel => "conv2.kernel", [CONV2_FILTERS, CONV1_FILTERS, KERNEL], true;
    Conv2Bias => "conv2.bias", [CONV2_FILTERS], true;
    Bn2Scale => "bn2.scale", [CONV2_FILTERS], true;
    Bn2Shift => "bn2.shift", [CONV2_FILTERS], true;
    Bn2Mean => "bn2.running_mean", [CONV2_FILTERS], false;
    Bn2Var => "bn2.running_var", [CONV2_FILTERS], false;
    Dense1Weight => "dense1.weight", [CONV2_FILTERS, DENSE_UNITS], true;
    Dense1Bias => "dense1.bias", [DENSE_UNITS], true;
    OutWeight => "out.weight", [DENSE_UNITS, 1], true;
    OutBias => "out.bias", [1], true;
}

/// Every parameter of the edge model, including batch-norm running
/// statistics, for input windows of `input_len` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub input_len: usize,
    tensors: Vec<Vec<T>>,
}

pub type ModelWeights = Weights<f32>;

impl<T: Real> Weights<T> {
    pub fn zeros(input_len: usize) -> Self {
        Self {
            input_len,
            tensors: TENSORS.iter().map(|s| vec![T::zero(); s.len()]).collect(),
        }
    }

    /// Builds weights from tensors listed in [`TENSORS`] order.
    pub fn from_tensors(input_len: usize, tensors: Vec<Vec<T>>) -> Result<Self> {
        if tensors.len() != TENSORS.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, got {}",
                TENSORS.len(),
                tensors.len()
            )));
        }
        for (spec, t) in TENSORS.iter().zip(&tensors) {
            if t.len() != spec.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} holds {} values, expected {}",
                    spec.name,
                    t.len(),
                    spec.len()
                )));
            }
        }
        Ok(Self { input_len, tensors })
    }

    pub fn get(&self, p: Param) -> &[T] {
        &self.tensors[p as usize]
    }

    pub fn get_mut(&mut self, p: Param) -> &mut [T] {
        &mut self.tensors[p as usize]
    }

    pub fn tensor(&self, index: usize) -> &[T] {
        &self.tensors[index]
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut [T] {
        &mut self.tensors[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static TensorSpec, &[T])> {
        TENSORS.iter().zip(self.tensors.iter().map(Vec::as_slice))
    }

    pub fn learnable_count(&self) -> usize {
        TENSORS.iter().filter(|s| s.learnable).map(TensorSpec::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.input_len == other.input_len
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.len() == b.len())
    }

    pub fn cast<U: Real>(&self) -> Weights<U> {
        Weights {
            input_len: self.input_len,
            tensors: self
                .tensors
                .iter()
                .map(|t| t.iter().map(|v| U::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or(U::nan())).collect())
                .collect(),
        }
    }
}

/// Initializes the edge model for windows of `m` samples: He-normal kernels
/// and dense weights, zero biases, identity batch normalization.
pub fn init_model<T: Real, R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Weights<T>> {
    if m < 4 {
        return Err(Error::InvalidLength(m));
    }
    let mut w = Weights::zeros(m);
    let mut he = |w: &mut Weights<T>, p: Param, fan_in: usize| {
        let std = (2.0 / fan_in as f64).sqrt();
        for v in w.get_mut(p) {
            *v = T::lit(std * rng.sample::<f64, _>(StandardNormal));
        }
    };
    he(&mut w, Param::Conv1Kernel, INPUT_CHANNELS * KERNEL);
    he(&mut w, Param::Conv2Kernel, CONV1_FILTERS * KERNEL);
    he(&mut w, Param::Dense1Weight, CONV2_FILTERS);
    he(&mut w, Param::OutWeight, DENSE_UNITS);
    for p in [Param::Bn1Scale, Param::Bn1Var, Param::Bn2Scale, Param::Bn2Var] {
        w.get_mut(p).iter_mut().for_each(|v| *v = T::one());
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn learnable_parameter_count() {
        let w: ModelWeights = init_model(3000, &mut substream(0, &[])).unwrap();
        let by_layer = 10 * 2 * 30 + 10 + 20 + 100 * 10 * 30 + 100 + 200 + 100 * 20 + 20 + 20 + 1;
        assert_eq!(by_layer, 610 + 20 + 30100 + 200 + 2020 + 21);
        assert_eq!(w.learnable_count(), 32_971);
    }

    #[test]
    fn init_is_reproducible_with_identity_norms() {
        let a: ModelWeights = init_model(64, &mut substream(3, &[])).unwrap();
        let b: ModelWeights = init_model(64, &mut substream(3, &[])).unwrap();
        assert_eq!(a, b);
        assert!(a.get(Param::Bn1Var).iter().chain(a.get(Param::Bn2Var)).all(|&v| v == 1.0));
        assert!(a.get(Param::Bn1Mean).iter().all(|&v| v == 0.0));
        assert!(a.get(Param::Conv2Bias).iter().all(|&v| v == 0.0));
        let k = a.get(Param::Conv2Kernel);
        let var = k.iter().map(|v| f64::from(*v).powi(2)).sum::<f64>() / k.len() as f64;
        assert!((var / (2.0 / 300.0) - 1.0).abs() < 0.05);
    }

    #[test]
    fn short_windows_are_rejected() {
        assert!(matches!(init_model::<f32, _>(3, &mut substream(0, &[])), Err(Error::InvalidLength(3))));
    }
}
