use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const DEFAULT_MOMENTUM: f64 = 0.1;

/// Mean-only batch normalization of real-valued pre-activations.
///
/// Training mode subtracts the per-feature batch mean and folds it into the running
/// mean with `running = (1 - momentum) running + momentum * batch_mean`.
/// Inference subtracts the running mean. There is no variance scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanOnlyBatchNorm {
    pub running_mean: Array1<f64>,
    pub momentum: f64,
}

impl MeanOnlyBatchNorm {
    pub fn new(features: usize) -> Self {
        MeanOnlyBatchNorm { running_mean: Array1::zeros(features), momentum: DEFAULT_MOMENTUM }
    }

    pub fn with_momentum(features: usize, momentum: f64) -> Self {
        MeanOnlyBatchNorm { running_mean: Array1::zeros(features), momentum }
    }

    pub fn features(&self) -> usize {
        self.running_mean.len()
    }

    pub fn forward(&mut self, z: ArrayView2<f64>, training: bool) -> Result<Array2<f64>> {
        if z.ncols() != self.features() {
            return Err(Error::DimensionMismatch { expected: self.features(), found: z.ncols() });
        }
        if training {
            let mean = z.mean_axis(Axis(0)).ok_or(Error::EmptyBatch)?;
            self.running_mean = &self.running_mean * (1.0 - self.momentum) + &mean * self.momentum;
            Ok(&z - &mean)
        } else {
            Ok(self.infer(z))
        }
    }

    /// Inference-mode centering; does not touch the running mean.
    pub fn infer(&self, z: ArrayView2<f64>) -> Array2<f64> {
        &z - &self.running_mean
    }
}
