//! Hand-derived gradients for the layers, a finite-difference oracle, and SGD.
//!
//! Parameters are exchanged as flat `f64` slices so a single optimizer can drive
//! any layer kind. Each trainable wrapper documents its flat ordering.

mod chen;
mod fgg;
mod finite_diff;
mod sgd;

use ndarray::{Array2, ArrayView2};

use crate::error::Result;

pub use chen::{ChenGradient, TrainableChen};
pub use fgg::{ParamGradient, TrainableFgg};
pub use finite_diff::{finite_difference_gradient, DEFAULT_STEP};
pub use sgd::{Sgd, SgdConfig};

/// A layer that records its forward pass and can backpropagate through it.
pub trait Trainable {
    fn num_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, flat: &[f64]) -> Result<()>;

    /// Forward pass that records what `backward` needs. `training` selects batch
    /// statistics in batch normalization.
    fn forward(&mut self, x: ArrayView2<f64>, training: bool) -> Result<Array2<f64>>;

    /// Forward pass without recording; batch normalization uses running statistics.
    fn infer(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;

    /// Flat parameter gradient and input gradient given `dL/dY`.
    fn backward(&self, upstream: ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)>;
}

/// Gradient of the spatial outputs given gradients with respect to the full ambient
/// output, using `y_0 = sqrt(1/k + ‖ȳ‖²)`.
pub(crate) fn spatial_upstream(y: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Array2<f64> {
    let d = y.ncols() - 1;
    let mut out = Array2::zeros((y.nrows(), d));
    for ((mut o, yr), gr) in out.rows_mut().into_iter().zip(y.rows()).zip(upstream.rows()) {
        let c = gr[0] / yr[0];
        for j in 0..d {
            o[j] = gr[j + 1] + c * yr[j + 1];
        }
    }
    out
}

pub(crate) fn check_finite(g: &[f64]) -> Result<()> {
    match g.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(crate::Error::NonFiniteGradient(i)),
        None => Ok(()),
    }
}
