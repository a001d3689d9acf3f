use ndarray::{s, Array2, ArrayView2};
use rand::Rng;

use super::kernel::{check_input, fill_time};
use crate::error::{Error, Result};
use crate::lorentz::Curvature;
use crate::sampling::gaussian_matrix;

/// Baseline Lorentz linear layer: the spatial output is `W x` over the full ambient
/// input and the time component is recomputed. No bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ChenLinear {
    /// `D_out × (D_in + 1)`.
    pub w: Array2<f64>,
    pub k: Curvature,
}

impl ChenLinear {
    pub fn new(w: Array2<f64>, k: Curvature) -> Result<Self> {
        if w.ncols() < 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: w.ncols() });
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(ChenLinear { w, k })
    }

    /// Gaussian entries with standard deviation `1/sqrt(D_in + 1)`.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, k: Curvature) -> Self {
        let w = gaussian_matrix(rng, d_out, d_in + 1, 1.0 / ((d_in + 1) as f64).sqrt());
        ChenLinear { w, k }
    }

    pub fn d_in(&self) -> usize {
        self.w.ncols() - 1
    }

    pub fn d_out(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.d_out() + 1));
        self.forward_into(x, &mut out)?;
        Ok(out)
    }

    pub fn forward_into(&self, x: ArrayView2<f64>, out: &mut Array2<f64>) -> Result<()> {
        check_input(&x, self.d_in())?;
        let mut spatial = out.slice_mut(s![.., 1..]);
        ndarray::linalg::general_mat_mul(1.0, &x, &self.w.t(), 0.0, &mut spatial);
        fill_time(self.k, out.view_mut());
        Ok(())
    }
}
