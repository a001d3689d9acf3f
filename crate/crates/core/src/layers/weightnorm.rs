use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::gaussian_matrix;

/// Weight-normalized rows: `w⁽ⁱ⁾ = g_i a⁽ⁱ⁾ / ‖a⁽ⁱ⁾‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightNorm {
    pub g: Array1<f64>,
    pub a: Array2<f64>,
}

/// Direction norms at or below this are rejected.
pub const A_MIN: f64 = 1e-12;

impl WeightNorm {
    pub fn new(g: Array1<f64>, a: Array2<f64>) -> Result<Self> {
        if g.len() != a.nrows() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: g.len() });
        }
        let wn = WeightNorm { g, a };
        wn.direction_norms()?;
        Ok(wn)
    }

    /// Reparametrizes plain weights with `g = ‖w⁽ⁱ⁾‖` and `a = w`.
    pub fn from_weights(w: ArrayView2<f64>) -> Result<Self> {
        let g = w.map_axis(Axis(1), |r| r.dot(&r).sqrt());
        WeightNorm::new(g, w.to_owned())
    }

    /// Gaussian directions with standard deviation `1/sqrt(d_in)` and unit gains.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize) -> Self {
        let a = gaussian_matrix(rng, d_out, d_in, 1.0 / (d_in as f64).sqrt());
        WeightNorm { g: Array1::ones(d_out), a }
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn direction_norms(&self) -> Result<Array1<f64>> {
        let norms = self.a.map_axis(Axis(1), |r| r.dot(&r).sqrt());
        for (row, &n) in norms.iter().enumerate() {
            if !(n > A_MIN && n.is_finite()) {
                return Err(Error::DegenerateWeight { row, norm: n });
            }
        }
        Ok(norms)
    }

    /// Effective weight matrix; row `i` has Euclidean norm `|g_i|`.
    pub fn effective(&self) -> Result<Array2<f64>> {
        let norms = self.direction_norms()?;
        let mut w = self.a.clone();
        for ((mut row, &n), &g) in w.rows_mut().into_iter().zip(norms.iter()).zip(self.g.iter()) {
            row *= g / n;
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn effective_examples() {
        let unit = WeightNorm::new(array![1.0], array![[0.6, 0.8]]).unwrap();
        assert_eq!(unit.effective().unwrap(), array![[0.6, 0.8]]);
        let scaled = WeightNorm::new(array![3.0], array![[0.0, 4.0, 0.0]]).unwrap();
        assert_eq!(scaled.effective().unwrap(), array![[0.0, 3.0, 0.0]]);
    }

    #[test]
    fn row_norms_equal_gains() {
        let wn = WeightNorm::new(array![2.0, -0.5], array![[1.0, 2.0, 3.0], [-1.0, 0.5, 0.25]]).unwrap();
        let w = wn.effective().unwrap();
        for (row, g) in w.rows().into_iter().zip(wn.g.iter()) {
            assert_abs_diff_eq!(row.dot(&row).sqrt(), g.abs(), epsilon = 1e-15);
        }
    }

    #[test]
    fn degenerate_direction_is_rejected() {
        assert!(matches!(
            WeightNorm::new(array![1.0], array![[0.0, 0.0]]),
            Err(Error::DegenerateWeight { row: 0, .. })
        ));
    }

    #[test]
    fn from_weights_reproduces_weights() {
        let w = array![[0.3, -0.4], [2.0, 1.0]];
        let wn = WeightNorm::from_weights(w.view()).unwrap();
        let back = wn.effective().unwrap();
        for (a, b) in back.iter().zip(w.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }
}
