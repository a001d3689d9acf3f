use ndarray::{s, Array1, Array2, ArrayView2};

use super::kernel::{check_input, finish_fgg_output, products_into};
use super::Activation;
use crate::error::{Error, Result};
use crate::lorentz::Curvature;

/// Inference-only form of an FGG layer: the transported normals are stored directly,
/// so no hyperbolic functions are evaluated to build them.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCache {
    v: Array2<f64>,
    vi: Array2<f64>,
    k: Curvature,
    activation: Activation,
}

impl LayerCache {
    /// Wraps transported normals `V` (`D_out × (D_in+1)`); every row must be spacelike
    /// with a nonzero spatial part.
    pub fn new(v: Array2<f64>, k: Curvature, activation: Activation) -> Result<Self> {
        if v.ncols() < 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: v.ncols() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        for (i, row) in v.rows().into_iter().enumerate() {
            row_norms(row, i)?;
        }
        let mut vi = v.clone();
        vi.column_mut(0).mapv_inplace(|t| -t);
        Ok(LayerCache { v, vi, k, activation })
    }

    pub(crate) fn from_minkowski_normals(vi: Array2<f64>, k: Curvature, activation: Activation) -> Self {
        let mut v = vi.clone();
        v.column_mut(0).mapv_inplace(|t| -t);
        LayerCache { v, vi, k, activation }
    }

    pub fn normals(&self) -> ArrayView2<'_, f64> {
        self.v.view()
    }

    pub fn curvature(&self) -> Curvature {
        self.k
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn d_in(&self) -> usize {
        self.v.ncols() - 1
    }

    pub fn d_out(&self) -> usize {
        self.v.nrows()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut products = Array2::zeros((x.nrows(), self.d_out()));
        let mut out = Array2::zeros((x.nrows(), self.d_out() + 1));
        self.forward_into(x, &mut products, &mut out)?;
        Ok(out)
    }

    /// Allocation-free forward pass; `products` must be `batch × D_out`.
    pub fn forward_into(&self, x: ArrayView2<f64>, products: &mut Array2<f64>, out: &mut Array2<f64>) -> Result<()> {
        check_input(&x, self.d_in())?;
        products_into(x, self.vi.view(), products);
        finish_fgg_output(products.view(), self.activation, self.k, out.view_mut());
        Ok(())
    }

    /// Recovers the layer parameters `(W, b)` that produce these normals.
    pub fn invert(&self) -> Result<(Array2<f64>, Array1<f64>)> {
        let sk = self.k.sqrt();
        let mut w = Array2::zeros((self.d_out(), self.d_in()));
        let mut b = Array1::zeros(self.d_out());
        for (i, row) in self.v.rows().into_iter().enumerate() {
            let (lorentz, spatial) = row_norms(row, i)?;
            w.row_mut(i).assign(&(&row.slice(s![1..]) * (lorentz / spatial)));
            b[i] = -(lorentz / sk) * (row[0] / lorentz).asinh();
        }
        Ok((w, b))
    }
}

/// `(‖v‖_L, ‖v̄‖_E)` for a cached row.
fn row_norms(row: ndarray::ArrayView1<f64>, i: usize) -> Result<(f64, f64)> {
    let spatial = row.slice(s![1..]).dot(&row.slice(s![1..])).sqrt();
    if spatial == 0.0 {
        return Err(Error::ZeroSpatialPart(i));
    }
    let t = row[0].abs();
    // Factored to avoid squaring before the subtraction.
    let sq = (spatial - t) * (spatial + t);
    if sq.is_nan() || sq <= 0.0 {
        return Err(Error::NotSpacelike(sq));
    }
    Ok((sq.sqrt(), spatial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::FggLinear;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn zero_bias_cache_is_padded_weights() {
        let layer = FggLinear::from_weights(array![[0.5, -2.0], [1.0, 3.0]].view(), array![0.0, 0.0], Activation::default(), Curvature::UNIT).unwrap();
        let c = layer.build_cache().unwrap();
        assert_eq!(c.normals(), array![[0.0, 0.5, -2.0], [0.0, 1.0, 3.0]]);
    }

    #[test]
    fn cache_examples() {
        let layer = FggLinear::from_weights(array![[1.0, 0.0]].view(), array![-1.0], Activation::default(), Curvature::UNIT).unwrap();
        let c = layer.build_cache().unwrap();
        assert_abs_diff_eq!(c.normals()[[0, 0]], 1f64.sinh(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.normals()[[0, 1]], 1f64.cosh(), epsilon = 1e-15);
        assert_eq!(c.normals()[[0, 2]], 0.0);
        let (w, b) = c.invert().unwrap();
        assert_abs_diff_eq!(w[[0, 0]], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[[0, 1]], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b[0], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn invert_zero_time_row() {
        let c = LayerCache::new(array![[0.0, 0.3, 0.4]], Curvature::UNIT, Activation::default()).unwrap();
        let (w, b) = c.invert().unwrap();
        assert_eq!(w, array![[0.3, 0.4]]);
        assert_eq!(b[0], 0.0);
    }

    #[test]
    fn invalid_rows_rejected() {
        let k = Curvature::UNIT;
        let a = Activation::default();
        assert!(matches!(LayerCache::new(array![[1.0, 0.0, 0.0]], k, a), Err(Error::ZeroSpatialPart(0))));
        assert!(matches!(LayerCache::new(array![[1.0, 0.6, 0.8]], k, a), Err(Error::NotSpacelike(_))));
        assert!(matches!(LayerCache::new(array![[2.0, 0.6, 0.8]], k, a), Err(Error::NotSpacelike(_))));
    }

    #[test]
    fn cached_forward_is_bit_identical() {
        let layer = FggLinear::from_weights(array![[0.7, -0.2], [0.1, 1.3], [-0.4, 0.4]].view(), array![0.3, -1.1, 2.0], Activation::default(), Curvature::new(1.7).unwrap()).unwrap();
        let x = crate::lorentz::batch::project_to_hyperboloid(array![[0.1, 0.2], [-1.5, 3.0]].view(), layer.k);
        assert_eq!(layer.forward(x.view()).unwrap(), layer.build_cache().unwrap().forward(x.view()).unwrap());
    }
}
