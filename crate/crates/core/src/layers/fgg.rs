use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::kernel::{check_input, fill_minkowski_normals, fill_time, finish_fgg_output, products_into};
use super::{Activation, LayerCache, WeightNorm};
use crate::error::{Error, Result};
use crate::hyperplane::HyperplaneParams;
use crate::lorentz::{minkowski_unchecked, Curvature};

/// Lorentz fully connected layer whose spatial outputs are activated signed distances
/// to `D_out` learned hyperplanes.
#[derive(Debug, Clone, PartialEq)]
pub struct FggLinear {
    pub weights: WeightNorm,
    pub bias: Array1<f64>,
    pub activation: Activation,
    pub k: Curvature,
}

/// Reusable buffers for [`FggLinear::forward_into`].
#[derive(Debug, Clone)]
pub struct FggScratch {
    pub(crate) w: Array2<f64>,
    pub(crate) vi: Array2<f64>,
    pub(crate) products: Array2<f64>,
}

impl FggScratch {
    pub fn new(batch: usize, d_in: usize, d_out: usize) -> Self {
        FggScratch {
            w: Array2::zeros((d_out, d_in)),
            vi: Array2::zeros((d_out, d_in + 1)),
            products: Array2::zeros((batch, d_out)),
        }
    }
}

/// Intermediate values of the step-by-step forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposed {
    pub output: Array2<f64>,
    /// `z = asinh(sqrt(k) x∘v) / sqrt(k)`, one column per hyperplane.
    pub pre_activations: Array2<f64>,
    /// Activated pre-activations `a`.
    pub activations: Array2<f64>,
}

impl FggLinear {
    pub fn new(weights: WeightNorm, bias: Array1<f64>, activation: Activation, k: Curvature) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::DimensionMismatch { expected: weights.rows(), found: bias.len() });
        }
        let layer = FggLinear { weights, bias, activation, k };
        layer.validate()?;
        Ok(layer)
    }

    /// Builds a layer from plain weights `W` (`D_out × D_in`) and bias `b`.
    pub fn from_weights(w: ArrayView2<f64>, b: Array1<f64>, activation: Activation, k: Curvature) -> Result<Self> {
        FggLinear::new(WeightNorm::from_weights(w)?, b, activation, k)
    }

    /// Random directions, unit gains, zero bias.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, activation: Activation, k: Curvature) -> Self {
        FggLinear { weights: WeightNorm::init(rng, d_in, d_out), bias: Array1::zeros(d_out), activation, k }
    }

    /// Checks that every effective row is non-degenerate.
    pub fn validate(&self) -> Result<()> {
        self.effective_weights().map(|_| ())
    }

    pub fn d_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn d_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn effective_weights(&self) -> Result<Array2<f64>> {
        let w = self.weights.effective()?;
        for (row, r) in w.rows().into_iter().enumerate() {
            let n = r.dot(&r).sqrt();
            if n.is_nan() || n <= crate::hyperplane::W_MIN {
                return Err(Error::DegenerateWeight { row, norm: n });
            }
        }
        Ok(w)
    }

    pub fn hyperplane(&self, i: usize) -> Result<HyperplaneParams> {
        let w = self.effective_weights()?;
        Ok(HyperplaneParams::new(w.row(i).to_owned(), self.bias[i], self.k))
    }

    /// Transported normals, one per row.
    pub fn normals(&self) -> Result<Array2<f64>> {
        let mut v = self.minkowski_normals()?;
        v.column_mut(0).mapv_inplace(|t| -t);
        Ok(v)
    }

    pub(crate) fn minkowski_normals(&self) -> Result<Array2<f64>> {
        let w = self.effective_weights()?;
        let mut vi = Array2::zeros((self.d_out(), self.d_in() + 1));
        fill_minkowski_normals(w.view(), self.bias.view(), self.k, vi.view_mut())?;
        Ok(vi)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_input(&x, self.d_in())?;
        let mut scratch = FggScratch::new(x.nrows(), self.d_in(), self.d_out());
        let mut out = Array2::zeros((x.nrows(), self.d_out() + 1));
        self.forward_into(x, &mut scratch, &mut out)?;
        Ok(out)
    }

    /// Allocation-free forward pass. Recomputes the normals on every call.
    pub fn forward_into(&self, x: ArrayView2<f64>, scratch: &mut FggScratch, out: &mut Array2<f64>) -> Result<()> {
        check_input(&x, self.d_in())?;
        let norms = self.weights.direction_norms()?;
        for (((mut wr, ar), &n), &g) in scratch
            .w
            .rows_mut()
            .into_iter()
            .zip(self.weights.a.rows())
            .zip(norms.iter())
            .zip(self.weights.g.iter())
        {
            wr.zip_mut_with(&ar, |w, &a| *w = a * (g / n));
        }
        fill_minkowski_normals(scratch.w.view(), self.bias.view(), self.k, scratch.vi.view_mut())?;
        products_into(x, scratch.vi.view(), &mut scratch.products);
        finish_fgg_output(scratch.products.view(), self.activation, self.k, out.view_mut());
        Ok(())
    }

    /// Forward pass through explicit pre-activations and activations.
    pub fn forward_decomposed(&self, x: ArrayView2<f64>) -> Result<Decomposed> {
        check_input(&x, self.d_in())?;
        let sk = self.k.sqrt();
        let v = self.normals()?;
        let mut pre = Array2::zeros((x.nrows(), self.d_out()));
        for (mut zr, xr) in pre.rows_mut().into_iter().zip(x.rows()) {
            for (z, vr) in zr.iter_mut().zip(v.rows()) {
                *z = (sk * minkowski_unchecked(xr, vr)).asinh() / sk;
            }
        }
        let activations = pre.mapv(|z| self.activation.apply(self.k, z));
        let mut output = Array2::zeros((x.nrows(), self.d_out() + 1));
        output.slice_mut(s![.., 1..]).assign(&activations.mapv(|a| (sk * a).sinh() / sk));
        fill_time(self.k, output.view_mut());
        Ok(Decomposed { output, pre_activations: pre, activations })
    }

    /// Precomputes the transported normals for inference.
    pub fn build_cache(&self) -> Result<LayerCache> {
        Ok(LayerCache::from_minkowski_normals(self.minkowski_normals()?, self.k, self.activation))
    }

    /// Mean hyperbolic norm of a batch of outputs; convenience for diagnostics.
    pub fn mean_output_norm(&self, x: ArrayView2<f64>) -> Result<f64> {
        let y = self.forward(x)?;
        let norms = crate::lorentz::batch::hyperbolic_norm(y.view(), self.k);
        Ok(norms.mean_axis(Axis(0)).map(|m| m.into_scalar()).unwrap_or(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperplane::TransportedNormal;
    use crate::layers::ActivationBase;
    use crate::lorentz::{batch, LorentzPoint};
    use crate::sampling::random_batch;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_layer() -> FggLinear {
        FggLinear::from_weights(
            array![[1.0, 0.0], [0.0, 1.0]].view(),
            array![0.0, 0.0],
            Activation::identity(),
            Curvature::UNIT,
        )
        .unwrap()
    }

    #[test]
    fn identity_configuration() {
        let layer = identity_layer();
        let o = array![[1.0, 0.0, 0.0]];
        assert_eq!(layer.forward(o.view()).unwrap(), o);
        let c = 1f64;
        let x = array![[c.cosh(), c.sinh(), 0.0]];
        for y in [layer.forward(x.view()).unwrap(), layer.forward_decomposed(x.view()).unwrap().output] {
            for (a, b) in y.iter().zip(x.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            }
        }
        assert_eq!(layer.forward_decomposed(o.view()).unwrap().output, o);
    }

    #[test]
    fn dimension_mismatch() {
        let layer = identity_layer();
        assert!(matches!(
            layer.forward(array![[1.0, 0.0]].view()),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn degenerate_row_rejected() {
        let r = FggLinear::from_weights(array![[1.0, 0.0], [0.0, 0.0]].view(), array![0.0, 0.0], Activation::identity(), Curvature::UNIT);
        assert!(matches!(r, Err(Error::DegenerateWeight { row: 1, .. })));
    }

    #[test]
    fn decomposed_agrees_and_reads_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..50 {
            let k = Curvature::new(0.25 + 0.1 * trial as f64).unwrap();
            let base = [ActivationBase::Relu, ActivationBase::Tanh, ActivationBase::Identity][trial % 3];
            let mut layer = FggLinear::init(&mut rng, 3, 4, Activation::lorentzian(base), k);
            layer.bias = crate::sampling::gaussian_vector(&mut rng, 4, 1.0);
            let x = random_batch(&mut rng, 8, 3, k, 2.0);
            let fast = layer.forward(x.view()).unwrap();
            let dec = layer.forward_decomposed(x.view()).unwrap();
            for (a, b) in fast.iter().zip(dec.output.iter()) {
                assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
            assert!(batch::max_manifold_residual(fast.view(), k) < 1e-9);
            for (yr, ar) in dec.output.rows().into_iter().zip(dec.activations.rows()) {
                let y = LorentzPoint::new_unchecked(yr.to_owned(), k);
                for (i, &a) in ar.iter().enumerate() {
                    let mut e = Array1::zeros(5);
                    e[i + 1] = 1.0;
                    let axis = TransportedNormal::new(e, k).unwrap();
                    assert_abs_diff_eq!(axis.signed_distance(&y).unwrap(), a, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn plain_mode_decomposed_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = Curvature::new(2.0).unwrap();
        let layer = FggLinear::init(&mut rng, 2, 3, Activation::plain(ActivationBase::Tanh), k);
        let x = random_batch(&mut rng, 6, 2, k, 1.5);
        let fast = layer.forward(x.view()).unwrap();
        let dec = layer.forward_decomposed(x.view()).unwrap();
        for (a, b) in fast.iter().zip(dec.output.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}
