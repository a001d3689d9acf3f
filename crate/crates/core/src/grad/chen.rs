use ndarray::{s, Array2, ArrayView2, Axis};

use super::{check_finite, spatial_upstream, Trainable};
use crate::error::{Error, Result};
use crate::layers::kernel::fill_time;
use crate::layers::{ActivationBase, ChenLinear, MeanOnlyBatchNorm};

#[derive(Debug, Clone, PartialEq)]
pub struct ChenGradient {
    pub d_w: Array2<f64>,
}

#[derive(Debug, Clone)]
struct Tape {
    x: Array2<f64>,
    /// Spatial values entering the activation.
    u: Array2<f64>,
    bn_training: bool,
    y: Array2<f64>,
}

/// A baseline layer with optional centering of `W x` and a plain scalar activation,
/// `ȳ = h(BN(W x))`. With neither it is exactly [`ChenLinear`].
#[derive(Debug, Clone)]
pub struct TrainableChen {
    pub layer: ChenLinear,
    pub bn: Option<MeanOnlyBatchNorm>,
    pub activation: ActivationBase,
    tape: Option<Tape>,
}

impl TrainableChen {
    pub fn new(layer: ChenLinear, batch_norm: bool, activation: ActivationBase) -> Self {
        let bn = batch_norm.then(|| MeanOnlyBatchNorm::new(layer.d_out()));
        TrainableChen { layer, bn, activation, tape: None }
    }

    fn linear(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        crate::layers::kernel::check_input(&x, self.layer.d_in())?;
        Ok(x.dot(&self.layer.w.t()))
    }

    fn assemble(&self, u: &Array2<f64>) -> Array2<f64> {
        let mut y = Array2::zeros((u.nrows(), u.ncols() + 1));
        let h = self.activation;
        y.slice_mut(s![.., 1..]).assign(&u.mapv(|v| h.apply(v)));
        fill_time(self.layer.k, y.view_mut());
        y
    }

    /// Output of the block with normalization skipped.
    pub fn forward_uncentered(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.assemble(&self.linear(x)?))
    }

    pub fn backward_params(&self, upstream: ArrayView2<f64>) -> Result<(ChenGradient, Array2<f64>)> {
        let tape = self.tape.as_ref().ok_or(Error::MissingForward)?;
        if upstream.dim() != tape.y.dim() {
            return Err(Error::DimensionMismatch { expected: tape.y.ncols(), found: upstream.ncols() });
        }
        let mut du = spatial_upstream(tape.y.view(), upstream);
        let h = self.activation;
        du.zip_mut_with(&tape.u, |d, &u| *d *= h.derivative(u));
        if self.bn.is_some() && tape.bn_training {
            let mean = du.mean_axis(Axis(0)).ok_or(Error::EmptyBatch)?;
            du -= &mean;
        }
        let d_w = du.t().dot(&tape.x);
        let dx = du.dot(&self.layer.w);
        check_finite(d_w.as_slice().expect("standard layout"))?;
        Ok((ChenGradient { d_w }, dx))
    }
}

impl Trainable for TrainableChen {
    fn num_params(&self) -> usize {
        self.layer.w.len()
    }

    /// `W` in row-major order.
    fn params(&self) -> Vec<f64> {
        self.layer.w.iter().copied().collect()
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch { expected: self.num_params(), found: flat.len() });
        }
        self.layer.w = Array2::from_shape_vec(self.layer.w.dim(), flat.to_vec()).expect("length checked");
        self.tape = None;
        Ok(())
    }

    fn forward(&mut self, x: ArrayView2<f64>, training: bool) -> Result<Array2<f64>> {
        let mut u = self.linear(x)?;
        if let Some(bn) = self.bn.as_mut() {
            u = bn.forward(u.view(), training)?;
        }
        let y = self.assemble(&u);
        self.tape = Some(Tape { x: x.to_owned(), u, bn_training: training, y: y.clone() });
        Ok(y)
    }

    fn infer(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut u = self.linear(x)?;
        if let Some(bn) = &self.bn {
            u = bn.infer(u.view());
        }
        Ok(self.assemble(&u))
    }

    fn backward(&self, upstream: ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        let (g, dx) = self.backward_params(upstream)?;
        Ok((g.d_w.iter().copied().collect(), dx))
    }
}
