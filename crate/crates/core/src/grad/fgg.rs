use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::{check_finite, spatial_upstream, Trainable};
use crate::error::{Error, Result};
use crate::layers::kernel::{fill_time, products_into};
use crate::layers::{ActivationMode, FggLinear, MeanOnlyBatchNorm};

/// Gradient with respect to the weight-normalized parameters of an FGG layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub d_g: Array1<f64>,
    pub d_a: Array2<f64>,
    pub d_b: Array1<f64>,
}

impl ParamGradient {
    /// Flat layout `[g, a (row-major), b]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.d_g.iter().chain(self.d_a.iter()).chain(self.d_b.iter()).copied().collect()
    }

    pub fn from_flat(flat: &[f64], d_in: usize, d_out: usize) -> Result<Self> {
        let n = d_out * (d_in + 2);
        if flat.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: flat.len() });
        }
        let d_g = Array1::from(flat[..d_out].to_vec());
        let d_a = Array2::from_shape_vec((d_out, d_in), flat[d_out..d_out + d_out * d_in].to_vec())
            .expect("length checked");
        let d_b = Array1::from(flat[d_out + d_out * d_in..].to_vec());
        Ok(ParamGradient { d_g, d_a, d_b })
    }
}

#[derive(Debug, Clone)]
struct Tape {
    x: Array2<f64>,
    /// Minkowski products `x∘v`.
    s: Array2<f64>,
    /// Centered pre-activations (only when normalizing).
    z_centered: Option<Array2<f64>>,
    bn_training: bool,
    y: Array2<f64>,
}

/// An FGG layer with optional mean-only batch normalization of its pre-activations.
///
/// Without normalization the spatial outputs are `h(x∘v)` in Lorentzian mode. With
/// normalization the pre-activations `z = asinh(sqrt(k) x∘v)/sqrt(k)` are centered
/// before the activation.
#[derive(Debug, Clone)]
pub struct TrainableFgg {
    pub layer: FggLinear,
    pub bn: Option<MeanOnlyBatchNorm>,
    tape: Option<Tape>,
}

impl TrainableFgg {
    pub fn new(layer: FggLinear, batch_norm: bool) -> Self {
        let bn = batch_norm.then(|| MeanOnlyBatchNorm::new(layer.d_out()));
        TrainableFgg { layer, bn, tape: None }
    }

    fn products(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        crate::layers::kernel::check_input(&x, self.layer.d_in())?;
        let vi = self.layer.minkowski_normals()?;
        let mut s = Array2::zeros((x.nrows(), self.layer.d_out()));
        products_into(x, vi.view(), &mut s);
        Ok((vi, s))
    }

    fn pre_activations(&self, s: &Array2<f64>) -> Array2<f64> {
        let sk = self.layer.k.sqrt();
        s.mapv(|v| (sk * v).asinh() / sk)
    }

    /// Spatial output from centered pre-activations.
    fn spatial_from_centered(&self, zc: &Array2<f64>) -> Array2<f64> {
        let sk = self.layer.k.sqrt();
        let act = self.layer.activation;
        zc.mapv(|z| match act.mode {
            ActivationMode::Lorentzian => act.base.apply((sk * z).sinh() / sk),
            ActivationMode::Plain => (sk * act.base.apply(z)).sinh() / sk,
        })
    }

    fn assemble(&self, spatial: Array2<f64>) -> Array2<f64> {
        let mut y = Array2::zeros((spatial.nrows(), spatial.ncols() + 1));
        y.slice_mut(s![.., 1..]).assign(&spatial);
        fill_time(self.layer.k, y.view_mut());
        y
    }

    fn run(&mut self, x: ArrayView2<f64>, training: bool, record: bool) -> Result<Array2<f64>> {
        let (_, s) = self.products(x)?;
        let (y, zc) = match self.bn.as_mut() {
            None => {
                let act = self.layer.activation;
                let k = self.layer.k;
                (self.assemble(s.mapv(|v| act.spatial_from_product(k, v))), None)
            }
            Some(_) => {
                let z = self.pre_activations(&s);
                let zc = self.bn.as_mut().expect("present").forward(z.view(), training)?;
                (self.assemble(self.spatial_from_centered(&zc)), Some(zc))
            }
        };
        if record {
            self.tape = Some(Tape { x: x.to_owned(), s, z_centered: zc, bn_training: training, y: y.clone() });
        }
        Ok(y)
    }

    /// Output without normalization regardless of `bn`; used for stage-wise profiles.
    pub fn forward_uncentered(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (_, s) = self.products(x)?;
        let z = self.pre_activations(&s);
        Ok(self.assemble(self.spatial_from_centered(&z)))
    }

    /// Full gradient with respect to `(g, a, b)` and the input.
    pub fn backward_params(&self, upstream: ArrayView2<f64>) -> Result<(ParamGradient, Array2<f64>)> {
        let tape = self.tape.as_ref().ok_or(Error::MissingForward)?;
        if upstream.dim() != tape.y.dim() {
            return Err(Error::DimensionMismatch { expected: tape.y.ncols(), found: upstream.ncols() });
        }
        let layer = &self.layer;
        let k = layer.k;
        let sk = k.sqrt();
        let act = layer.activation;
        let dy = spatial_upstream(tape.y.view(), upstream);

        let ds = match &tape.z_centered {
            None => {
                let mut ds = dy;
                ds.zip_mut_with(&tape.s, |d, &s| *d *= act_slope_fast(act, k, s));
                ds
            }
            Some(zc) => {
                let mut dzc = dy;
                dzc.zip_mut_with(zc, |d, &z| {
                    *d *= match act.mode {
                        ActivationMode::Lorentzian => {
                            act.base.derivative((sk * z).sinh() / sk) * (sk * z).cosh()
                        }
                        ActivationMode::Plain => {
                            let h = act.base.apply(z);
                            (sk * h).cosh() * act.base.derivative(z)
                        }
                    }
                });
                let mut dz = if tape.bn_training {
                    let mean = dzc.mean_axis(Axis(0)).ok_or(Error::EmptyBatch)?;
                    &dzc - &mean
                } else {
                    dzc
                };
                dz.zip_mut_with(&tape.s, |d, &s| *d /= (1.0 + k.value() * s * s).sqrt());
                dz
            }
        };

        let vi = layer.minkowski_normals()?;
        let dx = ds.dot(&vi);
        let dvi = ds.t().dot(&tape.x);

        let w = layer.effective_weights()?;
        let a_norms = layer.weights.direction_norms()?;
        let (d_out, d_in) = (layer.d_out(), layer.d_in());
        let mut d_g = Array1::zeros(d_out);
        let mut d_a = Array2::zeros((d_out, d_in));
        let mut d_b = Array1::zeros(d_out);
        for i in 0..d_out {
            let wr = w.row(i);
            let n = wr.dot(&wr).sqrt();
            let theta = -sk * layer.bias[i] / n;
            let (sh, ch) = (theta.sinh(), theta.cosh());
            let dv0 = -dvi[[i, 0]];
            let dvbar = dvi.slice(s![i, 1..]);
            let w_dot = wr.dot(&dvbar);
            d_b[i] = -sk * ch * dv0 - sk * sh / n * w_dot;
            let dw = &wr * (dv0 * (sh - theta * ch) / n - theta * sh / (n * n) * w_dot) + &dvbar * ch;
            let ar = layer.weights.a.row(i);
            let an = a_norms[i];
            let ahat = &ar / an;
            let proj = dw.dot(&ahat);
            d_g[i] = proj;
            d_a.row_mut(i).assign(&((&dw - &(&ahat * proj)) * (layer.weights.g[i] / an)));
        }
        let grad = ParamGradient { d_g, d_a, d_b };
        check_finite(&grad.to_flat())?;
        Ok((grad, dx))
    }
}

/// `dȳ/ds` on the unnormalized path.
fn act_slope_fast(act: crate::layers::Activation, k: crate::lorentz::Curvature, s: f64) -> f64 {
    match act.mode {
        ActivationMode::Lorentzian => act.base.derivative(s),
        ActivationMode::Plain => {
            let sk = k.sqrt();
            let z = (sk * s).asinh() / sk;
            let h = act.base.apply(z);
            (sk * h).cosh() * act.base.derivative(z) / (1.0 + k.value() * s * s).sqrt()
        }
    }
}

impl Trainable for TrainableFgg {
    fn num_params(&self) -> usize {
        self.layer.d_out() * (self.layer.d_in() + 2)
    }

    /// `[g, a (row-major), b]`.
    fn params(&self) -> Vec<f64> {
        let w = &self.layer.weights;
        w.g.iter().chain(w.a.iter()).chain(self.layer.bias.iter()).copied().collect()
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let p = ParamGradient::from_flat(flat, self.layer.d_in(), self.layer.d_out())?;
        self.layer.weights.g = p.d_g;
        self.layer.weights.a = p.d_a;
        self.layer.bias = p.d_b;
        self.tape = None;
        Ok(())
    }

    fn forward(&mut self, x: ArrayView2<f64>, training: bool) -> Result<Array2<f64>> {
        self.run(x, training, true)
    }

    fn infer(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match &self.bn {
            None => self.layer.forward(x),
            Some(bn) => {
                let (_, s) = self.products(x)?;
                let zc = bn.infer(self.pre_activations(&s).view());
                Ok(self.assemble(self.spatial_from_centered(&zc)))
            }
        }
    }

    fn backward(&self, upstream: ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        let (g, dx) = self.backward_params(upstream)?;
        Ok((g.to_flat(), dx))
    }
}
