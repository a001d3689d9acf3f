//! Allocation-free building blocks shared by the cached and uncached forward paths.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut2};

use super::Activation;
use crate::error::{Error, Result};
use crate::hyperplane::W_MIN;
use crate::lorentz::Curvature;

/// Writes the transported normals with their time column negated (`V I`) into `out`,
/// so that `x∘v⁽ⁱ⁾` is the plain dot product of `x` with row `i`.
pub(crate) fn fill_minkowski_normals(
    w: ArrayView2<f64>,
    b: ArrayView1<f64>,
    k: Curvature,
    mut out: ArrayViewMut2<f64>,
) -> Result<()> {
    let sk = k.sqrt();
    for (i, (wr, mut vr)) in w.rows().into_iter().zip(out.rows_mut()).enumerate() {
        let n = wr.dot(&wr).sqrt();
        if !(n > W_MIN && n.is_finite()) {
            return Err(Error::DegenerateWeight { row: i, norm: n });
        }
        let theta = -sk * b[i] / n;
        vr[0] = -n * theta.sinh();
        let c = theta.cosh();
        for (dst, &src) in vr.iter_mut().skip(1).zip(wr.iter()) {
            *dst = c * src;
        }
    }
    Ok(())
}

/// `products = x · vi^T`.
#[inline]
pub(crate) fn products_into(x: ArrayView2<f64>, vi: ArrayView2<f64>, products: &mut Array2<f64>) {
    general_mat_mul(1.0, &x, &vi.t(), 0.0, products);
}

/// Maps Minkowski products to spatial outputs and fills in the time column.
pub(crate) fn finish_fgg_output(
    products: ArrayView2<f64>,
    activation: Activation,
    k: Curvature,
    mut out: ArrayViewMut2<f64>,
) {
    let inv_k = 1.0 / k.value();
    for (pr, mut or) in products.rows().into_iter().zip(out.rows_mut()) {
        let mut sq = 0.0;
        for (dst, &s) in or.iter_mut().skip(1).zip(pr.iter()) {
            let y = activation.spatial_from_product(k, s);
            *dst = y;
            sq += y * y;
        }
        or[0] = (inv_k + sq).sqrt();
    }
}

/// Fills the time column of `out` from its spatial columns.
pub(crate) fn fill_time(k: Curvature, mut out: ArrayViewMut2<f64>) {
    let inv_k = 1.0 / k.value();
    for mut row in out.rows_mut() {
        let sq: f64 = row.slice(s![1..]).iter().map(|v| v * v).sum();
        row[0] = (inv_k + sq).sqrt();
    }
}

pub(crate) fn check_input(x: &ArrayView2<f64>, d_in: usize) -> Result<()> {
    if x.ncols() != d_in + 1 {
        return Err(Error::DimensionMismatch { expected: d_in + 1, found: x.ncols() });
    }
    Ok(())
}
