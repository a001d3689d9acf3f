//! Random points, tangent vectors and parameter matrices.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::lorentz::{self, Curvature, LorentzPoint, TangentVector};

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, std: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

/// Uniformly distributed direction on the unit sphere in `R^dim`.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Array1<f64> {
    loop {
        let v = gaussian_vector(rng, dim, 1.0);
        let n = v.dot(&v).sqrt();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Point at hyperbolic distance exactly `radius` from the origin along `direction`
/// (which must have unit Euclidean norm).
pub fn point_at(direction: &Array1<f64>, radius: f64, k: Curvature) -> LorentzPoint {
    let sk = k.sqrt();
    let spatial = direction * ((sk * radius).sinh() / sk);
    lorentz::project_to_hyperboloid(spatial.view(), k)
}

/// Random point whose distance to the origin is uniform on `[0, max_radius]`.
pub fn random_point<R: Rng + ?Sized>(rng: &mut R, dim: usize, k: Curvature, max_radius: f64) -> LorentzPoint {
    let dir = unit_direction(rng, dim);
    let r = rng.random::<f64>() * max_radius;
    point_at(&dir, r, k)
}

/// Batch of random points, one per row.
pub fn random_batch<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize, k: Curvature, max_radius: f64) -> Array2<f64> {
    let mut out = Array2::zeros((n, dim + 1));
    for mut row in out.rows_mut() {
        row.assign(&random_point(rng, dim, k, max_radius).coords());
    }
    out
}

/// Random tangent vector at `base`: an isotropic Gaussian ambient vector projected
/// onto the tangent space.
pub fn random_tangent<R: Rng + ?Sized>(rng: &mut R, base: &LorentzPoint, std: f64) -> TangentVector {
    let raw = gaussian_vector(rng, base.dim() + 1, std);
    TangentVector::project(raw.view(), base).expect("lengths agree")
}

/// Random tangent vector at `base` with unit Lorentz norm.
pub fn random_unit_tangent<R: Rng + ?Sized>(rng: &mut R, base: &LorentzPoint) -> TangentVector {
    loop {
        let v = random_tangent(rng, base, 1.0);
        let n = v.norm().unwrap_or(0.0);
        if n > 1e-6 {
            return v.scaled(1.0 / n);
        }
    }
}
