//! Geodesic hyperplanes parametrized Euclidean-style by a weight vector `w` and bias `b`.
//!
//! The reference point `p = Exp_o(-(b/‖w‖) w/‖w‖)` anchors the hyperplane and the
//! normal `v = Γ_{o→p}(w)` orients it. The hyperplane is then the ambient linear
//! constraint `{ z : z∘v = 0 }`.

use ndarray::{s, Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::lorentz::{minkowski_unchecked, Curvature, LorentzPoint};

/// Weight norms at or below this are rejected.
pub const W_MIN: f64 = 1e-12;
/// Squared Lorentz norms down to `-SPACELIKE_SLACK` are clamped to zero.
pub const SPACELIKE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneParams {
    pub w: Array1<f64>,
    pub b: f64,
    pub k: Curvature,
}

impl HyperplaneParams {
    pub fn new(w: Array1<f64>, b: f64, k: Curvature) -> Self {
        HyperplaneParams { w, b, k }
    }

    pub fn weight_norm(&self) -> f64 {
        self.w.dot(&self.w).sqrt()
    }

    fn checked_norm(&self) -> Result<f64> {
        let n = self.weight_norm();
        if n > W_MIN && n.is_finite() {
            Ok(n)
        } else {
            Err(Error::DegenerateWeight { row: 0, norm: n })
        }
    }

    /// Signed rapidity `θ = -sqrt(k) b / ‖w‖` of the reference point along `w`.
    fn rapidity(&self, norm: f64) -> f64 {
        -self.k.sqrt() * self.b / norm
    }

    pub fn reference_point(&self) -> Result<LorentzPoint> {
        let n = self.checked_norm()?;
        let theta = self.rapidity(n);
        let sk = self.k.sqrt();
        let mut coords = Array1::zeros(self.w.len() + 1);
        coords[0] = theta.cosh() / sk;
        coords.slice_mut(s![1..]).assign(&(&self.w * (theta.sinh() / (sk * n))));
        Ok(LorentzPoint::new_unchecked(coords, self.k))
    }

    pub fn transported_normal(&self) -> Result<TransportedNormal> {
        let n = self.checked_norm()?;
        let theta = self.rapidity(n);
        let mut v = Array1::zeros(self.w.len() + 1);
        v[0] = n * theta.sinh();
        v.slice_mut(s![1..]).assign(&(&self.w * theta.cosh()));
        Ok(TransportedNormal { v, k: self.k })
    }

    /// Scaled signed distance `(‖w‖/sqrt(k)) asinh(sqrt(k) (x∘v) / ‖v‖_L)`.
    pub fn scaled_distance_d1(&self, x: &LorentzPoint) -> Result<f64> {
        let normal = self.transported_normal()?;
        let sk = self.k.sqrt();
        let xv = normal.residual(x)?;
        let vn = normal.lorentz_norm()?;
        Ok(self.weight_norm() / sk * (sk * xv / vn).asinh())
    }

    /// Layer pre-activation `asinh(sqrt(k) (x∘v)) / sqrt(k)`.
    pub fn pre_activation_d2(&self, x: &LorentzPoint) -> Result<f64> {
        let normal = self.transported_normal()?;
        let sk = self.k.sqrt();
        Ok((sk * normal.residual(x)?).asinh() / sk)
    }
}

/// The weight vector transported to the reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportedNormal {
    v: Array1<f64>,
    k: Curvature,
}

impl TransportedNormal {
    /// Wraps an ambient normal; it must be spacelike.
    pub fn new(v: Array1<f64>, k: Curvature) -> Result<Self> {
        let n = TransportedNormal { v, k };
        n.lorentz_norm()?;
        Ok(n)
    }

    pub fn ambient(&self) -> ArrayView1<'_, f64> {
        self.v.view()
    }

    pub fn into_ambient(self) -> Array1<f64> {
        self.v
    }

    pub fn curvature(&self) -> Curvature {
        self.k
    }

    /// `sqrt(v∘v)`, requiring the normal to be spacelike.
    pub fn lorentz_norm(&self) -> Result<f64> {
        let sq = minkowski_unchecked(self.v.view(), self.v.view());
        if sq < -SPACELIKE_SLACK {
            return Err(Error::NotSpacelike(sq));
        }
        let n = sq.max(0.0).sqrt();
        if n > 0.0 {
            Ok(n)
        } else {
            Err(Error::NotSpacelike(sq))
        }
    }

    /// `x∘v`; zero exactly on the hyperplane.
    pub fn residual(&self, x: &LorentzPoint) -> Result<f64> {
        if x.coords().len() != self.v.len() {
            return Err(Error::DimensionMismatch { expected: self.v.len(), found: x.coords().len() });
        }
        Ok(minkowski_unchecked(x.coords(), self.v.view()))
    }

    pub fn distance(&self, x: &LorentzPoint) -> Result<f64> {
        Ok(self.signed_distance(x)?.abs())
    }

    pub fn signed_distance(&self, x: &LorentzPoint) -> Result<f64> {
        let sk = self.k.sqrt();
        let xv = self.residual(x)?;
        Ok((sk * xv / self.lorentz_norm()?).asinh() / sk)
    }
}

/// `x∘v`.
pub fn hyperplane_residual(x: &LorentzPoint, n: &TransportedNormal) -> Result<f64> {
    n.residual(x)
}

/// Unsigned distance `asinh(sqrt(k) |x∘v| / ‖v‖_L) / sqrt(k)`.
pub fn distance_to_hyperplane(x: &LorentzPoint, n: &TransportedNormal) -> Result<f64> {
    n.distance(x)
}

pub fn signed_distance(x: &LorentzPoint, n: &TransportedNormal) -> Result<f64> {
    n.signed_distance(x)
}
