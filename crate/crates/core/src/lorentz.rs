//! Closed-form operations on the hyperboloid
//! `L^D_k = { z : z∘z = -1/k, z_0 > 0 }` with Minkowski product
//! `x∘y = -x_0 y_0 + <x̄, ȳ>`.

use ndarray::{s, Array1, ArrayView1};

use crate::error::{Error, Result};

/// Hyperboloid constraint tolerance, `|k (z∘z) + 1|`.
pub const TOL_MANIFOLD: f64 = 1e-9;
/// Tangency tolerance, `|base∘v|`.
pub const TOL_TANGENT: f64 = 1e-9;
/// Below this value of `sqrt(k)‖v‖` the exponential map uses its first-order series.
pub const SERIES_SWITCH: f64 = 1e-6;

/// Curvature magnitude `k > 0`; the space has sectional curvature `-k`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Curvature(f64);

impl Curvature {
    pub const UNIT: Curvature = Curvature(1.0);

    pub fn new(k: f64) -> Result<Self> {
        if k.is_finite() && k > 0.0 {
            Ok(Curvature(k))
        } else {
            Err(Error::InvalidCurvature(k))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn sqrt(self) -> f64 {
        self.0.sqrt()
    }

    fn ensure_same(self, other: Curvature) -> Result<()> {
        if self.0 == other.0 {
            Ok(())
        } else {
            Err(Error::CurvatureMismatch(self.0, other.0))
        }
    }
}

impl Default for Curvature {
    fn default() -> Self {
        Curvature::UNIT
    }
}

fn ensure_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn ensure_finite(x: ArrayView1<f64>) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// `x∘y = -x_0 y_0 + <x̄, ȳ>`.
pub fn minkowski_inner(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    ensure_len(x.len(), y.len())?;
    Ok(minkowski_unchecked(x, y))
}

#[inline]
pub(crate) fn minkowski_unchecked(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let mut acc = -x[0] * y[0];
    for i in 1..x.len() {
        acc += x[i] * y[i];
    }
    acc
}

/// Lorentz pseudonorm `sqrt(v∘v)` of a spacelike (or null) vector.
///
/// Squared norms down to `-tol` are clamped to zero; anything more negative is
/// reported as timelike.
pub fn spacelike_norm(v: ArrayView1<f64>, tol: f64) -> Result<f64> {
    let sq = minkowski_unchecked(v, v);
    if sq < -tol {
        return Err(Error::Timelike(sq));
    }
    Ok(sq.max(0.0).sqrt())
}

/// A point on the upper sheet of the hyperboloid.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzPoint {
    coords: Array1<f64>,
    k: Curvature,
}

impl LorentzPoint {
    /// Validates the hyperboloid constraint.
    ///
    /// The residual `|k (z∘z) + 1|` is compared against
    /// `TOL_MANIFOLD * max(1, k z_0^2)`: for far-out points the constraint can only
    /// hold up to the rounding of the squared coordinates.
    pub fn new(coords: Array1<f64>, k: Curvature) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: coords.len() });
        }
        ensure_finite(coords.view())?;
        if coords[0] <= 0.0 {
            return Err(Error::LowerSheet(coords[0]));
        }
        let residual = manifold_residual(coords.view(), k);
        let scale = (k.value() * coords[0] * coords[0]).max(1.0);
        if residual > TOL_MANIFOLD * scale {
            return Err(Error::OffManifold(residual));
        }
        Ok(LorentzPoint { coords, k })
    }

    /// Wraps coordinates without checking the constraint.
    pub fn new_unchecked(coords: Array1<f64>, k: Curvature) -> Self {
        LorentzPoint { coords, k }
    }

    /// Lifts a spatial vector onto the hyperboloid by solving for the time component.
    pub fn from_spatial(spatial: ArrayView1<f64>, k: Curvature) -> Self {
        project_to_hyperboloid(spatial, k)
    }

    pub fn origin(dim: usize, k: Curvature) -> Self {
        origin(dim, k)
    }

    /// Intrinsic dimension `D` (ambient length is `D + 1`).
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn curvature(&self) -> Curvature {
        self.k
    }

    pub fn time(&self) -> f64 {
        self.coords[0]
    }

    pub fn spatial(&self) -> ArrayView1<'_, f64> {
        self.coords.slice(s![1..])
    }

    pub fn coords(&self) -> ArrayView1<'_, f64> {
        self.coords.view()
    }

    pub fn into_coords(self) -> Array1<f64> {
        self.coords
    }

    pub fn inner(&self, other: &LorentzPoint) -> Result<f64> {
        minkowski_inner(self.coords.view(), other.coords.view())
    }

    pub fn distance(&self, other: &LorentzPoint) -> Result<f64> {
        distance(self, other)
    }

    pub fn hyperbolic_norm(&self) -> f64 {
        hyperbolic_norm(self)
    }
}

/// `|k (z∘z) + 1|`.
pub fn manifold_residual(z: ArrayView1<f64>, k: Curvature) -> f64 {
    (k.value() * minkowski_unchecked(z, z) + 1.0).abs()
}

/// An ambient vector Minkowski-orthogonal to its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    ambient: Array1<f64>,
    base: LorentzPoint,
}

impl TangentVector {
    pub fn new(ambient: Array1<f64>, base: &LorentzPoint) -> Result<Self> {
        ensure_len(base.coords.len(), ambient.len())?;
        ensure_finite(ambient.view())?;
        let residual = minkowski_unchecked(base.coords.view(), ambient.view()).abs();
        // same relative scaling as the manifold check: |z∘v| <= ‖z‖‖v‖
        let scale = (base.coords[0] * ambient.iter().fold(0.0f64, |m, v| m.max(v.abs()))).max(1.0);
        if residual > TOL_TANGENT * scale {
            return Err(Error::NotTangent(residual));
        }
        Ok(TangentVector { ambient, base: base.clone() })
    }

    /// Projects an arbitrary ambient vector onto the tangent space at `base`:
    /// `u + k (base∘u) base`.
    pub fn project(ambient: ArrayView1<f64>, base: &LorentzPoint) -> Result<Self> {
        ensure_len(base.coords.len(), ambient.len())?;
        let k = base.k.value();
        let c = k * minkowski_unchecked(base.coords.view(), ambient);
        let v = &ambient + &(&base.coords * c);
        Ok(TangentVector { ambient: v, base: base.clone() })
    }

    pub fn zero(base: &LorentzPoint) -> Self {
        TangentVector { ambient: Array1::zeros(base.coords.len()), base: base.clone() }
    }

    pub fn ambient(&self) -> ArrayView1<'_, f64> {
        self.ambient.view()
    }

    pub fn into_ambient(self) -> Array1<f64> {
        self.ambient
    }

    pub fn base(&self) -> &LorentzPoint {
        &self.base
    }

    /// `sqrt(v∘v)`; errors when the squared norm is below `-TOL_TANGENT`.
    pub fn norm(&self) -> Result<f64> {
        spacelike_norm(self.ambient.view(), TOL_TANGENT)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TangentVector { ambient: &self.ambient * factor, base: self.base.clone() }
    }

    pub fn inner(&self, other: &TangentVector) -> Result<f64> {
        minkowski_inner(self.ambient.view(), other.ambient.view())
    }
}

/// `o = (1/sqrt(k), 0, ..., 0)`.
pub fn origin(dim: usize, k: Curvature) -> LorentzPoint {
    let mut coords = Array1::zeros(dim + 1);
    coords[0] = 1.0 / k.sqrt();
    LorentzPoint { coords, k }
}

/// Geodesic distance `arccosh(-k (x∘y)) / sqrt(k)` with the argument clamped to `>= 1`.
pub fn distance(x: &LorentzPoint, y: &LorentzPoint) -> Result<f64> {
    x.k.ensure_same(y.k)?;
    let inner = minkowski_inner(x.coords.view(), y.coords.view())?;
    Ok(arccosh_clamped(-x.k.value() * inner) / x.k.sqrt())
}

#[inline]
pub(crate) fn arccosh_clamped(arg: f64) -> f64 {
    arg.max(1.0).acosh()
}

/// Distance to the origin, `arccosh(sqrt(k) z_0) / sqrt(k)`.
pub fn hyperbolic_norm(z: &LorentzPoint) -> f64 {
    hyperbolic_norm_of_time(z.coords[0], z.k)
}

#[inline]
pub fn hyperbolic_norm_of_time(time: f64, k: Curvature) -> f64 {
    arccosh_clamped(k.sqrt() * time) / k.sqrt()
}

/// Exponential map at `base`.
///
/// Uses `base + v` once `sqrt(k)‖v‖` drops below [`SERIES_SWITCH`]; the result is
/// re-projected onto the hyperboloid by recomputing the time component.
pub fn exp_map(base: &LorentzPoint, v: &TangentVector) -> Result<LorentzPoint> {
    base.k.ensure_same(v.base.k)?;
    ensure_len(base.coords.len(), v.ambient.len())?;
    let sk = base.k.sqrt();
    let norm = v.norm()?;
    let theta = sk * norm;
    let raw = if theta < SERIES_SWITCH {
        &base.coords + &v.ambient
    } else {
        &base.coords * theta.cosh() + &v.ambient * (theta.sinh() / theta)
    };
    Ok(project_to_hyperboloid(raw.slice(s![1..]), base.k))
}

/// Logarithmic map: the tangent vector at `base` pointing at `y` with length `d(base, y)`.
pub fn log_map(base: &LorentzPoint, y: &LorentzPoint) -> Result<TangentVector> {
    base.k.ensure_same(y.k)?;
    ensure_len(base.coords.len(), y.coords.len())?;
    let k = base.k.value();
    let sk = base.k.sqrt();
    let d = distance(base, y)?;
    let inner = minkowski_unchecked(base.coords.view(), y.coords.view());
    let direction = &y.coords + &(&base.coords * (k * inner));
    let t = sk * d;
    // `direction` has Lorentz norm sinh(t)/sqrt(k); rescale it to length d.
    let coef = if t < SERIES_SWITCH { 1.0 - t * t / 6.0 } else { t / t.sinh() };
    Ok(TangentVector { ambient: direction * coef, base: base.clone() })
}

/// Parallel transport along the geodesic from `x` to `y`:
/// `v + k (y∘v) / (1 - k (x∘y)) (x + y)`.
pub fn parallel_transport(x: &LorentzPoint, y: &LorentzPoint, v: &TangentVector) -> Result<TangentVector> {
    x.k.ensure_same(y.k)?;
    ensure_len(x.coords.len(), y.coords.len())?;
    ensure_len(x.coords.len(), v.ambient.len())?;
    let k = x.k.value();
    let yv = minkowski_unchecked(y.coords.view(), v.ambient.view());
    let xy = minkowski_unchecked(x.coords.view(), y.coords.view());
    let coef = k * yv / (1.0 - k * xy);
    let sum = &x.coords + &y.coords;
    Ok(TangentVector { ambient: &v.ambient + &(sum * coef), base: y.clone() })
}

/// Lifts `ȳ` to `(sqrt(1/k + ‖ȳ‖²), ȳ)`.
pub fn project_to_hyperboloid(spatial: ArrayView1<f64>, k: Curvature) -> LorentzPoint {
    let mut coords = Array1::zeros(spatial.len() + 1);
    coords[0] = time_from_spatial(spatial, k);
    coords.slice_mut(s![1..]).assign(&spatial);
    LorentzPoint { coords, k }
}

#[inline]
pub fn time_from_spatial(spatial: ArrayView1<f64>, k: Curvature) -> f64 {
    (1.0 / k.value() + spatial.dot(&spatial)).sqrt()
}

/// Row-wise versions of the point operations, one point per row.
pub mod batch {
    use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};

    use super::{arccosh_clamped, minkowski_unchecked, Curvature};
    use crate::error::{Error, Result};

    fn ensure_shape(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<()> {
        if a.dim() != b.dim() {
            let (ra, ca) = a.dim();
            let (rb, cb) = b.dim();
            return Err(Error::DimensionMismatch { expected: ra * ca, found: rb * cb });
        }
        Ok(())
    }

    pub fn minkowski_inner(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Array1<f64>> {
        ensure_shape(&x, &y)?;
        Ok(Zip::from(x.rows()).and(y.rows()).map_collect(|a, b| minkowski_unchecked(a, b)))
    }

    pub fn distance(x: ArrayView2<f64>, y: ArrayView2<f64>, k: Curvature) -> Result<Array1<f64>> {
        let inner = minkowski_inner(x, y)?;
        Ok(inner.mapv(|p| arccosh_clamped(-k.value() * p) / k.sqrt()))
    }

    pub fn hyperbolic_norm(z: ArrayView2<f64>, k: Curvature) -> Array1<f64> {
        z.column(0).mapv(|t| super::hyperbolic_norm_of_time(t, k))
    }

    /// Largest `|k (z∘z) + 1|` over the rows.
    pub fn max_manifold_residual(z: ArrayView2<f64>, k: Curvature) -> f64 {
        z.rows().into_iter().map(|r| super::manifold_residual(r, k)).fold(0.0, f64::max)
    }

    /// Recomputes the time column from the spatial columns.
    pub fn project_to_hyperboloid(spatial: ArrayView2<f64>, k: Curvature) -> Array2<f64> {
        let (n, d) = spatial.dim();
        let mut out = Array2::zeros((n, d + 1));
        out.slice_mut(s![.., 1..]).assign(&spatial);
        for mut row in out.rows_mut() {
            let sq: f64 = row.slice(s![1..]).iter().map(|v| v * v).sum();
            row[0] = (1.0 / k.value() + sq).sqrt();
        }
        out
    }

    /// Row-wise exponential map of tangent rows `v` at base rows `x`.
    pub fn exp_map(x: ArrayView2<f64>, v: ArrayView2<f64>, k: Curvature) -> Result<Array2<f64>> {
        ensure_shape(&x, &v)?;
        let sk = k.sqrt();
        let mut raw = Array2::zeros(x.dim());
        for ((mut out, xr), vr) in raw.axis_iter_mut(Axis(0)).zip(x.rows()).zip(v.rows()) {
            let sq = minkowski_unchecked(vr, vr);
            if sq < -super::TOL_TANGENT {
                return Err(Error::Timelike(sq));
            }
            let theta = sk * sq.max(0.0).sqrt();
            if theta < super::SERIES_SWITCH {
                out.assign(&(&xr + &vr));
            } else {
                out.assign(&(&xr * theta.cosh() + &vr * (theta.sinh() / theta)));
            }
        }
        Ok(project_to_hyperboloid(raw.slice(s![.., 1..]), k))
    }

    /// Row-wise logarithmic map from base rows `x` to rows `y`.
    pub fn log_map(x: ArrayView2<f64>, y: ArrayView2<f64>, k: Curvature) -> Result<Array2<f64>> {
        ensure_shape(&x, &y)?;
        let sk = k.sqrt();
        let mut out = Array2::zeros(x.dim());
        for ((mut o, xr), yr) in out.axis_iter_mut(Axis(0)).zip(x.rows()).zip(y.rows()) {
            let inner = minkowski_unchecked(xr, yr);
            let d = arccosh_clamped(-k.value() * inner) / sk;
            let t = sk * d;
            let coef = if t < super::SERIES_SWITCH { 1.0 - t * t / 6.0 } else { t / t.sinh() };
            o.assign(&((&yr + &(&xr * (k.value() * inner))) * coef));
        }
        Ok(out)
    }

    /// Row-wise parallel transport of rows `v` from rows `x` to rows `y`.
    pub fn parallel_transport(
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        v: ArrayView2<f64>,
        k: Curvature,
    ) -> Result<Array2<f64>> {
        ensure_shape(&x, &y)?;
        ensure_shape(&x, &v)?;
        let kv = k.value();
        let mut out = v.to_owned();
        for (((mut o, xr), yr), vr) in out.axis_iter_mut(Axis(0)).zip(x.rows()).zip(y.rows()).zip(v.rows()) {
            let coef = kv * minkowski_unchecked(yr, vr) / (1.0 - kv * minkowski_unchecked(xr, yr));
            o.scaled_add(coef, &(&xr + &yr));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn k1() -> Curvature {
        Curvature::UNIT
    }

    #[test]
    fn curvature_rejects_nonpositive() {
        assert!(Curvature::new(0.0).is_err());
        assert!(Curvature::new(-1.0).is_err());
        assert!(Curvature::new(f64::NAN).is_err());
        assert!(Curvature::new(0.3).is_ok());
    }

    #[test]
    fn minkowski_examples() {
        let o = array![1.0, 0.0, 0.0];
        assert_eq!(minkowski_inner(o.view(), o.view()).unwrap(), -1.0);
        let e = array![0.0, 1.0, 0.0];
        assert_eq!(minkowski_inner(e.view(), e.view()).unwrap(), 1.0);
        let x = array![1f64.cosh(), 1f64.sinh(), 0.0];
        assert_abs_diff_eq!(minkowski_inner(x.view(), o.view()).unwrap(), -1.5430806348152437, epsilon = 1e-12);
        let short = array![1.0, 0.0];
        assert_eq!(
            minkowski_inner(o.view(), short.view()),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        );
    }

    #[test]
    fn origin_examples() {
        assert_eq!(origin(2, k1()).coords(), array![1.0, 0.0, 0.0]);
        assert_eq!(origin(2, Curvature::new(4.0).unwrap()).coords(), array![0.5, 0.0, 0.0]);
        assert_eq!(origin(1, Curvature::new(0.25).unwrap()).coords(), array![2.0, 0.0]);
        for kv in [0.25, 1.0, 4.0, 7.3] {
            let k = Curvature::new(kv).unwrap();
            assert!(manifold_residual(origin(5, k).coords(), k) < 1e-15);
        }
    }

    #[test]
    fn constructor_validates() {
        assert!(matches!(LorentzPoint::new(array![1.0, 0.5, 0.0], k1()), Err(Error::OffManifold(_))));
        assert!(matches!(LorentzPoint::new(array![-1.0, 0.0], k1()), Err(Error::LowerSheet(_))));
        assert!(matches!(LorentzPoint::new(array![f64::NAN, 0.0], k1()), Err(Error::NonFinite)));
        assert!(LorentzPoint::new(array![2f64.cosh(), 2f64.sinh()], k1()).is_ok());
    }

    #[test]
    fn distance_examples() {
        let o = origin(2, k1());
        let x = LorentzPoint::new(array![2f64.cosh(), 2f64.sinh(), 0.0], k1()).unwrap();
        assert_eq!(distance(&o, &o).unwrap(), 0.0);
        assert_eq!(distance(&x, &x).unwrap(), 0.0);
        assert_abs_diff_eq!(distance(&o, &x).unwrap(), 2.0, epsilon = 1e-12);
        let a = LorentzPoint::new(array![1f64.cosh(), 1f64.sinh(), 0.0], k1()).unwrap();
        let b = LorentzPoint::new(array![1f64.cosh(), -1f64.sinh(), 0.0], k1()).unwrap();
        assert_abs_diff_eq!(distance(&a, &b).unwrap(), 2.0, epsilon = 1e-12);
        let other = origin(2, Curvature::new(2.0).unwrap());
        assert!(matches!(distance(&o, &other), Err(Error::CurvatureMismatch(..))));
    }

    #[test]
    fn hyperbolic_norm_examples() {
        assert_eq!(hyperbolic_norm(&origin(3, k1())), 0.0);
        let z = LorentzPoint::new(array![3f64.cosh(), 3f64.sinh(), 0.0], k1()).unwrap();
        assert_abs_diff_eq!(hyperbolic_norm(&z), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hyperbolic_norm(&z), distance(&z, &origin(2, k1())).unwrap(), epsilon = 1e-12);
        let k4 = Curvature::new(4.0).unwrap();
        let z4 = LorentzPoint::new(array![2f64.cosh() / 2.0, 2f64.sinh() / 2.0, 0.0], k4).unwrap();
        assert_abs_diff_eq!(hyperbolic_norm(&z4), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exp_map_examples() {
        let o = origin(2, k1());
        assert_eq!(exp_map(&o, &TangentVector::zero(&o)).unwrap(), o);
        let v = TangentVector::new(array![0.0, 1.0, 0.0], &o).unwrap();
        let y = exp_map(&o, &v).unwrap();
        assert_abs_diff_eq!(y.coords()[0], 1.5430806348152437, epsilon = 1e-12);
        assert_abs_diff_eq!(y.coords()[1], 1.1752011936438014, epsilon = 1e-12);
        assert_eq!(y.coords()[2], 0.0);
        for t in [0.5, 2.0, 5.0] {
            let y = exp_map(&o, &v.scaled(t)).unwrap();
            assert_abs_diff_eq!(distance(&o, &y).unwrap(), t, epsilon = 1e-10);
        }
    }

    #[test]
    fn exp_map_series_branch_matches_closed_form() {
        let o = origin(2, k1());
        let v = TangentVector::new(array![0.0, 3e-7, -2e-7], &o).unwrap();
        let y = exp_map(&o, &v).unwrap();
        assert_abs_diff_eq!(y.coords()[1], 3e-7, epsilon = 1e-18);
        assert!(manifold_residual(y.coords(), k1()) < 1e-15);
    }

    #[test]
    fn exp_map_rejects_timelike() {
        let o = origin(1, k1());
        let bogus = TangentVector { ambient: array![1.0, 0.0], base: o.clone() };
        assert!(matches!(exp_map(&o, &bogus), Err(Error::Timelike(_))));
    }

    #[test]
    fn log_map_examples() {
        let x = LorentzPoint::new(array![1f64.cosh(), 1f64.sinh(), 0.0], k1()).unwrap();
        let zero = log_map(&x, &x).unwrap();
        assert!(zero.ambient().iter().all(|v| v.abs() < 1e-7));
        let o = origin(2, k1());
        let v = log_map(&o, &x).unwrap();
        assert_abs_diff_eq!(v.ambient()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.ambient()[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.ambient()[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn parallel_transport_examples() {
        let o = origin(2, k1());
        let v = TangentVector::new(array![0.0, 1.0, 0.0], &o).unwrap();
        let same = parallel_transport(&o, &o, &v).unwrap();
        assert_eq!(same.ambient(), v.ambient());
        let y = LorentzPoint::new(array![1f64.cosh(), 1f64.sinh(), 0.0], k1()).unwrap();
        let moved = parallel_transport(&o, &y, &v).unwrap();
        assert_abs_diff_eq!(moved.ambient()[0], 1f64.sinh(), epsilon = 1e-12);
        assert_abs_diff_eq!(moved.ambient()[1], 1f64.cosh(), epsilon = 1e-12);
        assert_abs_diff_eq!(moved.ambient()[2], 0.0, epsilon = 1e-12);
        assert_eq!(moved.base(), &y);
    }

    #[test]
    fn projection_examples() {
        let o = project_to_hyperboloid(array![0.0, 0.0].view(), k1());
        assert_eq!(o.coords(), array![1.0, 0.0, 0.0]);
        let p = project_to_hyperboloid(array![1f64.sinh(), 0.0].view(), k1());
        assert_abs_diff_eq!(p.time(), 1f64.cosh(), epsilon = 1e-15);
        let q = project_to_hyperboloid(array![3.0, 4.0].view(), k1());
        assert_eq!(q.time(), 26f64.sqrt());
    }

    #[test]
    fn batch_ops_match_pointwise() {
        let k = Curvature::new(0.7).unwrap();
        let x = batch::project_to_hyperboloid(array![[0.1, 0.2], [1.5, -0.3], [-2.0, 0.4]].view(), k);
        let y = batch::project_to_hyperboloid(array![[0.3, -0.2], [0.5, 0.9], [1.0, 1.0]].view(), k);
        let d = batch::distance(x.view(), y.view(), k).unwrap();
        let logs = batch::log_map(x.view(), y.view(), k).unwrap();
        let back = batch::exp_map(x.view(), logs.view(), k).unwrap();
        let transported = batch::parallel_transport(x.view(), y.view(), logs.view(), k).unwrap();
        for r in 0..3 {
            let xp = LorentzPoint::new(x.row(r).to_owned(), k).unwrap();
            let yp = LorentzPoint::new(y.row(r).to_owned(), k).unwrap();
            assert_abs_diff_eq!(d[r], distance(&xp, &yp).unwrap(), epsilon = 1e-14);
            let l = log_map(&xp, &yp).unwrap();
            for c in 0..3 {
                assert_abs_diff_eq!(logs[[r, c]], l.ambient()[c], epsilon = 1e-13);
                assert_abs_diff_eq!(back[[r, c]], y[[r, c]], epsilon = 1e-10);
            }
            let t = parallel_transport(&xp, &yp, &l).unwrap();
            for c in 0..3 {
                assert_abs_diff_eq!(transported[[r, c]], t.ambient()[c], epsilon = 1e-13);
            }
        }
        assert!(batch::max_manifold_residual(x.view(), k) < 1e-14);
        let norms = batch::hyperbolic_norm(y.view(), k);
        assert_abs_diff_eq!(norms[0], hyperbolic_norm(&LorentzPoint::new(y.row(0).to_owned(), k).unwrap()));
    }
}
