//! Invariant suite run by `verify`: geometry identities, the hyperplane distance
//! oracle, sign equivalence, flat limits, forward-pass consistency, the inference
//! cache and gradients. Every check draws its random cases from its own seeded
//! stream and reports the worst error it saw.

use std::time::Instant;

use lorentz_fgg::grad::{finite_difference_gradient, Trainable, TrainableChen, TrainableFgg, DEFAULT_STEP};
use lorentz_fgg::hyperplane::{HyperplaneParams, TransportedNormal};
use lorentz_fgg::layers::{lorentzian_activation, Activation, ActivationBase, ActivationMode, ChenLinear, FggLinear};
use lorentz_fgg::lorentz::{self, minkowski_inner, Curvature, LorentzPoint, TangentVector};
use lorentz_fgg::sampling::{
    gaussian_matrix, gaussian_vector, random_batch, random_point, random_tangent, random_unit_tangent, unit_direction,
};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{caching_benchmark, BenchConfig, BenchRecord};
use crate::fit::{FitRecord, LayerKind};
use crate::profile::DepthProfile;
use crate::stats::linear_fit;
use crate::seeds::cell_rng;
use crate::tree::{relative_manifold_residual, TreeExperiment};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    /// Acceptance criterion the check belongs to.
    pub criterion: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(criterion: u8, name: &'static str, passed: bool, detail: String) -> Self {
        CheckResult { criterion, name, passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random cases for the geometry and sign checks.
    pub cases: usize,
    pub oracle_instances: usize,
    pub oracle_samples: usize,
    pub forward_cases: usize,
    pub gradient_cases: usize,
    /// Also time the forward variants; this is the slowest check.
    pub bench: bool,
    pub bench_dims: Vec<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            cases: 10_000,
            oracle_instances: 100,
            oracle_samples: 100_000,
            forward_cases: 1_000,
            gradient_cases: 100,
            bench: true,
            bench_dims: vec![16, 256, 4096],
        }
    }
}

type Check = fn(&VerifyConfig, &mut ChaCha8Rng) -> Result<Vec<CheckResult>>;

/// Runs every check; a check that errors is reported as failed.
pub fn run_suite(cfg: &VerifyConfig, seed: u64) -> Vec<CheckResult> {
    let checks: [(&str, u8, Check); 7] = [
        ("geometry", 1, geometry),
        ("distance_oracle", 2, distance_oracle),
        ("sign_equivalence", 3, sign_equivalence),
        ("flat_limits", 4, flat_limits),
        ("forward", 5, forward_consistency),
        ("cache", 6, cache),
        ("gradients", 7, gradients),
    ];
    let mut out = Vec::new();
    for (name, criterion, f) in checks {
        let mut rng = cell_rng(seed, &format!("verify/{name}"));
        match f(cfg, &mut rng) {
            Ok(rs) => out.extend(rs),
            Err(e) => out.push(CheckResult::new(criterion, "error", false, format!("{name}: {e}"))),
        }
    }
    out
}

fn random_kappa<R: Rng + ?Sized>(rng: &mut R) -> Curvature {
    Curvature::new(rng.random_range(0.25..4.0)).expect("positive")
}

/// Random hyperplane with `‖w‖ ∈ [0.5, 2]` and `|b| ≤ 2`.
fn random_hyperplane<R: Rng + ?Sized>(rng: &mut R, dim: usize, k: Curvature) -> HyperplaneParams {
    let w = unit_direction(rng, dim) * rng.random_range(0.5..2.0);
    HyperplaneParams::new(w, rng.random_range(-2.0..2.0), k)
}

fn max_abs_diff<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn geometry(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let start = Instant::now();
    let (mut constraint, mut round_trip, mut transport) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cfg.cases {
        let k = random_kappa(rng);
        let dim = rng.random_range(1..6);
        let x = random_point(rng, dim, k, 3.0 / k.sqrt());
        let y = random_point(rng, dim, k, 3.0 / k.sqrt());
        let t = rng.random_range(0.0..5.0);
        let v = random_unit_tangent(rng, &x).scaled(t);
        let e = lorentz::exp_map(&x, &v)?;
        for p in [&x, &y, &e] {
            constraint = constraint.max(relative_manifold_residual(p.coords().insert_axis(ndarray::Axis(0)), k));
        }
        let back = lorentz::log_map(&x, &e)?;
        let scale = v.ambient().iter().fold(1.0f64, |m, c| m.max(c.abs()));
        round_trip = round_trip.max(max_abs_diff(back.ambient(), v.ambient()) / scale);

        let u = random_tangent(rng, &x, 1.0);
        let w = random_tangent(rng, &x, 1.0);
        let before = u.inner(&w)?;
        let after = lorentz::parallel_transport(&x, &y, &u)?.inner(&lorentz::parallel_transport(&x, &y, &w)?)?;
        transport = transport.max((before - after).abs() / (1.0 + before.abs()));
    }
    let secs = start.elapsed().as_secs_f64();
    let n = cfg.cases;
    Ok(vec![
        CheckResult::new(1, "hyperboloid_constraint", constraint <= 1e-9, format!("worst relative residual {constraint:.2e} over {} points", 3 * n)),
        CheckResult::new(1, "exp_log_round_trip", round_trip <= 1e-8, format!("worst error {round_trip:.2e} over {n} cases, distances up to 5")),
        CheckResult::new(1, "transport_isometry", transport <= 1e-9, format!("worst inner-product change {transport:.2e} over {n} cases")),
        CheckResult::new(1, "geometry_runtime", secs < 10.0, format!("{secs:.2} s")),
    ])
}

/// In `H²` the hyperplane is the geodesic through `p` along the unit tangent
/// orthogonal to `v`; its points have a closed form, so the minimum distance can be
/// found by dense sampling.
fn distance_oracle(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let mut worst = 0.0f64;
    for _ in 0..cfg.oracle_instances {
        let k = random_kappa(rng);
        let sk = k.sqrt();
        let hp = random_hyperplane(rng, 2, k);
        let p = hp.reference_point()?;
        let n = hp.transported_normal()?;
        let r = gaussian_vector(rng, 3, 1.0);
        let t = TangentVector::project(r.view(), &p)?;
        let vn = n.lorentz_norm()?;
        let along = &t.ambient() - &(&n.ambient() * (minkowski_inner(t.ambient(), n.ambient())? / (vn * vn)));
        let along = &along / minkowski_inner(along.view(), along.view())?.sqrt();
        let x = random_point(rng, 2, k, 3.0 / sk);
        let xp = minkowski_inner(x.coords(), p.coords())?;
        let xu = minkowski_inner(x.coords(), along.view())?;
        let span = lorentz::distance(&x, &p)? + 1.0;
        let best = (0..=cfg.oracle_samples)
            .map(|i| {
                let s = -span + 2.0 * span * i as f64 / cfg.oracle_samples as f64;
                let inner = (sk * s).cosh() * xp + (sk * s).sinh() / sk * xu;
                (-k.value() * inner).max(1.0).acosh() / sk
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((best - n.distance(&x)?).abs());
    }
    Ok(vec![CheckResult::new(
        2,
        "distance_vs_geodesic_sampling",
        worst <= 1e-3,
        format!("worst gap {worst:.2e} over {} instances, {} samples each", cfg.oracle_instances, cfg.oracle_samples),
    )])
}

fn sign_equivalence(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let mut mismatches = 0;
    let mut skipped = 0;
    for _ in 0..cfg.cases {
        let k = random_kappa(rng);
        let dim = rng.random_range(1..6);
        let hp = random_hyperplane(rng, dim, k);
        let p = hp.reference_point()?;
        let n = hp.transported_normal()?;
        let x = random_point(rng, dim, k, 3.0 / k.sqrt());
        if x == p {
            skipped += 1;
            continue;
        }
        let log = lorentz::log_map(&p, &x)?;
        let oracle = minkowski_inner(log.ambient(), n.ambient())?;
        if n.signed_distance(&x)?.signum() != oracle.signum() {
            mismatches += 1;
        }
    }
    Ok(vec![CheckResult::new(
        3,
        "sign_matches_log_map",
        mismatches == 0,
        format!("{mismatches} mismatches over {} instances ({skipped} at p skipped)", cfg.cases),
    )])
}

const FLAT_KAPPAS: [f64; 3] = [1e-2, 1e-4, 1e-6];

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Each 100× drop in curvature must shrink the error by a factor in [50, 200].
fn shrinks_like_kappa(errs: &[f64]) -> bool {
    errs.windows(2).all(|w| w[1] > 0.0 && (50.0..=200.0).contains(&(w[0] / w[1])))
}

fn flat_limits(_: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let (mut ok1, mut ok2) = (true, true);
    let mut shown = String::new();
    for case in 0..20 {
        let dim = rng.random_range(1..5);
        // The leading error term is κ(x∘v)³/6, so a product near zero leaves only
        // rounding noise and a large one delays the asymptotic regime.
        let (spatial, w, b) = loop {
            let spatial = gaussian_vector(rng, dim, 0.5);
            let w = unit_direction(rng, dim) * rng.random_range(0.5..2.0);
            let b = rng.random_range(-1.0..1.0);
            if (0.1..=2.0).contains(&(w.dot(&spatial) + b).abs()) {
                break (spatial, w, b);
            }
        };
        let mut e1 = Vec::new();
        let mut e2 = Vec::new();
        for kv in FLAT_KAPPAS {
            let k = Curvature::new(kv)?;
            let x = lorentz::project_to_hyperboloid(spatial.view(), k);
            let hp = HyperplaneParams::new(w.clone(), b, k);
            let xv = hp.transported_normal()?.residual(&x)?;
            e1.push((hp.scaled_distance_d1(&x)? - xv).abs());
            e2.push((hp.pre_activation_d2(&x)? - xv).abs());
        }
        ok1 &= shrinks_like_kappa(&e1);
        ok2 &= shrinks_like_kappa(&e2);
        if case == 0 {
            shown = format!("d1 errors {}, d2 errors {}", sci(&e1), sci(&e2));
        }
    }
    out.push(CheckResult::new(4, "d1_flat_limit", ok1, format!("20 instances; first: {shown}")));
    out.push(CheckResult::new(4, "d2_flat_limit", ok2, "20 instances".into()));

    let errs: Vec<f64> = FLAT_KAPPAS
        .iter()
        .map(|&kv| {
            let k = Curvature::new(kv).expect("positive");
            (lorentzian_activation(ActivationBase::Tanh, k, 0.7) - 0.7f64.tanh()).abs()
        })
        .collect();
    out.push(CheckResult::new(4, "lorentzian_tanh_flat_limit", shrinks_like_kappa(&errs), format!("errors {}", sci(&errs))));
    let relu_err = FLAT_KAPPAS
        .iter()
        .flat_map(|&kv| {
            let k = Curvature::new(kv).expect("positive");
            (-30..=30).map(move |i| {
                let x = i as f64 / 10.0;
                (lorentzian_activation(ActivationBase::Relu, k, x) - x.max(0.0)).abs()
            })
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::new(4, "lorentzian_relu_flat_limit", relu_err <= 1e-12, format!("worst error {relu_err:.2e}")));
    Ok(out)
}

const BASES: [ActivationBase; 4] =
    [ActivationBase::Identity, ActivationBase::Relu, ActivationBase::LeakyRelu(0.01), ActivationBase::Tanh];

fn random_fgg<R: Rng + ?Sized>(rng: &mut R, k: Curvature, d_in: usize, d_out: usize, act: Activation) -> FggLinear {
    let mut layer = FggLinear::init(rng, d_in, d_out, act, k);
    layer.weights.g = Array1::from_shape_simple_fn(d_out, || {
        let m = rng.random_range(0.25..2.0);
        if rng.random::<bool>() { m } else { -m }
    });
    layer.bias = gaussian_vector(rng, d_out, 0.5);
    layer
}

fn forward_consistency(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let (mut agree, mut readback, mut constraint) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..cfg.forward_cases {
        let k = random_kappa(rng);
        let (d_in, d_out, n) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..9));
        let mode = if case % 2 == 0 { ActivationMode::Lorentzian } else { ActivationMode::Plain };
        let layer = random_fgg(rng, k, d_in, d_out, Activation::new(BASES[case % 4], mode));
        let x = random_batch(rng, n, d_in, k, 2.0 / k.sqrt());
        let fast = layer.forward(x.view())?;
        let dec = layer.forward_decomposed(x.view())?;
        for (a, b) in fast.iter().zip(dec.output.iter()) {
            agree = agree.max((a - b).abs() / a.abs().max(1.0));
        }
        constraint = constraint.max(relative_manifold_residual(fast.view(), k));
        for (row, acts) in fast.rows().into_iter().zip(dec.activations.rows()) {
            let y = LorentzPoint::new_unchecked(row.to_owned(), k);
            for (i, &a) in acts.iter().enumerate() {
                let mut e = Array1::zeros(d_out + 1);
                e[i + 1] = 1.0;
                let d = TransportedNormal::new(e, k)?.signed_distance(&y)?;
                readback = readback.max((d - a).abs() / a.abs().max(1.0));
            }
        }
    }
    let n = cfg.forward_cases;
    Ok(vec![
        CheckResult::new(5, "fused_matches_decomposed", agree <= 1e-9, format!("worst relative gap {agree:.2e} over {n} layer/batch pairs")),
        CheckResult::new(5, "output_readback", readback <= 1e-8, format!("worst relative gap {readback:.2e}")),
        CheckResult::new(5, "outputs_on_manifold", constraint <= 1e-9, format!("worst relative residual {constraint:.2e}")),
    ])
}

/// The round trip is checked for `‖w‖ ∈ [1e-3, 10]` and `|b| < 8‖w‖/sqrt(k)`; beyond
/// that the transported normal's time component overwhelms the spatial part and the
/// inverse loses digits to `asinh` of a ratio near `±1`.
fn cache(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let (mut inverse, mut equal) = (0.0f64, 0.0f64);
    for case in 0..cfg.forward_cases {
        let k = random_kappa(rng);
        let (d_in, d_out) = (rng.random_range(1..6), rng.random_range(1..6));
        let mut w = Array2::zeros((d_out, d_in));
        let mut b = Array1::zeros(d_out);
        for (mut row, bi) in w.rows_mut().into_iter().zip(b.iter_mut()) {
            let norm: f64 = 10f64.powf(rng.random_range(-3.0..1.0));
            let max_b = (8.0 * norm / k.sqrt()).min(10.0);
            row.assign(&(unit_direction(rng, d_in) * norm));
            *bi = rng.random_range(-max_b..max_b);
        }
        let act = Activation::new(BASES[case % 4], ActivationMode::Lorentzian);
        let layer = FggLinear::from_weights(w.view(), b.clone(), act, k)?;
        let cache = layer.build_cache()?;
        let (w2, b2) = cache.invert()?;
        let num = (&w2 - &w).iter().chain((&b2 - &b).iter()).map(|e| e * e).sum::<f64>().sqrt();
        let den = w.iter().chain(b.iter()).map(|e| e * e).sum::<f64>().sqrt();
        inverse = inverse.max(num / den);
        let x = random_batch(rng, 4, d_in, k, 2.0 / k.sqrt());
        equal = equal.max(max_abs_diff(&cache.forward(x.view())?, &layer.forward(x.view())?));
    }
    let mut out = vec![
        CheckResult::new(6, "cache_inverse_round_trip", inverse <= 1e-9, format!("worst relative error {inverse:.2e}")),
        CheckResult::new(6, "cached_equals_uncached", equal == 0.0, format!("largest output difference {equal:.2e}")),
    ];
    if cfg.bench {
        let bench = BenchConfig { dims: cfg.bench_dims.clone(), ..BenchConfig::default() };
        out.extend(bench_checks(&caching_benchmark(&bench, rng.random())?));
    }
    Ok(out)
}

/// Speed claims about cached inference, judged from one benchmark run.
pub fn bench_checks(records: &[BenchRecord]) -> Vec<CheckResult> {
    let get = |variant: &str, dim: usize| {
        records.iter().find(|r| r.variant == variant && r.dim == dim).map(|r| (r.median_ns_per_forward, r.ratio_to_euclidean))
    };
    let mut out = Vec::new();
    let mut dims: Vec<usize> = records.iter().map(|r| r.dim).collect();
    dims.dedup();
    for &d in &dims {
        if let (Some((c, _)), Some((u, _))) = (get("fgg_cached", d), get("fgg_uncached", d)) {
            out.push(CheckResult::new(6, "cached_faster", c < u, format!("d={d}: cached {c:.0} ns vs uncached {u:.0} ns")));
        }
    }
    if let (Some((_, r256)), Some((_, r4096))) = (get("fgg_cached", 256), get("fgg_cached", 4096)) {
        out.push(CheckResult::new(
            6,
            "cached_ratio_decreases",
            r4096 < r256,
            format!("cached/euclidean {r256:.3} at d=256, {r4096:.3} at d=4096"),
        ));
    }
    out
}

/// Worst per-coordinate relative error with denominator `max(1e-8, |analytic|)`.
fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs() / a.abs().max(1e-8)).fold(0.0, f64::max)
}

/// Relative errors of the parameter gradient and of a directional input gradient
/// for the loss `Σ C ⊙ Y`.
fn gradient_errors<T: Trainable + Clone>(layer: &T, x: &Array2<f64>, c: &Array2<f64>, training: bool) -> Result<(f64, f64)> {
    let loss = |m: &mut T, x: &Array2<f64>| -> f64 {
        m.forward(x.view(), training).map(|y| (&y * c).sum()).unwrap_or(f64::NAN)
    };
    let mut l = layer.clone();
    l.forward(x.view(), training)?;
    let (g, dx) = l.backward(c.view())?;
    let numeric = finite_difference_gradient(
        |p| {
            let mut m = layer.clone();
            m.set_params(p).map(|_| loss(&mut m, x)).unwrap_or(f64::NAN)
        },
        &l.params(),
        DEFAULT_STEP,
    );
    let dir = Array2::from_shape_fn(x.dim(), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    let along = |t: f64| loss(&mut layer.clone(), &(x + &(&dir * t)));
    let numeric_dx = (along(DEFAULT_STEP) - along(-DEFAULT_STEP)) / (2.0 * DEFAULT_STEP);
    let analytic_dx = (&dx * &dir).sum();
    Ok((max_rel_err(&g, &numeric), (analytic_dx - numeric_dx).abs() / analytic_dx.abs().max(1e-8)))
}

/// Instances draw `D_in ≥ 2` for FGG and gains with `|g| ≥ 0.25`: a zero true
/// gradient cannot meet a relative tolerance under finite-difference noise.
fn gradients(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let (mut fgg, mut chen) = (0.0f64, 0.0f64);
    for case in 0..cfg.gradient_cases {
        let k = random_kappa(rng);
        let (d_in, d_out, n) = (rng.random_range(2..5), rng.random_range(1..4), rng.random_range(2..6));
        let mode = if case % 2 == 0 { ActivationMode::Lorentzian } else { ActivationMode::Plain };
        let layer = random_fgg(rng, k, d_in, d_out, Activation::new(BASES[case % 4], mode));
        let x = random_batch(rng, n, d_in, k, 1.5 / k.sqrt());
        let c = gaussian_matrix(rng, n, d_out + 1, 1.0);
        let (ep, ex) = gradient_errors(&TrainableFgg::new(layer, case % 3 == 0), &x, &c, case % 6 != 3)?;
        fgg = fgg.max(ep).max(ex);

        let d_in = rng.random_range(1..4);
        let base = ChenLinear::init(rng, d_in, d_out, k);
        let x = random_batch(rng, n, d_in, k, 1.5 / k.sqrt());
        let (ep, ex) = gradient_errors(&TrainableChen::new(base, case % 2 == 0, BASES[case % 4]), &x, &c, true)?;
        chen = chen.max(ep).max(ex);
    }
    let n = cfg.gradient_cases;
    Ok(vec![
        CheckResult::new(7, "fgg_gradients", fgg <= 1e-5, format!("worst relative error {fgg:.2e} over {n} instances")),
        CheckResult::new(7, "chen_gradients", chen <= 1e-5, format!("worst relative error {chen:.2e} over {n} instances")),
    ])
}

fn iterations_at(records: &[FitRecord], kind: LayerKind, r: f64) -> Option<&FitRecord> {
    records.iter().find(|rec| rec.layer_kind == kind && rec.target_distance == r)
}

/// Iteration-count trends of the hyperplane fit. `budget` is the per-cell cap the
/// records were produced with.
pub fn fit_checks(records: &[FitRecord], budget: u64) -> Vec<CheckResult> {
    let of = |kind: LayerKind| -> (Vec<f64>, Vec<f64>) {
        let mut v: Vec<_> = records.iter().filter(|r| r.layer_kind == kind).collect();
        v.sort_by(|a, b| a.target_distance.total_cmp(&b.target_distance));
        v.iter().map(|r| (r.target_distance, r.iterations as f64)).unzip()
    };
    let has = |kind: LayerKind| records.iter().any(|r| r.layer_kind == kind);
    let mut out = Vec::new();
    if has(LayerKind::Fgg) {
        out.extend(fgg_fit_checks(records, of(LayerKind::Fgg)));
    }
    if has(LayerKind::Chen) {
        out.push(chen_fit_check(records, of(LayerKind::Chen), budget));
    }
    out
}

fn fgg_fit_checks(records: &[FitRecord], (rs, its): (Vec<f64>, Vec<f64>)) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let all_converged = records.iter().filter(|r| r.layer_kind == LayerKind::Fgg).all(|r| r.converged);
    let fit = linear_fit(&rs, &its);
    let r2 = fit.map_or(f64::NAN, |f| f.r_squared);
    out.push(CheckResult::new(
        8,
        "fgg_linear_iterations",
        all_converged && r2 >= 0.8,
        format!("iterations {its:?}, linear R² {r2:.3}"),
    ));
    if let (Some(a), Some(b)) = (iterations_at(records, LayerKind::Fgg, 8.0), iterations_at(records, LayerKind::Fgg, 4.0)) {
        let ratio = if a.converged && b.converged { a.iterations as f64 / b.iterations as f64 } else { f64::NAN };
        out.push(CheckResult::new(8, "fgg_ratio_8_to_4", ratio <= 3.0, format!("iters(8)/iters(4) = {ratio:.3}")));
    }
    out
}

fn chen_fit_check(records: &[FitRecord], (rs, its): (Vec<f64>, Vec<f64>), budget: u64) -> CheckResult {
    let logs: Vec<f64> = its.iter().map(|i| i.max(1.0).ln()).collect();
    let exp_fit = linear_fit(&rs, &logs);
    let exponential = exp_fit.is_some_and(|f| f.slope > 0.0 && f.r_squared >= 0.8);
    let exhausted = iterations_at(records, LayerKind::Chen, 8.0).is_some_and(|r| !r.converged && r.iterations >= budget);
    CheckResult::new(
        8,
        "chen_exponential_or_exhausted",
        exponential || exhausted,
        format!(
            "iterations {its:?}, log-linear slope {:.3} R² {:.3}, budget exhausted at r=8: {exhausted}",
            exp_fit.map_or(f64::NAN, |f| f.slope),
            exp_fit.map_or(f64::NAN, |f| f.r_squared),
        ),
    )
}

/// Tree-embedding comparison under the shared budget. Empty unless both layer kinds ran.
pub fn tree_checks(exp: &TreeExperiment, target: f64) -> Vec<CheckResult> {
    let find = |kind: LayerKind| exp.runs.iter().find(|r| r.report.layer_kind == kind).map(|r| &r.report);
    let (Some(fgg), Some(chen)) = (find(LayerKind::Fgg), find(LayerKind::Chen)) else {
        return Vec::new();
    };
    let reach = chen.scale * chen.depth as f64;
    vec![
        CheckResult::new(
            9,
            "fgg_reaches_target",
            fgg.mean_relative_distortion <= target,
            format!(
                "mean distortion {:.4} after {} steps (target {target})",
                fgg.mean_relative_distortion, fgg.steps_used
            ),
        ),
        CheckResult::new(
            9,
            "chen_distortion_higher",
            chen.mean_relative_distortion > fgg.mean_relative_distortion,
            format!("chen {:.4} vs fgg {:.4}", chen.mean_relative_distortion, fgg.mean_relative_distortion),
        ),
        CheckResult::new(
            9,
            "chen_leaf_norm_below_reach",
            chen.max_leaf_norm < reach,
            format!("max leaf norm {:.4} vs s·h = {reach:.4}", chen.max_leaf_norm),
        ),
    ]
}

/// Norm trends of the trained stacks.
pub fn profile_checks(profiles: &[DepthProfile]) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for p in profiles {
        match p.layer_kind {
            LayerKind::Fgg => {
                let steps: Vec<String> = p.linear_steps().iter().map(|(i, o)| format!("{i:.3}->{o:.3}")).collect();
                out.push(CheckResult::new(
                    10,
                    "fgg_norm_nondecreasing",
                    p.is_nondecreasing(0.1),
                    format!("linear steps {}", steps.join(", ")),
                ));
            }
            LayerKind::Chen => {
                let ratio = p.pre_final_ratio().unwrap_or(f64::NAN);
                out.push(CheckResult::new(
                    10,
                    "chen_norm_within_2x",
                    (0.5..=2.0).contains(&ratio),
                    format!("pre-final / first linear norm = {ratio:.3}"),
                ));
            }
        }
    }
    out
}
