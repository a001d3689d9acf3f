//! Fitting a single layer to a two-class problem whose separating hyperplane lies at a
//! growing distance from the origin.
//!
//! The data are drawn from the normal geodesic fan of the target hyperplane: base
//! points along the hyperplane near its reference point, each pushed along the unit
//! normal by a signed distance `t` with `min_margin ≤ |t| ≤ max_margin`. The layer has
//! one output `y`; by default the class score is the signed distance of `y` to the
//! hyperplane `y_1 = 0`, which for the FGG layer is the pre-activation itself. Inputs
//! are fixed and only the layer parameters are trained.
//!
//! Both layers start as the same function, the through-origin hyperplane with the
//! target's normal direction, so the count measures how far the parameters must travel
//! to push the hyperplane out to distance `r`.

use std::fmt;
use std::str::FromStr;

use lorentz_fgg::grad::{Sgd, SgdConfig, Trainable, TrainableChen, TrainableFgg};
use lorentz_fgg::hyperplane::HyperplaneParams;
use lorentz_fgg::layers::{Activation, ActivationBase, ChenLinear, FggLinear};
use lorentz_fgg::lorentz::{exp_map, project_to_hyperboloid, Curvature, LorentzPoint, TangentVector};
use lorentz_fgg::sampling::{gaussian_vector, unit_direction};
use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seeds::cell_rng;
use crate::{ExpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Fgg,
    Chen,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Fgg => "fgg",
            LayerKind::Chen => "chen",
        })
    }
}

impl FromStr for LayerKind {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fgg" => Ok(LayerKind::Fgg),
            "chen" => Ok(LayerKind::Chen),
            other => Err(ExpError::InvalidConfig(format!("unknown layer kind `{other}`"))),
        }
    }
}

/// How the class score is read from the single output `y = (y_0, y_1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// The raw spatial coordinate `y_1`.
    Coordinate,
    /// The signed distance of `y` to the axis hyperplane, `asinh(sqrt(k) y_1)/sqrt(k)`.
    Distance,
}

impl ScoreKind {
    fn apply(self, k: Curvature, y1: f64) -> (f64, f64) {
        match self {
            ScoreKind::Coordinate => (y1, 1.0),
            ScoreKind::Distance => {
                let sk = k.sqrt();
                ((sk * y1).asinh() / sk, 1.0 / (1.0 + k.value() * y1 * y1).sqrt())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub kappa: f64,
    pub targets: Vec<f64>,
    pub layers: Vec<LayerKind>,
    pub input_dim: usize,
    pub points_per_side: usize,
    /// Half-width of the base-point interval along the hyperplane.
    pub spread: f64,
    pub min_margin: f64,
    pub max_margin: f64,
    pub learning_rate: f64,
    #[serde(deserialize_with = "crate::optional::deserialize")]
    pub clip_norm: Option<f64>,
    #[serde(deserialize_with = "crate::optional::deserialize")]
    pub momentum: Option<f64>,
    pub budget: u64,
    /// Required class score in the hinge margin loss.
    pub score_margin: f64,
    /// Class score read from the output point.
    pub score: ScoreKind,
    pub loss_threshold: f64,
    /// Euclidean norm of the initial weight vector of either layer.
    pub init_scale: f64,
    /// Record the logistic loss every this many iterations (0 disables the trace).
    pub trace_every: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            kappa: 1.0,
            targets: vec![2.0, 4.0, 6.0, 8.0],
            layers: vec![LayerKind::Fgg, LayerKind::Chen],
            input_dim: 1,
            points_per_side: 200,
            spread: 1.0,
            min_margin: 0.1,
            max_margin: 1.1,
            learning_rate: 0.01,
            clip_norm: Some(1.0),
            momentum: Some(0.99),
            budget: 1_000_000,
            score_margin: 0.1,
            score: ScoreKind::Distance,
            loss_threshold: 1e-3,
            init_scale: 10.0,
            trace_every: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        Curvature::new(self.kappa)?;
        self.sgd(0).validate()?;
        if let Some(r) = self.targets.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(ExpError::InvalidConfig(format!("target distance must be >= 0, got {r}")));
        }
        if self.targets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ExpError::InvalidConfig("targets must be strictly increasing".into()));
        }
        if self.budget < 1 {
            return Err(ExpError::InvalidConfig("budget must be >= 1".into()));
        }
        if self.input_dim < 1 {
            return Err(ExpError::InvalidConfig("input_dim must be >= 1".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(ExpError::InvalidConfig("init_scale must be positive".into()));
        }
        if self.points_per_side == 0 {
            return Err(ExpError::InvalidConfig("points_per_side must be >= 1".into()));
        }
        if !(0.0 < self.min_margin && self.min_margin <= self.max_margin) {
            return Err(ExpError::InvalidConfig("need 0 < min_margin <= max_margin".into()));
        }
        Ok(())
    }

    pub fn sgd(&self, seed: u64) -> SgdConfig {
        SgdConfig { learning_rate: self.learning_rate, clip_norm: self.clip_norm, momentum: self.momentum, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub target_distance: f64,
    pub layer_kind: LayerKind,
    pub iterations: u64,
    pub converged: bool,
    /// Training produced non-finite scores or gradients and was stopped.
    pub diverged: bool,
    pub final_loss: f64,
    pub final_margin_loss: f64,
    pub loss_trace: Option<Vec<(u64, f64)>>,
}

/// Labelled points on both sides of a hyperplane with known signed distances.
#[derive(Debug, Clone)]
pub struct FitDataset {
    pub x: Array2<f64>,
    pub labels: Array1<f64>,
    pub signed_distances: Array1<f64>,
    pub target: HyperplaneParams,
}

/// Hyperplane with unit weight whose reference point has hyperbolic norm `r`, and
/// points sampled from its normal geodesic fan.
pub fn make_dataset<R: Rng + ?Sized>(rng: &mut R, cfg: &FitConfig, r: f64) -> Result<FitDataset> {
    let k = Curvature::new(cfg.kappa)?;
    let sk = k.sqrt();
    let dim = cfg.input_dim;
    let w = unit_direction(rng, dim);
    let target = HyperplaneParams::new(w, -r, k);
    let p = target.reference_point()?;
    let normal = target.transported_normal()?;
    let v_hat = normal.ambient().to_owned() / normal.lorentz_norm()?;

    let n = 2 * cfg.points_per_side;
    let mut x = Array2::zeros((n, dim + 1));
    let mut labels = Array1::zeros(n);
    let mut dists = Array1::zeros(n);
    for i in 0..n {
        let side = if i < cfg.points_per_side { 1.0 } else { -1.0 };
        // In one dimension the hyperplane is the single point p.
        let q = if dim == 1 || cfg.spread == 0.0 {
            p.clone()
        } else {
            let along = tangent_along(rng, &p, &v_hat)?;
            exp_map(&p, &along.scaled(rng.random_range(-cfg.spread..=cfg.spread)))?
        };
        let t = side * rng.random_range(cfg.min_margin..=cfg.max_margin);
        let raw = &q.coords() * (sk * t).cosh() + &v_hat * ((sk * t).sinh() / sk);
        let point = project_to_hyperboloid(raw.slice(s![1..]), k);
        x.row_mut(i).assign(&point.coords());
        labels[i] = side;
        dists[i] = t;
    }
    Ok(FitDataset { x, labels, signed_distances: dists, target })
}

/// Unit tangent at `p` orthogonal to the hyperplane normal.
fn tangent_along<R: Rng + ?Sized>(rng: &mut R, p: &LorentzPoint, v_hat: &Array1<f64>) -> Result<TangentVector> {
    loop {
        let raw = gaussian_vector(rng, v_hat.len(), 1.0);
        let t = TangentVector::project(raw.view(), p)?;
        let a = t.ambient().to_owned();
        let c = lorentz_fgg::lorentz::minkowski_inner(a.view(), v_hat.view())?;
        let orth = &a - &(v_hat * c);
        let n = lorentz_fgg::lorentz::spacelike_norm(orth.view(), 1e-9)?;
        if n > 1e-6 {
            return Ok(TangentVector::project((orth / n).view(), p)?);
        }
    }
}

/// Mean logistic loss, mean hinge loss and training error count.
pub fn score_losses(scores: &Array1<f64>, labels: &Array1<f64>, margin: f64) -> (f64, f64, usize) {
    let n = scores.len() as f64;
    let mut logistic = 0.0;
    let mut hinge = 0.0;
    let mut errors = 0;
    for (&s, &y) in scores.iter().zip(labels) {
        let m = y * s;
        if !m.is_finite() {
            return (f64::INFINITY, f64::INFINITY, scores.len());
        }
        logistic += softplus(-m);
        hinge += (margin - m).max(0.0);
        if m <= 0.0 {
            errors += 1;
        }
    }
    (logistic / n, hinge / n, errors)
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Both layers start as the same function: the hyperplane through the origin with the
/// target's normal direction and weight norm `scale`.
fn build_model(kind: LayerKind, direction: ArrayView1<f64>, scale: f64, k: Curvature) -> Result<Box<dyn Trainable>> {
    let w = (&direction * scale).insert_axis(Axis(0));
    Ok(match kind {
        LayerKind::Fgg => Box::new(TrainableFgg::new(
            FggLinear::from_weights(w.view(), Array1::zeros(1), Activation::lorentzian(ActivationBase::Identity), k)?,
            false,
        )),
        LayerKind::Chen => {
            let mut full = Array2::zeros((1, w.ncols() + 1));
            full.slice_mut(s![.., 1..]).assign(&w);
            Box::new(TrainableChen::new(ChenLinear::new(full, k)?, false, ActivationBase::Identity))
        }
    })
}

/// Trains one layer on `data` until zero training error and hinge loss at or below
/// the threshold, or until the budget runs out.
pub fn fit_layer(cfg: &FitConfig, kind: LayerKind, data: &FitDataset, seed: u64) -> Result<FitRecord> {
    let k = Curvature::new(cfg.kappa)?;
    let mut model = build_model(kind, data.target.w.view(), cfg.init_scale, k)?;
    let mut opt = Sgd::new(cfg.sgd(seed))?;
    let n = data.x.nrows();
    let mut trace = (cfg.trace_every > 0).then(Vec::new);
    let mut params = model.params();
    let mut upstream = Array2::zeros((n, 2));
    let mut iter = 0u64;
    loop {
        let y = model.forward(data.x.view(), true)?;
        let (scores, slopes): (Vec<f64>, Vec<f64>) = y.column(1).iter().map(|&y1| cfg.score.apply(k, y1)).unzip();
        let scores = Array1::from(scores);
        let (logistic, hinge, errors) = score_losses(&scores, &data.labels, cfg.score_margin);
        if let Some(t) = trace.as_mut() {
            if iter.is_multiple_of(cfg.trace_every) {
                t.push((iter, logistic));
            }
        }
        let converged = errors == 0 && hinge <= cfg.loss_threshold;
        let mut diverged = !logistic.is_finite();
        if !(converged || diverged || iter >= cfg.budget) {
            for (((g, &s), &lab), &slope) in
                upstream.column_mut(1).iter_mut().zip(scores.iter()).zip(data.labels.iter()).zip(&slopes)
            {
                *g = -lab * sigmoid(-lab * s) * slope / n as f64;
            }
            match model.backward(upstream.view()) {
                Ok((grads, _)) => {
                    opt.step(&mut params, &grads)?;
                    model.set_params(&params)?;
                    iter += 1;
                    continue;
                }
                Err(lorentz_fgg::Error::NonFiniteGradient(_)) => diverged = true,
                Err(e) => return Err(e.into()),
            }
        }
        log::debug!("fit {kind} iter={iter} loss={logistic:e} hinge={hinge:e} diverged={diverged}");
        return Ok(FitRecord {
            target_distance: 0.0,
            layer_kind: kind,
            iterations: iter,
            converged,
            diverged,
            final_loss: logistic,
            final_margin_loss: hinge,
            loss_trace: trace,
        });
    }
}

/// One cell: a fixed target distance and layer kind.
pub fn run_cell(cfg: &FitConfig, master_seed: u64, r: f64, kind: LayerKind) -> Result<FitRecord> {
    // Both layer kinds see the same data for a given target.
    let mut data_rng = cell_rng(master_seed, &format!("fit/data/{r}"));
    let data = make_dataset(&mut data_rng, cfg, r)?;
    let cell = format!("fit/{kind}/{r}");
    let seed = crate::seeds::derive_seed(master_seed, &cell);
    let mut rec = fit_layer(cfg, kind, &data, seed)?;
    rec.target_distance = r;
    log::info!("{cell}: {} iterations, converged={}", rec.iterations, rec.converged);
    Ok(rec)
}

/// All `(target, layer)` cells, ordered by layer kind then target.
pub fn hyperplane_fit_experiment(cfg: &FitConfig, master_seed: u64) -> Result<Vec<FitRecord>> {
    cfg.validate()?;
    let cells: Vec<(LayerKind, f64)> =
        cfg.layers.iter().flat_map(|&kind| cfg.targets.iter().map(move |&r| (kind, r))).collect();
    cells.par_iter().map(|&(kind, r)| run_cell(cfg, master_seed, r, kind)).collect()
}
