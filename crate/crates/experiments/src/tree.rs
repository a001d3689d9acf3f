//! Embedding a complete m-ary tree as the outputs of one layer.
//!
//! Every node gets a fixed random input point near the origin; the layer maps the
//! inputs to `H^{out_dim}` and is trained so that hyperbolic distances between node
//! embeddings match tree distances up to a global scale `s`. The loss is the relative
//! stress `mean((d_e/(s d_t) − 1)²)` over all pairs, with `s` refitted to its
//! minimizer `Σr²/Σr` (`r = d_e/d_t`) at every step. Dividing by `s` keeps the loss
//! from being minimized by shrinking everything to one point.
//!
//! Near the origin the embedding is nearly Euclidean, where a bushy tree cannot be
//! embedded well; distortion falls as the embedding grows outward, so the step
//! count is governed by how fast a layer can push its outputs away from the origin.

use std::collections::VecDeque;

use lorentz_fgg::grad::{Sgd, SgdConfig, Trainable, TrainableChen, TrainableFgg};
use lorentz_fgg::layers::{Activation, ActivationBase, ChenLinear, FggLinear};
use lorentz_fgg::lorentz::{self, Curvature, LorentzPoint};
use lorentz_fgg::sampling::{point_at, unit_direction};
use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fit::LayerKind;
use crate::seeds::{cell_rng, derive_seed};
use crate::{ExpError, Result};

/// Complete m-ary tree of depth h with nodes numbered in breadth-first order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyTree {
    arity: usize,
    depth: usize,
    parent: Vec<Option<usize>>,
    level: Vec<usize>,
}

impl HierarchyTree {
    /// Arity 1 gives a path of `depth` edges.
    pub fn new(arity: usize, depth: usize) -> Result<Self> {
        if arity < 1 || depth < 1 {
            return Err(ExpError::InvalidConfig(format!("tree needs arity >= 1 and depth >= 1, got m={arity} h={depth}")));
        }
        let mut n: usize = 0;
        let mut width: usize = 1;
        for _ in 0..=depth {
            n = n.checked_add(width).ok_or_else(|| ExpError::InvalidConfig("tree too large".into()))?;
            width = width.saturating_mul(arity);
        }
        if n > 100_000 {
            return Err(ExpError::InvalidConfig(format!("tree with {n} nodes is too large")));
        }
        let mut parent = vec![None; n];
        let mut level = vec![0; n];
        for i in 1..n {
            let p = (i - 1) / arity;
            parent[i] = Some(p);
            level[i] = level[p] + 1;
        }
        Ok(HierarchyTree { arity, depth, parent, level })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn level(&self, node: usize) -> usize {
        self.level[node]
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.level[i] == self.depth)
    }

    /// Path length through the lowest common ancestor.
    pub fn distance(&self, mut u: usize, mut v: usize) -> usize {
        let mut d = 0;
        while self.level[u] > self.level[v] {
            u = self.parent[u].expect("non-root has a parent");
            d += 1;
        }
        while self.level[v] > self.level[u] {
            v = self.parent[v].expect("non-root has a parent");
            d += 1;
        }
        while u != v {
            u = self.parent[u].expect("non-root has a parent");
            v = self.parent[v].expect("non-root has a parent");
            d += 2;
        }
        d
    }

    /// All-pairs distances by breadth-first search from every node.
    pub fn distance_matrix(&self) -> Array2<f64> {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(p) = *p {
                adj[i].push(p);
                adj[p].push(i);
            }
        }
        let mut out = Array2::from_elem((n, n), f64::NAN);
        let mut queue = VecDeque::new();
        for src in 0..n {
            out[[src, src]] = 0.0;
            queue.push_back(src);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if out[[src, v]].is_nan() {
                        out[[src, v]] = out[[src, u]] + 1.0;
                        queue.push_back(v);
                    }
                }
            }
        }
        out
    }

    /// Unordered node pairs `(u, v)` with `u < v`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub kappa: f64,
    pub arity: usize,
    pub depth: usize,
    pub layers: Vec<LayerKind>,
    pub out_dim: usize,
    /// Inputs lie at exactly this hyperbolic distance from the origin, in random
    /// directions. A common radius keeps every input's spatial part the same size, so
    /// no node is pinned near the shared time coordinate.
    pub input_radius: f64,
    pub learning_rate: f64,
    #[serde(deserialize_with = "crate::optional::deserialize")]
    pub clip_norm: Option<f64>,
    #[serde(deserialize_with = "crate::optional::deserialize")]
    pub momentum: Option<f64>,
    /// Training stops once the mean relative distortion is at or below this.
    pub target_distortion: f64,
    /// Step budget per tree level; `None` calibrates it on a shallower tree.
    pub steps_per_level: Option<u64>,
    pub calibration_depth: usize,
    /// Step cap for the calibration run.
    pub calibration_cap: u64,
    /// Multiplier on the calibrated steps per level.
    pub budget_slack: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            kappa: 1.0,
            arity: 2,
            depth: 6,
            layers: vec![LayerKind::Fgg, LayerKind::Chen],
            out_dim: 2,
            input_radius: 2.0,
            learning_rate: 10.0,
            clip_norm: Some(1.0),
            momentum: None,
            target_distortion: 0.2,
            steps_per_level: None,
            calibration_depth: 3,
            calibration_cap: 200_000,
            budget_slack: 2.0,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        Curvature::new(self.kappa)?;
        self.sgd(0).validate()?;
        HierarchyTree::new(self.arity, self.depth)?;
        if self.out_dim < 2 {
            return Err(ExpError::InvalidConfig("out_dim must be >= 2".into()));
        }
        if !(self.input_radius.is_finite() && self.input_radius > 0.0) {
            return Err(ExpError::InvalidConfig("input_radius must be positive".into()));
        }
        if self.target_distortion.is_nan() || self.target_distortion < 0.0 {
            return Err(ExpError::InvalidConfig("target_distortion must be >= 0".into()));
        }
        if self.steps_per_level == Some(0) {
            return Err(ExpError::InvalidConfig("steps_per_level must be >= 1".into()));
        }
        if self.steps_per_level.is_none() {
            if self.calibration_depth < 1 || self.calibration_cap < 1 {
                return Err(ExpError::InvalidConfig("calibration needs depth >= 1 and cap >= 1".into()));
            }
            if !(self.budget_slack.is_finite() && self.budget_slack >= 1.0) {
                return Err(ExpError::InvalidConfig("budget_slack must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn sgd(&self, seed: u64) -> SgdConfig {
        SgdConfig { learning_rate: self.learning_rate, clip_norm: self.clip_norm, momentum: self.momentum, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    pub arity: usize,
    pub depth: usize,
    pub layer_kind: LayerKind,
    pub mean_relative_distortion: f64,
    pub worst_pair_distortion: f64,
    /// Fitted scale `s` in `d_emb ≈ s·d_tree`.
    pub scale: f64,
    pub steps_used: u64,
    /// The mean distortion reached the target at some step.
    pub converged: bool,
    /// First step at which the mean distortion was at or below the target.
    pub steps_to_target: Option<u64>,
    /// Largest distance from the origin over the deepest leaves.
    pub max_leaf_norm: f64,
    /// Largest relative hyperboloid residual seen during training.
    pub max_manifold_residual: f64,
}

/// A finished run with the embeddings it was scored on.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEmbedding {
    pub report: DistortionReport,
    /// One embedded point per node, time-first.
    pub embeddings: Array2<f64>,
}

/// `(mean, worst, scale)` of the relative distortion `|d_e/(s d_t) − 1|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionStats {
    pub mean: f64,
    pub worst: f64,
    pub scale: f64,
}

fn distortion_stats(d_emb: &[f64], d_tree: &[f64], scale: f64) -> DistortionStats {
    let mut sum = 0.0;
    let mut worst: f64 = 0.0;
    for (e, t) in d_emb.iter().zip(d_tree) {
        let r = (e / (scale * t) - 1.0).abs();
        sum += r;
        worst = worst.max(r);
    }
    let mean = sum / d_emb.len() as f64;
    if mean.is_finite() {
        DistortionStats { mean, worst, scale }
    } else {
        DistortionStats { mean: f64::INFINITY, worst: f64::INFINITY, scale }
    }
}

/// Distance and its gradient with respect to `y_u` (the gradient for `y_v` is the
/// negation when the stable branch is used, and symmetric otherwise).
///
/// Nearby points use `d = (2/√k) asinh(√k ‖y_u − y_v‖_L / 2)`, which avoids the
/// cancellation in `arccosh` near 1.
fn pair_distance_grad(yu: ArrayView1<f64>, yv: ArrayView1<f64>, k: Curvature, gu: &mut [f64], gv: &mut [f64]) -> f64 {
    let sk = k.sqrt();
    let c = -k.value() * minkowski(yu, yv);
    if c < 2.0 {
        let mut q = -(yu[0] - yv[0]).powi(2);
        for j in 1..yu.len() {
            q += (yu[j] - yv[j]).powi(2);
        }
        let q = q.max(0.0);
        let norm = q.sqrt();
        if norm == 0.0 {
            gu.fill(0.0);
            gv.fill(0.0);
            return 0.0;
        }
        let f = 1.0 / (norm * (1.0 + k.value() * q / 4.0).sqrt());
        gu[0] = -(yu[0] - yv[0]) * f;
        for j in 1..yu.len() {
            gu[j] = (yu[j] - yv[j]) * f;
        }
        for j in 0..yu.len() {
            gv[j] = -gu[j];
        }
        2.0 / sk * (sk * norm / 2.0).asinh()
    } else {
        // d/dc arccosh(c)/√k, and dc/dy_u = k (y_v0, −ȳ_v).
        let f = k.value() / (sk * (c * c - 1.0).sqrt());
        gu[0] = f * yv[0];
        gv[0] = f * yu[0];
        for j in 1..yu.len() {
            gu[j] = -f * yv[j];
            gv[j] = -f * yu[j];
        }
        c.acosh() / sk
    }
}

fn minkowski(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    -x[0] * y[0] + x.iter().zip(y.iter()).skip(1).map(|(a, b)| a * b).sum::<f64>()
}

/// Scale minimizing `mean((r/s − 1)²)` over the ratios `r = d_e/d_t`.
pub fn fitted_scale(d_emb: &[f64], d_tree: &[f64]) -> f64 {
    let (mut sr, mut sr2) = (0.0, 0.0);
    for (e, t) in d_emb.iter().zip(d_tree) {
        let r = e / t;
        sr += r;
        sr2 += r * r;
    }
    sr2 / sr
}

/// Relative stress at the fitted scale and its gradient with respect to the
/// embeddings. The scale is a minimizer, so it contributes no gradient term.
fn stress_and_grad(
    y: ArrayView2<f64>,
    pairs: &[(usize, usize)],
    d_tree: &[f64],
    k: Curvature,
    d_emb: &mut [f64],
    grad: &mut Array2<f64>,
) -> (f64, DistortionStats) {
    let w = y.ncols();
    let mut per_pair = vec![0.0; 2 * w * pairs.len()];
    for (i, &(u, v)) in pairs.iter().enumerate() {
        let (gu, gv) = per_pair[2 * w * i..2 * w * (i + 1)].split_at_mut(w);
        d_emb[i] = pair_distance_grad(y.row(u), y.row(v), k, gu, gv);
    }
    let scale = fitted_scale(d_emb, d_tree);
    let stats = distortion_stats(d_emb, d_tree, scale);
    grad.fill(0.0);
    if !(scale > 0.0 && scale.is_finite()) {
        return (f64::INFINITY, stats);
    }
    let n = pairs.len() as f64;
    let mut loss = 0.0;
    for (i, &(u, v)) in pairs.iter().enumerate() {
        let dev = d_emb[i] / (d_tree[i] * scale) - 1.0;
        loss += dev * dev;
        let dl = 2.0 * dev / (scale * d_tree[i] * n);
        let (gu, gv) = per_pair[2 * w * i..2 * w * (i + 1)].split_at(w);
        for j in 0..w {
            grad[[u, j]] += dl * gu[j];
            grad[[v, j]] += dl * gv[j];
        }
    }
    (loss / n, stats)
}

/// Relative residual `|k (z∘z) + 1| / max(1, k z_0²)`: the absolute residual of a
/// point computed from its spatial part grows with `z_0²` from rounding alone.
pub fn relative_manifold_residual(y: ArrayView2<f64>, k: Curvature) -> f64 {
    y.rows()
        .into_iter()
        .map(|r| lorentz::manifold_residual(r, k) / (k.value() * r[0] * r[0]).max(1.0))
        .fold(0.0, f64::max)
}

fn build_layer(kind: LayerKind, d_in: usize, d_out: usize, k: Curvature, seed: u64) -> Box<dyn Trainable> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    match kind {
        LayerKind::Fgg => Box::new(TrainableFgg::new(
            FggLinear::init(&mut rng, d_in, d_out, Activation::lorentzian(ActivationBase::Identity), k),
            false,
        )),
        LayerKind::Chen => Box::new(TrainableChen::new(ChenLinear::init(&mut rng, d_in, d_out, k), false, ActivationBase::Identity)),
    }
}

/// Fixed inputs, one per node, of spatial dimension equal to the node count.
pub fn node_inputs(tree: &HierarchyTree, cfg: &TreeConfig, master_seed: u64) -> Result<Array2<f64>> {
    let k = Curvature::new(cfg.kappa)?;
    let mut rng = cell_rng(master_seed, &format!("tree/inputs/{}/{}", tree.arity(), tree.depth()));
    let n = tree.len();
    let mut x = Array2::zeros((n, n + 1));
    for mut row in x.rows_mut() {
        row.assign(&point_at(&unit_direction(&mut rng, n), cfg.input_radius, k).coords());
    }
    Ok(x)
}

/// Whether training ends as soon as the distortion target is met.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    AtTarget,
    FullBudget,
}

/// Trains one layer for at most `budget` steps and scores the final embedding.
pub fn embed_tree(
    tree: &HierarchyTree,
    kind: LayerKind,
    cfg: &TreeConfig,
    budget: u64,
    stop: StopRule,
    master_seed: u64,
) -> Result<TreeEmbedding> {
    cfg.validate()?;
    let k = Curvature::new(cfg.kappa)?;
    let x = node_inputs(tree, cfg, master_seed)?;
    let cell = format!("tree/{kind}/{}/{}", tree.arity(), tree.depth());
    let seed = derive_seed(master_seed, &cell);
    let mut model = build_layer(kind, x.ncols() - 1, cfg.out_dim, k, seed);
    let mut opt = Sgd::new(cfg.sgd(seed))?;
    let mut params = model.params();

    let pairs = tree.pairs();
    let d_tree: Vec<f64> = pairs.iter().map(|&(u, v)| tree.distance(u, v) as f64).collect();
    let mut d_emb = vec![0.0; pairs.len()];
    let mut grad = Array2::zeros((tree.len(), cfg.out_dim + 1));
    let mut max_residual: f64 = 0.0;
    let mut steps = 0u64;
    let mut steps_to_target = None;
    loop {
        let y = model.forward(x.view(), true)?;
        max_residual = max_residual.max(relative_manifold_residual(y.view(), k));
        let (loss, stats) = stress_and_grad(y.view(), &pairs, &d_tree, k, &mut d_emb, &mut grad);
        if steps_to_target.is_none() && stats.mean <= cfg.target_distortion {
            steps_to_target = Some(steps);
        }
        let converged = steps_to_target.is_some();
        let mut done = (converged && stop == StopRule::AtTarget) || steps >= budget || !loss.is_finite();
        if !done {
            match model.backward(grad.view()) {
                Ok((g, _)) => {
                    opt.step(&mut params, &g)?;
                    model.set_params(&params)?;
                    steps += 1;
                    if steps.is_multiple_of(1000) {
                        log::debug!("{cell} step={steps} loss={loss:e} distortion={:e} s={:e}", stats.mean, stats.scale);
                    }
                }
                Err(lorentz_fgg::Error::NonFiniteGradient(_)) => done = true,
                Err(e) => return Err(e.into()),
            }
        }
        if done {
            let max_leaf_norm = tree.leaves().map(|i| lorentz::hyperbolic_norm_of_time(y[[i, 0]], k)).fold(0.0, f64::max);
            log::info!("{cell}: {steps} steps, distortion {:e}, s {:e}, converged={converged}", stats.mean, stats.scale);
            return Ok(TreeEmbedding {
                report: DistortionReport {
                    arity: tree.arity(),
                    depth: tree.depth(),
                    layer_kind: kind,
                    mean_relative_distortion: stats.mean,
                    worst_pair_distortion: stats.worst,
                    scale: stats.scale,
                    steps_used: steps,
                    converged,
                    steps_to_target,
                    max_leaf_norm,
                    max_manifold_residual: max_residual,
                },
                embeddings: y,
            });
        }
    }
}

/// Scores stored embeddings from scratch: distances through the library's `arccosh`
/// formula and tree distances from breadth-first search.
pub fn recompute_distortion(tree: &HierarchyTree, embeddings: ArrayView2<f64>, scale: f64, k: Curvature) -> Result<DistortionStats> {
    let dt = tree.distance_matrix();
    let points: Vec<LorentzPoint> =
        embeddings.rows().into_iter().map(|r| LorentzPoint::new_unchecked(r.to_owned(), k)).collect();
    let mut d_emb = Vec::new();
    let mut d_tree = Vec::new();
    for u in 0..tree.len() {
        for v in u + 1..tree.len() {
            d_emb.push(lorentz::distance(&points[u], &points[v])?);
            d_tree.push(dt[[u, v]]);
        }
    }
    Ok(distortion_stats(&d_emb, &d_tree, scale))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeExperiment {
    pub steps_per_level: u64,
    pub budget: u64,
    /// The calibration run, when one was needed.
    pub calibration: Option<TreeEmbedding>,
    /// One run per configured layer kind, in configuration order.
    pub runs: Vec<TreeEmbedding>,
}

/// Calibrates the per-level budget on a shallower tree with the FGG layer (stopping at
/// the target), then trains every configured layer on the full tree for exactly
/// `steps_per_level · depth` steps so that final distortions are comparable.
pub fn tree_embedding_experiment(cfg: &TreeConfig, master_seed: u64) -> Result<TreeExperiment> {
    cfg.validate()?;
    let (steps_per_level, calibration) = match cfg.steps_per_level {
        Some(c) => (c, None),
        None => {
            let shallow = HierarchyTree::new(cfg.arity, cfg.calibration_depth)?;
            let run = embed_tree(&shallow, LayerKind::Fgg, cfg, cfg.calibration_cap, StopRule::AtTarget, master_seed)?;
            if !run.report.converged {
                return Err(ExpError::Untrained(format!(
                    "calibration on depth {} stopped at distortion {:e} after {} steps",
                    cfg.calibration_depth, run.report.mean_relative_distortion, run.report.steps_used
                )));
            }
            let per_level = (cfg.budget_slack * run.report.steps_used.max(1) as f64 / cfg.calibration_depth as f64).ceil() as u64;
            (per_level.max(1), Some(run))
        }
    };
    let budget = steps_per_level.saturating_mul(cfg.depth as u64);
    let tree = HierarchyTree::new(cfg.arity, cfg.depth)?;
    let runs = cfg
        .layers
        .par_iter()
        .map(|&kind| embed_tree(&tree, kind, cfg, budget, StopRule::FullBudget, master_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(TreeExperiment { steps_per_level, budget, calibration, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lorentz_fgg::sampling::random_batch;

    #[test]
    fn node_counts_and_levels() {
        let t = HierarchyTree::new(2, 3).unwrap();
        assert_eq!(t.len(), 15);
        assert_eq!(t.leaves().count(), 8);
        assert_eq!(t.parent(0), None);
        assert_eq!(t.parent(6), Some(2));
        let path = HierarchyTree::new(1, 4).unwrap();
        assert_eq!(path.len(), 5);
        assert_eq!(path.distance(0, 4), 4);
        assert!(HierarchyTree::new(0, 2).is_err());
        assert!(HierarchyTree::new(2, 0).is_err());
    }

    #[test]
    fn lca_distance_matches_bfs() {
        for (m, h) in [(2, 4), (3, 3), (1, 5)] {
            let t = HierarchyTree::new(m, h).unwrap();
            let dm = t.distance_matrix();
            for u in 0..t.len() {
                for v in 0..t.len() {
                    assert_eq!(t.distance(u, v) as f64, dm[[u, v]]);
                }
            }
        }
    }

    #[test]
    fn pair_gradient_matches_finite_difference() {
        let k = Curvature::new(0.6).unwrap();
        for (a, b) in [([0.3, -0.2], [0.31, -0.19]), ([2.0, 1.0], [-3.0, 0.5]), ([0.1, 0.0], [0.1, 1e-4])] {
            let yu = lorentz::project_to_hyperboloid(ndarray::arr1(&a).view(), k).into_coords();
            let yv = lorentz::project_to_hyperboloid(ndarray::arr1(&b).view(), k).into_coords();
            let (mut gu, mut gv) = ([0.0; 3], [0.0; 3]);
            let d = pair_distance_grad(yu.view(), yv.view(), k, &mut gu, &mut gv);
            let exact = lorentz::distance(&LorentzPoint::new_unchecked(yu.clone(), k), &LorentzPoint::new_unchecked(yv.clone(), k)).unwrap();
            assert!((d - exact).abs() < 1e-9 * exact.max(1.0));
            let h = 1e-7;
            for j in 0..3 {
                let (mut p, mut m) = (yu.clone(), yu.clone());
                p[j] += h;
                m[j] -= h;
                let mut scratch = ([0.0; 3], [0.0; 3]);
                let fd = (pair_distance_grad(p.view(), yv.view(), k, &mut scratch.0, &mut scratch.1)
                    - pair_distance_grad(m.view(), yv.view(), k, &mut scratch.0, &mut scratch.1))
                    / (2.0 * h);
                assert!((fd - gu[j]).abs() < 1e-5 * gu[j].abs().max(1.0), "j={j} fd={fd} analytic={}", gu[j]);
            }
        }
    }

    #[test]
    fn stress_gradient_matches_finite_difference() {
        let k = Curvature::UNIT;
        let tree = HierarchyTree::new(2, 2).unwrap();
        let pairs = tree.pairs();
        let d_tree: Vec<f64> = pairs.iter().map(|&(u, v)| tree.distance(u, v) as f64).collect();
        let mut rng = cell_rng(5, "test");
        let y = random_batch(&mut rng, tree.len(), 2, k, 2.0);
        let mut d_emb = vec![0.0; pairs.len()];
        let mut grad = Array2::zeros(y.dim());
        stress_and_grad(y.view(), &pairs, &d_tree, k, &mut d_emb, &mut grad);
        let h = 1e-6;
        for (i, j) in [(0, 0), (3, 1), (6, 2)] {
            let mut p = y.clone();
            let mut m = y.clone();
            p[[i, j]] += h;
            m[[i, j]] -= h;
            let mut g2 = Array2::zeros(y.dim());
            let lp = stress_and_grad(p.view(), &pairs, &d_tree, k, &mut d_emb, &mut g2).0;
            let lm = stress_and_grad(m.view(), &pairs, &d_tree, k, &mut d_emb, &mut g2).0;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - grad[[i, j]]).abs() < 1e-6 * grad[[i, j]].abs().max(1e-3), "({i},{j}) {fd} vs {}", grad[[i, j]]);
        }
    }

    #[test]
    fn distortion_is_relative_to_the_scale() {
        let t = [1.0, 2.0, 3.0];
        let s = distortion_stats(&t.map(|x| 4.0 * x), &t, 4.0);
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.worst, 0.0);
        assert!((fitted_scale(&t.map(|x| 4.0 * x), &t) - 4.0).abs() < 1e-15);
        let off = distortion_stats(&[1.0, 2.0, 6.0], &t, 1.0);
        assert!((off.mean - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(off.worst, 1.0);
    }

    #[test]
    fn single_edge_fits_immediately() {
        let tree = HierarchyTree::new(1, 1).unwrap();
        let cfg = TreeConfig { arity: 1, depth: 1, target_distortion: 0.05, ..Default::default() };
        let run = embed_tree(&tree, LayerKind::Fgg, &cfg, 1000, StopRule::AtTarget, 1).unwrap();
        assert!(run.report.converged);
        assert!(run.report.mean_relative_distortion <= 0.05);
    }
}
