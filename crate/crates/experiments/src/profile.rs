//! Mean hyperbolic norm of activations through a trained stack of layers.
//!
//! The stack is a fully connected network of `depth` layers, each followed by
//! mean-only batch normalization, trained as a classifier on synthetic hierarchical
//! data. Class prototypes are the leaves of a random tree grown outward from the
//! origin by geodesic steps, and samples scatter around them. Logits are the signed
//! distances of the final output to the axis hyperplanes.
//!
//! Within a layer, centering acts on the pre-activations, so the profile splits
//! each layer into three points on the manifold: the linear map alone
//! ("linear"), after centering ("norm") and after the activation ("activation"),
//! which is what the next layer sees. Norms are measured in inference mode on the
//! training batch.

use lorentz_fgg::grad::{Sgd, SgdConfig, Trainable, TrainableChen, TrainableFgg};
use lorentz_fgg::layers::{Activation, ActivationBase, ChenLinear, FggLinear};
use lorentz_fgg::lorentz::{self, batch, Curvature, LorentzPoint, TangentVector};
use lorentz_fgg::sampling::gaussian_vector;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fit::LayerKind;
use crate::seeds::cell_rng;
use crate::{ExpError, Result};

pub const STAGE_INPUT: &str = "input";
pub const STAGE_LINEAR: &str = "linear";
pub const STAGE_NORM: &str = "norm";
pub const STAGE_ACTIVATION: &str = "activation";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub kappa: f64,
    pub layers: Vec<LayerKind>,
    /// Number of layers in the stack.
    pub depth: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Shape of the prototype tree; its leaves are the classes.
    pub branching: usize,
    pub hierarchy_depth: usize,
    /// Geodesic length of each prototype tree edge.
    pub spacing: f64,
    /// Standard deviation of the tangent noise around a prototype.
    pub noise: f64,
    pub samples_per_class: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    #[serde(deserialize_with = "crate::optional::deserialize")]
    pub clip_norm: Option<f64>,
    #[serde(deserialize_with = "crate::optional::deserialize")]
    pub momentum: Option<f64>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            kappa: 1.0,
            layers: vec![LayerKind::Fgg, LayerKind::Chen],
            depth: 4,
            input_dim: 8,
            hidden_dim: 16,
            branching: 2,
            hierarchy_depth: 3,
            spacing: 1.5,
            noise: 0.3,
            samples_per_class: 64,
            batch_size: 64,
            epochs: 60,
            learning_rate: 0.01,
            clip_norm: Some(1.0),
            momentum: Some(0.9),
        }
    }
}

impl ProfileConfig {
    pub fn validate(&self) -> Result<()> {
        Curvature::new(self.kappa)?;
        self.sgd(0).validate()?;
        let positive = [
            ("depth", self.depth),
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("hierarchy_depth", self.hierarchy_depth),
            ("samples_per_class", self.samples_per_class),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ExpError::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.branching < 2 {
            return Err(ExpError::InvalidConfig("branching must be >= 2".into()));
        }
        if self.classes() > 4096 {
            return Err(ExpError::InvalidConfig(format!("{} classes is too many", self.classes())));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) || !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(ExpError::InvalidConfig("spacing must be > 0 and noise >= 0".into()));
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.branching.saturating_pow(self.hierarchy_depth.min(32) as u32)
    }

    pub fn sgd(&self, seed: u64) -> SgdConfig {
        SgdConfig { learning_rate: self.learning_rate, clip_norm: self.clip_norm, momentum: self.momentum, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    /// 0 for the network input, then 1-based layer positions.
    pub layer_index: usize,
    pub stage: &'static str,
    pub mean_hyperbolic_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthProfile {
    pub layer_kind: LayerKind,
    pub rows: Vec<ProfileRow>,
    pub train_steps: u64,
    pub train_accuracy: f64,
    pub final_loss: f64,
}

impl DepthProfile {
    fn stage(&self, stage: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.stage == stage).map(|r| r.mean_hyperbolic_norm).collect()
    }

    pub fn input_norm(&self) -> f64 {
        self.stage(STAGE_INPUT).first().copied().unwrap_or(f64::NAN)
    }

    pub fn linear_norms(&self) -> Vec<f64> {
        self.stage(STAGE_LINEAR)
    }

    pub fn normalized_norms(&self) -> Vec<f64> {
        self.stage(STAGE_NORM)
    }

    pub fn activation_norms(&self) -> Vec<f64> {
        self.stage(STAGE_ACTIVATION)
    }

    /// `(input, output)` norm of every linear map, where the input is whatever
    /// entered the layer.
    pub fn linear_steps(&self) -> Vec<(f64, f64)> {
        let mut inputs = vec![self.input_norm()];
        inputs.extend(self.activation_norms());
        inputs.into_iter().zip(self.linear_norms()).collect()
    }

    /// No linear map shrinks the norm by more than `tol`.
    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        let steps = self.linear_steps();
        !steps.is_empty() && steps.iter().all(|&(i, o)| o >= i - tol)
    }

    /// Final linear output norm, taken before the last normalization, divided by
    /// the first layer's linear output norm.
    pub fn pre_final_ratio(&self) -> Option<f64> {
        let n = self.linear_norms();
        (n.len() >= 2).then(|| n[n.len() - 1] / n[0])
    }
}

/// Labelled points on `H^input_dim`.
#[derive(Debug, Clone)]
pub struct HierarchicalData {
    pub points: Array2<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

/// Isotropic Gaussian tangent vector at `p`: drawn at the origin and transported.
fn tangent_at<R: Rng + ?Sized>(rng: &mut R, p: &LorentzPoint, std: f64) -> Result<TangentVector> {
    let o = lorentz::origin(p.dim(), p.curvature());
    let mut v = Array1::zeros(p.dim() + 1);
    v.slice_mut(s![1..]).assign(&gaussian_vector(rng, p.dim(), std));
    Ok(lorentz::parallel_transport(&o, p, &TangentVector::new(v, &o)?)?)
}

/// Leaves of a random prototype tree grown from the origin, with Gaussian tangent
/// noise around each leaf.
pub fn hierarchical_data<R: Rng + ?Sized>(rng: &mut R, cfg: &ProfileConfig) -> Result<HierarchicalData> {
    let k = Curvature::new(cfg.kappa)?;
    let mut level = vec![lorentz::origin(cfg.input_dim, k)];
    for _ in 0..cfg.hierarchy_depth {
        let mut next = Vec::with_capacity(level.len() * cfg.branching);
        for p in &level {
            for _ in 0..cfg.branching {
                let dir = tangent_at(rng, p, 1.0)?;
                let step = dir.scaled(cfg.spacing / dir.norm()?);
                next.push(lorentz::exp_map(p, &step)?);
            }
        }
        level = next;
    }
    let classes = level.len();
    let n = classes * cfg.samples_per_class;
    let mut points = Array2::zeros((n, cfg.input_dim + 1));
    let mut labels = Vec::with_capacity(n);
    for (c, proto) in level.iter().enumerate() {
        for _ in 0..cfg.samples_per_class {
            let noise = tangent_at(rng, proto, cfg.noise)?;
            let x = lorentz::exp_map(proto, &noise)?;
            points.row_mut(labels.len()).assign(&x.coords());
            labels.push(c);
        }
    }
    Ok(HierarchicalData { points, labels, classes })
}

#[derive(Debug, Clone)]
enum Block {
    Fgg(TrainableFgg),
    Chen(TrainableChen),
}

impl Block {
    fn trainable(&mut self) -> &mut dyn Trainable {
        match self {
            Block::Fgg(l) => l,
            Block::Chen(l) => l,
        }
    }

    fn infer(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(match self {
            Block::Fgg(l) => l.infer(x)?,
            Block::Chen(l) => l.infer(x)?,
        })
    }

    /// Points after the linear map alone and after centering, both before the
    /// activation. Normalization uses its running mean.
    fn stages(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let (k, raw, mean) = match self {
            Block::Fgg(l) => {
                let mut plain = l.layer.clone();
                plain.activation = Activation::identity();
                let sk = l.layer.k.sqrt();
                let z = plain.forward(x)?.slice(s![.., 1..]).mapv(|v| (sk * v).asinh() / sk);
                (l.layer.k, z, l.bn.as_ref().map(|b| b.running_mean.clone()))
            }
            Block::Chen(l) => {
                let u = l.layer.forward(x)?.slice(s![.., 1..]).to_owned();
                (l.layer.k, u, l.bn.as_ref().map(|b| b.running_mean.clone()))
            }
        };
        let centered = match mean {
            Some(m) => &raw - &m,
            None => raw.clone(),
        };
        let to_point = |u: &Array2<f64>| {
            let spatial = match self {
                Block::Fgg(_) => {
                    let sk = k.sqrt();
                    u.mapv(|z| (sk * z).sinh() / sk)
                }
                Block::Chen(_) => u.clone(),
            };
            batch::project_to_hyperboloid(spatial.view(), k)
        };
        Ok((to_point(&raw), to_point(&centered)))
    }
}

/// Stack of normalized layers; hidden layers use ReLU, the last layer none.
#[derive(Debug, Clone)]
pub struct Network {
    kind: LayerKind,
    k: Curvature,
    blocks: Vec<Block>,
    train_steps: u64,
}

impl Network {
    /// `widths` lists the input dimension followed by each layer's output dimension.
    pub fn new<R: Rng + ?Sized>(rng: &mut R, kind: LayerKind, widths: &[usize], k: Curvature) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(ExpError::InvalidConfig(format!("bad layer widths {widths:?}")));
        }
        let last = widths.len() - 2;
        let blocks = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let base = if i == last { ActivationBase::Identity } else { ActivationBase::Relu };
                match kind {
                    LayerKind::Fgg => {
                        let layer = FggLinear::init(rng, w[0], w[1], Activation::lorentzian(base), k);
                        Block::Fgg(TrainableFgg::new(layer, true))
                    }
                    LayerKind::Chen => Block::Chen(TrainableChen::new(ChenLinear::init(rng, w[0], w[1], k), true, base)),
                }
            })
            .collect();
        Ok(Network { kind, k, blocks, train_steps: 0 })
    }

    /// Wraps already-built FGG layers, each followed by normalization.
    pub fn from_fgg_layers(layers: Vec<FggLinear>) -> Result<Self> {
        let k = layers.first().ok_or_else(|| ExpError::InvalidConfig("empty network".into()))?.k;
        let blocks = layers.into_iter().map(|l| Block::Fgg(TrainableFgg::new(l, true))).collect();
        Ok(Network { kind: LayerKind::Fgg, k, blocks, train_steps: 0 })
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn infer(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut h = x.to_owned();
        for b in &self.blocks {
            h = b.infer(h.view())?;
        }
        Ok(h)
    }

    fn params(&mut self) -> Vec<f64> {
        self.blocks.iter_mut().flat_map(|b| b.trainable().params()).collect()
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let mut offset = 0;
        for b in &mut self.blocks {
            let t = b.trainable();
            let n = t.num_params();
            t.set_params(&flat[offset..offset + n])?;
            offset += n;
        }
        Ok(())
    }

    /// One optimizer step of softmax cross-entropy on a batch; returns the loss.
    pub fn train_step(&mut self, sgd: &mut Sgd, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        let mut h = x.to_owned();
        for b in &mut self.blocks {
            h = b.trainable().forward(h.view(), true)?;
        }
        let (loss, upstream) = cross_entropy(h.view(), labels, self.k)?;
        let mut grads = Vec::with_capacity(self.blocks.len());
        let mut up = upstream;
        for b in self.blocks.iter_mut().rev() {
            let (g, dx) = b.trainable().backward(up.view())?;
            grads.push(g);
            up = dx;
        }
        let flat_grad: Vec<f64> = grads.into_iter().rev().flatten().collect();
        let mut params = self.params();
        sgd.step(&mut params, &flat_grad)?;
        self.set_params(&params)?;
        self.train_steps += 1;
        Ok(loss)
    }

    /// Per-stage norms without checking that the network was trained.
    pub fn measure(&self, x: ArrayView2<f64>) -> Result<Vec<ProfileRow>> {
        let mean_norm = |z: &Array2<f64>| batch::hyperbolic_norm(z.view(), self.k).mean().unwrap_or(0.0);
        let mut rows = vec![ProfileRow { layer_index: 0, stage: STAGE_INPUT, mean_hyperbolic_norm: mean_norm(&x.to_owned()) }];
        let mut h = x.to_owned();
        for (i, b) in self.blocks.iter().enumerate() {
            let (lin, norm) = b.stages(h.view())?;
            h = b.infer(h.view())?;
            for (stage, z) in [(STAGE_LINEAR, &lin), (STAGE_NORM, &norm), (STAGE_ACTIVATION, &h)] {
                rows.push(ProfileRow { layer_index: i + 1, stage, mean_hyperbolic_norm: mean_norm(z) });
            }
        }
        Ok(rows)
    }

    pub fn accuracy(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        let y = self.infer(x)?;
        let hits = y.rows().into_iter().zip(labels).filter(|(r, &l)| argmax(r.slice(s![1..]).iter()) == l).count();
        Ok(hits as f64 / labels.len().max(1) as f64)
    }
}

fn argmax<'a>(it: impl Iterator<Item = &'a f64>) -> usize {
    it.enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best }).0
}

/// Logit `j` is the signed distance `asinh(sqrt(k) ȳ_j)/sqrt(k)` of the output to
/// the `j`-th axis hyperplane.
pub fn logits(y: ArrayView2<f64>, k: Curvature) -> Array2<f64> {
    let sk = k.sqrt();
    y.slice(s![.., 1..]).mapv(|v| (sk * v).asinh() / sk)
}

/// Mean softmax cross-entropy over [`logits`] and its gradient with respect to the
/// full ambient output (the time column gets zero).
pub fn cross_entropy(y: ArrayView2<f64>, labels: &[usize], k: Curvature) -> Result<(f64, Array2<f64>)> {
    let n = y.nrows();
    if n == 0 || labels.len() != n {
        return Err(ExpError::InvalidConfig("labels must match a non-empty batch".into()));
    }
    let classes = y.ncols() - 1;
    let mut grad = Array2::zeros(y.dim());
    let mut loss = 0.0;
    let all = logits(y, k);
    for (((row, logits), mut g), &l) in y.rows().into_iter().zip(all.rows()).zip(grad.rows_mut()).zip(labels) {
        if l >= classes {
            return Err(ExpError::InvalidConfig(format!("label {l} out of range for {classes} outputs")));
        }
        let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let e: Array1<f64> = logits.mapv(|v| (v - m).exp());
        let z = e.sum();
        loss += z.ln() + m - logits[l];
        let mut gs = g.slice_mut(s![1..]);
        gs.assign(&(e / (z * n as f64)));
        gs[l] -= 1.0 / n as f64;
        gs.zip_mut_with(&row.slice(s![1..]), |d, &v| *d /= (1.0 + k.value() * v * v).sqrt());
    }
    Ok((loss / n as f64, grad))
}

/// Profiles a network that has been trained for at least one step.
pub fn depth_profile(net: &Network, x: ArrayView2<f64>, labels: &[usize]) -> Result<DepthProfile> {
    if net.train_steps == 0 {
        return Err(ExpError::Untrained(format!("{} stack has taken no optimizer steps", net.kind)));
    }
    let (final_loss, _) = cross_entropy(net.infer(x)?.view(), labels, net.k)?;
    Ok(DepthProfile {
        layer_kind: net.kind,
        rows: net.measure(x)?,
        train_steps: net.train_steps,
        train_accuracy: net.accuracy(x, labels)?,
        final_loss,
    })
}

/// Trains one stack of the given kind on fresh hierarchical data.
pub fn train_network(cfg: &ProfileConfig, kind: LayerKind, seed: u64) -> Result<(Network, HierarchicalData)> {
    cfg.validate()?;
    let k = Curvature::new(cfg.kappa)?;
    let mut data_rng = cell_rng(seed, "profile/data");
    let data = hierarchical_data(&mut data_rng, cfg)?;
    let mut rng = cell_rng(seed, &format!("profile/{kind}"));
    let mut widths = vec![cfg.input_dim];
    widths.extend(std::iter::repeat_n(cfg.hidden_dim, cfg.depth - 1));
    widths.push(data.classes);
    let mut net = Network::new(&mut rng, kind, &widths, k)?;
    let mut sgd = Sgd::new(cfg.sgd(rng.random()))?;
    let mut order: Vec<usize> = (0..data.labels.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = data.points.select(Axis(0), chunk);
            let lb: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            total += net.train_step(&mut sgd, xb.view(), &lb)?;
        }
        log::debug!("profile {kind} epoch {epoch}: mean loss {:.4}", total / order.chunks(cfg.batch_size).len() as f64);
    }
    Ok((net, data))
}

/// Trains and profiles every configured layer kind; cells run in parallel.
pub fn depth_profile_experiment(cfg: &ProfileConfig, seed: u64) -> Result<Vec<DepthProfile>> {
    cfg.validate()?;
    cfg.layers
        .par_iter()
        .map(|&kind| {
            let (net, data) = train_network(cfg, kind, seed)?;
            let p = depth_profile(&net, data.points.view(), &data.labels)?;
            log::info!(
                "profile {kind}: accuracy {:.3}, linear norms {:?}",
                p.train_accuracy,
                p.linear_norms()
            );
            Ok(p)
        })
        .collect()
}
