//! Forward-pass microbenchmark: Euclidean matmul, FGG with and without the
//! inference cache, and the baseline Lorentz layer.
//!
//! All buffers are allocated before timing. Each timed sample runs a variant
//! `inner` times back to back, with `inner` chosen so a sample lasts at least
//! `min_sample_ns`; this keeps small dimensions above the timer's resolution.
//! Variants are interleaved within every repetition so slow drift in clock speed
//! affects them alike. Runs on the calling thread only.

use std::hint::black_box;
use std::time::Instant;

use lorentz_fgg::layers::{Activation, ActivationBase, ChenLinear, FggLinear, FggScratch};
use lorentz_fgg::lorentz::Curvature;
use lorentz_fgg::sampling::{gaussian_matrix, gaussian_vector, random_batch};
use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::seeds::cell_rng;
use crate::stats::median;
use crate::{ExpError, Result};

pub const VARIANTS: [&str; 4] = ["euclidean_matmul", "fgg_uncached", "fgg_cached", "chen"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub kappa: f64,
    pub dims: Vec<usize>,
    pub batch: usize,
    pub reps: usize,
    pub warmup: usize,
    pub min_sample_ns: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { kappa: 1.0, dims: vec![16, 256, 4096], batch: 128, reps: 30, warmup: 3, min_sample_ns: 2_000_000 }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        Curvature::new(self.kappa)?;
        if self.reps < 30 {
            return Err(ExpError::InvalidConfig(format!("reps must be >= 30, got {}", self.reps)));
        }
        if self.batch == 0 || self.dims.is_empty() || self.dims.contains(&0) {
            return Err(ExpError::InvalidConfig("batch and every dim must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub variant: &'static str,
    pub dim: usize,
    pub batch: usize,
    pub reps: usize,
    /// Forward passes per timed sample.
    pub inner: u64,
    pub median_ns_per_forward: f64,
    pub ratio_to_euclidean: f64,
}

fn time_ns(inner: u64, f: &mut dyn FnMut()) -> f64 {
    let start = Instant::now();
    for _ in 0..inner {
        f();
    }
    start.elapsed().as_nanos() as f64 / inner as f64
}

/// Times all variants at every dimension. Timings are hardware-specific; only
/// their ordering is meaningful.
pub fn caching_benchmark(cfg: &BenchConfig, seed: u64) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let k = Curvature::new(cfg.kappa)?;
    let mut out = Vec::with_capacity(cfg.dims.len() * VARIANTS.len());
    for &d in &cfg.dims {
        out.extend(bench_dim(cfg, k, d, seed)?);
    }
    Ok(out)
}

fn bench_dim(cfg: &BenchConfig, k: Curvature, d: usize, seed: u64) -> Result<Vec<BenchRecord>> {
    let n = cfg.batch;
    let mut rng = cell_rng(seed, &format!("bench/{d}"));
    let x = random_batch(&mut rng, n, d, k, 2.0);
    let xe = x.slice(s![.., 1..]).to_owned();
    let relu = ActivationBase::Relu;

    let we = gaussian_matrix(&mut rng, d, d, 1.0 / (d as f64).sqrt());
    let be = gaussian_vector(&mut rng, d, 0.1);
    let mut ye = Array2::zeros((n, d));

    let mut fgg = FggLinear::init(&mut rng, d, d, Activation::lorentzian(relu), k);
    fgg.bias = gaussian_vector(&mut rng, d, 0.1);
    let cache = fgg.build_cache()?;
    let mut scratch = FggScratch::new(n, d, d);
    let mut products = Array2::zeros((n, d));
    let mut yu = Array2::zeros((n, d + 1));
    let mut yc = Array2::zeros((n, d + 1));

    let chen = ChenLinear::init(&mut rng, d, d, k);
    let mut yh = Array2::zeros((n, d + 1));

    // Errors cannot occur once shapes are fixed; they are checked once up front.
    fgg.forward_into(x.view(), &mut scratch, &mut yu)?;
    cache.forward_into(x.view(), &mut products, &mut yc)?;
    chen.forward_into(x.view(), &mut yh)?;

    let mut euclid = || {
        general_mat_mul(1.0, &xe, &we.t(), 0.0, &mut ye);
        for mut row in ye.rows_mut() {
            row.zip_mut_with(&be, |y, &b| *y = (*y + b).max(0.0));
        }
        black_box(&ye);
    };
    let mut uncached = || {
        let _ = fgg.forward_into(black_box(x.view()), &mut scratch, &mut yu);
        black_box(&yu);
    };
    let mut cached = || {
        let _ = cache.forward_into(black_box(x.view()), &mut products, &mut yc);
        black_box(&yc);
    };
    let mut baseline = || {
        let _ = chen.forward_into(black_box(x.view()), &mut yh);
        black_box(&yh);
    };
    let mut runs: [&mut dyn FnMut(); 4] = [&mut euclid, &mut uncached, &mut cached, &mut baseline];

    let mut inner = [1u64; 4];
    for (f, m) in runs.iter_mut().zip(inner.iter_mut()) {
        for _ in 0..cfg.warmup {
            f();
        }
        let once = time_ns(1, *f).max(1.0);
        *m = ((cfg.min_sample_ns as f64 / once).ceil() as u64).max(1);
    }
    let mut samples: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(cfg.reps)).collect();
    for _ in 0..cfg.reps {
        for ((f, &m), s) in runs.iter_mut().zip(&inner).zip(samples.iter_mut()) {
            s.push(time_ns(m, *f));
        }
    }
    let medians: Vec<f64> = samples.iter_mut().map(|s| median(s)).collect();
    log::info!("bench d={d}: medians {medians:?} ns, inner {inner:?}");
    Ok(VARIANTS
        .iter()
        .zip(&medians)
        .zip(&inner)
        .map(|((&variant, &m), &inner)| BenchRecord {
            variant,
            dim: d,
            batch: n,
            reps: cfg.reps,
            inner,
            median_ns_per_forward: m,
            ratio_to_euclidean: m / medians[0],
        })
        .collect())
}
