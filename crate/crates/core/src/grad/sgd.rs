use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    /// Upper bound on the Frobenius norm of each full parameter update.
    pub clip_norm: Option<f64>,
    pub momentum: Option<f64>,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig { learning_rate: 0.1, clip_norm: Some(1.0), momentum: None, seed: 0 }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidConfig(format!("clip_norm must be > 0, got {c}")));
            }
        }
        if let Some(m) = self.momentum {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::InvalidConfig(format!("momentum must be in [0, 1), got {m}")));
            }
        }
        Ok(())
    }
}

/// Plain or heavy-ball SGD with optional update-norm clipping.
#[derive(Debug, Clone)]
pub struct Sgd {
    cfg: SgdConfig,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(cfg: SgdConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Sgd { cfg, velocity: Vec::new() })
    }

    pub fn config(&self) -> &SgdConfig {
        &self.cfg
    }

    /// Applies one update in place and returns its Frobenius norm.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<f64> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch { expected: params.len(), found: grads.len() });
        }
        super::check_finite(grads)?;
        let direction: &[f64] = match self.cfg.momentum {
            Some(mu) => {
                if self.velocity.len() != grads.len() {
                    self.velocity = vec![0.0; grads.len()];
                }
                for (v, g) in self.velocity.iter_mut().zip(grads) {
                    *v = mu * *v + g;
                }
                &self.velocity
            }
            None => grads,
        };
        let lr = self.cfg.learning_rate;
        let raw_norm = lr * direction.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = match self.cfg.clip_norm {
            Some(c) if raw_norm > c => c / raw_norm,
            _ => 1.0,
        };
        let mut sq = 0.0;
        for (p, g) in params.iter_mut().zip(direction) {
            let delta = -lr * scale * g;
            sq += delta * delta;
            *p += delta;
        }
        Ok(sq.sqrt())
    }
}
