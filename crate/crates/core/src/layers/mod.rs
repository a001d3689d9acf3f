//! Lorentz fully connected layers and their normalization helpers.

mod activation;
mod batchnorm;
mod cache;
mod chen;
mod fgg;
pub(crate) mod kernel;
mod weightnorm;

pub use activation::{lorentzian_activation, Activation, ActivationBase, ActivationMode};
pub use batchnorm::MeanOnlyBatchNorm;
pub use cache::LayerCache;
pub use chen::ChenLinear;
pub use fgg::{Decomposed, FggLinear, FggScratch};
pub use weightnorm::WeightNorm;
