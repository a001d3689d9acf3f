//! Lorentz (hyperboloid) model of hyperbolic space and the distance-to-hyperplane
//! Lorentz fully connected layer.
//!
//! Coordinates are always time-first: index 0 holds the time component, indices
//! `1..=D` the spatial part. Batches are row-major `Array2<f64>` with one point
//! per row.

pub mod error;
pub mod grad;
pub mod hyperplane;
pub mod io;
pub mod layers;
pub mod lorentz;
pub mod sampling;

pub use error::{Error, Result};
pub use hyperplane::{HyperplaneParams, TransportedNormal};
pub use layers::{
    Activation, ActivationBase, ActivationMode, ChenLinear, FggLinear, LayerCache,
    MeanOnlyBatchNorm, WeightNorm,
};
pub use lorentz::{Curvature, LorentzPoint, TangentVector};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
