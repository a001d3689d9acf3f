//! Seeded reproductions of the layer-level experiments: hyperplane fitting at growing
//! distances, tree embedding, depth profiles and the inference-cache benchmark.
//!
//! Every experiment cell owns an RNG stream seeded from `(master_seed, cell_id)`, so
//! results do not depend on thread count or scheduling.

pub mod bench;
pub mod error;
pub mod fit;
pub mod optional;
pub mod output;
pub mod profile;
pub mod seeds;
pub mod stats;
pub mod tree;
pub mod verify;

pub use error::{ExpError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Runs `f` inside a dedicated pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| ExpError::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
