//! Exact inversion of Self-Organizing Map distance activations and
//! manifold-aware trajectory control in input space.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! - [`geometry`]: squared-distance activations, their Jacobians and the
//!   radial/tangential single-cell perturbation.
//! - [`som`]: prototype sets on rectangular or toroidal lattices, online
//!   training, BMU queries and prototype labelling.
//! - [`inversion`]: the anchored linear system `Bz = c` that recovers an input
//!   from its activations, with conditioning and noise diagnostics.
//! - [`music`]: the Tikhonov-regularized update rule, its spectral-filter
//!   twin, the free / informed / cluster exploration modes and trajectories.
//! - [`metrics`]: continuity and topology-aware trajectory statistics.
//! - [`data`]: Gaussian mixture sampling, standardization and PCA whitening.
//!
//! Everything that touches files, threads or the command line lives in the
//! companion `music-lab` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod geometry;
pub mod inversion;
pub mod metrics;
pub mod music;
pub mod som;
pub mod stats;

pub use error::{Error, Result};
pub use som::{Lattice, PrototypeSet, Topology};

/// Seedable generator used for every stochastic routine in the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate generator from a seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Builds a generator for the `stream`-th independent work item of a run.
///
/// Results that are split across workers use one stream per item so the
/// outcome does not depend on how items are scheduled.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(stream);
    rng
}
