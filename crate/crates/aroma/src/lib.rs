//! Autonomous rank-one matrix adaptation.
//!
//! Adapters that grow their own rank: each adapted layer trains one rank-one
//! component at a time, merges it into a frozen accumulator when its inner
//! loop converges, and stops growing when the marginal weight change falls
//! below an outer tolerance. Optimizer state is pruned at each merge so
//! successive components explore fresh subspaces, with a sawtooth
//! learning-rate schedule re-warming after every reset.
//!
//! The crate ships the trainable model core with exact adapter gradients
//! ([`model`]), the Adam-with-reset optimizer ([`optim`]), the dual-loop
//! growth controller ([`controller`]), fixed-rank baselines ([`baselines`]),
//! spectral and complexity analytics ([`analysis`]), and a seeded experiment
//! harness ([`harness`]).
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `aroma` binary for the `train` / `compare` / `analyze` / `flops`
//! command-line entry points.

// Dense kernels are written as index loops over row-major buffers.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod baselines;
pub mod controller;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod trainer;

pub use error::{Error, Result};
