//! Late fusion of two expert classifiers for long-tail classification.
//!
//! The crate is `no_std` (with `alloc`) and contains every numerical piece of
//! the system:
//!
//! - [`math`]: dense primitives with hand-written backward passes, the
//!   cross-entropy loss, ADAM and a central finite-difference oracle.
//! - [`longtail`]: class-frequency profiles, dataset splits, hold-out carving
//!   and a synthetic Gaussian-cluster task.
//! - [`experts`]: prediction matrices, a familiarity-biased expert simulator
//!   and bias diagnostics.
//! - [`fusion`]: the debiasing fusion module (sort, 2x2 convolution, pooled
//!   backbone, polynomial count-rescaling heads, Platt-scaled trade-off),
//!   its single-expert reduction and the fusion baselines.
//! - [`metrics`]: per-class, long-tail weighted, harmonic and bucketed
//!   accuracies, reliability bins/ECE and confusion matrices.
//! - [`training`]: the three-stage protocol, grid search and early stopping.
//!
//! File formats and the command-line tool live in the companion `ltfuse`
//! crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
pub mod experts;
pub mod fmath;
pub mod fusion;
pub mod longtail;
pub mod math;
pub mod metrics;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
