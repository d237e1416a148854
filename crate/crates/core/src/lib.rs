//! A desk-scale laboratory for studying heavy-tailed gradients in policy-gradient
//! methods.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: flat-parameter MLPs with manual backprop, a diagonal Gaussian policy,
//!   per-sample gradients and SGD/Adam.
//! - [`env`]: deterministic pendulum and point-mass environments and seeded rollouts.
//! - [`advantage`]: GAE, normalisation and negative-advantage clipping.
//! - [`algos`]: PPO, PPO-NoClip, Robust-PPO-NoClip and A2C losses and the training loop.
//! - [`robust`]: Weiszfeld geometric median, GMOM and Block-GMOM aggregation.
//! - [`taildiag`]: kurtosis, alpha-index and Anderson–Darling estimators, gradient
//!   capture and synthetic studies.
//! - [`harness`]: configuration, orchestration, JSONL persistence, checkpoints and reports.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advantage;
pub mod algos;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod robust;
pub mod taildiag;

pub use error::{Error, Result};
