//! Convex-hull analysis of out-of-distribution generalization.
//!
//! Synthetic environments ([`envsim`]) feed a small MLP stack ([`nnet`]).
//! [`divergence`] and [`hull`] measure how far an unseen environment lies
//! from the mixtures of the training environments; [`bounds`] assembles the
//! resulting target-risk bounds; [`select`] implements diversity-driven
//! data selection; [`harness`] runs sweeps and emits CSV.

pub mod bounds;
pub mod divergence;
pub mod envsim;
pub mod harness;
pub mod error;
pub mod hull;
pub mod nnet;
pub mod rng;
pub mod select;

pub use error::{Error, Result};
