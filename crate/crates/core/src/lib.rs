//! Desk-scale laboratory for self-improving generative policies.
//!
//! The crate wires together a synthetic compositional world, toy continuous
//! and discrete generator policies, preference-pair construction from
//! self-assessed alignment scores, and a family of preference-optimization
//! objectives (discrete DPO, continuous DPO, and its kernelized
//! generalization). Every stochastic choice flows from splittable
//! counter-based RNG streams, so full runs reproduce bit-for-bit from a
//! configuration and a seed.

pub mod domain;
pub mod error;
pub mod io;
pub mod kernels;
pub mod losses;
pub mod matrix;
pub mod models;
pub mod pipeline;
pub mod rng;
pub mod world;

pub use error::{Error, Result};
