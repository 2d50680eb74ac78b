//! Timestep-embedding-aware output caching for diffusion transformer sampling.
//!
//! A small AdaLN diffusion transformer, a deterministic sampler, the caching
//! policy with its polynomial rescaler, comparator baselines, quality metrics,
//! and the benchmark commands behind the `teacache` binary.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod calibration;
pub mod config;
pub mod error;
pub mod metrics;
pub mod model;
pub mod policy;
pub mod rng;
pub mod sampler;
pub mod svg;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
