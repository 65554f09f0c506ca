//! Conditional theorem proving.
//!
//! A differentiable backward-chaining prover whose rules are produced at
//! each proof step by trainable, goal-conditioned reformulation modules.
//! The crate bundles the symbolic logic layer, a small reverse-mode
//! autodiff engine, the prover, the reformulators, training loops for link
//! prediction and relation classification, and evaluation metrics.

pub mod autodiff;
pub mod cli;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod logic;
pub mod model;
pub mod prover;
pub mod reformulate;
pub mod training;

pub use error::{Error, Result};
