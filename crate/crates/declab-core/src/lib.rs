//! Decoding-strategy laboratory.
//!
//! A deterministic toy multimodal decoder-only transformer together with a
//! family of decoding strategies (greedy, sampling, holistic contrastive
//! baselines, and introspective token-selection contrastive decoding) and a
//! synthetic evaluation harness for object-existence probing, caption
//! hallucination ratios, and compute-cost profiling.
//!
//! Everything is seeded and reproducible: the same configuration and master
//! seed produce bit-identical models, generations, and reports.

pub mod decode;
pub mod disturb;
pub mod error;
pub mod eval;
pub mod judge;
pub mod model;
pub mod numerics;
pub mod parallel;
pub mod seed;
pub mod select;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
