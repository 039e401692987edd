//! Vicinal-risk data augmentation over embedding representations of labeled
//! multilingual text corpora.
//!
//! - [`corpus`]: instances, JSONL I/O and the few-shot split
//! - [`embedding`]: embedding tables, encoding and nearest-token decoding
//! - [`vicinal`]: MIXUP and MIXAG interpolation
//! - [`ssmba`]: corruption by masking and pluggable reconstruction
//! - [`schedule`]: which instances are paired in each iteration
//! - [`stats`]: McNemar, Bonferroni, Pearson, precision/recall, flip rates
//! - [`pipeline`] and [`cli`]: end-to-end runs and the `vforge` binary

pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod pipeline;
pub mod schedule;
pub mod seed;
pub mod ssmba;
pub mod stats;
pub mod vicinal;

pub use error::{Error, Result};
