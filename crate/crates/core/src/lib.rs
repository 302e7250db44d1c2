//! Deterministic laboratory for just-in-time (change-level) defect prediction.
//!
//! The pipeline: load a Kamei-schema change dataset ([`dataset`]), audit it,
//! balance and transform training data ([`preprocess`]), inspect feature
//! structure with PCA ([`pca`]), train a small network ([`mlp`]) and score
//! feature combinations with cross-validated recall/precision and
//! effort-aware ranking ([`evaluate`]). [`synth`] generates datasets with a
//! known signal for end-to-end checks.
//!
//! Every randomized step takes an explicit seed and is bit-reproducible,
//! with or without the `parallel` feature.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod jacobi;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod parallel;
pub mod pca;
pub mod preprocess;
mod rng;
pub mod synth;

pub use dataset::{audit_dataset, summarize, AuditReport, ChangeRecord, ColumnSchema, Dataset, DatasetSummary, Metric};
pub use error::{Error, Result};
pub use parallel::Parallelism;
