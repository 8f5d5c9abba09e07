//! Voice discovery: cluster behavioural embeddings of annotator–item pairs and
//! validate the clusters against annotator metadata.
//!
//! The pipeline is `corpus` (load and join) → `dimred` (none / PCA / UMAP) →
//! `cluster` (k-means / GMM / HDBSCAN) → `validate` (internal and external
//! metrics, voice typing), with `sweep` searching configurations by
//! silhouette and `synthpop` generating populations with planted voices.

pub mod cluster;
pub mod config;
pub mod corpus;
pub mod dimred;
pub mod error;
pub mod matrix;
pub mod report;
pub mod rng;
pub mod sweep;
pub mod synthpop;
pub mod validate;

pub use error::{Error, ErrorKind, Result};
pub use matrix::Matrix;

/// Cluster id of rows that belong to no cluster.
pub const NOISE: i32 = -1;
