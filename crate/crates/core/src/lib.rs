//! Graph structure metric and metric-driven pre-training for graph neural
//! encoders.
//!
//! The crate is `no_std` (with `alloc`) and carries every numeric piece of
//! the toolkit:
//!
//! - [`graph`]: attributed undirected graphs, corpora and homophily.
//! - [`autodiff`]: a small dense `f64` tensor tape with reverse-mode
//!   gradients and the Adam optimizer.
//! - [`spectral`]: Laplacians, a cyclic Jacobi eigensolver and eigenvalue
//!   fingerprints.
//! - [`fingerprint`]: path-based and circular bit-vector fingerprints.
//! - [`similarity`]: Tanimoto/Dice/cosine kernels, rank statistics, and the
//!   MGS score (Spearman correlation between structural and embedding
//!   similarity of sampled graph pairs).
//! - [`gnn`]: GCN, GIN, ChebNet, FAGCN and FCN encoders with mean-pool
//!   readout and a linear head.
//! - [`train`]: the rank-correlation pre-training objective, fine-tuning,
//!   ROC-AUC and the synthetic corpus generator.
//!
//! File formats, configuration and the command line live in the `graphmgs`
//! companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod autodiff;
pub mod error;
pub mod fingerprint;
pub mod gnn;
pub mod graph;
pub mod hash;
pub mod seed;
pub mod similarity;
pub mod spectral;
pub mod train;

pub use error::{Error, Result};
pub use graph::{GraphCorpus, LabeledGraph};
