//! Learned edge-weight policies for cluster-based minibatch GCN training.
//!
//! An actor-critic agent assigns each training edge a discrete weight `2^i`.
//! The reweighted graph is split into `k` clusters by a multilevel weighted
//! partitioner, a ClusterGCN model is trained on the clusters (with the
//! original weights restored), and per-edge classification scores flow back
//! as reward. The configuration with the best validation micro-F1 is kept.
//!
//! Modules follow the pipeline: [`graph`] (CSR graphs, I/O, splits, SVD
//! features, LFR generation), [`partition`], [`nn`], [`trainer`], [`policy`],
//! [`driver`] (the search loop and run directories) and [`analysis`].

pub mod analysis;
pub mod driver;
pub mod error;
pub mod graph;
pub mod nn;
pub mod par;
pub mod partition;
pub mod policy;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
