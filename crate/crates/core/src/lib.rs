//! Syntactic and semantic word-feature spaces for narrative stimuli, aligned
//! to fMRI acquisition timing and scored with voxelwise ridge encoding models.
//!
//! The crate is organised as a chain of stages:
//!
//! - [`treebank`] reads constituency trees, CoNLL-U dependency parses and word
//!   timing into a [`treebank::StimulusCorpus`].
//! - [`features`] builds the per-word feature spaces (punctuation, complexity
//!   metrics, POS/dependency one-hots, complete/incomplete subtree encodings,
//!   PCA reduction of ingested embeddings).
//! - [`incparser`] is a probabilistic incremental top-down beam parser whose
//!   beam states give the INC feature space.
//! - [`gcn`] trains a gated syntactic graph convolutional network over the
//!   dependency graphs and extracts DEP embeddings.
//! - [`signal`] maps word-rate features onto the TR grid (Lanczos or chunk
//!   averaging) and expands them with FIR delays.
//! - [`encoder`] fits cross-validated ridge models per voxel.
//! - [`stats`] runs block permutation and block bootstrap tests, BH-FDR and ROI
//!   aggregation; [`atlas`] holds the language ROI registry.
//! - [`pipeline`] wires everything behind the `parsebrain` command line tool.
//!
//! Runnable walkthroughs of each stage live in `crates/core/examples/`.

pub mod atlas;
pub mod encoder;
pub mod features;
pub mod gcn;
pub mod incparser;
pub mod linalg;
pub mod pipeline;
pub mod signal;
pub mod stats;
pub mod synth;
pub mod treebank;

pub use features::{FeatureMatrix, FeatureSpace};
pub use treebank::{ConstituencyTree, DependencyGraph, StimulusCorpus};
