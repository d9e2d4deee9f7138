//! Sparse neural networks built from random-graph structural priors,
//! attacked with FGSM and one-pixel differential evolution, with rank
//! correlation between graph properties and robustness measures.

pub mod attack;
pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod measure;
pub mod network;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
