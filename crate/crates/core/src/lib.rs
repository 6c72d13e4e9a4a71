//! Complex-valued knowledge graph embeddings (ComplEx and 5★) with
//! conjugate parameter sharing for relation embeddings.
//!
//! Stored relation parameters are expanded into full coefficients on the fly,
//! so conjugate layouts keep half the relation memory of the full layout while
//! training against the same score function.

// Guards are written `!(x >= 0.0)` so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod account;
pub mod checkpoint;
pub mod complex;
pub mod data;
pub mod error;
pub mod eval;
pub mod mobius;
pub mod model;
pub mod report;
pub mod stats;
pub mod synth;
pub mod train;

pub use complex::{Complex, ComplexVec, Family, Layout, RelationParams};
pub use data::{build_filter_index, load_dataset, Dataset, FilterIndex, Split, Triple};
pub use error::{Error, Result};
pub use eval::{evaluate, Metrics};
pub use model::{score_batch, score_triple, ModelParams, RegMode, RegNorm};
pub use train::{fit, ModelConfig, Trainer};
