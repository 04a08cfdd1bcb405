//! Multi-path temporal skill assessment.
//!
//! Each skill aspect (visual, tool, proxy, event) arrives as a feature
//! sequence. A path encodes its sequence, scores every time step, and a
//! path dependency module looks at all paths at once to weight those
//! scores over time. The weighted scores fuse into one trial-level score.
//! Training combines a regression loss on that score with a predictive
//! contrastive loss on the embeddings.
//!
//! - [`numcore`]: tensors, kernels, reverse-mode gradients, Adam.
//! - [`model`]: the assessment model and its losses.
//! - [`data`]: sequence files, manifests, splits, synthetic trials.
//! - [`eval`]: SROCC, Fisher z, cross-validation, correlation analysis.

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numcore;
pub mod par;

pub use error::{Error, Result};
pub use par::Execution;
