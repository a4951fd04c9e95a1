//! Human-in-the-loop document triage with LDA topic models.
//!
//! The pipeline: [`ingest`] a manifest of plain-text documents, [`lda`] to
//! extract topics, let an analyst map topics to ranked signaling
//! categories, classify documents with [`rules`], and score the result
//! against gold labels with [`eval`].

pub mod artifacts;
pub mod category;
pub mod eval;
pub mod ingest;
pub mod lda;
pub mod rules;
pub mod synthetic;

pub use category::Category;
