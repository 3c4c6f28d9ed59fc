//! Low-resource headline classification toolkit.
//!
//! The pieces, bottom-up:
//!
//! * [`corpus`] tokenizes text and loads corpora and labeled `label<TAB>text` files.
//! * [`embeddings`] trains skip-gram word vectors and PV-DBOW document vectors.
//! * [`augment`] generates training variants by swapping one word for an
//!   embedding neighbor, optionally gated by document-vector similarity.
//! * [`features`] turns sentences into TF, TF-IDF or pooled word-vector rows.
//! * [`models`] holds logistic regression, linear SVM, MLP and boosted trees.
//! * [`eval`] runs stratified k-fold experiments and scores weighted F1.

pub mod augment;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod gradcheck;
pub mod linalg;
pub mod models;

mod rng;

pub use error::{Error, Result};
