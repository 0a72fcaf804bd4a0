//! Sentence encoders and the auxiliary prediction tasks used to probe them.
//!
//! The crate trains two families of sentence encoders from scratch (averaged
//! skip-gram word vectors and an LSTM auto-encoder), ingests externally
//! computed embeddings, and measures how much length, word-content and
//! word-order information their fixed-size vectors retain by training small
//! probing classifiers on derived datasets.
//!
//! Module map:
//!
//! - [`nncore`]: tensors, parameters, hand-derived layers, AdaGrad, gradient checking,
//!   and the checkpoint container.
//! - [`corpus`]: tokenization, vocabularies, length filtering, splits and control corpora.
//! - [`encoders`]: skip-gram with hierarchical softmax, CBOW averaging, the LSTM
//!   auto-encoder and external embedding files.
//! - [`tasks`]: length, content and order dataset generation.
//! - [`probe`]: the one-hidden-layer probing classifier.
//! - [`eval`]: BLEU, paired t-tests, rank correlation, curves and reports.

pub mod corpus;
pub mod encoders;
mod error;
pub mod eval;
pub mod nncore;
pub mod probe;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};
