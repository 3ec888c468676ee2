//! Paraphrase-supervised refinement of averaged word-vector sentence
//! embeddings.
//!
//! A single square matrix `W` is learned so that, for sentence vectors
//! `v = mean(word vectors)`, the refined vectors `W v` of captions describing
//! the same image have cosine similarity near one while captions of different
//! images are near orthogonal. The crate covers the whole pipeline: loading
//! word vectors ([`embeddings`]), mining caption pairs into sub-training sets
//! ([`corpus`]), training `W` ([`trainer`]), STS evaluation ([`eval`]) and
//! the `sentrefine` command line ([`cli`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below name the concrete instantiations.

// Positivity checks are written `!(x > 0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod eval;
mod scalar;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use corpus::{CaptionGroup, ParaphraseBatch, SubTrainingSet};
pub use embeddings::{SentenceEmbedder, SentenceVector, WordVectorTable};
pub use eval::{EvalReport, StsDataset, StsPair};
pub use trainer::{
    LossBreakdown, NormalizationMode, SimilarityMatrix, TrainerConfig, TransitionMatrix,
};

pub type WordVectorTable64 = WordVectorTable<f64>;
pub type WordVectorTable32 = WordVectorTable<f32>;
pub type SentenceVector64 = SentenceVector<f64>;
pub type SentenceVector32 = SentenceVector<f32>;
pub type ParaphraseBatch64 = ParaphraseBatch<f64>;
pub type ParaphraseBatch32 = ParaphraseBatch<f32>;
pub type TransitionMatrix64 = TransitionMatrix<f64>;
pub type TransitionMatrix32 = TransitionMatrix<f32>;
pub type SimilarityMatrix64 = SimilarityMatrix<f64>;
pub type SimilarityMatrix32 = SimilarityMatrix<f32>;
pub type LossBreakdown64 = LossBreakdown<f64>;
pub type LossBreakdown32 = LossBreakdown<f32>;
