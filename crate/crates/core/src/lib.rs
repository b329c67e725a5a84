//! Curved contrastive targets, triple-encoder scoring and evaluation.
//!
//! Utterances are encoded independently into a before space (`[B]`, or the
//! ordered pair subspaces `[B1]`/`[B2]`) and an after space (`[A]`). A dialog
//! context is scored against candidates either utterance by utterance
//! (bi-encoder) or through the mean-pooled mixtures of every ordered context
//! pair (triple-encoder), which grow by one row per turn and are accumulated
//! incrementally.
//!
//! The crate is `no_std` and needs only `alloc`; file formats, the CLI and the
//! benchmark live in the `trienc` crate.

#![no_std]

extern crate alloc;

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod inference;
pub mod rng;
pub mod store;
pub mod synth;
pub mod targets;
pub mod trainer;

pub use corpus::{Corpus, UttId};
pub use encoder::{Parity, SubspaceKey, Tag, ToyEncoderParams};
pub use error::{Error, Result};
pub use geometry::{Matrix, ScoreMatrix, Vector};
pub use store::EmbeddingStore;
