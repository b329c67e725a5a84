use crate::encoder::{Parity, Tag};

/// Errors produced by the scoring, training and evaluation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("zero-norm vector{}", fmt_row(.what, .row))]
    ZeroNorm { what: &'static str, row: Option<usize> },

    #[error("vector must have at least one entry")]
    EmptyVector,

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("turn distance k - i = {distance} outside window 0 < k - i < {w}")]
    OutOfWindow { distance: i64, w: usize },

    #[error("turn order violated: need i < j < k, got ({i}, {j}, {k})")]
    OrderViolation { i: usize, j: usize, k: usize },

    #[error("invalid window size {0}: need w >= 3")]
    InvalidWindow(usize),

    #[error("utterance pool needs at least 2 distinct utterances")]
    PoolTooSmall,

    #[error("unknown utterance id {0}")]
    UnknownUtterance(usize),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("dialog has no utterances")]
    EmptyDialog,

    #[error("context of {turn} turns is too short, need at least {required}")]
    InsufficientContext { turn: usize, required: usize },

    #[error("pair state is empty")]
    EmptyState,

    #[error("planning context is empty")]
    EmptyContext,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("a [B2] encoding is pending; call finalize_b1 first")]
    PendingB1,

    #[error("no pending [B2] encoding to finalize")]
    NothingToFinalize,

    #[error("candidate set has {found} rows, state was built for {expected}")]
    CandidateCountMismatch { expected: usize, found: usize },

    #[error("subspace {tag}{} is not available", fmt_parity(.parity))]
    MissingSubspace { tag: Tag, parity: Option<Parity> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

fn fmt_row(what: &str, row: &Option<usize>) -> alloc::string::String {
    match row {
        Some(r) => alloc::format!(" in {what} row {r}"),
        None if what.is_empty() => alloc::string::String::new(),
        None => alloc::format!(" ({what})"),
    }
}

fn fmt_parity(parity: &Option<Parity>) -> &'static str {
    match parity {
        Some(Parity::Even) => "/even",
        Some(Parity::Odd) => "/odd",
        None => "",
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
