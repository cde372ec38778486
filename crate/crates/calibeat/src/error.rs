//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("negative weight at index {index}: {value}")]
    NegativeWeight { index: usize, value: String },
    #[error("weights sum to {mass}, not 1 (tolerance {tolerance})")]
    MassNotOne { mass: String, tolerance: f64 },
    #[error("action sets differ")]
    ActionSetMismatch,
    #[error("empty input")]
    EmptyInput,
    #[error("weights sum to zero")]
    ZeroTotalWeight,
    #[error("invalid alpha {0}: {1}")]
    BadAlpha(f64, String),
    #[error("rule requires a {expected}-action set, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("missing {0} constant for rule")]
    MissingConstant(&'static str),
    #[error("optimal-decision oracle failed: {0}")]
    OptimizerFailure(String),
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty sequence")]
    EmptySequence,
    #[error("binning is not a refinement: {0}")]
    NotARefinement(String),
    #[error("binning is not {delta}-local: {detail}")]
    NotDeltaLocal { delta: f64, detail: String },
    #[error("grid is missing or does not cover the simplex")]
    GridMissing,
    #[error("unknown strategy: {0}")]
    UnknownStrategy(String),
    #[error("cannot classify {0} as inside or outside the segment at this tolerance")]
    CollinearityMisclassified(String),
    #[error("matrix is degenerate ({0} distinct entries)")]
    DegenerateMatrix(usize),
    #[error("unknown action label: {0}")]
    UnknownAction(String),
    #[error("unknown rule id: {0}")]
    UnknownRule(String),
    #[error("{0} is not available in exact arithmetic")]
    ExactUnsupported(&'static str),
    #[error("transcript is invalid: {0}")]
    InvalidTranscript(String),
}

pub type Result<T> = std::result::Result<T, Error>;
