//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix shape must be at least 1x1, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },

    #[error("data length {got} does not match shape (expected {expected})")]
    DataLength { expected: usize, got: usize },

    #[error("shape mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("zero-norm vector under cosine distance")]
    ZeroNormCosine,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty {0}")]
    EmptyInput(&'static str),

    #[error("question list is empty")]
    EmptyQuestions,

    #[error("dropout mask enumeration supports at most {max} units, got {got}")]
    TooManyDropoutUnits { got: usize, max: usize },

    #[error("predictive estimation needs at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("token id {token} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { token: u32, vocab: u32 },

    #[error("candidate count {got} does not match configured samples per prompt {expected}")]
    CandidateCount { expected: usize, got: usize },

    #[error("iteration {iteration} produced no strictly ordered preference pairs")]
    EmptyPairCorpus { iteration: usize },

    #[error("unsupported question mode: {0}")]
    UnsupportedQuestionMode(&'static str),

    #[error("metrics csv line {line}: {reason}")]
    CsvParse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag, used by the command-line error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyShape { .. } => "empty_shape",
            Error::DataLength { .. } => "data_length",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::ZeroNormCosine => "zero_norm_cosine",
            Error::InvalidConfig(_) => "invalid_config",
            Error::EmptyInput(_) => "empty_input",
            Error::EmptyQuestions => "empty_questions",
            Error::TooManyDropoutUnits { .. } => "too_many_dropout_units",
            Error::TooFewSamples(_) => "too_few_samples",
            Error::TokenOutOfRange { .. } => "token_out_of_range",
            Error::CandidateCount { .. } => "candidate_count",
            Error::EmptyPairCorpus { .. } => "empty_pair_corpus",
            Error::UnsupportedQuestionMode(_) => "unsupported_question_mode",
            Error::CsvParse { .. } => "csv_parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
