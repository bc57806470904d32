//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // corpus
    #[error("unparseable line {line_no}: {text:?}")]
    UnparseableLine { line_no: usize, text: String },
    #[error("traceroute contains no responsive hops")]
    EmptyPath,
    #[error("duplicate entry for {key}")]
    DuplicateEntry { key: String },
    #[error("bad country code {code:?}")]
    BadCountryCode { code: String },
    #[error("invalid boundary file: {0}")]
    BadBoundary(String),

    // dtree
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("row width {got} does not match fit width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("label set is empty")]
    EmptySet,
    #[error("tree has not been fitted")]
    UnfittedTree,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    // ensemble
    #[error("no labels available for country {0}")]
    EmptyCountry(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("candidate list is empty")]
    NoCandidates,

    // sol
    #[error("rtt {rtt_ms} ms is at or above the {cutoff_ms} ms cutoff")]
    RttAboveCutoff { rtt_ms: f64, cutoff_ms: f64 },
    #[error("k={k} exceeds the {available} available vantage points")]
    KTooLarge { k: usize, available: usize },

    // pipeline
    #[error("no ground-truth labels loaded")]
    NoGroundTruth,
    #[error("unparseable path: {0}")]
    UnparseablePath(String),
    #[error("path skipped: hop {hop} has a non-singleton prediction")]
    SkippedPath { hop: usize },

    // plumbing
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Stable machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnparseableLine { .. } => "unparseable_line",
            Error::EmptyPath => "empty_path",
            Error::DuplicateEntry { .. } => "duplicate_entry",
            Error::BadCountryCode { .. } => "bad_country_code",
            Error::BadBoundary(_) => "bad_boundary",
            Error::EmptyTrainingSet => "empty_training_set",
            Error::WidthMismatch { .. } => "width_mismatch",
            Error::EmptySet => "empty_set",
            Error::UnfittedTree => "unfitted_tree",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::EmptyCountry(_) => "empty_country",
            Error::InsufficientData(_) => "insufficient_data",
            Error::NoCandidates => "no_candidates",
            Error::RttAboveCutoff { .. } => "rtt_above_cutoff",
            Error::KTooLarge { .. } => "k_too_large",
            Error::NoGroundTruth => "no_ground_truth",
            Error::UnparseablePath(_) => "unparseable_path",
            Error::SkippedPath { .. } => "skipped_path",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
            Error::Invalid(_) => "invalid",
        }
    }
}
