use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{what}, line {line}: {msg}")]
    Parse {
        what: String,
        line: usize,
        msg: String,
    },

    #[error("empty lexicon")]
    EmptyLexicon,

    #[error("conflicting pronunciations for word `{word}`")]
    DuplicateEntry { word: String },

    #[error("vocab size {requested} is smaller than the {chars} base characters")]
    VocabTooSmall { requested: usize, chars: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("text is empty after normalization")]
    EmptyText,

    #[error("subword vocabulary is empty")]
    EmptySubwordVocab,

    #[error("utterance has no words")]
    EmptyUtterance,

    #[error("unknown {block} symbol `{symbol}`")]
    UnknownSymbol { block: &'static str, symbol: String },

    #[error("sequence needs {required} tokens but at most {allowed} are allowed")]
    SequenceTooLong { required: usize, allowed: usize },

    #[error("{stream}[{index}] = {value} is out of range (limit {limit})")]
    IdOutOfRange {
        stream: &'static str,
        index: usize,
        value: usize,
        limit: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch for tensor `{tensor}`: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        tensor: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("forward trace has no cached intermediates (produced in eval mode)")]
    MissingCache,

    #[error("bad file format: {0}")]
    Format(String),

    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize },

    #[error("no labeled tokens to evaluate")]
    NoLabels,

    #[error("no usable utterances ({skipped} skipped as over-length or invalid)")]
    NoUsableData { skipped: usize },

    #[error("target length mismatch for `{utterance}`: {expected} phonemes, {found} targets")]
    TargetLength {
        utterance: String,
        expected: usize,
        found: usize,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable category used by the command line for machine-readable errors.
    /// Prefixes parse errors with the file they came from.
    pub(crate) fn in_file(self, path: &std::path::Path) -> Error {
        match self {
            Error::Parse { what, line, msg } => Error::Parse {
                what: format!("{what} {}", path.display()),
                line,
                msg,
            },
            other => other,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } | Error::Format(_) => "format",
            Error::EmptyLexicon
            | Error::DuplicateEntry { .. }
            | Error::VocabTooSmall { .. }
            | Error::EmptyCorpus
            | Error::EmptyText
            | Error::EmptySubwordVocab
            | Error::EmptyUtterance
            | Error::UnknownSymbol { .. }
            | Error::NoUsableData { .. }
            | Error::TargetLength { .. }
            | Error::NoLabels => "data",
            Error::SequenceTooLong { .. } | Error::IdOutOfRange { .. } => "input",
            Error::Config(_) => "config",
            Error::ShapeMismatch { .. } | Error::MissingCache => "shape",
            Error::NonFinite { .. } => "numeric",
        }
    }
}
