//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between a MusicXML document and a report.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed XML, with 1-based line/column of the offending byte.
    #[error("XML parse error at line {line}, column {column}: {message}")]
    Xml {
        line: usize,
        column: usize,
        message: String,
    },

    /// Well-formed XML that uses a construct this frontend refuses.
    #[error("unsupported feature at {location}: {feature}")]
    UnsupportedFeature { feature: String, location: String },

    /// A required element is absent (no silent defaults).
    #[error("missing required element: {0}")]
    MissingElement(String),

    /// Structurally valid XML describing an invalid score.
    #[error("invalid document at {location}: {message}")]
    InvalidDocument { location: String, message: String },

    /// Problems reading a compressed .mxl container.
    #[error("container error: {0}")]
    Container(String),

    /// Phoneme inventory file problems.
    #[error("inventory error: {0}")]
    Inventory(String),

    /// Pronunciation lexicon file problems, with 1-based line number.
    #[error("lexicon error at line {line}: {message}")]
    LexiconEntry { line: usize, message: String },

    /// Words without a lexicon entry; all offenders are listed.
    #[error("out-of-vocabulary words: {}", words.join(", "))]
    OutOfVocabulary { words: Vec<String> },

    /// A word whose pronunciation cannot be split into the requested syllables.
    #[error("syllabification error for \"{word}\": {message}")]
    Syllabification { word: String, message: String },

    /// Score/lyric structure that cannot be aligned.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Fewer samples than a statistic needs.
    #[error("too few samples: {0}")]
    TooFewSamples(String),

    /// All durations identical; z-scoring would divide by zero.
    #[error("zero standard deviation: {0}")]
    ZeroStd(String),

    /// Feature file does not start with the expected magic bytes.
    #[error("bad magic: expected \"UTF1\", found {found:?}")]
    BadMagic { found: Vec<u8> },

    /// Feature file header and payload disagree.
    #[error("truncated payload: header declares {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    /// Malformed feature file, stats file or manifest.
    #[error("format error: {0}")]
    Format(String),

    /// Transposition pushed a note outside the supported octave range.
    #[error("pitch out of range at note {note_index}: {message}")]
    PitchRange { note_index: usize, message: String },

    /// The leakage-free pool cannot fill the requested test duration.
    #[error(
        "infeasible split: eligible segments total {available_s:.1} s, \
         test target is {needed_s:.1} s"
    )]
    InfeasibleSplit { needed_s: f64, available_s: f64 },

    /// A t-test on constant samples.
    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    /// Listening-test response file problems.
    #[error("response error: {0}")]
    Response(String),

    /// Configuration file or value problems.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
