//! Score-to-feature frontend for singing synthesis.
//!
//! Turns MusicXML scores with lyrics into phoneme-level note-embedding
//! matrices, plus the surrounding tooling: symbolic augmentation grids,
//! leakage-safe train/test splits, listening-test chunking and MUSHRA
//! statistics.

pub mod aligner;
pub mod augmenter;
pub mod config;
pub mod embedder;
pub mod error;
pub mod lexicon;
pub mod mushra;
pub mod musicxml;
pub mod score;
pub mod splitter;
pub mod tdist;

pub use aligner::{align, compute_ramps, AlignedSequence, AlignedToken, NoteContext};
pub use config::{OctaveRange, PipelineConfig};
pub use embedder::{
    build_feature_matrix, compute_duration_stats, read_features, write_features, DurationStats,
    FeatureMatrix,
};
pub use error::{Error, Result};
pub use lexicon::{phonemize, syllabify, Lexicon, OnsetTable, PhonemeInventory};
pub use musicxml::parse_musicxml;
pub use score::{validate_score, NoteEvent, Pitch, Score, ValidationFinding};
