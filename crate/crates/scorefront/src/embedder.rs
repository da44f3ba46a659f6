//! Feature matrix construction and serialization.
//!
//! Each aligned token becomes one row of five concatenated streams: phoneme
//! one-hot, octave one-hot (octaves plus a rest class), step one-hot (12
//! pitch classes plus a rest class), the z-score normalized note duration,
//! and the note-position ramp. With the default 84-token inventory and four
//! octaves that is 84 + 5 + 13 + 1 + 1 = 104 columns per row.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::aligner::{AlignedSequence, NUM_STEP_CLASSES};
use crate::config::OctaveRange;
use crate::error::{Error, Result};
use crate::lexicon::PhonemeInventory;
use crate::score::STEP_NAMES;

/// Magic bytes of the binary feature format.
pub const FEATURE_MAGIC: &[u8; 4] = b"UTF1";

/// Duration statistics used for z-score normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    /// Mean duration in seconds over token occurrences.
    pub mean: f64,
    /// Population standard deviation in seconds.
    pub std: f64,
    /// Number of token occurrences the statistics were computed over.
    pub n: usize,
}

/// Mean and population standard deviation of `duration_seconds` over every
/// token occurrence in the corpus — the per-token repeated values, matching
/// what a downstream model consumes.
pub fn compute_duration_stats(corpus: &[AlignedSequence]) -> Result<DurationStats> {
    let mut n = 0usize;
    let mut sum = 0.0f64;
    for sequence in corpus {
        for token in &sequence.tokens {
            n += 1;
            sum += token.context.duration_seconds;
        }
    }
    if n < 2 {
        return Err(Error::TooFewSamples(format!(
            "duration statistics need at least 2 token occurrences, found {n}"
        )));
    }
    let mean = sum / n as f64;
    let mut sum_sq = 0.0f64;
    for sequence in corpus {
        for token in &sequence.tokens {
            let delta = token.context.duration_seconds - mean;
            sum_sq += delta * delta;
        }
    }
    let std = (sum_sq / n as f64).sqrt();
    if std <= 0.0 {
        return Err(Error::ZeroStd(
            "all token durations are identical; z-scores are undefined".into(),
        ));
    }
    Ok(DurationStats { mean, std, n })
}

/// Row-major matrix of 32-bit features, one row per aligned token.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub score_id: String,
    /// Normalization constants baked into the duration column.
    pub mean: f64,
    pub std: f64,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.data[index * self.cols..(index + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }
}

/// Number of feature columns for an inventory/octave-range combination.
pub fn feature_columns(inventory: &PhonemeInventory, octave_range: &OctaveRange) -> usize {
    inventory.len() + octave_range.num_octaves() + 1 + NUM_STEP_CLASSES + 2
}

/// Build the feature matrix for one aligned sequence. Row layout:
/// `[phoneme one-hot | octave one-hot | step one-hot | duration z | ramp]`.
pub fn build_feature_matrix(
    sequence: &AlignedSequence,
    stats: &DurationStats,
    inventory: &PhonemeInventory,
    octave_range: &OctaveRange,
) -> Result<FeatureMatrix> {
    if stats.std <= 0.0 {
        return Err(Error::ZeroStd(
            "duration statistics carry a non-positive standard deviation".into(),
        ));
    }
    let phoneme_cols = inventory.len();
    let octave_cols = octave_range.num_octaves() + 1;
    let cols = feature_columns(inventory, octave_range);
    let mut data = vec![0.0f32; sequence.tokens.len() * cols];

    for (row, token) in sequence.tokens.iter().enumerate() {
        if token.token_id >= phoneme_cols {
            return Err(Error::Format(format!(
                "token id {} outside the {phoneme_cols}-token inventory",
                token.token_id
            )));
        }
        if token.context.octave_class >= octave_cols {
            return Err(Error::Format(format!(
                "octave class {} outside {octave_cols} classes",
                token.context.octave_class
            )));
        }
        if token.context.step_class >= NUM_STEP_CLASSES {
            return Err(Error::Format(format!(
                "step class {} outside {NUM_STEP_CLASSES} classes",
                token.context.step_class
            )));
        }
        let base = row * cols;
        data[base + token.token_id] = 1.0;
        data[base + phoneme_cols + token.context.octave_class] = 1.0;
        data[base + phoneme_cols + octave_cols + token.context.step_class] = 1.0;
        let z = (token.context.duration_seconds - stats.mean) / stats.std;
        data[base + cols - 2] = z as f32;
        data[base + cols - 1] = token.ramp as f32;
    }

    Ok(FeatureMatrix {
        rows: sequence.tokens.len(),
        cols,
        score_id: sequence.score_id.clone(),
        mean: stats.mean,
        std: stats.std,
        data,
    })
}

#[derive(Serialize, Deserialize)]
struct HeaderStats {
    mean: f64,
    std: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    rows: usize,
    cols: usize,
    score_id: String,
    stats: HeaderStats,
}

/// Write the binary feature format: magic `UTF1`, a little-endian u32 header
/// length, a JSON header, then rows x cols little-endian f32 in row-major
/// order. The round trip through [`read_features`] is bit-exact.
pub fn write_features(matrix: &FeatureMatrix, destination: &mut impl Write) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        rows: matrix.rows,
        cols: matrix.cols,
        score_id: matrix.score_id.clone(),
        stats: HeaderStats {
            mean: matrix.mean,
            std: matrix.std,
        },
    })?;
    destination.write_all(FEATURE_MAGIC)?;
    destination.write_all(&(header.len() as u32).to_le_bytes())?;
    destination.write_all(&header)?;
    let mut payload = Vec::with_capacity(matrix.data.len() * 4);
    for value in &matrix.data {
        payload.extend_from_slice(&value.to_le_bytes());
    }
    destination.write_all(&payload)?;
    Ok(())
}

/// Read the binary feature format written by [`write_features`].
pub fn read_features(source: &mut impl Read) -> Result<FeatureMatrix> {
    let mut magic = [0u8; 4];
    read_exact_or(source, &mut magic, "magic")?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::BadMagic {
            found: magic.to_vec(),
        });
    }
    let mut length_bytes = [0u8; 4];
    read_exact_or(source, &mut length_bytes, "header length")?;
    let header_len = u32::from_le_bytes(length_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    read_exact_or(source, &mut header_bytes, "header")?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Format(format!("feature header is not valid JSON: {e}")))?;

    let expected = header
        .rows
        .checked_mul(header.cols)
        .and_then(|cells| cells.checked_mul(4))
        .ok_or_else(|| Error::Format("feature dimensions overflow".into()))?;
    let mut payload = Vec::with_capacity(expected);
    source.read_to_end(&mut payload)?;
    if payload.len() != expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|chunk| f32::from_le_bytes(chunk.try_into().unwrap()))
        .collect();
    Ok(FeatureMatrix {
        rows: header.rows,
        cols: header.cols,
        score_id: header.score_id,
        mean: header.stats.mean,
        std: header.stats.std,
        data,
    })
}

fn read_exact_or(source: &mut impl Read, buffer: &mut [u8], what: &str) -> Result<()> {
    source
        .read_exact(buffer)
        .map_err(|_| Error::Truncated {
            expected: buffer.len(),
            found: 0,
        })
        .map_err(|e| match e {
            Error::Truncated { expected, .. } => Error::Format(format!(
                "feature file ends inside the {what} ({expected} bytes expected)"
            )),
            other => other,
        })
}

/// Write duration statistics as a JSON stats file.
pub fn write_stats(stats: &DurationStats, destination: &mut impl Write) -> Result<()> {
    let json = serde_json::to_string_pretty(stats)?;
    destination.write_all(json.as_bytes())?;
    destination.write_all(b"\n")?;
    Ok(())
}

/// Read a JSON stats file.
pub fn read_stats(source: &mut impl Read) -> Result<DurationStats> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let stats: DurationStats = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("stats file is not valid JSON: {e}")))?;
    if stats.std <= 0.0 {
        return Err(Error::ZeroStd("stats file has non-positive std".into()));
    }
    Ok(stats)
}

/// CSV export for inspection: a header row with column names, one data row
/// per token, six decimal places.
pub fn write_features_csv(
    matrix: &FeatureMatrix,
    inventory: &PhonemeInventory,
    octave_range: &OctaveRange,
    destination: &mut impl Write,
) -> Result<()> {
    if matrix.cols != feature_columns(inventory, octave_range) {
        return Err(Error::Format(format!(
            "matrix has {} columns but the inventory/range describe {}",
            matrix.cols,
            feature_columns(inventory, octave_range)
        )));
    }
    let mut names: Vec<String> = Vec::with_capacity(matrix.cols);
    for token in inventory.tokens() {
        names.push(format!("ph:{token}"));
    }
    for octave in octave_range.min..=octave_range.max {
        names.push(format!("oct:{octave}"));
    }
    names.push("oct:rest".into());
    for step in STEP_NAMES {
        names.push(format!("step:{step}"));
    }
    names.push("step:rest".into());
    names.push("duration_z".into());
    names.push("ramp".into());
    writeln!(destination, "{}", names.join(","))?;
    for row in 0..matrix.rows {
        let formatted: Vec<String> = matrix
            .row(row)
            .iter()
            .map(|value| format!("{value:.6}"))
            .collect();
        writeln!(destination, "{}", formatted.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aligner::{AlignedToken, NoteContext};

    fn sequence_with_durations(durations: &[f64]) -> AlignedSequence {
        AlignedSequence {
            score_id: "s".into(),
            tokens: durations
                .iter()
                .enumerate()
                .map(|(index, &duration_seconds)| AlignedToken {
                    token_id: index % 4,
                    context: NoteContext {
                        octave_class: 1,
                        step_class: 7,
                        duration_seconds,
                        note_index: Some(index),
                    },
                    ramp: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn duration_stats_hand_computed() {
        let corpus = vec![sequence_with_durations(&[0.1, 0.1, 0.2, 0.2])];
        let stats = compute_duration_stats(&corpus).unwrap();
        assert!((stats.mean - 0.15).abs() < 1e-12);
        assert!((stats.std - 0.05).abs() < 1e-12);
        assert_eq!(stats.n, 4);
    }

    #[test]
    fn single_token_is_too_few() {
        let corpus = vec![sequence_with_durations(&[0.5])];
        assert!(matches!(
            compute_duration_stats(&corpus),
            Err(Error::TooFewSamples(_))
        ));
    }

    #[test]
    fn constant_durations_have_zero_std() {
        let corpus = vec![sequence_with_durations(&[0.5, 0.5, 0.5])];
        assert!(matches!(
            compute_duration_stats(&corpus),
            Err(Error::ZeroStd(_))
        ));
    }

    #[test]
    fn one_hot_blocks_sum_to_one_and_z_scores_match() {
        let inventory = PhonemeInventory::default_inventory();
        let range = OctaveRange::default();
        let seq = sequence_with_durations(&[0.1, 0.1, 0.2]);
        let stats = DurationStats {
            mean: 0.1,
            std: 0.05,
            n: 3,
        };
        let matrix = build_feature_matrix(&seq, &stats, &inventory, &range).unwrap();
        assert_eq!(matrix.rows, 3);
        assert_eq!(matrix.cols, 104);
        let phoneme_cols = inventory.len();
        let octave_cols = range.num_octaves() + 1;
        for row in 0..matrix.rows {
            let values = matrix.row(row);
            let phoneme_sum: f32 = values[..phoneme_cols].iter().sum();
            let octave_sum: f32 = values[phoneme_cols..phoneme_cols + octave_cols]
                .iter()
                .sum();
            let step_sum: f32 = values
                [phoneme_cols + octave_cols..phoneme_cols + octave_cols + NUM_STEP_CLASSES]
                .iter()
                .sum();
            assert_eq!(phoneme_sum, 1.0);
            assert_eq!(octave_sum, 1.0);
            assert_eq!(step_sum, 1.0);
        }
        // Durations (0.1, 0.1, 0.2) against mean 0.1, std 0.05: z = 0, 0, 2.
        assert_eq!(matrix.get(0, matrix.cols - 2), 0.0);
        assert_eq!(matrix.get(1, matrix.cols - 2), 0.0);
        assert_eq!(matrix.get(2, matrix.cols - 2), 2.0);
    }

    #[test]
    fn pause_rows_use_the_rest_positions() {
        let inventory = PhonemeInventory::default_inventory();
        let range = OctaveRange::default();
        let seq = AlignedSequence {
            score_id: "pause".into(),
            tokens: vec![AlignedToken {
                token_id: inventory.pause_id(),
                context: NoteContext {
                    octave_class: range.rest_class(),
                    step_class: crate::aligner::REST_STEP_CLASS,
                    duration_seconds: 1.0,
                    note_index: Some(0),
                },
                ramp: 0.0,
            }],
        };
        let stats = DurationStats {
            mean: 0.5,
            std: 0.25,
            n: 2,
        };
        let matrix = build_feature_matrix(&seq, &stats, &inventory, &range).unwrap();
        let phoneme_cols = inventory.len();
        let octave_cols = range.num_octaves() + 1;
        let values = matrix.row(0);
        // Hot exactly at the rest positions, nowhere among the real ones.
        assert_eq!(values[phoneme_cols + range.rest_class()], 1.0);
        for octave in 0..range.num_octaves() {
            assert_eq!(values[phoneme_cols + octave], 0.0);
        }
        assert_eq!(
            values[phoneme_cols + octave_cols + crate::aligner::REST_STEP_CLASS],
            1.0
        );
        for step in 0..12 {
            assert_eq!(values[phoneme_cols + octave_cols + step], 0.0);
        }
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let inventory = PhonemeInventory::default_inventory();
        let range = OctaveRange::default();
        let seq = sequence_with_durations(&[0.37, 0.37, 0.37, 0.37]);
        let stats = DurationStats {
            mean: 0.37,
            std: 0.1,
            n: 4,
        };
        let matrix = build_feature_matrix(&seq, &stats, &inventory, &range).unwrap();
        let mut bytes = Vec::new();
        write_features(&matrix, &mut bytes).unwrap();
        let restored = read_features(&mut bytes.as_slice()).unwrap();
        assert_eq!(matrix, restored);
        // Byte-identical on rewrite.
        let mut again = Vec::new();
        write_features(&restored, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let bytes = b"UTF2\x02\x00\x00\x00{}";
        let err = read_features(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let inventory = PhonemeInventory::default_inventory();
        let range = OctaveRange::default();
        let seq = sequence_with_durations(&[0.1, 0.2, 0.3, 0.4]);
        let stats = DurationStats {
            mean: 0.25,
            std: 0.1,
            n: 4,
        };
        let matrix = build_feature_matrix(&seq, &stats, &inventory, &range).unwrap();
        let mut bytes = Vec::new();
        write_features(&matrix, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - matrix.cols * 4); // drop the last row
        let err = read_features(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }));
    }

    #[test]
    fn z_score_column_inverts_back_to_durations() {
        let inventory = PhonemeInventory::default_inventory();
        let range = OctaveRange::default();
        let durations = [0.11, 0.52, 0.33, 0.74, 0.95];
        let seq = sequence_with_durations(&durations);
        let stats = compute_duration_stats(std::slice::from_ref(&seq)).unwrap();
        let matrix = build_feature_matrix(&seq, &stats, &inventory, &range).unwrap();
        for (row, expected) in durations.iter().enumerate() {
            let z = f64::from(matrix.get(row, matrix.cols - 2));
            let recovered = z * stats.std + stats.mean;
            assert!((recovered - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let inventory = PhonemeInventory::default_inventory();
        let range = OctaveRange::default();
        let seq = sequence_with_durations(&[0.1, 0.2]);
        let stats = DurationStats {
            mean: 0.15,
            std: 0.05,
            n: 2,
        };
        let matrix = build_feature_matrix(&seq, &stats, &inventory, &range).unwrap();
        let mut out = Vec::new();
        write_features_csv(&matrix, &inventory, &range, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 104);
        assert!(lines[0].starts_with("ph:<s>,"));
        assert!(lines[0].ends_with("duration_z,ramp"));
    }

    #[cfg(test)]
    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arbitrary_sequence() -> impl Strategy<Value = AlignedSequence> {
            prop::collection::vec(
                (
                    0usize..84,
                    0usize..5,
                    0usize..13,
                    0.05f64..4.0,
                    0.0f64..=1.0,
                ),
                1..60,
            )
            .prop_map(|rows| AlignedSequence {
                score_id: "p".into(),
                tokens: rows
                    .into_iter()
                    .enumerate()
                    .map(
                        |(index, (token_id, octave_class, step_class, duration, ramp))| {
                            AlignedToken {
                                token_id,
                                context: NoteContext {
                                    octave_class,
                                    step_class,
                                    duration_seconds: duration,
                                    note_index: Some(index),
                                },
                                ramp,
                            }
                        },
                    )
                    .collect(),
            })
        }

        proptest! {
            /// Every row's three one-hot blocks sum to exactly 1 (entries
            /// are 0.0 or 1.0), the ramp stays in [0, 1], and the duration
            /// column inverts back through the stats.
            #[test]
            fn one_hot_blocks_are_exact(seq in arbitrary_sequence()) {
                let inventory = PhonemeInventory::default_inventory();
                let range = OctaveRange::default();
                let stats = DurationStats { mean: 0.5, std: 0.25, n: 2 };
                let matrix =
                    build_feature_matrix(&seq, &stats, &inventory, &range).unwrap();
                let phoneme_cols = inventory.len();
                let octave_cols = range.num_octaves() + 1;
                for (row, token) in seq.tokens.iter().enumerate() {
                    let values = matrix.row(row);
                    prop_assert_eq!(
                        values[..phoneme_cols].iter().sum::<f32>(), 1.0);
                    prop_assert_eq!(
                        values[phoneme_cols..phoneme_cols + octave_cols]
                            .iter().sum::<f32>(), 1.0);
                    prop_assert_eq!(
                        values[phoneme_cols + octave_cols
                            ..phoneme_cols + octave_cols + NUM_STEP_CLASSES]
                            .iter().sum::<f32>(), 1.0);
                    for &value in &values[..matrix.cols - 2] {
                        prop_assert!(value == 0.0 || value == 1.0);
                    }
                    let ramp = f64::from(values[matrix.cols - 1]);
                    prop_assert!((0.0..=1.0).contains(&ramp));
                    let z = f64::from(values[matrix.cols - 2]);
                    let recovered = z * stats.std + stats.mean;
                    prop_assert!(
                        (recovered - token.context.duration_seconds).abs() < 1e-6);
                }
            }

            /// Binary serialization round trips arbitrary matrices exactly.
            #[test]
            fn serialization_round_trips(seq in arbitrary_sequence()) {
                let inventory = PhonemeInventory::default_inventory();
                let range = OctaveRange::default();
                let stats = DurationStats { mean: 0.4, std: 0.2, n: 2 };
                let matrix =
                    build_feature_matrix(&seq, &stats, &inventory, &range).unwrap();
                let mut bytes = Vec::new();
                write_features(&matrix, &mut bytes).unwrap();
                let restored = read_features(&mut bytes.as_slice()).unwrap();
                prop_assert_eq!(&matrix, &restored);
                let mut rewritten = Vec::new();
                write_features(&restored, &mut rewritten).unwrap();
                prop_assert_eq!(bytes, rewritten);
            }
        }
    }
}
