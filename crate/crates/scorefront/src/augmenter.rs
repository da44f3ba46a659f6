//! Symbolic score augmentation: transposition and tempo scaling over a fixed
//! grid of variants, plus the pitch statistics used to inspect coverage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::OctaveRange;
use crate::error::{Error, Result};
use crate::score::{Pitch, Score};

/// One grid cell: a pitch shift in semitones and a tempo multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub semitones: i32,
    pub tempo_factor: f64,
}

impl AugmentationSpec {
    pub fn identity() -> Self {
        Self {
            semitones: 0,
            tempo_factor: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.semitones == 0 && self.tempo_factor == 1.0
    }

    /// Variant name used in manifests and file names: `s{+n}_t{factor}`.
    pub fn variant_id(&self) -> String {
        format!("s{:+}_t{:.2}", self.semitones, self.tempo_factor)
    }
}

/// The semitone and tempo-factor sets the grid is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationSets {
    pub semitones: Vec<i32>,
    pub tempo_factors: Vec<f64>,
}

impl Default for AugmentationSets {
    fn default() -> Self {
        Self {
            semitones: vec![-1, 0, 1, 2, 3],
            tempo_factors: vec![0.85, 0.90, 0.95, 1.00, 1.05, 1.10, 1.15],
        }
    }
}

/// Shift every pitched note by `semitones` chromatic steps, carrying octaves.
/// Rests and durations are untouched. Any note landing outside the supported
/// octave range is an error naming the note; nothing is clamped.
pub fn transpose(score: &Score, semitones: i32, octave_range: &OctaveRange) -> Result<Score> {
    let mut transposed = score.clone();
    for (note_index, note) in transposed.notes.iter_mut().enumerate() {
        let Some(pitch) = note.pitch else {
            continue;
        };
        let shifted = Pitch::from_chromatic(pitch.chromatic() + i64::from(semitones));
        if !octave_range.contains(shifted.octave()) {
            return Err(Error::PitchRange {
                note_index,
                message: format!(
                    "{pitch} shifted by {semitones:+} is {shifted}, outside octaves {}..={}",
                    octave_range.min, octave_range.max
                ),
            });
        }
        note.pitch = Some(shifted);
    }
    Ok(transposed)
}

/// Multiply every tempo-map entry by `factor`; note durations in seconds
/// scale by 1/factor while divisions and symbolic durations stay put.
pub fn scale_tempo(score: &Score, factor: f64) -> Result<Score> {
    if factor <= 0.0 {
        return Err(Error::Config(format!(
            "tempo factor must be positive, got {factor}"
        )));
    }
    let mut scaled = score.clone();
    for entry in &mut scaled.tempo_map {
        entry.qpm *= factor;
    }
    Ok(scaled)
}

/// All variants of one score over the grid, with per-variant failures kept.
#[derive(Debug)]
pub struct AugmentationGrid {
    pub variants: Vec<(AugmentationSpec, Score)>,
    pub failures: Vec<(AugmentationSpec, Error)>,
}

/// Build the full semitone x tempo grid (5 x 7 = 35 variants by default,
/// identity included), semitones outer and factors inner. Out-of-range
/// transpositions fail per variant; the grid itself fails only if the
/// identity variant does.
pub fn augmentation_grid(
    score: &Score,
    sets: &AugmentationSets,
    octave_range: &OctaveRange,
) -> Result<AugmentationGrid> {
    let mut variants = Vec::new();
    let mut failures = Vec::new();
    for &semitones in &sets.semitones {
        for &tempo_factor in &sets.tempo_factors {
            let spec = AugmentationSpec {
                semitones,
                tempo_factor,
            };
            let result = transpose(score, semitones, octave_range).and_then(|transposed| {
                let mut variant = scale_tempo(&transposed, tempo_factor)?;
                variant.id = format!("{}_{}", score.id, spec.variant_id());
                Ok(variant)
            });
            match result {
                Ok(variant) => variants.push((spec, variant)),
                Err(error) => {
                    if spec.is_identity() {
                        return Err(error);
                    }
                    failures.push((spec, error));
                }
            }
        }
    }
    Ok(AugmentationGrid { variants, failures })
}

/// Histogram of signed semitone intervals between consecutive pitched notes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalHistogram {
    pub bins: BTreeMap<i64, u64>,
}

impl IntervalHistogram {
    pub fn total(&self) -> u64 {
        self.bins.values().sum()
    }

    /// CSV export: `interval,count` sorted by interval.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("interval,count\n");
        for (interval, count) in &self.bins {
            out.push_str(&format!("{interval},{count}\n"));
        }
        out
    }
}

/// Intervals between each pitched note and the next pitched note of the same
/// score; rests are skipped, so pairs across rests still count.
pub fn pitch_change_histogram(corpus: &[Score]) -> IntervalHistogram {
    let mut bins = BTreeMap::new();
    for score in corpus {
        let mut previous: Option<i64> = None;
        for note in &score.notes {
            let Some(pitch) = note.pitch else {
                continue;
            };
            let chromatic = pitch.chromatic();
            if let Some(previous) = previous {
                *bins.entry(chromatic - previous).or_insert(0) += 1;
            }
            previous = Some(chromatic);
        }
    }
    IntervalHistogram { bins }
}

/// Count of notes per chromatic pitch index over the corpus; the companion
/// statistic to the interval histogram when checking coverage.
pub fn note_pitch_histogram(corpus: &[Score]) -> BTreeMap<i64, u64> {
    let mut bins = BTreeMap::new();
    for score in corpus {
        for note in &score.notes {
            if let Some(pitch) = note.pitch {
                *bins.entry(pitch.chromatic()).or_insert(0) += 1;
            }
        }
    }
    bins
}
