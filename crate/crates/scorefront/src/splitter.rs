//! Segmentation, leakage-safe train/test splitting and listening-test
//! chunking.
//!
//! Songs are cut greedily into segments of roughly `min_s..max_s` seconds,
//! preferring rests as cut points. Any two segments sharing a contiguous run
//! of three or more identical pitches are both barred from the test set; the
//! test set is then drawn seeded-uniformly from the leakage-free pool.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::Score;

/// A contiguous slice of one score's notes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub score_id: String,
    /// Half-open index range into the score's notes.
    pub note_span: Range<usize>,
    /// Sum of member note durations, rests included.
    pub duration_seconds: f64,
    /// Chromatic pitch indices of the pitched notes, rests omitted.
    pub pitch_sequence: Vec<i64>,
}

impl Segment {
    /// Manifest identifier: `{score_id}#{start_note}-{end_note}`.
    pub fn id(&self) -> String {
        format!(
            "{}#{}-{}",
            self.score_id, self.note_span.start, self.note_span.end
        )
    }

    /// Parse a manifest identifier back into (score_id, note span).
    pub fn parse_id(id: &str) -> Result<(String, Range<usize>)> {
        let (score_id, span) = id
            .rsplit_once('#')
            .ok_or_else(|| Error::Format(format!("segment id \"{id}\" lacks a span")))?;
        let (start, end) = span
            .split_once('-')
            .ok_or_else(|| Error::Format(format!("segment id \"{id}\" has a bad span")))?;
        let start = start
            .parse()
            .map_err(|_| Error::Format(format!("segment id \"{id}\" has a bad span")))?;
        let end = end
            .parse()
            .map_err(|_| Error::Format(format!("segment id \"{id}\" has a bad span")))?;
        Ok((score_id.to_string(), start..end))
    }

    fn from_span(score: &Score, span: Range<usize>) -> Self {
        let duration_seconds = score.notes[span.clone()]
            .iter()
            .map(|note| score.note_seconds(note))
            .sum();
        let pitch_sequence = score.notes[span.clone()]
            .iter()
            .filter_map(|note| note.pitch.map(|pitch| pitch.chromatic()))
            .collect();
        Self {
            score_id: score.id.clone(),
            note_span: span,
            duration_seconds,
            pitch_sequence,
        }
    }
}

/// Copy a segment's notes into a standalone score that keeps the original
/// divisions, tempo map and onsets, so durations are unchanged.
pub fn slice_score(score: &Score, span: Range<usize>, id: &str) -> Score {
    Score {
        id: id.to_string(),
        divisions: score.divisions,
        tempo_map: score.tempo_map.clone(),
        time_signatures: score.time_signatures.clone(),
        notes: score.notes[span].to_vec(),
    }
}

/// Greedy segmentation: accumulate notes until `min_s`, cut before the first
/// rest after that; when the running time would pass `max_s` with no rest in
/// sight, cut at the note boundary nearest `max_s`. A final remainder shorter
/// than `min_s / 2` is attached to the previous segment. Segments tile the
/// score exactly.
pub fn segment_score(score: &Score, min_s: f64, max_s: f64) -> Result<Vec<Segment>> {
    if min_s >= max_s {
        return Err(Error::Config(format!(
            "segment bounds must satisfy min < max, got {min_s} >= {max_s}"
        )));
    }
    let durations: Vec<f64> = score
        .notes
        .iter()
        .map(|note| score.note_seconds(note))
        .collect();
    let total = score.notes.len();
    let mut spans: Vec<Range<usize>> = Vec::new();
    let mut start = 0usize;

    #[allow(clippy::needless_range_loop)] // one cursor walks notes and durations
    while start < total {
        let mut accumulated = 0.0f64;
        let mut cut: Option<usize> = None;
        for index in start..total {
            if accumulated >= min_s && score.notes[index].is_rest() {
                cut = Some(index);
                break;
            }
            let extended = accumulated + durations[index];
            if extended > max_s {
                // Boundary before or after this note, whichever is nearer
                // to max_s; an empty segment is never a boundary.
                let below_error = (accumulated - max_s).abs();
                let above_error = (extended - max_s).abs();
                cut = if index > start && below_error <= above_error {
                    Some(index)
                } else {
                    Some(index + 1)
                };
                break;
            }
            accumulated = extended;
        }
        match cut {
            Some(at) => {
                spans.push(start..at);
                start = at;
            }
            None => {
                // Tail reached without a cut: attach it to the previous
                // segment when shorter than half the minimum.
                if accumulated < min_s / 2.0 && !spans.is_empty() {
                    let last = spans.last_mut().unwrap();
                    *last = last.start..total;
                } else {
                    spans.push(start..total);
                }
                break;
            }
        }
    }

    Ok(spans
        .into_iter()
        .map(|span| Segment::from_span(score, span))
        .collect())
}

/// Longest common contiguous pitch run between two segments, if it reaches
/// `min_len`. Comparison is octave-sensitive and ignores rests and durations.
pub fn shared_pitch_run(a: &Segment, b: &Segment, min_len: usize) -> Option<Vec<i64>> {
    let left = &a.pitch_sequence;
    let right = &b.pitch_sequence;
    if left.is_empty() || right.is_empty() {
        return None;
    }
    // lengths[j]: longest common suffix of left[..=i] and right[..=j].
    let mut lengths = vec![0usize; right.len()];
    let mut best_len = 0usize;
    let mut best_end = 0usize; // exclusive end in `left`
    for (i, &pitch) in left.iter().enumerate() {
        let mut previous_diagonal = 0usize;
        for (j, &other) in right.iter().enumerate() {
            let current = lengths[j];
            lengths[j] = if pitch == other {
                previous_diagonal + 1
            } else {
                0
            };
            if lengths[j] > best_len {
                best_len = lengths[j];
                best_end = i + 1;
            }
            previous_diagonal = current;
        }
    }
    (best_len >= min_len).then(|| left[best_end - best_len..best_end].to_vec())
}

/// Evidence for one excluded pair: both segments share `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedRunEvidence {
    pub a: String,
    pub b: String,
    pub run: Vec<i64>,
    pub len: usize,
}

/// Outcome of the train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub seed: u64,
    pub test_target_s: f64,
    pub train: Vec<Segment>,
    pub test: Vec<Segment>,
    pub evidence: Vec<SharedRunEvidence>,
}

/// JSON manifest form of a [`SplitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub test_target_s: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub evidence: Vec<SharedRunEvidence>,
}

impl SplitResult {
    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            seed: self.seed,
            test_target_s: self.test_target_s,
            train: self.train.iter().map(Segment::id).collect(),
            test: self.test.iter().map(Segment::id).collect(),
            evidence: self.evidence.clone(),
        }
    }
}

/// Compare all segment pairs; any segment sharing a pitch run of `min_run`
/// or longer with any other segment goes to train. Test segments are then
/// drawn uniformly at random (seeded) from the eligible pool until their
/// cumulative duration first reaches `test_target_s`.
pub fn make_split(
    segments: &[Segment],
    test_target_s: f64,
    seed: u64,
    min_run: usize,
) -> Result<SplitResult> {
    let mut eligible = vec![true; segments.len()];
    let mut evidence = Vec::new();
    for i in 0..segments.len() {
        for j in i + 1..segments.len() {
            if let Some(run) = shared_pitch_run(&segments[i], &segments[j], min_run) {
                eligible[i] = false;
                eligible[j] = false;
                evidence.push(SharedRunEvidence {
                    a: segments[i].id(),
                    b: segments[j].id(),
                    len: run.len(),
                    run,
                });
            }
        }
    }

    let pool: Vec<usize> = (0..segments.len()).filter(|&i| eligible[i]).collect();
    let available_s: f64 = pool.iter().map(|&i| segments[i].duration_seconds).sum();
    if available_s < test_target_s {
        return Err(Error::InfeasibleSplit {
            needed_s: test_target_s,
            available_s,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = pool;
    shuffled.shuffle(&mut rng);
    let mut chosen = Vec::new();
    let mut picked_s = 0.0;
    for index in shuffled {
        if picked_s >= test_target_s {
            break;
        }
        picked_s += segments[index].duration_seconds;
        chosen.push(index);
    }
    chosen.sort_unstable();

    let mut is_test = vec![false; segments.len()];
    for &index in &chosen {
        is_test[index] = true;
    }
    let test = chosen.iter().map(|&i| segments[i].clone()).collect();
    let train = (0..segments.len())
        .filter(|&i| !is_test[i])
        .map(|i| segments[i].clone())
        .collect();
    Ok(SplitResult {
        seed,
        test_target_s,
        train,
        test,
        evidence,
    })
}

/// A listening-test chunk: a sub-span of a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub score_id: String,
    pub note_span: Range<usize>,
    pub duration_seconds: f64,
    /// True when no rest allowed a cut under the cap; never cut mid-note.
    pub over_length: bool,
}

impl Chunk {
    pub fn id(&self) -> String {
        format!(
            "{}#{}-{}",
            self.score_id, self.note_span.start, self.note_span.end
        )
    }
}

/// Split a segment into chunks of at most `max_s` seconds, cutting only at
/// rests and keeping chunks as long as possible (greedy from the left). A
/// rest-free span longer than the cap becomes a single over-length chunk.
pub fn chunk_for_mushra(segment: &Segment, score: &Score, max_s: f64) -> Vec<Chunk> {
    let span = segment.note_span.clone();
    let durations: Vec<f64> = score.notes[span.clone()]
        .iter()
        .map(|note| score.note_seconds(note))
        .collect();
    let time = |from: usize, to: usize| -> f64 {
        durations[from - span.start..to - span.start].iter().sum()
    };
    let cut_points: Vec<usize> = (span.start + 1..span.end)
        .filter(|&index| score.notes[index].is_rest())
        .collect();

    let mut chunks = Vec::new();
    let mut current = span.start;
    while current < span.end {
        let remaining = time(current, span.end);
        if remaining <= max_s {
            chunks.push(make_chunk(
                segment,
                score,
                current..span.end,
                remaining,
                false,
            ));
            break;
        }
        let best_under_cap = cut_points
            .iter()
            .copied()
            .rfind(|&p| p > current && time(current, p) <= max_s);
        match best_under_cap {
            Some(cut) if time(current, cut) > 0.0 => {
                let duration = time(current, cut);
                chunks.push(make_chunk(segment, score, current..cut, duration, false));
                current = cut;
            }
            _ => {
                // No rest under the cap: run to the next rest (or the end)
                // and flag the chunk as over-length.
                let next = cut_points
                    .iter()
                    .copied()
                    .find(|&p| p > current && time(current, p) > 0.0)
                    .unwrap_or(span.end);
                let duration = time(current, next);
                chunks.push(make_chunk(
                    segment,
                    score,
                    current..next,
                    duration,
                    duration > max_s,
                ));
                current = next;
            }
        }
    }
    chunks
}

fn make_chunk(
    segment: &Segment,
    _score: &Score,
    note_span: Range<usize>,
    duration_seconds: f64,
    over_length: bool,
) -> Chunk {
    Chunk {
        score_id: segment.score_id.clone(),
        note_span,
        duration_seconds,
        over_length,
    }
}
