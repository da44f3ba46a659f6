//! In-memory score model: pitches, note events, lyrics, tempo map, plus
//! validation and the canonical text dump used by golden tests.

use serde::{Deserialize, Serialize};

use crate::config::OctaveRange;
use crate::error::{Error, Result};

/// Names of the 12 chromatic steps, sharp spelling.
pub const STEP_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

/// Number of chromatic steps per octave.
pub const STEPS_PER_OCTAVE: i64 = 12;

/// A pitch as a chromatic step (0 = C .. 11 = B) and a scientific octave.
///
/// Accidentals are folded into the step at construction time; enharmonic
/// spelling is not preserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pitch {
    step: u8,
    octave: i32,
}

impl Pitch {
    pub fn new(step: u8, octave: i32) -> Result<Self> {
        if step > 11 {
            return Err(Error::InvalidDocument {
                location: "pitch".into(),
                message: format!("chromatic step {step} outside 0..=11"),
            });
        }
        Ok(Self { step, octave })
    }

    /// Build from an absolute semitone index (octave * 12 + step).
    pub fn from_chromatic(index: i64) -> Self {
        let octave = index.div_euclid(STEPS_PER_OCTAVE);
        let step = index.rem_euclid(STEPS_PER_OCTAVE);
        Self {
            step: step as u8,
            octave: octave as i32,
        }
    }

    /// Absolute semitone index; C4 = 48 under this convention.
    pub fn chromatic(&self) -> i64 {
        self.octave as i64 * STEPS_PER_OCTAVE + self.step as i64
    }

    pub fn step(&self) -> u8 {
        self.step
    }

    pub fn octave(&self) -> i32 {
        self.octave
    }

    pub fn step_name(&self) -> &'static str {
        STEP_NAMES[self.step as usize]
    }
}

impl std::fmt::Display for Pitch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.step_name(), self.octave)
    }
}

/// How a lyric syllable sits inside its word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Syllabic {
    Single,
    Begin,
    Middle,
    End,
}

/// One lyric syllable attached to a note.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LyricSyllable {
    pub text: String,
    pub syllabic: Syllabic,
    /// True when the syllable extends over following slurred notes.
    pub melisma_extend: bool,
}

/// A note or rest in score order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    /// `None` marks a rest.
    pub pitch: Option<Pitch>,
    /// Length in MusicXML division units; always positive.
    pub duration_divisions: u32,
    /// Cumulative position in division units from the start of the part.
    pub onset_divisions: u64,
    pub tie_start: bool,
    pub tie_stop: bool,
    pub lyric: Option<LyricSyllable>,
    /// Zero-based measure the event belongs to.
    pub measure_index: usize,
}

impl NoteEvent {
    pub fn is_rest(&self) -> bool {
        self.pitch.is_none()
    }

    /// Rest constructor used by tests and generators.
    pub fn rest(duration_divisions: u32, onset_divisions: u64, measure_index: usize) -> Self {
        Self {
            pitch: None,
            duration_divisions,
            onset_divisions,
            tie_start: false,
            tie_stop: false,
            lyric: None,
            measure_index,
        }
    }

    /// Pitched-note constructor used by tests and generators.
    pub fn note(
        pitch: Pitch,
        duration_divisions: u32,
        onset_divisions: u64,
        measure_index: usize,
    ) -> Self {
        Self {
            pitch: Some(pitch),
            duration_divisions,
            onset_divisions,
            tie_start: false,
            tie_stop: false,
            lyric: None,
            measure_index,
        }
    }

    pub fn with_lyric(mut self, text: &str, syllabic: Syllabic, melisma_extend: bool) -> Self {
        self.lyric = Some(LyricSyllable {
            text: text.to_string(),
            syllabic,
            melisma_extend,
        });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSignature {
    pub numerator: u32,
    pub denominator: u32,
}

/// Tempo change point: quarter notes per minute from a given onset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempoEntry {
    pub onset_divisions: u64,
    pub qpm: f64,
}

/// A parsed, monophonic, single-part score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub id: String,
    /// Division units per quarter note.
    pub divisions: u32,
    /// Tempo map sorted by onset; constant tempo is a one-entry map.
    pub tempo_map: Vec<TempoEntry>,
    /// Time signature changes as (first measure index, signature).
    pub time_signatures: Vec<(usize, TimeSignature)>,
    pub notes: Vec<NoteEvent>,
}

impl Score {
    /// Build a constant-tempo score and check the type invariants.
    pub fn new(
        id: &str,
        divisions: u32,
        tempo_qpm: f64,
        time_signature: TimeSignature,
        notes: Vec<NoteEvent>,
    ) -> Result<Self> {
        let score = Self {
            id: id.to_string(),
            divisions,
            tempo_map: vec![TempoEntry {
                onset_divisions: 0,
                qpm: tempo_qpm,
            }],
            time_signatures: vec![(0, time_signature)],
            notes,
        };
        score.check_invariants()?;
        Ok(score)
    }

    pub fn with_id(mut self, id: &str) -> Self {
        self.id = id.to_string();
        self
    }

    /// Hard invariants; violations are errors, not findings.
    pub fn check_invariants(&self) -> Result<()> {
        if self.divisions < 1 {
            return Err(Error::InvalidDocument {
                location: "score".into(),
                message: "divisions must be at least 1".into(),
            });
        }
        if self.tempo_map.is_empty() {
            return Err(Error::MissingElement("tempo".into()));
        }
        for entry in &self.tempo_map {
            if entry.qpm <= 0.0 {
                return Err(Error::InvalidDocument {
                    location: "tempo".into(),
                    message: format!("tempo {} qpm is not positive", entry.qpm),
                });
            }
        }
        let mut last_onset = 0;
        for (index, note) in self.notes.iter().enumerate() {
            if note.duration_divisions == 0 {
                return Err(Error::InvalidDocument {
                    location: format!("note {index}"),
                    message: "duration must be positive".into(),
                });
            }
            if note.is_rest() && note.lyric.is_some() {
                return Err(Error::InvalidDocument {
                    location: format!("note {index}"),
                    message: "rests carry no lyric".into(),
                });
            }
            if note.onset_divisions < last_onset {
                return Err(Error::InvalidDocument {
                    location: format!("note {index}"),
                    message: "note onsets must be nondecreasing".into(),
                });
            }
            last_onset = note.onset_divisions;
        }
        self.check_ties()?;
        Ok(())
    }

    /// Every tie stop must close a tie started by the immediately preceding
    /// event, on the same pitch.
    fn check_ties(&self) -> Result<()> {
        for (index, note) in self.notes.iter().enumerate() {
            if !note.tie_stop {
                continue;
            }
            let valid = index > 0
                && self.notes[index - 1].tie_start
                && self.notes[index - 1].pitch == note.pitch
                && note.pitch.is_some();
            if !valid {
                return Err(Error::InvalidDocument {
                    location: format!("note {index} (measure {})", note.measure_index + 1),
                    message: "tie stop without a matching tie start on the same pitch".into(),
                });
            }
        }
        Ok(())
    }

    /// Tempo in effect at an onset: the last entry at or before it.
    pub fn qpm_at(&self, onset_divisions: u64) -> f64 {
        let mut current = self.tempo_map[0].qpm;
        for entry in &self.tempo_map {
            if entry.onset_divisions <= onset_divisions {
                current = entry.qpm;
            } else {
                break;
            }
        }
        current
    }

    /// Signature in effect for a measure: the last change at or before it.
    pub fn time_signature_for(&self, measure_index: usize) -> TimeSignature {
        let mut current = self
            .time_signatures
            .first()
            .map(|(_, signature)| *signature)
            .unwrap_or(TimeSignature {
                numerator: 4,
                denominator: 4,
            });
        for (first_measure, signature) in &self.time_signatures {
            if *first_measure <= measure_index {
                current = *signature;
            } else {
                break;
            }
        }
        current
    }

    /// Seconds of one event under the tempo in effect at its onset.
    pub fn note_seconds(&self, note: &NoteEvent) -> f64 {
        crate::aligner::note_duration_seconds(
            note,
            self.divisions,
            self.qpm_at(note.onset_divisions),
        )
    }

    /// Total duration in seconds, summing per-note durations.
    pub fn duration_seconds(&self) -> f64 {
        self.notes.iter().map(|note| self.note_seconds(note)).sum()
    }

    /// Canonical plain-text dump: header lines prefixed with `#`, then one
    /// note per line (onset, duration, step, octave, tie flags, lyric).
    pub fn canonical_dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "# id\t{}", self.id).unwrap();
        writeln!(out, "# divisions\t{}", self.divisions).unwrap();
        for entry in &self.tempo_map {
            writeln!(
                out,
                "# tempo\t{}\t{}",
                entry.onset_divisions,
                fmt_f64(entry.qpm)
            )
            .unwrap();
        }
        for (measure, signature) in &self.time_signatures {
            writeln!(
                out,
                "# time\t{}\t{}/{}",
                measure, signature.numerator, signature.denominator
            )
            .unwrap();
        }
        for note in &self.notes {
            let (step, octave) = match note.pitch {
                Some(pitch) => (pitch.step_name().to_string(), pitch.octave().to_string()),
                None => ("R".to_string(), "-".to_string()),
            };
            let ties = match (note.tie_start, note.tie_stop) {
                (true, true) => "se",
                (true, false) => "s",
                (false, true) => "e",
                (false, false) => "-",
            };
            let lyric = match &note.lyric {
                Some(lyric) => {
                    let mark = match lyric.syllabic {
                        Syllabic::Single => "single",
                        Syllabic::Begin => "begin",
                        Syllabic::Middle => "middle",
                        Syllabic::End => "end",
                    };
                    let extend = if lyric.melisma_extend { "+" } else { "" };
                    format!("{}/{mark}{extend}", lyric.text)
                }
                None => "-".to_string(),
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                note.onset_divisions, note.duration_divisions, step, octave, ties, lyric
            )
            .unwrap();
        }
        out
    }
}

fn fmt_f64(value: f64) -> String {
    // Shortest representation that round-trips, for dump stability.
    let mut out = format!("{value}");
    if !out.contains('.') && !out.contains('e') {
        out.push_str(".0");
    }
    out
}

/// Severity of a validation finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// One validation finding; findings never abort processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationFinding {
    pub severity: Severity,
    pub message: String,
    pub location: String,
}

impl ValidationFinding {
    fn warning(location: String, message: String) -> Self {
        Self {
            severity: Severity::Warning,
            message,
            location,
        }
    }

    fn error(location: String, message: String) -> Self {
        Self {
            severity: Severity::Error,
            message,
            location,
        }
    }
}

/// Check a score for measure-fill mismatches, out-of-range octaves, dangling
/// ties and lyric syllabic sequencing errors. An empty list means clean.
pub fn validate_score(score: &Score, octave_range: &OctaveRange) -> Vec<ValidationFinding> {
    let mut findings = Vec::new();
    check_measure_fill(score, &mut findings);
    check_octaves(score, octave_range, &mut findings);
    check_ties(score, &mut findings);
    check_syllabic_sequence(score, &mut findings);
    findings
}

fn check_measure_fill(score: &Score, findings: &mut Vec<ValidationFinding>) {
    let Some(last) = score.notes.last() else {
        return;
    };
    let mut sums = vec![0u64; last.measure_index + 1];
    for note in &score.notes {
        sums[note.measure_index] += u64::from(note.duration_divisions);
    }
    for (measure, sum) in sums.iter().enumerate() {
        let signature = score.time_signature_for(measure);
        // Expected length in divisions: numerator beats of 4/denominator
        // quarters each. Compare cross-multiplied to stay in integers.
        let expected_times_den = u64::from(signature.numerator) * 4 * u64::from(score.divisions);
        if sum * u64::from(signature.denominator) != expected_times_den {
            let expected = expected_times_den as f64 / f64::from(signature.denominator);
            findings.push(ValidationFinding::warning(
                format!("measure {}", measure + 1),
                format!(
                    "measure fill {sum} divisions differs from expected {expected} \
                     under {}/{}",
                    signature.numerator, signature.denominator
                ),
            ));
        }
    }
}

fn check_octaves(score: &Score, range: &OctaveRange, findings: &mut Vec<ValidationFinding>) {
    for (index, note) in score.notes.iter().enumerate() {
        if let Some(pitch) = note.pitch {
            if !range.contains(pitch.octave()) {
                findings.push(ValidationFinding::error(
                    format!("note {index} (measure {})", note.measure_index + 1),
                    format!(
                        "octave out of supported range: {pitch} outside {}..={}",
                        range.min, range.max
                    ),
                ));
            }
        }
    }
}

fn check_ties(score: &Score, findings: &mut Vec<ValidationFinding>) {
    let mut open: Option<(usize, Pitch)> = None;
    for (index, note) in score.notes.iter().enumerate() {
        if let Some((start_index, pitch)) = open {
            let closes = note.tie_stop && note.pitch == Some(pitch);
            if !closes {
                findings.push(ValidationFinding::error(
                    format!("note {start_index}"),
                    format!("dangling tie: started on {pitch} but never stopped"),
                ));
            }
            open = None;
            if closes && !note.tie_start {
                continue;
            }
        } else if note.tie_stop {
            findings.push(ValidationFinding::error(
                format!("note {index}"),
                "tie stop without a preceding tie start".into(),
            ));
        }
        if note.tie_start {
            match note.pitch {
                Some(pitch) => open = Some((index, pitch)),
                None => findings.push(ValidationFinding::error(
                    format!("note {index}"),
                    "rest cannot start a tie".into(),
                )),
            }
        }
    }
    if let Some((start_index, pitch)) = open {
        findings.push(ValidationFinding::error(
            format!("note {start_index}"),
            format!("dangling tie: started on {pitch} but never stopped"),
        ));
    }
}

fn check_syllabic_sequence(score: &Score, findings: &mut Vec<ValidationFinding>) {
    let mut inside_word_since: Option<usize> = None;
    for (index, note) in score.notes.iter().enumerate() {
        let Some(lyric) = &note.lyric else {
            continue;
        };
        let location = format!("note {index} (measure {})", note.measure_index + 1);
        match (lyric.syllabic, inside_word_since) {
            (Syllabic::Single, None) => {}
            (Syllabic::Begin, None) => inside_word_since = Some(index),
            (Syllabic::Middle | Syllabic::End, None) => {
                findings.push(ValidationFinding::error(
                    location,
                    format!("syllabic {:?} without an open word", lyric.syllabic),
                ));
            }
            (Syllabic::Middle, Some(_)) => {}
            (Syllabic::End, Some(_)) => inside_word_since = None,
            (Syllabic::Single | Syllabic::Begin, Some(start)) => {
                findings.push(ValidationFinding::error(
                    location,
                    format!(
                        "syllabic {:?} inside the word opened at note {start}",
                        lyric.syllabic
                    ),
                ));
                inside_word_since = (lyric.syllabic == Syllabic::Begin).then_some(index);
            }
        }
    }
    if let Some(start) = inside_word_since {
        findings.push(ValidationFinding::error(
            format!("note {start}"),
            "word begun but never ended".into(),
        ));
    }
}
