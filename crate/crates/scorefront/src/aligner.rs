//! Note-phoneme alignment: assigns lexicon tokens to notes using the score's
//! syllabification, handles melisma, ties and rests, and computes per-note
//! durations in seconds and the per-note position ramp.

use serde::{Deserialize, Serialize};

use crate::config::OctaveRange;
use crate::error::{Error, Result};
use crate::lexicon::{is_vowel_token, phonemize, syllabify, Lexicon, OnsetTable, PhonemeInventory};
use crate::score::{NoteEvent, Score, Syllabic};

/// Step class index reserved for rests (after the 12 pitch classes).
pub const REST_STEP_CLASS: usize = 12;

/// Number of step classes including the rest class.
pub const NUM_STEP_CLASSES: usize = 13;

/// The note-side context attached to every aligned token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteContext {
    /// Octave class: 0-based within the supported range, or the rest class.
    pub octave_class: usize,
    /// Chromatic step 0..=11, or [`REST_STEP_CLASS`] for rests.
    pub step_class: usize,
    /// Expected duration of the note or rest in seconds.
    pub duration_seconds: f64,
    /// Index into `Score::notes`; `None` for the utterance start token.
    pub note_index: Option<usize>,
}

/// One phoneme token bound to its note context and position ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedToken {
    pub token_id: usize,
    pub context: NoteContext,
    /// Advancement of the note, 1.0 at its first token down to 0.0.
    pub ramp: f64,
}

/// The aligned token stream for one score; always starts with `<s>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSequence {
    pub score_id: String,
    pub tokens: Vec<AlignedToken>,
}

impl AlignedSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Debug dump: token, octave class, step class, duration, ramp per line.
    pub fn dump(&self, inventory: &PhonemeInventory) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for token in &self.tokens {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}",
                inventory.token(token.token_id).unwrap_or("?"),
                token.context.octave_class,
                token.context.step_class,
                token.context.duration_seconds,
                token.ramp
            )
            .unwrap();
        }
        out
    }
}

/// Duration in seconds of one event: (divisions of the event / divisions per
/// quarter) quarters at `tempo_qpm` quarters per minute.
pub fn note_duration_seconds(note: &NoteEvent, divisions: u32, tempo_qpm: f64) -> f64 {
    f64::from(note.duration_divisions) / f64::from(divisions) * 60.0 / tempo_qpm
}

/// A lyric syllable with the notes it is sung on; extra notes are melisma.
#[derive(Debug)]
struct SyllableUnit {
    text: String,
    syllabic: Syllabic,
    note_indices: Vec<usize>,
}

#[derive(Debug)]
enum Unit {
    Rest(usize),
    Syllable(SyllableUnit),
}

/// Align a score against a lexicon: one pause token per rest, one token group
/// per syllable, melisma vowels repeated per extra note, a word boundary
/// token after each word, and ramps computed per note.
pub fn align(
    score: &Score,
    lexicon: &Lexicon,
    inventory: &PhonemeInventory,
    octave_range: &OctaveRange,
    onsets: &OnsetTable,
) -> Result<AlignedSequence> {
    let units = collect_units(score)?;
    let syllable_groups = assign_pronunciations(&units, lexicon, onsets)?;

    let mut tokens = Vec::new();
    // Utterance start: rest-class context, zero duration, no backing note.
    tokens.push(AlignedToken {
        token_id: inventory.start_id(),
        context: NoteContext {
            octave_class: octave_range.rest_class(),
            step_class: REST_STEP_CLASS,
            duration_seconds: 0.0,
            note_index: None,
        },
        ramp: 0.0,
    });

    let context_of = |note_index: usize| -> Result<NoteContext> {
        let note = &score.notes[note_index];
        let duration_seconds = score.note_seconds(note);
        match note.pitch {
            Some(pitch) => {
                let octave_class = octave_range.class_of(pitch.octave()).ok_or_else(|| {
                    Error::Alignment(format!(
                        "note {note_index}: octave of {pitch} outside supported range {}..={}",
                        octave_range.min, octave_range.max
                    ))
                })?;
                Ok(NoteContext {
                    octave_class,
                    step_class: pitch.step() as usize,
                    duration_seconds,
                    note_index: Some(note_index),
                })
            }
            None => Ok(NoteContext {
                octave_class: octave_range.rest_class(),
                step_class: REST_STEP_CLASS,
                duration_seconds,
                note_index: Some(note_index),
            }),
        }
    };

    let mut syllable_counter = 0;
    for unit in &units {
        match unit {
            Unit::Rest(note_index) => {
                tokens.push(AlignedToken {
                    token_id: inventory.pause_id(),
                    context: context_of(*note_index)?,
                    ramp: 0.0,
                });
            }
            Unit::Syllable(syllable) => {
                let (group, last_of_word) = &syllable_groups[syllable_counter];
                syllable_counter += 1;
                emit_syllable(&mut tokens, syllable, group, inventory, &context_of)?;
                if *last_of_word {
                    let last_note = *syllable.note_indices.last().unwrap();
                    tokens.push(AlignedToken {
                        token_id: inventory.word_boundary_id(),
                        context: context_of(last_note)?,
                        ramp: 0.0,
                    });
                }
            }
        }
    }

    Ok(compute_ramps(AlignedSequence {
        score_id: score.id.clone(),
        tokens,
    }))
}

/// Walk notes into rest/syllable units. A pitched note without a lyric
/// continues the current syllable (melisma or tie continuation); a rest
/// closes it.
fn collect_units(score: &Score) -> Result<Vec<Unit>> {
    let mut units = Vec::new();
    let mut open_syllable: Option<SyllableUnit> = None;
    for (note_index, note) in score.notes.iter().enumerate() {
        if note.is_rest() {
            if let Some(unit) = open_syllable.take() {
                units.push(Unit::Syllable(unit));
            }
            units.push(Unit::Rest(note_index));
            continue;
        }
        match &note.lyric {
            Some(lyric) => {
                if let Some(unit) = open_syllable.take() {
                    units.push(Unit::Syllable(unit));
                }
                open_syllable = Some(SyllableUnit {
                    text: lyric.text.clone(),
                    syllabic: lyric.syllabic,
                    note_indices: vec![note_index],
                });
            }
            None => match open_syllable.as_mut() {
                Some(unit) => unit.note_indices.push(note_index),
                None => {
                    return Err(Error::Alignment(format!(
                        "note {note_index} (measure {}) has no lyric and no syllable to extend",
                        note.measure_index + 1
                    )));
                }
            },
        }
    }
    if let Some(unit) = open_syllable.take() {
        units.push(Unit::Syllable(unit));
    }
    Ok(units)
}

/// Group syllable units into words, phonemize each word and split its
/// pronunciation back over the syllables. Returns, per syllable unit in
/// order, its token group and whether it ends its word.
fn assign_pronunciations(
    units: &[Unit],
    lexicon: &Lexicon,
    onsets: &OnsetTable,
) -> Result<Vec<(Vec<String>, bool)>> {
    let syllables: Vec<&SyllableUnit> = units
        .iter()
        .filter_map(|unit| match unit {
            Unit::Syllable(s) => Some(s),
            Unit::Rest(_) => None,
        })
        .collect();

    // Words are runs of syllables delimited by the syllabic marks.
    let mut words: Vec<std::ops::Range<usize>> = Vec::new();
    let mut word_start: Option<usize> = None;
    for (index, syllable) in syllables.iter().enumerate() {
        match (syllable.syllabic, word_start) {
            (Syllabic::Single, None) => words.push(index..index + 1),
            (Syllabic::Begin, None) => word_start = Some(index),
            (Syllabic::Middle, Some(_)) => {}
            (Syllabic::End, Some(start)) => {
                words.push(start..index + 1);
                word_start = None;
            }
            (mark, state) => {
                return Err(Error::Alignment(format!(
                    "inconsistent syllabic mark {mark:?} on \"{}\" ({}in a word)",
                    syllable.text,
                    if state.is_some() { "" } else { "not " }
                )));
            }
        }
    }
    if word_start.is_some() {
        return Err(Error::Alignment("word begun but never ended".into()));
    }

    let word_texts: Vec<String> = words
        .iter()
        .map(|range| {
            syllables[range.clone()]
                .iter()
                .map(|s| s.text.as_str())
                .collect::<String>()
        })
        .collect();
    let pronunciations = phonemize(&word_texts, lexicon)?;

    let mut groups: Vec<(Vec<String>, bool)> = Vec::with_capacity(syllables.len());
    for (range, (text, pronunciation)) in words.iter().zip(word_texts.iter().zip(&pronunciations)) {
        let split = syllabify(text, pronunciation, range.len(), onsets)?;
        let last = range.len() - 1;
        for (offset, group) in split.into_iter().enumerate() {
            groups.push((group, offset == last));
        }
    }
    Ok(groups)
}

/// Emit one syllable's tokens. Onset consonants bind to the first note, coda
/// consonants to the last; the vowel nucleus is repeated once per extra
/// (melisma) note with that note's context.
fn emit_syllable(
    tokens: &mut Vec<AlignedToken>,
    syllable: &SyllableUnit,
    group: &[String],
    inventory: &PhonemeInventory,
    context_of: &impl Fn(usize) -> Result<NoteContext>,
) -> Result<()> {
    let notes = &syllable.note_indices;
    let first_context = context_of(notes[0])?;
    let push = |tokens: &mut Vec<AlignedToken>, token: &str, context: NoteContext| -> Result<()> {
        let token_id = inventory
            .id_of(token)
            .ok_or_else(|| Error::Alignment(format!("token \"{token}\" missing from inventory")))?;
        tokens.push(AlignedToken {
            token_id,
            context,
            ramp: 0.0,
        });
        Ok(())
    };

    if notes.len() == 1 {
        for token in group {
            push(tokens, token, first_context)?;
        }
        return Ok(());
    }

    let Some(nucleus) = group.iter().position(|token| is_vowel_token(token)) else {
        return Err(Error::Alignment(format!(
            "syllable \"{}\" spans {} notes but has no vowel to sustain",
            syllable.text,
            notes.len()
        )));
    };
    for token in &group[..nucleus] {
        push(tokens, token, first_context)?;
    }
    push(tokens, &group[nucleus], first_context)?;
    for extra_note in &notes[1..] {
        push(tokens, &group[nucleus], context_of(*extra_note)?)?;
    }
    let last_context = context_of(*notes.last().unwrap())?;
    for token in &group[nucleus + 1..] {
        push(tokens, token, last_context)?;
    }
    Ok(())
}

/// Assign the position ramp: within each note's K tokens, token i receives
/// (K-1-i)/(K-1); a single token gets 0.0. Tokens are grouped by consecutive
/// runs of the same note index; the start token is its own group.
pub fn compute_ramps(mut sequence: AlignedSequence) -> AlignedSequence {
    let mut begin = 0;
    while begin < sequence.tokens.len() {
        let key = sequence.tokens[begin].context.note_index;
        let mut end = begin + 1;
        if key.is_some() {
            while end < sequence.tokens.len() && sequence.tokens[end].context.note_index == key {
                end += 1;
            }
        }
        let count = end - begin;
        for (offset, token) in sequence.tokens[begin..end].iter_mut().enumerate() {
            token.ramp = if count >= 2 {
                (count - 1 - offset) as f64 / (count - 1) as f64
            } else {
                0.0
            };
        }
        begin = end;
    }
    sequence
}
