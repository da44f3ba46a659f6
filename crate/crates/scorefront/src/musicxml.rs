//! MusicXML parsing into the [`Score`] model.
//!
//! Accepts uncompressed partwise documents (.musicxml/.xml) and compressed
//! .mxl containers, whose root file is located through
//! `META-INF/container.xml`. Only monophonic single-part scores are accepted:
//! chords, multiple parts, grace notes and backup/forward voice writing are
//! hard errors, as are missing divisions or tempo.

use std::io::{Cursor, Read};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::error::{Error, Result};
use crate::score::{LyricSyllable, NoteEvent, Pitch, Score, Syllabic, TempoEntry, TimeSignature};

/// Parse a MusicXML document (or .mxl container) into a validated score.
pub fn parse_musicxml(document: &[u8]) -> Result<Score> {
    let xml = if document.starts_with(b"PK\x03\x04") {
        extract_mxl_root(document)?
    } else {
        document.to_vec()
    };
    let text = decode_utf8(&xml)?;
    let score = DocumentParser::new(text).parse()?;
    score.check_invariants()?;
    Ok(score)
}

fn decode_utf8(bytes: &[u8]) -> Result<&str> {
    let bytes = bytes.strip_prefix(b"\xef\xbb\xbf").unwrap_or(bytes);
    std::str::from_utf8(bytes).map_err(|e| Error::Xml {
        line: 1,
        column: 1,
        message: format!("document is not valid UTF-8: {e}"),
    })
}

/// Pull the root score file out of a compressed .mxl container.
fn extract_mxl_root(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes))
        .map_err(|e| Error::Container(format!("not a readable zip archive: {e}")))?;
    let container = {
        let mut file = archive
            .by_name("META-INF/container.xml")
            .map_err(|e| Error::Container(format!("META-INF/container.xml: {e}")))?;
        let mut text = String::new();
        file.read_to_string(&mut text)
            .map_err(|e| Error::Container(format!("META-INF/container.xml: {e}")))?;
        text
    };
    let root_path = container_root_path(&container)?;
    let mut file = archive
        .by_name(&root_path)
        .map_err(|e| Error::Container(format!("root file {root_path}: {e}")))?;
    let mut data = Vec::new();
    file.read_to_end(&mut data)
        .map_err(|e| Error::Container(format!("root file {root_path}: {e}")))?;
    Ok(data)
}

/// First `<rootfile full-path="...">` in a container manifest.
fn container_root_path(container: &str) -> Result<String> {
    let mut reader = Reader::from_str(container);
    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) | Ok(Event::Empty(e)) if e.local_name().as_ref() == b"rootfile" => {
                for attr in e.attributes() {
                    let attr = attr.map_err(|e| Error::Container(format!("container.xml: {e}")))?;
                    if attr.key.local_name().as_ref() == b"full-path" {
                        let value = attr
                            .unescape_value()
                            .map_err(|e| Error::Container(format!("container.xml: {e}")))?;
                        return Ok(value.into_owned());
                    }
                }
                return Err(Error::Container(
                    "rootfile element lacks a full-path attribute".into(),
                ));
            }
            Ok(Event::Eof) => {
                return Err(Error::Container("container.xml names no rootfile".into()))
            }
            Err(e) => return Err(Error::Container(format!("container.xml: {e}"))),
            _ => {}
        }
    }
}

struct DocumentParser<'a> {
    reader: Reader<&'a [u8]>,
    text: &'a str,
    score: Score,
    /// Cumulative position in divisions within the current part.
    onset: u64,
    measure_index: usize,
    parts_seen: usize,
    divisions_seen: bool,
    title: Option<String>,
}

impl<'a> DocumentParser<'a> {
    fn new(text: &'a str) -> Self {
        let mut reader = Reader::from_str(text);
        reader.config_mut().trim_text(true);
        Self {
            reader,
            text,
            score: Score {
                id: String::new(),
                divisions: 0,
                tempo_map: Vec::new(),
                time_signatures: Vec::new(),
                notes: Vec::new(),
            },
            onset: 0,
            measure_index: 0,
            parts_seen: 0,
            divisions_seen: false,
            title: None,
        }
    }

    fn parse(mut self) -> Result<Score> {
        loop {
            match self.next()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"score-partwise" => {
                        self.parse_score_partwise()?;
                        break;
                    }
                    b"score-timewise" => {
                        return Err(self.unsupported("score-timewise document", "document root"))
                    }
                    other => {
                        let name = String::from_utf8_lossy(other).into_owned();
                        return Err(
                            self.xml_error(format!("expected score-partwise root, found <{name}>"))
                        );
                    }
                },
                Event::Eof => {
                    return Err(self.xml_error("document ended before any score element".into()))
                }
                _ => {}
            }
        }
        if !self.divisions_seen {
            return Err(Error::MissingElement("divisions".into()));
        }
        if self.score.tempo_map.is_empty() {
            return Err(Error::MissingElement("tempo".into()));
        }
        if let Some(first_note) = self.score.notes.first() {
            if self.score.tempo_map[0].onset_divisions > first_note.onset_divisions {
                return Err(Error::MissingElement(
                    "tempo in effect at the first note".into(),
                ));
            }
        }
        self.score.id = self.title.unwrap_or_else(|| "score".into());
        if self.score.time_signatures.is_empty() {
            // MusicXML defaults to common time when no time element appears.
            self.score.time_signatures.push((
                0,
                TimeSignature {
                    numerator: 4,
                    denominator: 4,
                },
            ));
        }
        Ok(self.score)
    }

    fn parse_score_partwise(&mut self) -> Result<()> {
        loop {
            match self.next()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"part" => {
                        self.parts_seen += 1;
                        if self.parts_seen > 1 {
                            return Err(self.unsupported("multiple parts", "second part element"));
                        }
                        self.parse_part()?;
                    }
                    b"movement-title" | b"work-title" => {
                        let title = self.read_element_text(&e)?;
                        if self.title.is_none() && !title.is_empty() {
                            self.title = Some(title);
                        }
                    }
                    b"part-list" | b"identification" | b"defaults" | b"credit" | b"work" => {
                        if e.local_name().as_ref() == b"work" {
                            // Descend so work-title is picked up above.
                            continue;
                        }
                        self.skip_element(&e)?;
                    }
                    _ => {}
                },
                Event::End(e) if e.local_name().as_ref() == b"score-partwise" => return Ok(()),
                Event::Eof => {
                    return Err(self.xml_error("unexpected end of document in score".into()))
                }
                _ => {}
            }
        }
    }

    fn parse_part(&mut self) -> Result<()> {
        loop {
            match self.next()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"measure" => {
                        self.parse_measure()?;
                        self.measure_index += 1;
                    }
                    _ => self.skip_element(&e)?,
                },
                Event::End(e) if e.local_name().as_ref() == b"part" => return Ok(()),
                Event::Eof => {
                    return Err(self.xml_error("unexpected end of document in part".into()))
                }
                _ => {}
            }
        }
    }

    fn parse_measure(&mut self) -> Result<()> {
        loop {
            match self.next()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"attributes" => self.parse_attributes()?,
                    b"note" => self.parse_note()?,
                    b"direction" => self.parse_direction()?,
                    b"sound" => self.parse_sound(&e)?,
                    b"backup" | b"forward" => {
                        return Err(self.unsupported(
                            "backup/forward voice writing",
                            &format!("measure {}", self.measure_index + 1),
                        ))
                    }
                    _ => self.skip_element(&e)?,
                },
                Event::Empty(e) => match e.local_name().as_ref() {
                    b"sound" => self.parse_sound(&e)?,
                    b"backup" | b"forward" => {
                        return Err(self.unsupported(
                            "backup/forward voice writing",
                            &format!("measure {}", self.measure_index + 1),
                        ))
                    }
                    _ => {}
                },
                Event::End(e) if e.local_name().as_ref() == b"measure" => return Ok(()),
                Event::Eof => {
                    return Err(self.xml_error("unexpected end of document in measure".into()))
                }
                _ => {}
            }
        }
    }

    fn parse_attributes(&mut self) -> Result<()> {
        loop {
            match self.next()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"divisions" => {
                        let value: u32 = self.read_parsed(&e, "divisions")?;
                        if value == 0 {
                            return Err(self.xml_error("divisions must be positive".into()));
                        }
                        if self.divisions_seen && value != self.score.divisions {
                            return Err(self.unsupported(
                                "divisions change mid-score",
                                &format!("measure {}", self.measure_index + 1),
                            ));
                        }
                        self.score.divisions = value;
                        self.divisions_seen = true;
                    }
                    b"time" => self.parse_time()?,
                    _ => self.skip_element(&e)?,
                },
                Event::End(e) if e.local_name().as_ref() == b"attributes" => return Ok(()),
                Event::Eof => {
                    return Err(self.xml_error("unexpected end of document in attributes".into()))
                }
                _ => {}
            }
        }
    }

    fn parse_time(&mut self) -> Result<()> {
        let mut numerator: Option<u32> = None;
        let mut denominator: Option<u32> = None;
        loop {
            match self.next()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"beats" => numerator = Some(self.read_parsed(&e, "beats")?),
                    b"beat-type" => denominator = Some(self.read_parsed(&e, "beat-type")?),
                    _ => self.skip_element(&e)?,
                },
                Event::End(e) if e.local_name().as_ref() == b"time" => break,
                Event::Eof => {
                    return Err(self.xml_error("unexpected end of document in time".into()))
                }
                _ => {}
            }
        }
        let (Some(numerator), Some(denominator)) = (numerator, denominator) else {
            return Err(self.xml_error("time element without beats/beat-type".into()));
        };
        if numerator == 0 || denominator == 0 {
            return Err(self.xml_error("time signature terms must be positive".into()));
        }
        let signature = TimeSignature {
            numerator,
            denominator,
        };
        let changed = self
            .score
            .time_signatures
            .last()
            .map(|(_, current)| *current != signature)
            .unwrap_or(true);
        if changed {
            self.score
                .time_signatures
                .push((self.measure_index, signature));
        }
        Ok(())
    }

    fn parse_direction(&mut self) -> Result<()> {
        loop {
            match self.next()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"sound" => self.parse_sound(&e)?,
                    b"metronome" => self.parse_metronome()?,
                    b"direction-type" => {} // descend
                    _ => self.skip_element(&e)?,
                },
                Event::Empty(e) if e.local_name().as_ref() == b"sound" => self.parse_sound(&e)?,
                Event::End(e) if e.local_name().as_ref() == b"direction" => return Ok(()),
                Event::Eof => {
                    return Err(self.xml_error("unexpected end of document in direction".into()))
                }
                _ => {}
            }
        }
    }

    /// `<sound tempo="...">` carries quarter notes per minute directly.
    fn parse_sound(&mut self, element: &BytesStart<'_>) -> Result<()> {
        for attr in element.attributes() {
            let attr = attr.map_err(|e| self.xml_error(format!("bad attribute: {e}")))?;
            if attr.key.local_name().as_ref() == b"tempo" {
                let value = attr
                    .unescape_value()
                    .map_err(|e| self.xml_error(format!("bad tempo attribute: {e}")))?;
                let qpm: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| self.xml_error(format!("invalid tempo \"{value}\"")))?;
                if qpm <= 0.0 {
                    return Err(self.xml_error(format!("tempo {qpm} is not positive")));
                }
                self.push_tempo(qpm);
            }
        }
        Ok(())
    }

    /// `<metronome>` with beat-unit/per-minute, converted to quarter qpm.
    fn parse_metronome(&mut self) -> Result<()> {
        let mut beat_unit: Option<String> = None;
        let mut dotted = false;
        let mut per_minute: Option<f64> = None;
        loop {
            match self.next()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"beat-unit" => beat_unit = Some(self.read_element_text(&e)?),
                    b"per-minute" => {
                        let text = self.read_element_text(&e)?;
                        per_minute = Some(text.trim().parse().map_err(|_| {
                            self.xml_error(format!("invalid per-minute \"{text}\""))
                        })?);
                    }
                    b"beat-unit-dot" => {
                        dotted = true;
                        self.skip_element(&e)?;
                    }
                    _ => self.skip_element(&e)?,
                },
                Event::Empty(e) if e.local_name().as_ref() == b"beat-unit-dot" => dotted = true,
                Event::End(e) if e.local_name().as_ref() == b"metronome" => break,
                Event::Eof => {
                    return Err(self.xml_error("unexpected end of document in metronome".into()))
                }
                _ => {}
            }
        }
        let (Some(unit), Some(per_minute)) = (beat_unit, per_minute) else {
            return Ok(()); // visual-only metronome marks carry no tempo
        };
        let quarters_per_beat = match unit.as_str() {
            "whole" => 4.0,
            "half" => 2.0,
            "quarter" => 1.0,
            "eighth" => 0.5,
            "16th" => 0.25,
            other => {
                return Err(self.unsupported(
                    &format!("metronome beat-unit \"{other}\""),
                    &format!("measure {}", self.measure_index + 1),
                ))
            }
        } * if dotted { 1.5 } else { 1.0 };
        let qpm = per_minute * quarters_per_beat;
        if qpm <= 0.0 {
            return Err(self.xml_error(format!("metronome tempo {qpm} is not positive")));
        }
        self.push_tempo(qpm);
        Ok(())
    }

    fn push_tempo(&mut self, qpm: f64) {
        self.score.tempo_map.push(TempoEntry {
            onset_divisions: self.onset,
            qpm,
        });
    }

    fn parse_note(&mut self) -> Result<()> {
        let measure_location = format!("measure {}", self.measure_index + 1);
        let mut is_rest = false;
        let mut is_chord = false;
        let mut is_grace = false;
        let mut step: Option<String> = None;
        let mut alter: i64 = 0;
        let mut octave: Option<i32> = None;
        let mut duration: Option<u32> = None;
        let mut tie_start = false;
        let mut tie_stop = false;
        let mut lyric: Option<LyricSyllable> = None;

        loop {
            match self.next()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"pitch" => {
                        let (s, a, o) = self.parse_pitch()?;
                        step = Some(s);
                        alter = a;
                        octave = Some(o);
                    }
                    b"duration" => duration = Some(self.read_parsed(&e, "duration")?),
                    b"lyric" => {
                        let parsed = self.parse_lyric()?;
                        // Additional verses are ignored; verse one wins.
                        if lyric.is_none() {
                            lyric = parsed;
                        }
                    }
                    b"notations" => {
                        let (tied_start, tied_stop) = self.parse_notations()?;
                        tie_start |= tied_start;
                        tie_stop |= tied_stop;
                    }
                    b"rest" => {
                        is_rest = true;
                        self.skip_element(&e)?;
                    }
                    b"tie" => {
                        let (s, e2) = self.tie_type(&e)?;
                        tie_start |= s;
                        tie_stop |= e2;
                        self.skip_element(&e)?;
                    }
                    b"chord" => {
                        is_chord = true;
                        self.skip_element(&e)?;
                    }
                    b"grace" => {
                        is_grace = true;
                        self.skip_element(&e)?;
                    }
                    _ => self.skip_element(&e)?,
                },
                Event::Empty(e) => match e.local_name().as_ref() {
                    b"rest" => is_rest = true,
                    b"chord" => is_chord = true,
                    b"grace" => is_grace = true,
                    b"tie" => {
                        let (s, e2) = self.tie_type(&e)?;
                        tie_start |= s;
                        tie_stop |= e2;
                    }
                    _ => {}
                },
                Event::End(e) if e.local_name().as_ref() == b"note" => break,
                Event::Eof => {
                    return Err(self.xml_error("unexpected end of document in note".into()))
                }
                _ => {}
            }
        }

        if is_chord {
            return Err(self.unsupported("polyphonic chord", &measure_location));
        }
        if is_grace {
            return Err(self.unsupported("grace note", &measure_location));
        }
        let Some(duration) = duration else {
            return Err(Error::InvalidDocument {
                location: measure_location,
                message: "note without duration".into(),
            });
        };
        if duration == 0 {
            return Err(Error::InvalidDocument {
                location: measure_location,
                message: "note duration must be positive".into(),
            });
        }

        let pitch = if is_rest {
            if lyric.is_some() {
                return Err(Error::InvalidDocument {
                    location: measure_location,
                    message: "rest carries a lyric".into(),
                });
            }
            None
        } else {
            let (Some(step), Some(octave)) = (step, octave) else {
                return Err(Error::InvalidDocument {
                    location: measure_location,
                    message: "pitched note without step/octave".into(),
                });
            };
            Some(
                fold_pitch(&step, alter, octave).map_err(|message| Error::InvalidDocument {
                    location: measure_location.clone(),
                    message,
                })?,
            )
        };

        self.score.notes.push(NoteEvent {
            pitch,
            duration_divisions: duration,
            onset_divisions: self.onset,
            tie_start,
            tie_stop,
            lyric,
            measure_index: self.measure_index,
        });
        self.onset += u64::from(duration);
        Ok(())
    }

    fn parse_pitch(&mut self) -> Result<(String, i64, i32)> {
        let mut step: Option<String> = None;
        let mut alter: i64 = 0;
        let mut octave: Option<i32> = None;
        loop {
            match self.next()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"step" => step = Some(self.read_element_text(&e)?),
                    b"octave" => octave = Some(self.read_parsed(&e, "octave")?),
                    b"alter" => {
                        let text = self.read_element_text(&e)?;
                        let value: f64 = text
                            .trim()
                            .parse()
                            .map_err(|_| self.xml_error(format!("invalid alter \"{text}\"")))?;
                        if value.fract() != 0.0 {
                            return Err(self.unsupported(
                                "microtonal alter",
                                &format!("measure {}", self.measure_index + 1),
                            ));
                        }
                        alter = value as i64;
                    }
                    _ => self.skip_element(&e)?,
                },
                Event::End(e) if e.local_name().as_ref() == b"pitch" => break,
                Event::Eof => {
                    return Err(self.xml_error("unexpected end of document in pitch".into()))
                }
                _ => {}
            }
        }
        let (Some(step), Some(octave)) = (step, octave) else {
            return Err(self.xml_error("pitch without step/octave".into()));
        };
        Ok((step, alter, octave))
    }

    fn parse_lyric(&mut self) -> Result<Option<LyricSyllable>> {
        let mut syllabic = Syllabic::Single;
        let mut text: Option<String> = None;
        let mut extend = false;
        loop {
            match self.next()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"syllabic" => {
                        let value = self.read_element_text(&e)?;
                        syllabic = match value.trim() {
                            "single" => Syllabic::Single,
                            "begin" => Syllabic::Begin,
                            "middle" => Syllabic::Middle,
                            "end" => Syllabic::End,
                            other => {
                                return Err(self.xml_error(format!("unknown syllabic \"{other}\"")))
                            }
                        };
                    }
                    b"text" => text = Some(self.read_element_text(&e)?),
                    b"extend" => {
                        extend = true;
                        self.skip_element(&e)?;
                    }
                    _ => self.skip_element(&e)?,
                },
                Event::Empty(e) if e.local_name().as_ref() == b"extend" => extend = true,
                Event::End(e) if e.local_name().as_ref() == b"lyric" => break,
                Event::Eof => {
                    return Err(self.xml_error("unexpected end of document in lyric".into()))
                }
                _ => {}
            }
        }
        Ok(text.map(|text| LyricSyllable {
            text,
            syllabic,
            melisma_extend: extend,
        }))
    }

    /// Notation-level `<tied>` marks, used when sound-level `<tie>` is absent.
    fn parse_notations(&mut self) -> Result<(bool, bool)> {
        let mut tie_start = false;
        let mut tie_stop = false;
        loop {
            match self.next()? {
                Event::Start(e) | Event::Empty(e) if e.local_name().as_ref() == b"tied" => {
                    let (s, e2) = self.tie_type(&e)?;
                    tie_start |= s;
                    tie_stop |= e2;
                }
                Event::Start(e) => self.skip_element(&e)?,
                Event::End(e) if e.local_name().as_ref() == b"notations" => break,
                Event::Eof => {
                    return Err(self.xml_error("unexpected end of document in notations".into()))
                }
                _ => {}
            }
        }
        Ok((tie_start, tie_stop))
    }

    fn tie_type(&self, element: &BytesStart<'_>) -> Result<(bool, bool)> {
        for attr in element.attributes() {
            let attr = attr.map_err(|e| self.xml_error(format!("bad attribute: {e}")))?;
            if attr.key.local_name().as_ref() == b"type" {
                let value = attr
                    .unescape_value()
                    .map_err(|e| self.xml_error(format!("bad tie type: {e}")))?;
                return Ok(match value.as_ref() {
                    "start" => (true, false),
                    "stop" => (false, true),
                    "continue" => (true, true),
                    _ => (false, false),
                });
            }
        }
        Ok((false, false))
    }

    // --- low-level helpers ---

    fn next(&mut self) -> Result<Event<'a>> {
        self.reader
            .read_event()
            .map_err(|e| self.xml_error(e.to_string()))
    }

    /// Text content of the element just opened by `element`.
    fn read_element_text(&mut self, element: &BytesStart<'_>) -> Result<String> {
        let end = element.to_end().into_owned();
        let text = self
            .reader
            .read_text(end.name())
            .map_err(|e| self.xml_error(e.to_string()))?;
        Ok(text.trim().to_string())
    }

    fn read_parsed<T: std::str::FromStr>(
        &mut self,
        element: &BytesStart<'_>,
        what: &str,
    ) -> Result<T> {
        let text = self.read_element_text(element)?;
        text.trim()
            .parse()
            .map_err(|_| self.xml_error(format!("invalid {what} \"{text}\"")))
    }

    fn skip_element(&mut self, element: &BytesStart<'_>) -> Result<()> {
        let end = element.to_end().into_owned();
        self.reader
            .read_to_end(end.name())
            .map_err(|e| self.xml_error(e.to_string()))?;
        Ok(())
    }

    fn xml_error(&self, message: String) -> Error {
        let offset = self.reader.buffer_position() as usize;
        let (line, column) = line_column(self.text, offset.min(self.text.len()));
        Error::Xml {
            line,
            column,
            message,
        }
    }

    fn unsupported(&self, feature: &str, location: &str) -> Error {
        Error::UnsupportedFeature {
            feature: feature.to_string(),
            location: location.to_string(),
        }
    }
}

/// Fold a step letter plus alter into a chromatic pitch, carrying octaves.
fn fold_pitch(step: &str, alter: i64, octave: i32) -> std::result::Result<Pitch, String> {
    let base = match step {
        "C" => 0,
        "D" => 2,
        "E" => 4,
        "F" => 5,
        "G" => 7,
        "A" => 9,
        "B" => 11,
        other => return Err(format!("unknown step \"{other}\"")),
    };
    let chromatic = octave as i64 * 12 + base + alter;
    Ok(Pitch::from_chromatic(chromatic))
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut column = 1;
    for byte in text.as_bytes()[..offset].iter() {
        if *byte == b'\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    (line, column)
}
