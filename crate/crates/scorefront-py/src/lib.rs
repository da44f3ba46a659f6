//! Python bindings for the scorefront library.
//!
//! Exposes the main types (Score, Inventory, Lexicon, AlignedSequence,
//! FeatureMatrix, Segment) and the operations around them. Build with
//! maturin, or compile the cdylib with cargo and place it on the Python
//! path as `scorefront_py`.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use scorefront::aligner;
use scorefront::augmenter;
use scorefront::config::OctaveRange;
use scorefront::embedder;
use scorefront::error::Error;
use scorefront::lexicon;
use scorefront::mushra;
use scorefront::score;
use scorefront::splitter;
use scorefront::tdist;

fn to_py_err(error: Error) -> PyErr {
    PyValueError::new_err(error.to_string())
}

fn octave_range(octave_min: i32, octave_max: i32) -> PyResult<OctaveRange> {
    OctaveRange::new(octave_min, octave_max).map_err(to_py_err)
}

/// Phoneme inventory with stable token IDs.
#[pyclass(name = "Inventory")]
struct PyInventory {
    inner: lexicon::PhonemeInventory,
}

#[pymethods]
impl PyInventory {
    /// The built-in 84-token inventory.
    #[staticmethod]
    fn default() -> Self {
        Self {
            inner: lexicon::PhonemeInventory::default_inventory(),
        }
    }

    /// Parse an inventory file; returns (inventory, warnings).
    #[staticmethod]
    #[pyo3(signature = (text, strict = true))]
    fn parse(text: &str, strict: bool) -> PyResult<(Self, Vec<String>)> {
        let (inner, warnings) =
            lexicon::PhonemeInventory::parse(text, strict).map_err(to_py_err)?;
        Ok((Self { inner }, warnings))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn id_of(&self, token: &str) -> Option<usize> {
        self.inner.id_of(token)
    }

    fn token(&self, id: usize) -> Option<String> {
        self.inner.token(id).map(str::to_string)
    }

    #[getter]
    fn tokens(&self) -> Vec<String> {
        self.inner.tokens().to_vec()
    }

    #[getter]
    fn start_id(&self) -> usize {
        self.inner.start_id()
    }

    #[getter]
    fn word_boundary_id(&self) -> usize {
        self.inner.word_boundary_id()
    }

    #[getter]
    fn pause_id(&self) -> usize {
        self.inner.pause_id()
    }
}

/// Pronunciation lexicon.
#[pyclass(name = "Lexicon")]
struct PyLexicon {
    inner: lexicon::Lexicon,
}

#[pymethods]
impl PyLexicon {
    #[staticmethod]
    fn parse(text: &str, inventory: PyRef<'_, PyInventory>) -> PyResult<Self> {
        Ok(Self {
            inner: lexicon::Lexicon::parse(text, &inventory.inner).map_err(to_py_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn lookup(&self, word: &str) -> Option<Vec<Vec<String>>> {
        self.inner.lookup(word).map(|p| p.to_vec())
    }
}

/// A parsed monophonic score.
#[pyclass(name = "Score")]
struct PyScore {
    inner: score::Score,
}

#[pymethods]
impl PyScore {
    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn divisions(&self) -> u32 {
        self.inner.divisions
    }

    #[getter]
    fn note_count(&self) -> usize {
        self.inner.notes.len()
    }

    fn duration_seconds(&self) -> f64 {
        self.inner.duration_seconds()
    }

    fn canonical_dump(&self) -> String {
        self.inner.canonical_dump()
    }

    /// Notes as (onset, duration, step, octave, is_rest, lyric) tuples.
    #[allow(clippy::type_complexity)]
    fn notes(&self) -> Vec<(u64, u32, Option<u8>, Option<i32>, bool, Option<String>)> {
        self.inner
            .notes
            .iter()
            .map(|note| {
                (
                    note.onset_divisions,
                    note.duration_divisions,
                    note.pitch.map(|p| p.step()),
                    note.pitch.map(|p| p.octave()),
                    note.is_rest(),
                    note.lyric.as_ref().map(|l| l.text.clone()),
                )
            })
            .collect()
    }

    /// Validation findings as (severity, message, location) tuples.
    #[pyo3(signature = (octave_min = 2, octave_max = 5))]
    fn validate(
        &self,
        octave_min: i32,
        octave_max: i32,
    ) -> PyResult<Vec<(String, String, String)>> {
        let range = octave_range(octave_min, octave_max)?;
        Ok(score::validate_score(&self.inner, &range)
            .into_iter()
            .map(|finding| {
                let severity = match finding.severity {
                    score::Severity::Warning => "warning",
                    score::Severity::Error => "error",
                };
                (severity.to_string(), finding.message, finding.location)
            })
            .collect())
    }
}

/// Parse a MusicXML document or .mxl container.
#[pyfunction]
fn parse_musicxml(document: &[u8]) -> PyResult<PyScore> {
    Ok(PyScore {
        inner: scorefront::musicxml::parse_musicxml(document).map_err(to_py_err)?,
    })
}

/// Aligned token stream.
#[pyclass(name = "AlignedSequence")]
struct PyAlignedSequence {
    inner: aligner::AlignedSequence,
}

#[pymethods]
impl PyAlignedSequence {
    #[getter]
    fn score_id(&self) -> String {
        self.inner.score_id.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Tokens as (token_id, octave_class, step_class, duration, ramp,
    /// note_index) tuples.
    #[allow(clippy::type_complexity)]
    fn tokens(&self) -> Vec<(usize, usize, usize, f64, f64, Option<usize>)> {
        self.inner
            .tokens
            .iter()
            .map(|token| {
                (
                    token.token_id,
                    token.context.octave_class,
                    token.context.step_class,
                    token.context.duration_seconds,
                    token.ramp,
                    token.context.note_index,
                )
            })
            .collect()
    }

    /// Token strings in order.
    fn token_names(&self, inventory: PyRef<'_, PyInventory>) -> Vec<String> {
        self.inner
            .tokens
            .iter()
            .map(|token| {
                inventory
                    .inner
                    .token(token.token_id)
                    .unwrap_or("?")
                    .to_string()
            })
            .collect()
    }

    fn dump(&self, inventory: PyRef<'_, PyInventory>) -> String {
        self.inner.dump(&inventory.inner)
    }
}

/// Align a score with a lexicon into the token stream.
#[pyfunction]
#[pyo3(signature = (score, lexicon, inventory, octave_min = 2, octave_max = 5))]
fn align(
    score: PyRef<'_, PyScore>,
    lexicon: PyRef<'_, PyLexicon>,
    inventory: PyRef<'_, PyInventory>,
    octave_min: i32,
    octave_max: i32,
) -> PyResult<PyAlignedSequence> {
    let range = octave_range(octave_min, octave_max)?;
    Ok(PyAlignedSequence {
        inner: aligner::align(
            &score.inner,
            &lexicon.inner,
            &inventory.inner,
            &range,
            &lexicon::OnsetTable::english_default(),
        )
        .map_err(to_py_err)?,
    })
}

/// First-listed pronunciation per word; raises on out-of-vocabulary words.
#[pyfunction]
fn phonemize(words: Vec<String>, lexicon: PyRef<'_, PyLexicon>) -> PyResult<Vec<Vec<String>>> {
    lexicon::phonemize(&words, &lexicon.inner).map_err(to_py_err)
}

/// Split a pronunciation into syllable groups by maximal onset.
#[pyfunction]
fn syllabify(
    word: &str,
    pronunciation: Vec<String>,
    n_syllables: usize,
) -> PyResult<Vec<Vec<String>>> {
    lexicon::syllabify(
        word,
        &pronunciation,
        n_syllables,
        &lexicon::OnsetTable::english_default(),
    )
    .map_err(to_py_err)
}

/// Mean/population-std/count of token durations over sequences.
#[pyfunction]
fn compute_duration_stats(
    sequences: Vec<PyRef<'_, PyAlignedSequence>>,
) -> PyResult<(f64, f64, usize)> {
    let owned: Vec<aligner::AlignedSequence> = sequences.iter().map(|s| s.inner.clone()).collect();
    let stats = embedder::compute_duration_stats(&owned).map_err(to_py_err)?;
    Ok((stats.mean, stats.std, stats.n))
}

/// Feature matrix of 32-bit values.
#[pyclass(name = "FeatureMatrix")]
struct PyFeatureMatrix {
    inner: embedder::FeatureMatrix,
}

#[pymethods]
impl PyFeatureMatrix {
    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols
    }

    #[getter]
    fn score_id(&self) -> String {
        self.inner.score_id.clone()
    }

    #[getter]
    fn stats(&self) -> (f64, f64) {
        (self.inner.mean, self.inner.std)
    }

    /// Row-major nested lists.
    fn to_rows(&self) -> Vec<Vec<f32>> {
        (0..self.inner.rows)
            .map(|row| self.inner.row(row).to_vec())
            .collect()
    }

    fn row(&self, index: usize) -> PyResult<Vec<f32>> {
        if index >= self.inner.rows {
            return Err(PyValueError::new_err(format!(
                "row {index} out of range 0..{}",
                self.inner.rows
            )));
        }
        Ok(self.inner.row(index).to_vec())
    }

    /// Write the binary feature file.
    fn write(&self, path: &str) -> PyResult<()> {
        let mut file = std::fs::File::create(path)?;
        embedder::write_features(&self.inner, &mut file).map_err(to_py_err)
    }

    /// Read a binary feature file.
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let mut file = std::fs::File::open(path)?;
        Ok(Self {
            inner: embedder::read_features(&mut file).map_err(to_py_err)?,
        })
    }
}

/// Build the feature matrix for an aligned sequence.
#[pyfunction]
#[pyo3(signature = (sequence, mean, std, inventory, octave_min = 2, octave_max = 5))]
fn build_features(
    sequence: PyRef<'_, PyAlignedSequence>,
    mean: f64,
    std: f64,
    inventory: PyRef<'_, PyInventory>,
    octave_min: i32,
    octave_max: i32,
) -> PyResult<PyFeatureMatrix> {
    let range = octave_range(octave_min, octave_max)?;
    let stats = embedder::DurationStats { mean, std, n: 2 };
    Ok(PyFeatureMatrix {
        inner: embedder::build_feature_matrix(&sequence.inner, &stats, &inventory.inner, &range)
            .map_err(to_py_err)?,
    })
}

/// Shift every pitch by `semitones`, erroring outside the octave range.
#[pyfunction]
#[pyo3(signature = (score, semitones, octave_min = 2, octave_max = 5))]
fn transpose(
    score: PyRef<'_, PyScore>,
    semitones: i32,
    octave_min: i32,
    octave_max: i32,
) -> PyResult<PyScore> {
    let range = octave_range(octave_min, octave_max)?;
    Ok(PyScore {
        inner: augmenter::transpose(&score.inner, semitones, &range).map_err(to_py_err)?,
    })
}

/// Multiply the tempo map by `factor`.
#[pyfunction]
fn scale_tempo(score: PyRef<'_, PyScore>, factor: f64) -> PyResult<PyScore> {
    Ok(PyScore {
        inner: augmenter::scale_tempo(&score.inner, factor).map_err(to_py_err)?,
    })
}

/// The full augmentation grid. Returns (variants, failures) where variants
/// are (semitones, tempo_factor, score) and failures (semitones,
/// tempo_factor, message).
#[pyfunction]
#[pyo3(signature = (score, octave_min = 2, octave_max = 5))]
#[allow(clippy::type_complexity)]
fn augmentation_grid(
    score: PyRef<'_, PyScore>,
    octave_min: i32,
    octave_max: i32,
) -> PyResult<(Vec<(i32, f64, PyScore)>, Vec<(i32, f64, String)>)> {
    let range = octave_range(octave_min, octave_max)?;
    let grid = augmenter::augmentation_grid(
        &score.inner,
        &augmenter::AugmentationSets::default(),
        &range,
    )
    .map_err(to_py_err)?;
    let variants = grid
        .variants
        .into_iter()
        .map(|(spec, inner)| (spec.semitones, spec.tempo_factor, PyScore { inner }))
        .collect();
    let failures = grid
        .failures
        .into_iter()
        .map(|(spec, error)| (spec.semitones, spec.tempo_factor, error.to_string()))
        .collect();
    Ok((variants, failures))
}

/// Histogram of signed semitone intervals between consecutive pitched notes.
#[pyfunction]
fn pitch_change_histogram(scores: Vec<PyRef<'_, PyScore>>) -> BTreeMap<i64, u64> {
    let owned: Vec<score::Score> = scores.iter().map(|s| s.inner.clone()).collect();
    augmenter::pitch_change_histogram(&owned).bins
}

/// A contiguous slice of one score used for splitting.
#[pyclass(name = "Segment")]
struct PySegment {
    inner: splitter::Segment,
}

#[pymethods]
impl PySegment {
    #[getter]
    fn id(&self) -> String {
        self.inner.id()
    }

    #[getter]
    fn score_id(&self) -> String {
        self.inner.score_id.clone()
    }

    #[getter]
    fn note_span(&self) -> (usize, usize) {
        (self.inner.note_span.start, self.inner.note_span.end)
    }

    #[getter]
    fn duration_seconds(&self) -> f64 {
        self.inner.duration_seconds
    }

    #[getter]
    fn pitch_sequence(&self) -> Vec<i64> {
        self.inner.pitch_sequence.clone()
    }
}

/// Greedy segmentation into roughly min_s..max_s second slices.
#[pyfunction]
#[pyo3(signature = (score, min_s = 20.0, max_s = 30.0))]
fn segment_score(score: PyRef<'_, PyScore>, min_s: f64, max_s: f64) -> PyResult<Vec<PySegment>> {
    Ok(splitter::segment_score(&score.inner, min_s, max_s)
        .map_err(to_py_err)?
        .into_iter()
        .map(|inner| PySegment { inner })
        .collect())
}

/// Longest shared contiguous pitch run of at least `min_len`, if any.
#[pyfunction]
#[pyo3(signature = (a, b, min_len = 3))]
fn shared_pitch_run(
    a: PyRef<'_, PySegment>,
    b: PyRef<'_, PySegment>,
    min_len: usize,
) -> Option<Vec<i64>> {
    splitter::shared_pitch_run(&a.inner, &b.inner, min_len)
}

/// Leakage-safe split. Returns (train, test, evidence) where evidence rows
/// are (id_a, id_b, run, length).
#[pyfunction]
#[pyo3(signature = (segments, test_target_s = 300.0, seed = 0, min_run = 3))]
#[allow(clippy::type_complexity)]
fn make_split(
    segments: Vec<PyRef<'_, PySegment>>,
    test_target_s: f64,
    seed: u64,
    min_run: usize,
) -> PyResult<(
    Vec<PySegment>,
    Vec<PySegment>,
    Vec<(String, String, Vec<i64>, usize)>,
)> {
    let owned: Vec<splitter::Segment> = segments.iter().map(|s| s.inner.clone()).collect();
    let result = splitter::make_split(&owned, test_target_s, seed, min_run).map_err(to_py_err)?;
    let wrap = |segments: Vec<splitter::Segment>| -> Vec<PySegment> {
        segments
            .into_iter()
            .map(|inner| PySegment { inner })
            .collect()
    };
    let evidence = result
        .evidence
        .into_iter()
        .map(|e| (e.a, e.b, e.run, e.len))
        .collect();
    Ok((wrap(result.train), wrap(result.test), evidence))
}

/// Chunk a segment for listening tests. Rows are (chunk_id, start, end,
/// duration, over_length).
#[pyfunction]
#[pyo3(signature = (segment, score, max_s = 10.0))]
fn chunk_for_mushra(
    segment: PyRef<'_, PySegment>,
    score: PyRef<'_, PyScore>,
    max_s: f64,
) -> Vec<(String, usize, usize, f64, bool)> {
    splitter::chunk_for_mushra(&segment.inner, &score.inner, max_s)
        .into_iter()
        .map(|chunk| {
            (
                chunk.id(),
                chunk.note_span.start,
                chunk.note_span.end,
                chunk.duration_seconds,
                chunk.over_length,
            )
        })
        .collect()
}

/// Welch's two-sided t-test; returns (t, df, p, flagged).
#[pyfunction]
fn welch_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64, bool)> {
    let test = mushra::welch_t_test("a", &a, "b", &b).map_err(to_py_err)?;
    Ok((
        test.t_statistic,
        test.degrees_of_freedom,
        test.p_value,
        test.flagged,
    ))
}

/// Student-t CDF.
#[pyfunction]
fn student_t_cdf(t: f64, df: f64) -> f64 {
    tdist::student_t_cdf(t, df)
}

/// Full MUSHRA report from response CSV bytes, as a JSON string.
#[pyfunction]
fn mushra_report_json(csv_bytes: &[u8]) -> PyResult<String> {
    let responses = mushra::load_responses(csv_bytes).map_err(to_py_err)?;
    let report = mushra::all_pairs_report(&responses, &[]).map_err(to_py_err)?;
    serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn scorefront_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInventory>()?;
    m.add_class::<PyLexicon>()?;
    m.add_class::<PyScore>()?;
    m.add_class::<PyAlignedSequence>()?;
    m.add_class::<PyFeatureMatrix>()?;
    m.add_class::<PySegment>()?;
    m.add_function(wrap_pyfunction!(parse_musicxml, m)?)?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(phonemize, m)?)?;
    m.add_function(wrap_pyfunction!(syllabify, m)?)?;
    m.add_function(wrap_pyfunction!(compute_duration_stats, m)?)?;
    m.add_function(wrap_pyfunction!(build_features, m)?)?;
    m.add_function(wrap_pyfunction!(transpose, m)?)?;
    m.add_function(wrap_pyfunction!(scale_tempo, m)?)?;
    m.add_function(wrap_pyfunction!(augmentation_grid, m)?)?;
    m.add_function(wrap_pyfunction!(pitch_change_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(segment_score, m)?)?;
    m.add_function(wrap_pyfunction!(shared_pitch_run, m)?)?;
    m.add_function(wrap_pyfunction!(make_split, m)?)?;
    m.add_function(wrap_pyfunction!(chunk_for_mushra, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(student_t_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(mushra_report_json, m)?)?;
    Ok(())
}
