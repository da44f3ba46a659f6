//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use scorefront::aligner::{align, AlignedSequence};
use scorefront::augmenter::{
    augmentation_grid, note_pitch_histogram, pitch_change_histogram, AugmentationSets,
    AugmentationSpec,
};
use scorefront::config::PipelineConfig;
use scorefront::embedder::{
    build_feature_matrix, compute_duration_stats, read_stats, write_features, write_stats,
    DurationStats,
};
use scorefront::lexicon::{phonemize, Lexicon, OnsetTable, PhonemeInventory};
use scorefront::musicxml::parse_musicxml;
use scorefront::score::{validate_score, Score, Severity};
use scorefront::splitter::{
    chunk_for_mushra, make_split, segment_score, slice_score, Segment, SplitManifest,
};

use crate::collect_score_paths;

fn load_inventory(config: &PipelineConfig) -> Result<PhonemeInventory> {
    let (inventory, warnings) = match &config.inventory {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading inventory {}", path.display()))?;
            PhonemeInventory::parse(&text, config.strict_inventory)?
        }
        None => (PhonemeInventory::default_inventory(), Vec::new()),
    };
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
    Ok(inventory)
}

fn load_lexicon(config: &PipelineConfig, inventory: &PhonemeInventory) -> Result<Lexicon> {
    if config.lexicon.as_os_str().is_empty() {
        bail!("no lexicon configured; pass --lexicon or set it in the config file");
    }
    let text = fs::read_to_string(&config.lexicon)
        .with_context(|| format!("reading lexicon {}", config.lexicon.display()))?;
    Ok(Lexicon::parse(&text, inventory)?)
}

fn parse_score_file(path: &Path) -> Result<Score> {
    let bytes = fs::read(path).with_context(|| format!("reading score {}", path.display()))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("score")
        .to_string();
    Ok(parse_musicxml(&bytes)
        .with_context(|| format!("parsing {}", path.display()))?
        .with_id(&stem))
}

fn load_corpus(config: &PipelineConfig) -> Result<Vec<Score>> {
    let paths = collect_score_paths(std::slice::from_ref(&config.corpus_dir))?;
    paths.iter().map(|path| parse_score_file(path)).collect()
}

fn ensure_out_dir(config: &PipelineConfig) -> Result<PathBuf> {
    fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating output dir {}", config.out_dir.display()))?;
    Ok(config.out_dir.clone())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    file.write_all(bytes)?;
    Ok(())
}

// --- parse-check -------------------------------------------------------------

pub fn parse_check(config: &PipelineConfig, paths: &[PathBuf]) -> Result<()> {
    let files = collect_score_paths(paths)?;
    let mut failures = 0usize;
    for path in &files {
        match parse_score_file(path) {
            Ok(score) => {
                let findings = validate_score(&score, &config.octave_range);
                for finding in &findings {
                    let tag = match finding.severity {
                        Severity::Warning => "warning",
                        Severity::Error => "finding",
                    };
                    eprintln!(
                        "{tag}: {}: {} ({})",
                        path.display(),
                        finding.message,
                        finding.location
                    );
                }
                println!(
                    "OK {} ({} notes, {:.1} s)",
                    path.display(),
                    score.notes.len(),
                    score.duration_seconds()
                );
            }
            Err(error) => {
                failures += 1;
                println!("ERROR {}: {error:#}", path.display());
            }
        }
    }
    if failures > 0 {
        bail!("{failures} of {} scores failed to parse", files.len());
    }
    Ok(())
}

// --- phonemize ---------------------------------------------------------------

pub fn phonemize_words(config: &PipelineConfig, words: &[String]) -> Result<()> {
    if words.is_empty() {
        bail!("no words given");
    }
    let inventory = load_inventory(config)?;
    let lexicon = load_lexicon(config, &inventory)?;
    let pronunciations = phonemize(words, &lexicon)?;
    for (word, pronunciation) in words.iter().zip(pronunciations) {
        println!("{word}\t{}", pronunciation.join(" "));
    }
    Ok(())
}

// --- split -------------------------------------------------------------------

#[derive(Serialize)]
struct ChunkRecord {
    segment_id: String,
    chunk_id: String,
    duration_seconds: f64,
    over_length: bool,
}

pub fn split(config: &PipelineConfig) -> Result<()> {
    let corpus = load_corpus(config)?;
    let out = ensure_out_dir(config)?;
    let mut segments = Vec::new();
    let mut by_id: BTreeMap<String, Score> = BTreeMap::new();
    for score in corpus {
        segments.extend(segment_score(
            &score,
            config.segment_min_s,
            config.segment_max_s,
        )?);
        by_id.insert(score.id.clone(), score);
    }
    let result = make_split(&segments, config.test_target_s, config.seed, 3)?;
    let manifest = result.manifest();
    write_atomic(
        &out.join("split.json"),
        format!("{}\n", serde_json::to_string_pretty(&manifest)?).as_bytes(),
    )?;

    // Listening-test chunks for the test segments.
    let mut chunk_lines = String::new();
    for segment in &result.test {
        let score = &by_id[&segment.score_id];
        for chunk in chunk_for_mushra(segment, score, config.chunk_max_s) {
            if chunk.over_length {
                eprintln!(
                    "warning: chunk {} runs {:.1} s with no rest to cut at",
                    chunk.id(),
                    chunk.duration_seconds
                );
            }
            chunk_lines.push_str(&serde_json::to_string(&ChunkRecord {
                segment_id: segment.id(),
                chunk_id: chunk.id(),
                duration_seconds: chunk.duration_seconds,
                over_length: chunk.over_length,
            })?);
            chunk_lines.push('\n');
        }
    }
    write_atomic(&out.join("mushra_chunks.jsonl"), chunk_lines.as_bytes())?;

    eprintln!(
        "split: {} train, {} test segments, {} excluded pairs",
        manifest.train.len(),
        manifest.test.len(),
        manifest.evidence.len()
    );
    Ok(())
}

// --- augment -----------------------------------------------------------------

#[derive(Serialize)]
struct AugmentRecord {
    source_id: String,
    variant_id: String,
    semitones: i32,
    tempo_factor: f64,
    output_path: String,
}

pub fn augment(config: &PipelineConfig, score_path: &Path) -> Result<()> {
    let score = parse_score_file(score_path)?;
    let out = ensure_out_dir(config)?;
    let sets = AugmentationSets {
        semitones: config.semitones.clone(),
        tempo_factors: config.tempo_factors.clone(),
    };
    let grid = augmentation_grid(&score, &sets, &config.octave_range)?;
    for (spec, error) in &grid.failures {
        eprintln!("warning: variant {} failed: {error}", spec.variant_id());
    }

    let mut manifest = String::new();
    let mut variant_scores = Vec::new();
    for (spec, variant) in &grid.variants {
        let file_name = format!("{}.score.txt", variant.id);
        write_atomic(&out.join(&file_name), variant.canonical_dump().as_bytes())?;
        manifest.push_str(&serde_json::to_string(&AugmentRecord {
            source_id: score.id.clone(),
            variant_id: spec.variant_id(),
            semitones: spec.semitones,
            tempo_factor: spec.tempo_factor,
            output_path: file_name,
        })?);
        manifest.push('\n');
        variant_scores.push(variant.clone());
    }
    write_atomic(&out.join("augment_manifest.jsonl"), manifest.as_bytes())?;

    // Coverage statistics: intervals are transposition-invariant, pitches
    // are not, so both are exported.
    let intervals = pitch_change_histogram(std::slice::from_ref(&score));
    write_atomic(&out.join("intervals.csv"), intervals.to_csv().as_bytes())?;
    let mut pitch_csv = String::from("pitch,count\n");
    for (pitch, count) in note_pitch_histogram(std::slice::from_ref(&score)) {
        pitch_csv.push_str(&format!("{pitch},{count}\n"));
    }
    write_atomic(&out.join("note_pitches.csv"), pitch_csv.as_bytes())?;
    let mut augmented_csv = String::from("pitch,count\n");
    for (pitch, count) in note_pitch_histogram(&variant_scores) {
        augmented_csv.push_str(&format!("{pitch},{count}\n"));
    }
    write_atomic(
        &out.join("note_pitches_augmented.csv"),
        augmented_csv.as_bytes(),
    )?;

    eprintln!(
        "augment: {} variants written, {} failed",
        grid.variants.len(),
        grid.failures.len()
    );
    Ok(())
}

// --- stats and features --------------------------------------------------------

struct AlignTask {
    segment_id: String,
    spec: AugmentationSpec,
    sub_score: Score,
    is_train: bool,
}

struct AlignedTask {
    segment_id: String,
    spec: AugmentationSpec,
    is_train: bool,
    sequence: AlignedSequence,
}

/// Reconstruct segment sub-scores from a split manifest and align every
/// (segment x variant) the split calls for: the full grid for train, the
/// identity variant for test. Failures are reported per segment.
fn align_split(
    config: &PipelineConfig,
    manifest_path: &Path,
) -> Result<(Vec<AlignedTask>, Vec<String>)> {
    let manifest: SplitManifest = serde_json::from_str(
        &fs::read_to_string(manifest_path)
            .with_context(|| format!("reading split manifest {}", manifest_path.display()))?,
    )
    .context("split manifest is not valid JSON")?;
    let corpus = load_corpus(config)?;
    let by_id: BTreeMap<String, Score> = corpus.into_iter().map(|s| (s.id.clone(), s)).collect();

    let inventory = load_inventory(config)?;
    let lexicon = load_lexicon(config, &inventory)?;
    let onsets = OnsetTable::english_default();
    let sets = AugmentationSets {
        semitones: config.semitones.clone(),
        tempo_factors: config.tempo_factors.clone(),
    };

    let mut tasks: Vec<AlignTask> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    for (ids, is_train) in [(&manifest.train, true), (&manifest.test, false)] {
        for id in ids {
            let (score_id, span) = Segment::parse_id(id)?;
            let Some(score) = by_id.get(&score_id) else {
                failures.push(format!("{id}: score \"{score_id}\" not found in corpus"));
                continue;
            };
            if span.end > score.notes.len() {
                failures.push(format!("{id}: span exceeds {} notes", score.notes.len()));
                continue;
            }
            let sub_score = slice_score(score, span, id);
            if is_train {
                let grid = augmentation_grid(&sub_score, &sets, &config.octave_range)?;
                for (spec, error) in &grid.failures {
                    failures.push(format!("{id} {}: {error}", spec.variant_id()));
                }
                for (spec, variant) in grid.variants {
                    tasks.push(AlignTask {
                        segment_id: id.clone(),
                        spec,
                        sub_score: variant,
                        is_train,
                    });
                }
            } else {
                tasks.push(AlignTask {
                    segment_id: id.clone(),
                    spec: AugmentationSpec::identity(),
                    sub_score: sub_score.clone(),
                    is_train,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .context("building worker pool")?;
    let results: Vec<std::result::Result<AlignedTask, String>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                align(
                    &task.sub_score,
                    &lexicon,
                    &inventory,
                    &config.octave_range,
                    &onsets,
                )
                .map(|sequence| AlignedTask {
                    segment_id: task.segment_id.clone(),
                    spec: task.spec,
                    is_train: task.is_train,
                    sequence,
                })
                .map_err(|error| format!("{} {}: {error}", task.segment_id, task.spec.variant_id()))
            })
            .collect()
    });

    let mut aligned = Vec::new();
    for result in results {
        match result {
            Ok(task) => aligned.push(task),
            Err(message) => failures.push(message),
        }
    }
    Ok((aligned, failures))
}

pub fn stats(config: &PipelineConfig, manifest_path: &Path) -> Result<()> {
    let out = ensure_out_dir(config)?;
    let (aligned, failures) = align_split(config, manifest_path)?;
    report_failures(&failures);
    let train_sequences: Vec<AlignedSequence> = aligned
        .into_iter()
        .filter(|task| task.is_train)
        .map(|task| task.sequence)
        .collect();
    let stats = compute_duration_stats(&train_sequences)?;
    let mut bytes = Vec::new();
    write_stats(&stats, &mut bytes)?;
    write_atomic(&out.join("stats.json"), &bytes)?;
    eprintln!(
        "stats: mean {:.6} s, std {:.6} s over {} train token occurrences",
        stats.mean, stats.std, stats.n
    );
    if !failures.is_empty() {
        bail!("{} segment variants failed", failures.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct FeatureRecord {
    segment_id: String,
    variant_id: String,
    split: &'static str,
    semitones: i32,
    tempo_factor: f64,
    rows: usize,
    cols: usize,
    output_path: String,
}

pub fn features(
    config: &PipelineConfig,
    manifest_path: &Path,
    stats_in: Option<&Path>,
) -> Result<()> {
    let out = ensure_out_dir(config)?;
    let features_dir = out.join("features");
    fs::create_dir_all(&features_dir)?;
    let inventory = load_inventory(config)?;

    let (aligned, failures) = align_split(config, manifest_path)?;
    report_failures(&failures);

    // Normalization: training stats only; test features reuse them.
    let stats: DurationStats = match stats_in {
        Some(path) => {
            let mut file = fs::File::open(path)
                .with_context(|| format!("stats file {} not readable", path.display()))?;
            read_stats(&mut file)?
        }
        None => {
            let train: Vec<&AlignedSequence> = aligned
                .iter()
                .filter(|task| task.is_train)
                .map(|task| &task.sequence)
                .collect();
            let owned: Vec<AlignedSequence> = train.into_iter().cloned().collect();
            compute_duration_stats(&owned)?
        }
    };
    let mut stats_bytes = Vec::new();
    write_stats(&stats, &mut stats_bytes)?;
    write_atomic(&out.join("stats.json"), &stats_bytes)?;

    let mut manifest = String::new();
    let mut written = 0usize;
    for task in &aligned {
        let matrix =
            build_feature_matrix(&task.sequence, &stats, &inventory, &config.octave_range)?;
        let file_name = format!(
            "{}_{}.utf1",
            task.segment_id.replace(['#', '/'], "_"),
            task.spec.variant_id()
        );
        let mut bytes = Vec::new();
        write_features(&matrix, &mut bytes)?;
        write_atomic(&features_dir.join(&file_name), &bytes)?;
        written += 1;
        manifest.push_str(&serde_json::to_string(&FeatureRecord {
            segment_id: task.segment_id.clone(),
            variant_id: task.spec.variant_id(),
            split: if task.is_train { "train" } else { "test" },
            semitones: task.spec.semitones,
            tempo_factor: task.spec.tempo_factor,
            rows: matrix.rows,
            cols: matrix.cols,
            output_path: format!("features/{file_name}"),
        })?);
        manifest.push('\n');
    }
    write_atomic(&out.join("features_manifest.jsonl"), manifest.as_bytes())?;
    eprintln!("features: {written} files written");
    if !failures.is_empty() {
        bail!("{} segment variants failed", failures.len());
    }
    Ok(())
}

fn report_failures(failures: &[String]) {
    for failure in failures {
        eprintln!("error: {failure}");
    }
}

// --- mushra-report -------------------------------------------------------------

pub fn mushra_report(config: &PipelineConfig, responses_path: &Path) -> Result<()> {
    let out = ensure_out_dir(config)?;
    let bytes = fs::read(responses_path)
        .with_context(|| format!("reading responses {}", responses_path.display()))?;
    let responses = scorefront::mushra::load_responses(&bytes)?;
    let report = scorefront::mushra::all_pairs_report(&responses, &[])?;

    write_atomic(
        &out.join("mushra_report.json"),
        format!("{}\n", serde_json::to_string_pretty(&report)?).as_bytes(),
    )?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_atomic(&out.join("mushra_report.csv"), &csv)?;

    for summary in &report.summaries {
        println!(
            "{}: n={} mean={:.2} std={:.2} quartiles=({:.2}, {:.2}, {:.2})",
            summary.system_id,
            summary.n,
            summary.mean,
            summary.std,
            summary.q1,
            summary.q2,
            summary.q3
        );
    }
    for test in &report.tests {
        println!(
            "{} vs {}: t={:.3} df={:.1} p={:.3e}{}",
            test.system_a,
            test.system_b,
            test.t_statistic,
            test.degrees_of_freedom,
            test.p_value,
            if test.flagged { " (p < 0.001)" } else { "" }
        );
    }
    Ok(())
}
