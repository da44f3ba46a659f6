//! End-to-end runs of the scorefront binary over a generated corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scorefront::embedder::read_features;
use scorefront::splitter::SplitManifest;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scorefront"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Deterministic LCG so the corpus is identical across runs.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self, bound: u64) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 33) % bound
    }
}

/// One song: 4/4, divisions 2, 100 qpm, quarter-note vocals with occasional
/// rest measures-joints; lyrics cycle through monosyllables in the demo
/// lexicon.
fn song_xml(song_index: u64, measures: usize) -> String {
    let words = ["la", "dee", "dum", "doo", "mi", "fa"];
    let mut rng = Lcg(0x9E3779B97F4A7C15 ^ song_index);
    let mut out = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<score-partwise version=\"3.1\">\n\
         <part-list><score-part id=\"P1\"><part-name>V</part-name></score-part></part-list>\n\
         <part id=\"P1\">\n",
    );
    let mut word = 0usize;
    for measure in 1..=measures {
        out.push_str(&format!("<measure number=\"{measure}\">\n"));
        if measure == 1 {
            out.push_str(
                "<attributes><divisions>2</divisions>\
                 <time><beats>4</beats><beat-type>4</beat-type></time></attributes>\
                 <direction><sound tempo=\"100\"/></direction>\n",
            );
        }
        for beat in 0..4 {
            let rest = beat == 3 && rng.next(3) == 0;
            if rest {
                out.push_str("<note><rest/><duration>2</duration></note>\n");
            } else {
                let chromatic = 36 + rng.next(24) as i64; // octaves 3..=4
                let octave = chromatic / 12;
                let step = chromatic % 12;
                let (letter, alter) = match step {
                    0 => ("C", 0),
                    1 => ("C", 1),
                    2 => ("D", 0),
                    3 => ("D", 1),
                    4 => ("E", 0),
                    5 => ("F", 0),
                    6 => ("F", 1),
                    7 => ("G", 0),
                    8 => ("G", 1),
                    9 => ("A", 0),
                    10 => ("A", 1),
                    _ => ("B", 0),
                };
                let alter_tag = if alter != 0 {
                    format!("<alter>{alter}</alter>")
                } else {
                    String::new()
                };
                out.push_str(&format!(
                    "<note><pitch><step>{letter}</step>{alter_tag}<octave>{octave}</octave>\
                     </pitch><duration>2</duration>\
                     <lyric><syllabic>single</syllabic><text>{}</text></lyric></note>\n",
                    words[word % words.len()]
                ));
                word += 1;
            }
        }
        out.push_str("</measure>\n");
    }
    out.push_str("</part>\n</score-partwise>\n");
    out
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    corpus: PathBuf,
    lexicon: PathBuf,
    config: PathBuf,
}

fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let corpus = root.join("corpus");
    fs::create_dir(&corpus).unwrap();
    for song in 0..3u64 {
        fs::write(
            corpus.join(format!("song{song}.musicxml")),
            song_xml(song, 25),
        )
        .unwrap();
    }
    let lexicon = root.join("lexicon.txt");
    let manifest_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    fs::copy(manifest_dir.join("../../assets/demo_lexicon.txt"), &lexicon).unwrap();
    let config = root.join("pipeline.cfg");
    fs::write(
        &config,
        "segment_min_s = 4\nsegment_max_s = 8\ntest_target_s = 6\nseed = 5\n",
    )
    .unwrap();
    Workspace {
        _dir: dir,
        root,
        corpus,
        lexicon,
        config,
    }
}

#[test]
fn parse_check_reports_ok_and_errors() {
    let ws = workspace();
    let ok = run(&["parse-check", ws.corpus.to_str().unwrap()]);
    assert!(ok.status.success(), "stderr: {}", stderr(&ok));
    let text = stdout(&ok);
    assert_eq!(text.lines().filter(|l| l.starts_with("OK ")).count(), 3);

    // One malformed file among the three fails the run but names the file.
    let bad = ws.corpus.join("broken.musicxml");
    fs::write(&bad, "<score-partwise><part").unwrap();
    let failed = run(&["parse-check", ws.corpus.to_str().unwrap()]);
    assert!(!failed.status.success());
    let text = stdout(&failed);
    assert!(text.contains("ERROR") && text.contains("broken.musicxml"));
    assert_eq!(text.lines().filter(|l| l.starts_with("OK ")).count(), 3);

    // An empty directory is a fatal error.
    let empty = ws.root.join("empty");
    fs::create_dir(&empty).unwrap();
    let none = run(&["parse-check", empty.to_str().unwrap()]);
    assert!(!none.status.success());
    assert!(stderr(&none).contains("no input scores"));
}

#[test]
fn phonemize_prints_pronunciations() {
    let ws = workspace();
    let output = run(&[
        "phonemize",
        "--lexicon",
        ws.lexicon.to_str().unwrap(),
        "give",
        "twinkle,",
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("give\tg ih1 v"));
    assert!(text.contains("twinkle,\tt w ih1 ng k ah0 l"));

    let oov = run(&[
        "phonemize",
        "--lexicon",
        ws.lexicon.to_str().unwrap(),
        "qwzrt",
    ]);
    assert!(!oov.status.success());
    assert!(stderr(&oov).contains("QWZRT"));
}

#[test]
fn split_is_deterministic_and_flags_win_over_env() {
    let ws = workspace();
    let out = ws.root.join("split-out");
    let args = [
        "split",
        "--corpus",
        ws.corpus.to_str().unwrap(),
        "--config",
        ws.config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    let first = run(&args);
    assert!(first.status.success(), "stderr: {}", stderr(&first));
    let manifest_path = out.join("split.json");
    let first_bytes = fs::read(&manifest_path).unwrap();
    let manifest: SplitManifest = serde_json::from_slice(&first_bytes).unwrap();
    assert_eq!(manifest.seed, 5);
    assert!(!manifest.test.is_empty());
    assert!(!manifest.train.is_empty());
    let test_chunks = fs::read_to_string(out.join("mushra_chunks.jsonl")).unwrap();
    assert!(!test_chunks.trim().is_empty());

    // Idempotent rerun.
    let second = run(&args);
    assert!(second.status.success());
    assert_eq!(first_bytes, fs::read(&manifest_path).unwrap());

    // Environment override is honored when no flag competes.
    let env_run = binary()
        .args([
            "split",
            "--corpus",
            ws.corpus.to_str().unwrap(),
            "--config",
            ws.config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .env("SCOREFRONT_SEED", "9")
        .output()
        .unwrap();
    assert!(env_run.status.success(), "stderr: {}", stderr(&env_run));
    let manifest: SplitManifest =
        serde_json::from_slice(&fs::read(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest.seed, 9);

    // Flags beat the environment.
    let flag_run = binary()
        .args(args)
        .args(["--seed", "5"])
        .env("SCOREFRONT_SEED", "9")
        .output()
        .unwrap();
    assert!(flag_run.status.success());
    let manifest: SplitManifest =
        serde_json::from_slice(&fs::read(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest.seed, 5);
}

#[test]
fn features_pipeline_end_to_end() {
    let ws = workspace();
    let out = ws.root.join("out");
    let split = run(&[
        "split",
        "--corpus",
        ws.corpus.to_str().unwrap(),
        "--config",
        ws.config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(split.status.success(), "stderr: {}", stderr(&split));
    let manifest: SplitManifest =
        serde_json::from_slice(&fs::read(out.join("split.json")).unwrap()).unwrap();

    let split_manifest = out.join("split.json");
    let args = [
        "features",
        "--corpus",
        ws.corpus.to_str().unwrap(),
        "--config",
        ws.config.to_str().unwrap(),
        "--lexicon",
        ws.lexicon.to_str().unwrap(),
        "--split-manifest",
        split_manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "2",
    ];
    let features = run(&args);
    assert!(features.status.success(), "stderr: {}", stderr(&features));

    let manifest_text = fs::read_to_string(out.join("features_manifest.jsonl")).unwrap();
    let lines: Vec<&str> = manifest_text.lines().collect();
    // Full grid for train segments, identity only for test segments.
    assert_eq!(lines.len(), manifest.train.len() * 35 + manifest.test.len());
    let train_lines = lines.iter().filter(|l| l.contains("\"train\"")).count();
    assert_eq!(train_lines, manifest.train.len() * 35);

    // Stats file exists and feature files read back with 104 columns.
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert!(stats["std"].as_f64().unwrap() > 0.0);
    let record: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    let path = out.join(record["output_path"].as_str().unwrap());
    let matrix = read_features(&mut fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(matrix.cols, 104);
    assert_eq!(matrix.rows, record["rows"].as_u64().unwrap() as usize);

    // Idempotent rerun: identical manifest and feature bytes.
    let manifest_bytes = fs::read(out.join("features_manifest.jsonl")).unwrap();
    let feature_bytes = fs::read(&path).unwrap();
    let rerun = run(&args);
    assert!(rerun.status.success());
    assert_eq!(
        manifest_bytes,
        fs::read(out.join("features_manifest.jsonl")).unwrap()
    );
    assert_eq!(feature_bytes, fs::read(&path).unwrap());

    // Reusing the stats file via --stats-in is accepted; a missing one errors.
    let with_stats = binary()
        .args(args)
        .args(["--stats-in", out.join("stats.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        with_stats.status.success(),
        "stderr: {}",
        stderr(&with_stats)
    );
    let missing_stats = binary()
        .args(args)
        .args(["--stats-in", out.join("absent.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!missing_stats.status.success());
    assert!(stderr(&missing_stats).contains("not readable"));
}

#[test]
fn stats_runs_standalone() {
    let ws = workspace();
    let out = ws.root.join("out");
    let split = run(&[
        "split",
        "--corpus",
        ws.corpus.to_str().unwrap(),
        "--config",
        ws.config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(split.status.success());
    let stats = run(&[
        "stats",
        "--corpus",
        ws.corpus.to_str().unwrap(),
        "--config",
        ws.config.to_str().unwrap(),
        "--lexicon",
        ws.lexicon.to_str().unwrap(),
        "--split-manifest",
        out.join("split.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(stats.status.success(), "stderr: {}", stderr(&stats));
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert!(value["n"].as_u64().unwrap() > 100);
}

#[test]
fn augment_writes_grid_and_histograms() {
    let ws = workspace();
    let out = ws.root.join("aug");
    let song = ws.corpus.join("song0.musicxml");
    let output = run(&[
        "augment",
        "--score",
        song.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let manifest = fs::read_to_string(out.join("augment_manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 35);
    let score_files = fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".score.txt")
        })
        .count();
    assert_eq!(score_files, 35);
    let intervals = fs::read_to_string(out.join("intervals.csv")).unwrap();
    assert!(intervals.starts_with("interval,count\n"));
    assert!(out.join("note_pitches.csv").exists());
    assert!(out.join("note_pitches_augmented.csv").exists());
}

#[test]
fn mushra_report_reproduces_means() {
    let ws = workspace();
    let out = ws.root.join("report");
    let mut csv = String::from("listener_id,chunk_id,system_id,score\n");
    for listener in 0..12 {
        for (system, mean) in [
            ("recordings", 81.62),
            ("proposed", 60.45),
            ("baseline", 30.82),
        ] {
            let offset = if listener % 2 == 0 { 2.0 } else { -2.0 };
            csv.push_str(&format!("L{listener},c1,{system},{}\n", mean + offset));
        }
    }
    let responses = ws.root.join("responses.csv");
    fs::write(&responses, csv).unwrap();
    let output = run(&[
        "mushra-report",
        "--responses",
        responses.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("proposed: n=12 mean=60.45"));
    assert!(text.contains("recordings: n=12 mean=81.62"));
    assert!(text.contains("baseline: n=12 mean=30.82"));
    assert_eq!(text.matches("(p < 0.001)").count(), 3);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("mushra_report.json")).unwrap()).unwrap();
    assert_eq!(report["tests"].as_array().unwrap().len(), 3);
    assert!(out.join("mushra_report.csv").exists());
}
