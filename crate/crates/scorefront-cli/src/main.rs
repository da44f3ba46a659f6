//! Command-line pipeline: parse-check, phonemize, split, augment, stats,
//! features and mushra-report subcommands over the scorefront library.
//!
//! Configuration comes from (lowest to highest precedence) built-in
//! defaults, a `--config` key = value file, `SCOREFRONT_*` environment
//! variables, and command-line flags. All data goes to files; diagnostics go
//! to stderr. Exit status is nonzero iff any fatal error occurred.

mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use scorefront::config::PipelineConfig;

const ENV_PREFIX: &str = "SCOREFRONT_";

#[derive(Parser)]
#[command(name = "scorefront", version, about = "Score-to-feature frontend")]
struct Cli {
    /// Plain-text key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the split selection.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 means one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Enforce the 84-token inventory count.
    #[arg(long, global = true)]
    strict_inventory: Option<bool>,
    /// Pronunciation lexicon file.
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    /// Phoneme inventory file (defaults to the built-in inventory).
    #[arg(long, global = true)]
    inventory: Option<PathBuf>,
    /// Lowest supported octave.
    #[arg(long, global = true)]
    octave_min: Option<i32>,
    /// Highest supported octave.
    #[arg(long, global = true)]
    octave_max: Option<i32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate scores; one status line per file.
    ParseCheck {
        /// Score files or directories of scores.
        paths: Vec<PathBuf>,
    },
    /// Print the phoneme sequence for each word.
    Phonemize { words: Vec<String> },
    /// Segment the corpus and write a leakage-safe split manifest.
    Split {
        /// Directory of input scores.
        #[arg(long)]
        corpus: PathBuf,
        /// Minimum segment length in seconds.
        #[arg(long)]
        min_s: Option<f64>,
        /// Maximum segment length in seconds.
        #[arg(long)]
        max_s: Option<f64>,
        /// Test-set duration target in seconds.
        #[arg(long)]
        test_target_s: Option<f64>,
    },
    /// Write the full augmentation grid of one score.
    Augment {
        /// Input score file.
        #[arg(long)]
        score: PathBuf,
    },
    /// Compute duration statistics over the training set.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Split manifest produced by `split`.
        #[arg(long)]
        split_manifest: PathBuf,
    },
    /// Write feature files for every training variant and test segment.
    Features {
        #[arg(long)]
        corpus: PathBuf,
        /// Split manifest produced by `split`.
        #[arg(long)]
        split_manifest: PathBuf,
        /// Reuse a stats file instead of computing one from the train set.
        #[arg(long)]
        stats_in: Option<PathBuf>,
    },
    /// Aggregate MUSHRA responses into summaries and pairwise tests.
    MushraReport {
        /// Response CSV: listener_id,chunk_id,system_id,score.
        #[arg(long)]
        responses: PathBuf,
    },
}

/// Defaults, then config file, then environment, then flags.
fn effective_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    for (key, value) in std::env::vars() {
        if let Some(stripped) = key.strip_prefix(ENV_PREFIX) {
            let key = stripped.to_lowercase();
            config
                .apply(&key, &value)
                .with_context(|| format!("environment override {ENV_PREFIX}{stripped}"))?;
        }
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    if let Some(strict) = cli.strict_inventory {
        config.strict_inventory = strict;
    }
    if let Some(lexicon) = &cli.lexicon {
        config.lexicon = lexicon.clone();
    }
    if let Some(inventory) = &cli.inventory {
        config.inventory = Some(inventory.clone());
    }
    if let Some(min) = cli.octave_min {
        config.octave_range.min = min;
    }
    if let Some(max) = cli.octave_max {
        config.octave_range.max = max;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut config = effective_config(cli)?;
    match &cli.command {
        Command::ParseCheck { paths } => pipeline::parse_check(&config, paths),
        Command::Phonemize { words } => pipeline::phonemize_words(&config, words),
        Command::Split {
            corpus,
            min_s,
            max_s,
            test_target_s,
        } => {
            config.corpus_dir = corpus.clone();
            if let Some(min) = min_s {
                config.segment_min_s = *min;
            }
            if let Some(max) = max_s {
                config.segment_max_s = *max;
            }
            if let Some(target) = test_target_s {
                config.test_target_s = *target;
            }
            config.validate()?;
            pipeline::split(&config)
        }
        Command::Augment { score } => {
            config.validate()?;
            pipeline::augment(&config, score)
        }
        Command::Stats {
            corpus,
            split_manifest,
        } => {
            config.corpus_dir = corpus.clone();
            config.validate()?;
            pipeline::stats(&config, split_manifest)
        }
        Command::Features {
            corpus,
            split_manifest,
            stats_in,
        } => {
            config.corpus_dir = corpus.clone();
            config.validate()?;
            pipeline::features(&config, split_manifest, stats_in.as_deref())
        }
        Command::MushraReport { responses } => pipeline::mushra_report(&config, responses),
    }
}

/// Collect score files (.musicxml/.xml/.mxl) from files and directories,
/// sorted by path for deterministic processing order.
pub(crate) fn collect_score_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    for path in paths {
        if path.is_dir() {
            for entry in std::fs::read_dir(path)
                .with_context(|| format!("reading directory {}", path.display()))?
            {
                let entry = entry?;
                let path = entry.path();
                if is_score_file(&path) {
                    found.push(path);
                }
            }
        } else if path.exists() {
            found.push(path.clone());
        } else {
            bail!("input path {} does not exist", path.display());
        }
    }
    found.sort();
    if found.is_empty() {
        bail!("no input scores");
    }
    Ok(found)
}

fn is_score_file(path: &std::path::Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("musicxml" | "xml" | "mxl")
    )
}
