//! Pipeline configuration: octave range, segmentation bounds, augmentation
//! sets and file locations, loadable from a plain-text key = value file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Octaves the feature encoding can represent (inclusive bounds).
///
/// The one-hot octave stream has one position per octave in this range plus
/// one rest position, so every pitched note must fall inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OctaveRange {
    pub min: i32,
    pub max: i32,
}

impl Default for OctaveRange {
    fn default() -> Self {
        Self { min: 2, max: 5 }
    }
}

impl OctaveRange {
    pub fn new(min: i32, max: i32) -> Result<Self> {
        if min > max {
            return Err(Error::Config(format!(
                "octave range min {min} exceeds max {max}"
            )));
        }
        Ok(Self { min, max })
    }

    /// Number of real octave classes (without the rest class).
    pub fn num_octaves(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    /// Index of the rest class in the octave one-hot block.
    pub fn rest_class(&self) -> usize {
        self.num_octaves()
    }

    pub fn contains(&self, octave: i32) -> bool {
        octave >= self.min && octave <= self.max
    }

    /// Class index for an in-range octave.
    pub fn class_of(&self, octave: i32) -> Option<usize> {
        self.contains(octave).then(|| (octave - self.min) as usize)
    }
}

/// Everything the end-to-end pipeline needs to run reproducibly.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Pronunciation lexicon file.
    pub lexicon: PathBuf,
    /// Phoneme inventory file; `None` uses the built-in default inventory.
    pub inventory: Option<PathBuf>,
    /// Directory of input scores (.musicxml/.xml/.mxl).
    pub corpus_dir: PathBuf,
    /// Output directory for manifests, features and reports.
    pub out_dir: PathBuf,
    pub octave_range: OctaveRange,
    pub segment_min_s: f64,
    pub segment_max_s: f64,
    pub test_target_s: f64,
    pub chunk_max_s: f64,
    pub semitones: Vec<i32>,
    pub tempo_factors: Vec<f64>,
    pub seed: u64,
    pub strict_inventory: bool,
    /// Worker count; 0 means one per available core.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lexicon: PathBuf::new(),
            inventory: None,
            corpus_dir: PathBuf::new(),
            out_dir: PathBuf::from("out"),
            octave_range: OctaveRange::default(),
            segment_min_s: 20.0,
            segment_max_s: 30.0,
            test_target_s: 300.0,
            chunk_max_s: 10.0,
            semitones: vec![-1, 0, 1, 2, 3],
            tempo_factors: vec![0.85, 0.90, 0.95, 1.00, 1.05, 1.10, 1.15],
            seed: 0,
            strict_inventory: true,
            jobs: 0,
        }
    }
}

impl PipelineConfig {
    /// Load a key = value file over the defaults. Unknown keys are rejected
    /// so typos fail loudly.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::default();
        config.apply_pairs(parse_key_values(&text)?)?;
        Ok(config)
    }

    /// Apply parsed key/value pairs on top of the current values.
    pub fn apply_pairs(&mut self, pairs: BTreeMap<String, String>) -> Result<()> {
        for (key, value) in pairs {
            self.apply(&key, &value)?;
        }
        Ok(())
    }

    /// Apply one override; used for file entries and environment variables.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "lexicon" => self.lexicon = PathBuf::from(value),
            "inventory" => self.inventory = Some(PathBuf::from(value)),
            "corpus_dir" => self.corpus_dir = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "octave_min" => self.octave_range.min = parse_num(key, value)?,
            "octave_max" => self.octave_range.max = parse_num(key, value)?,
            "segment_min_s" => self.segment_min_s = parse_num(key, value)?,
            "segment_max_s" => self.segment_max_s = parse_num(key, value)?,
            "test_target_s" => self.test_target_s = parse_num(key, value)?,
            "chunk_max_s" => self.chunk_max_s = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "strict_inventory" => self.strict_inventory = parse_bool(key, value)?,
            "jobs" => self.jobs = parse_num(key, value)?,
            "semitones" => {
                self.semitones = value
                    .split(',')
                    .map(|v| parse_num::<i32>(key, v.trim()))
                    .collect::<Result<_>>()?;
            }
            "tempo_factors" => {
                self.tempo_factors = value
                    .split(',')
                    .map(|v| parse_num::<f64>(key, v.trim()))
                    .collect::<Result<_>>()?;
            }
            _ => return Err(Error::Config(format!("unknown config key \"{key}\""))),
        }
        Ok(())
    }

    /// Check numeric ranges and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        if self.segment_min_s >= self.segment_max_s {
            return Err(Error::Config(format!(
                "segment_min_s {} must be below segment_max_s {}",
                self.segment_min_s, self.segment_max_s
            )));
        }
        if self.octave_range.min > self.octave_range.max {
            return Err(Error::Config("octave range is inverted".into()));
        }
        if self.tempo_factors.iter().any(|f| *f <= 0.0) {
            return Err(Error::Config("tempo factors must be positive".into()));
        }
        if self.chunk_max_s <= 0.0 || self.test_target_s <= 0.0 {
            return Err(Error::Config("durations must be positive".into()));
        }
        if !self.lexicon.as_os_str().is_empty() && !self.lexicon.exists() {
            return Err(Error::Config(format!(
                "lexicon file not found: {}",
                self.lexicon.display()
            )));
        }
        if let Some(inventory) = &self.inventory {
            if !inventory.exists() {
                return Err(Error::Config(format!(
                    "inventory file not found: {}",
                    inventory.display()
                )));
            }
        }
        Ok(())
    }
}

/// Parse `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected key = value, found \"{raw}\"",
                number + 1
            )));
        };
        pairs.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(pairs)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value \"{value}\" for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid boolean \"{value}\" for {key}"
        ))),
    }
}
