//! MUSHRA listening-test aggregation: response loading, per-system
//! summaries (mean, sample std, interpolated quartiles) and all-pairs
//! two-sided Welch t-tests.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tdist::student_t_two_sided;

/// Significance threshold flagged in reports.
pub const FLAG_ALPHA: f64 = 0.001;

/// One listener's 0-100 rating of one chunk rendered by one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MushraResponse {
    pub listener_id: String,
    pub chunk_id: String,
    pub system_id: String,
    pub score: f64,
}

/// Load responses from CSV with a `listener_id,chunk_id,system_id,score`
/// header. Scores outside 0..=100 and duplicate (listener, chunk, system)
/// triples are rejected.
pub fn load_responses(csv_bytes: &[u8]) -> Result<Vec<MushraResponse>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::Response(format!("cannot read header: {e}")))?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Response(format!("missing column \"{name}\"")))
    };
    let listener_col = column("listener_id")?;
    let chunk_col = column("chunk_id")?;
    let system_col = column("system_id")?;
    let score_col = column("score")?;

    let mut responses = Vec::new();
    let mut seen: HashSet<(String, String, String)> = HashSet::new();
    for (index, record) in reader.records().enumerate() {
        let row = index + 2; // header is row 1
        let record = record.map_err(|e| Error::Response(format!("row {row}: {e}")))?;
        let field = |col: usize| -> Result<String> {
            record
                .get(col)
                .map(str::to_string)
                .ok_or_else(|| Error::Response(format!("row {row}: short record")))
        };
        let listener_id = field(listener_col)?;
        let chunk_id = field(chunk_col)?;
        let system_id = field(system_col)?;
        let score_text = field(score_col)?;
        let score: f64 = score_text
            .parse()
            .map_err(|_| Error::Response(format!("row {row}: bad score \"{score_text}\"")))?;
        if !(0.0..=100.0).contains(&score) {
            return Err(Error::Response(format!(
                "row {row}: score {score} outside 0..=100"
            )));
        }
        let key = (listener_id.clone(), chunk_id.clone(), system_id.clone());
        if !seen.insert(key) {
            return Err(Error::Response(format!(
                "row {row}: duplicate response for ({listener_id}, {chunk_id}, {system_id})"
            )));
        }
        responses.push(MushraResponse {
            listener_id,
            chunk_id,
            system_id,
            score,
        });
    }
    Ok(responses)
}

/// Per-system descriptive statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system_id: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator); 0 when n = 1.
    pub std: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let position = (n - 1) as f64 * p;
    let lower = position.floor() as usize;
    let fraction = position - lower as f64;
    if lower + 1 < n {
        sorted[lower] + fraction * (sorted[lower + 1] - sorted[lower])
    } else {
        sorted[lower]
    }
}

/// Summarize one system's scores.
pub fn summarize(responses: &[MushraResponse], system_id: &str) -> Result<SystemSummary> {
    let mut scores: Vec<f64> = responses
        .iter()
        .filter(|r| r.system_id == system_id)
        .map(|r| r.score)
        .collect();
    if scores.is_empty() {
        return Err(Error::Response(format!(
            "no responses for system \"{system_id}\""
        )));
    }
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = scores.len();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(SystemSummary {
        system_id: system_id.to_string(),
        n,
        mean,
        std,
        q1: quantile(&scores, 0.25),
        q2: quantile(&scores, 0.50),
        q3: quantile(&scores, 0.75),
        min: scores[0],
        max: scores[n - 1],
    })
}

/// One two-sided Welch t-test between two systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub system_a: String,
    pub system_b: String,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    /// True when p < 0.001.
    pub flagged: bool,
}

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
/// freedom and a two-sided p-value from the Student-t distribution.
pub fn welch_t_test(label_a: &str, a: &[f64], label_b: &str, b: &[f64]) -> Result<PairwiseTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewSamples(format!(
            "welch test needs at least 2 samples per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let mean_a = a.iter().sum::<f64>() / na;
    let mean_b = b.iter().sum::<f64>() / nb;
    let var_a = a.iter().map(|x| (x - mean_a) * (x - mean_a)).sum::<f64>() / (na - 1.0);
    let var_b = b.iter().map(|x| (x - mean_b) * (x - mean_b)).sum::<f64>() / (nb - 1.0);
    if var_a == 0.0 && var_b == 0.0 {
        return Err(Error::DegenerateTest(format!(
            "both \"{label_a}\" and \"{label_b}\" have zero variance"
        )));
    }
    let sa = var_a / na;
    let sb = var_b / nb;
    let standard_error = (sa + sb).sqrt();
    let t_statistic = (mean_a - mean_b) / standard_error;
    let degrees_of_freedom = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p_value = student_t_two_sided(t_statistic, degrees_of_freedom);
    Ok(PairwiseTest {
        system_a: label_a.to_string(),
        system_b: label_b.to_string(),
        t_statistic,
        degrees_of_freedom,
        p_value,
        flagged: p_value < FLAG_ALPHA,
    })
}

/// Full report: summaries, all pairwise tests and the raw score vectors for
/// external plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MushraReport {
    pub summaries: Vec<SystemSummary>,
    pub tests: Vec<PairwiseTest>,
    pub raw_scores: BTreeMap<String, Vec<f64>>,
}

/// Summaries and one test per unordered system pair, in lexicographic pair
/// order. `systems` may be empty to use every system found in the responses.
pub fn all_pairs_report(responses: &[MushraResponse], systems: &[String]) -> Result<MushraReport> {
    let systems: Vec<String> = if systems.is_empty() {
        responses
            .iter()
            .map(|r| r.system_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        systems.to_vec()
    };
    if systems.len() < 2 {
        return Err(Error::Response(format!(
            "pairwise report needs at least 2 systems, found {}",
            systems.len()
        )));
    }

    let mut raw_scores = BTreeMap::new();
    let mut summaries = Vec::new();
    for system in &systems {
        summaries.push(summarize(responses, system)?);
        let scores: Vec<f64> = responses
            .iter()
            .filter(|r| &r.system_id == system)
            .map(|r| r.score)
            .collect();
        raw_scores.insert(system.clone(), scores);
    }

    let mut tests = Vec::new();
    for i in 0..systems.len() {
        for j in i + 1..systems.len() {
            tests.push(welch_t_test(
                &systems[i],
                &raw_scores[&systems[i]],
                &systems[j],
                &raw_scores[&systems[j]],
            )?);
        }
    }
    Ok(MushraReport {
        summaries,
        tests,
        raw_scores,
    })
}

impl MushraReport {
    /// Flat CSV: one summary line per system then one line per pair test.
    pub fn write_csv(&self, destination: &mut impl Write) -> Result<()> {
        writeln!(
            destination,
            "kind,system_a,system_b,n,mean,std,q1,q2,q3,min,max,t,df,p,flagged"
        )?;
        for s in &self.summaries {
            writeln!(
                destination,
                "summary,{},,{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},,,,",
                s.system_id, s.n, s.mean, s.std, s.q1, s.q2, s.q3, s.min, s.max
            )?;
        }
        for t in &self.tests {
            writeln!(
                destination,
                "test,{},{},,,,,,,,,{:.6},{:.3},{:e},{}",
                t.system_a, t.system_b, t.t_statistic, t.degrees_of_freedom, t.p_value, t.flagged
            )?;
        }
        Ok(())
    }
}
