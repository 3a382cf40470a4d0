//! Submission ingestion and `(wrong, correct)` pair mining.
//!
//! Within each `(user, problem)` stream, every non-accepted submission is
//! paired with the next accepted submission from the same user. Pairs are
//! then length-filtered by token count, deduplicated on the exact
//! `(wrong, correct, problem)` triple, and split into train/valid/test.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::{DateTime, FixedOffset, SecondsFormat};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::jsonl::{self, JsonlError};
use crate::metrics::{edit_distance, mean_std};
use crate::tokenize::Tokenizer;
use crate::verdict::Verdict;

pub const DEFAULT_MAX_TOKENS: usize = 256;
pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.90, 0.05, 0.05);

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("submissions line {line}: {message}")]
    Ingest { line: usize, message: String },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("cannot split {0} pairs: need at least 3 to populate train, valid and test")]
    TooFewPairs(usize),
    #[error("split ratios must be non-negative and sum to 1 (got {0:?})")]
    BadRatios((f64, f64, f64)),
    #[error("split manifest references unknown pair {0}")]
    UnknownPair(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmissionRecord {
    pub user_id: String,
    pub problem_id: String,
    pub submitted_at: DateTime<FixedOffset>,
    pub verdict: Verdict,
    pub source: String,
}

/// Wire shape of one submissions line; every field is required.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSubmission {
    user_id: String,
    problem_id: String,
    submitted_at: String,
    verdict: String,
    source: String,
}

impl SubmissionRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&RawSubmission {
            user_id: self.user_id.clone(),
            problem_id: self.problem_id.clone(),
            submitted_at: self.submitted_at.to_rfc3339_opts(SecondsFormat::Millis, true),
            verdict: self.verdict.to_string(),
            source: self.source.clone(),
        })
        .expect("record serializes")
    }
}

/// Parse a submissions export. Line numbers in errors are 1-based.
pub fn parse_submissions(bytes: &[u8]) -> Result<Vec<SubmissionRecord>, CorpusError> {
    let mut out = Vec::new();
    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = idx + 1;
        let fail = |message: String| CorpusError::Ingest { line, message };
        let text = std::str::from_utf8(raw).map_err(|e| fail(format!("invalid UTF-8: {e}")))?;
        let text = text.strip_suffix('\r').unwrap_or(text);
        if text.trim().is_empty() {
            continue;
        }
        let rec: RawSubmission = serde_json::from_str(text).map_err(|e| fail(e.to_string()))?;
        let verdict = rec.verdict.parse().map_err(|e| fail(format!("{e}")))?;
        let submitted_at = DateTime::parse_from_rfc3339(&rec.submitted_at)
            .map_err(|e| fail(format!("bad submitted_at `{}`: {e}", rec.submitted_at)))?;
        out.push(SubmissionRecord {
            user_id: rec.user_id,
            problem_id: rec.problem_id,
            submitted_at,
            verdict,
            source: rec.source,
        });
    }
    Ok(out)
}

pub fn read_submissions(path: impl AsRef<Path>) -> Result<Vec<SubmissionRecord>, CorpusError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_submissions(&bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodePair {
    pub pair_id: String,
    pub problem_id: String,
    pub user_id: String,
    #[serde(rename = "wrong")]
    pub wrong_source: String,
    #[serde(rename = "correct")]
    pub correct_source: String,
    pub original_ed: usize,
}

impl CodePair {
    pub fn new(
        problem_id: impl Into<String>,
        user_id: impl Into<String>,
        wrong_source: impl Into<String>,
        correct_source: impl Into<String>,
    ) -> Self {
        let (problem_id, wrong_source, correct_source) =
            (problem_id.into(), wrong_source.into(), correct_source.into());
        Self {
            pair_id: pair_id(&problem_id, &wrong_source, &correct_source),
            original_ed: edit_distance(&wrong_source, &correct_source),
            problem_id,
            user_id: user_id.into(),
            wrong_source,
            correct_source,
        }
    }
}

/// Content hash of `(problem, wrong, correct)`; length-prefixed so field
/// boundaries cannot collide.
pub fn pair_id(problem_id: &str, wrong: &str, correct: &str) -> String {
    let mut h = Sha256::new();
    for field in [problem_id, wrong, correct] {
        h.update((field.len() as u64).to_le_bytes());
        h.update(field.as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<CodePair>, CorpusError> {
    Ok(jsonl::read(path)?)
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[CodePair]) -> Result<(), CorpusError> {
    Ok(jsonl::write(path, pairs)?)
}

/// Mine `(wrong, correct)` pairs.
///
/// Each `(user, problem)` stream is ordered by `submitted_at` with ties
/// kept in input order. A non-accepted submission waits for the next
/// accepted one; several wrongs may share one correct. Output is sorted by
/// user, problem, then wrong submission time.
pub fn pair_submissions(records: &[SubmissionRecord]) -> Vec<CodePair> {
    let mut streams: BTreeMap<(&str, &str), Vec<(usize, &SubmissionRecord)>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        streams
            .entry((r.user_id.as_str(), r.problem_id.as_str()))
            .or_default()
            .push((i, r));
    }

    let mut out = Vec::new();
    for stream in streams.values_mut() {
        stream.sort_by_key(|&(i, r)| (r.submitted_at, i));
        let mut pending: Vec<&SubmissionRecord> = Vec::new();
        for &(_, r) in stream.iter() {
            if r.verdict.is_accepted() {
                for wrong in pending.drain(..) {
                    out.push(CodePair::new(
                        &r.problem_id,
                        &r.user_id,
                        &wrong.source,
                        &r.source,
                    ));
                }
            } else {
                pending.push(r);
            }
        }
    }
    out
}

/// Keep pairs whose wrong and correct sides both encode to more than 0 and
/// fewer than `max_len` tokens.
pub fn filter_pairs<T: Tokenizer + ?Sized>(pairs: &[CodePair], tok: &T, max_len: usize) -> Vec<CodePair> {
    let fits = |text: &str| {
        let n = tok.count_tokens(text);
        n > 0 && n < max_len
    };
    pairs
        .iter()
        .filter(|p| fits(&p.wrong_source) && fits(&p.correct_source))
        .cloned()
        .collect()
}

/// Drop repeated `(wrong, correct, problem)` triples, keeping the first.
pub fn dedupe_pairs(pairs: &[CodePair]) -> Vec<CodePair> {
    let mut seen: HashSet<(&str, &str, &str)> = HashSet::new();
    pairs
        .iter()
        .filter(|p| {
            seen.insert((
                p.wrong_source.as_str(),
                p.correct_source.as_str(),
                p.problem_id.as_str(),
            ))
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<CodePair>,
    pub valid: Vec<CodePair>,
    pub test: Vec<CodePair>,
    pub seed: u64,
}

/// Split manifest as written to disk: pair ids only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

impl CorpusSplit {
    pub fn manifest(&self) -> SplitManifest {
        let ids = |v: &[CodePair]| v.iter().map(|p| p.pair_id.clone()).collect();
        SplitManifest {
            seed: self.seed,
            train: ids(&self.train),
            valid: ids(&self.valid),
            test: ids(&self.test),
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }
}

impl SplitManifest {
    /// Rebuild the split from the pairs it was made from.
    pub fn resolve(&self, pairs: &[CodePair]) -> Result<CorpusSplit, CorpusError> {
        let by_id: BTreeMap<&str, &CodePair> =
            pairs.iter().map(|p| (p.pair_id.as_str(), p)).collect();
        let pick = |ids: &[String]| {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .map(|p| (*p).clone())
                        .ok_or_else(|| CorpusError::UnknownPair(id.clone()))
                })
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(CorpusSplit {
            train: pick(&self.train)?,
            valid: pick(&self.valid)?,
            test: pick(&self.test)?,
            seed: self.seed,
        })
    }
}

/// Sizes for a split of `n` items: valid and test are rounded (at least
/// one each), train takes the remainder.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize), CorpusError> {
    let (tr, va, te) = ratios;
    if [tr, va, te].iter().any(|r| !r.is_finite() || *r < 0.0) || (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios(ratios));
    }
    if n < 3 {
        return Err(CorpusError::TooFewPairs(n));
    }
    let part = |r: f64| ((n as f64 * r).round() as usize).max(1);
    let (valid, test) = (part(va), part(te));
    if valid + test >= n {
        return Err(CorpusError::BadRatios(ratios));
    }
    Ok((n - valid - test, valid, test))
}

/// Seeded shuffle (ChaCha8) followed by contiguous train/valid/test slices.
pub fn split_pairs(pairs: &[CodePair], seed: u64, ratios: (f64, f64, f64)) -> Result<CorpusSplit, CorpusError> {
    let (n_train, n_valid, _) = split_sizes(pairs.len(), ratios)?;
    let mut shuffled = pairs.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = shuffled.split_off(n_train + n_valid);
    let valid = shuffled.split_off(n_train);
    Ok(CorpusSplit {
        train: shuffled,
        valid,
        test,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: usize,
    /// `None` (JSON `null`) when there are no pairs.
    pub mean_ed: Option<f64>,
    pub std_ed: Option<f64>,
}

/// Mean and population standard deviation of `original_ed`.
pub fn corpus_stats(pairs: &[CodePair]) -> CorpusStats {
    let eds: Vec<f64> = pairs.iter().map(|p| p.original_ed as f64).collect();
    let ms = mean_std(&eds);
    CorpusStats {
        count: pairs.len(),
        mean_ed: ms.map(|m| m.mean),
        std_ed: ms.map(|m| m.std),
    }
}
