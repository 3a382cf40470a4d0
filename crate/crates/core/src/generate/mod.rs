//! Repair candidate generators.
//!
//! * `copy` returns the wrong program unchanged.
//! * `retrieval` returns the training-split correct program of the same
//!   problem closest in edit distance to the wrong program.
//! * `mutate` perturbs the pair's correct program with a few random
//!   single-character edits; sample 0 is always the unmodified program.
//! * `external:<cmd>` speaks the line-delimited JSON generator protocol
//!   with a child process (see [`external`]).
//! * `replay:<file>` reads candidates written by an earlier run.

mod baseline;
pub mod external;
mod mutate;

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use baseline::{build_retrieval_index, gen_copy, gen_retrieval, RetrievalIndex};
pub use external::{run_external, ExternalOptions};
pub use mutate::gen_mutate;

use crate::corpus::CodePair;
use crate::jsonl::{self, JsonlError};
use crate::workers::Workers;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub pair_id: String,
    pub sample_index: u32,
    pub source: String,
    pub generator_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_samples: u32,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            temperature: 0.7,
            max_tokens: 256,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GenerateError> {
        if self.n_samples < 1 || !self.temperature.is_finite() || self.temperature <= 0.0 || self.max_tokens < 1 {
            return Err(GenerateError::BadConfig(*self));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("invalid generator config {0:?}: need n_samples >= 1, temperature > 0, max_tokens >= 1")]
    BadConfig(GeneratorConfig),
    #[error("no training programs indexed for problem `{0}`")]
    NotIndexed(String),
    #[error("candidates line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("external generator failed on pair `{pair_id}`: {message}")]
    External { pair_id: String, message: String },
    #[error("external generator: {0}")]
    Process(String),
    #[error("unknown generator `{0}` (expected copy, retrieval, mutate, external:<cmd> or replay:<file>)")]
    UnknownKind(String),
}

/// A pair the generator could not serve; the run continues without it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairError {
    pub pair_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Generated {
    pub candidates: Vec<Candidate>,
    pub errors: Vec<PairError>,
}

/// Generator selector as written on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorKind {
    Copy,
    Retrieval,
    Mutate,
    External(String),
    Replay(PathBuf),
}

impl FromStr for GeneratorKind {
    type Err = GenerateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "copy" => Ok(Self::Copy),
            "retrieval" => Ok(Self::Retrieval),
            "mutate" => Ok(Self::Mutate),
            _ => match s.split_once(':') {
                Some(("external", cmd)) if !cmd.is_empty() => Ok(Self::External(cmd.to_string())),
                Some(("replay", file)) if !file.is_empty() => Ok(Self::Replay(file.into())),
                _ => Err(GenerateError::UnknownKind(s.to_string())),
            },
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Copy => f.write_str("copy"),
            Self::Retrieval => f.write_str("retrieval"),
            Self::Mutate => f.write_str("mutate"),
            Self::External(cmd) => write!(f, "external:{cmd}"),
            Self::Replay(path) => write!(f, "replay:{}", path.display()),
        }
    }
}

/// A ready-to-run generator.
#[derive(Debug, Clone)]
pub enum Generator {
    Copy,
    Retrieval(RetrievalIndex),
    Mutate { seed: u64 },
    External { command: String, timeout: Duration },
    Replay { label: String, candidates: Vec<Candidate> },
}

impl Generator {
    pub fn id(&self) -> String {
        match self {
            Self::Copy => "copy".into(),
            Self::Retrieval(_) => "retrieval".into(),
            Self::Mutate { .. } => "mutate".into(),
            Self::External { command, .. } => format!("external:{command}"),
            Self::Replay { label, .. } => label.clone(),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Mutate { seed } => Some(*seed),
            _ => None,
        }
    }

    /// Candidates for every pair, in pair order then sample order.
    pub fn generate(
        &self,
        pairs: &[CodePair],
        config: &GeneratorConfig,
        workers: &Workers,
    ) -> Result<Generated, GenerateError> {
        config.validate()?;
        let per_pair = |f: &(dyn Fn(&CodePair) -> Result<Vec<Candidate>, GenerateError> + Sync)| {
            let results = workers.map(pairs, |p| f(p));
            let mut out = Generated::default();
            for r in results {
                out.candidates.extend(r?);
            }
            Ok(out)
        };
        match self {
            Self::Copy => per_pair(&|p| Ok(gen_copy(p))),
            Self::Retrieval(index) => per_pair(&|p| gen_retrieval(p, index)),
            Self::Mutate { seed } => per_pair(&|p| Ok(gen_mutate(p, config, *seed))),
            Self::External { command, timeout } => run_external(
                command,
                pairs,
                config,
                &ExternalOptions {
                    timeout: *timeout,
                    generator_id: self.id(),
                },
            ),
            Self::Replay { candidates, .. } => {
                let wanted: HashSet<&str> = pairs.iter().map(|p| p.pair_id.as_str()).collect();
                let mut picked: Vec<Candidate> = candidates
                    .iter()
                    .filter(|c| wanted.contains(c.pair_id.as_str()))
                    .cloned()
                    .collect();
                let order: std::collections::HashMap<&str, usize> =
                    pairs.iter().enumerate().map(|(i, p)| (p.pair_id.as_str(), i)).collect();
                picked.sort_by_key(|c| (order[c.pair_id.as_str()], c.sample_index));
                Ok(Generated {
                    candidates: picked,
                    errors: Vec::new(),
                })
            }
        }
    }
}

/// Parse a candidates (replay) file. `(pair_id, sample_index)` must be
/// unique across the file.
pub fn parse_candidates(bytes: &[u8]) -> Result<Vec<Candidate>, GenerateError> {
    let mut out: Vec<Candidate> = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = idx + 1;
        let fail = |message: String| GenerateError::Schema { line, message };
        let text = std::str::from_utf8(raw).map_err(|e| fail(format!("invalid UTF-8: {e}")))?;
        if text.trim().is_empty() {
            continue;
        }
        let cand: Candidate = serde_json::from_str(text).map_err(|e| fail(e.to_string()))?;
        if !seen.insert((cand.pair_id.clone(), cand.sample_index)) {
            return Err(fail(format!(
                "duplicate candidate for pair `{}` sample {}",
                cand.pair_id, cand.sample_index
            )));
        }
        out.push(cand);
    }
    Ok(out)
}

pub fn load_candidates(path: impl AsRef<Path>) -> Result<Vec<Candidate>, GenerateError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_candidates(&bytes)
}

pub fn write_candidates(path: impl AsRef<Path>, candidates: &[Candidate]) -> Result<(), GenerateError> {
    Ok(jsonl::write(path, candidates)?)
}
