//! Sandboxed judging of candidate programs against hidden test cases.
//!
//! A candidate that fails the syntax gate is `CE`. Otherwise each test runs
//! in a fresh child process and gets its own verdict; the overall verdict
//! is the first non-`AC` one. Judging stops at the first failing test and
//! `per_test` records every test that was executed. Test numbers in
//! `first_failed_test` are 1-based.
//!
//! Output comparison converts CRLF to LF and strips one trailing newline
//! from both sides, then compares bytes.
//!
//! A run is `MLE` when the interpreter dies on an allocation failure under
//! the address-space limit, or when its peak resident size reaches the
//! memory limit. Any other abnormal exit is `RE`.

mod problem;
mod sandbox;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use problem::{
    JudgeLimits, ProblemError, ProblemSet, ProblemSpec, TestCase, DEFAULT_MEMORY_KIB,
    DEFAULT_TIME_MS,
};
pub use sandbox::{Sandbox, SandboxConfig, SandboxError};

use crate::generate::Candidate;
use crate::jsonl::{self, JsonlError};
use crate::verdict::Verdict;
use crate::workers::Workers;
use sandbox::{Limits, Mode, RunOutcome, Workspace, MEMORY_ERROR_EXIT};

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRun {
    pub verdict: Verdict,
    pub wall_ms: u64,
    pub peak_kib: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeResult {
    pub verdict: Verdict,
    /// 1-based number of the first non-accepted test.
    pub first_failed_test: Option<usize>,
    pub per_test: Vec<TestRun>,
}

impl JudgeResult {
    fn compile_error() -> Self {
        Self {
            verdict: Verdict::CE,
            first_failed_test: None,
            per_test: Vec::new(),
        }
    }

    pub fn wall_ms(&self) -> u64 {
        self.per_test.iter().map(|t| t.wall_ms).max().unwrap_or(0)
    }

    pub fn peak_kib(&self) -> u64 {
        self.per_test.iter().map(|t| t.peak_kib).max().unwrap_or(0)
    }
}

/// CRLF to LF, then drop a single trailing newline.
pub fn normalize_output(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\r' && bytes.get(i + 1) == Some(&b'\n') {
            i += 1;
            continue;
        }
        out.push(bytes[i]);
        i += 1;
    }
    if out.last() == Some(&b'\n') {
        out.pop();
    }
    out
}

fn classify(run: &RunOutcome, limits: Limits, expected: &[u8]) -> Verdict {
    if run.timed_out || run.signal() == Some(libc::SIGXCPU) || run.cpu_ms >= limits.time_ms {
        return Verdict::TLE;
    }
    match run.exit_code() {
        Some(0) => {}
        Some(MEMORY_ERROR_EXIT) => return Verdict::MLE,
        _ if run.peak_kib >= limits.memory_kib => return Verdict::MLE,
        _ => return Verdict::RE,
    }
    if normalize_output(&run.stdout) == normalize_output(expected) {
        Verdict::AC
    } else {
        Verdict::WA
    }
}

/// Results keyed by `(problem_id, sha256(source))`.
#[derive(Debug, Default)]
pub struct JudgeCache {
    entries: Mutex<HashMap<(String, [u8; 32]), JudgeResult>>,
}

impl JudgeCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(problem_id: &str, source: &str) -> (String, [u8; 32]) {
        (problem_id.to_string(), Sha256::digest(source.as_bytes()).into())
    }

    pub fn get(&self, problem_id: &str, source: &str) -> Option<JudgeResult> {
        self.entries
            .lock()
            .expect("cache lock")
            .get(&Self::key(problem_id, source))
            .cloned()
    }

    pub fn insert(&self, problem_id: &str, source: &str, result: JudgeResult) {
        self.entries
            .lock()
            .expect("cache lock")
            .insert(Self::key(problem_id, source), result);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-candidate failure inside a batch; the rest of the batch continues.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BatchError {
    #[error("pair `{0}` has no known problem")]
    UnknownPair(String),
    #[error("problem `{0}` is not loaded")]
    UnknownProblem(String),
    #[error("judge infrastructure failure: {0}")]
    Infrastructure(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgedCandidate {
    pub candidate: Candidate,
    pub result: Result<JudgeResult, BatchError>,
}

pub struct Judge {
    sandbox: Sandbox,
    workers: Workers,
    cache: Option<Arc<JudgeCache>>,
    executions: AtomicUsize,
}

impl Default for Judge {
    fn default() -> Self {
        Self::new(Sandbox::default())
    }
}

impl Judge {
    pub fn new(sandbox: Sandbox) -> Self {
        Self {
            sandbox,
            workers: Workers::default(),
            cache: Some(Arc::new(JudgeCache::new())),
            executions: AtomicUsize::new(0),
        }
    }

    pub fn with_workers(mut self, workers: Workers) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_cache(mut self, cache: Option<Arc<JudgeCache>>) -> Self {
        self.cache = cache;
        self
    }

    pub fn cache(&self) -> Option<&Arc<JudgeCache>> {
        self.cache.as_ref()
    }

    pub fn workers(&self) -> &Workers {
        &self.workers
    }

    pub fn sandbox(&self) -> &Sandbox {
        &self.sandbox
    }

    /// Number of full judgements actually executed (cache misses).
    pub fn executions(&self) -> usize {
        self.executions.load(Ordering::Relaxed)
    }

    /// Parse-only gate: the program is never executed.
    pub fn check_compilable(&self, source: &str, limits: JudgeLimits) -> Result<bool, JudgeError> {
        let limits = Limits {
            time_ms: limits.time_ms,
            memory_kib: limits.memory_kib,
        };
        Ok(self.sandbox.check_syntax(source, limits)?)
    }

    pub fn judge(&self, source: &str, problem: &ProblemSpec) -> Result<JudgeResult, JudgeError> {
        self.executions.fetch_add(1, Ordering::Relaxed);
        if !self.check_compilable(source, problem.limits)? {
            return Ok(JudgeResult::compile_error());
        }
        let limits = Limits {
            time_ms: problem.limits.time_ms,
            memory_kib: problem.limits.memory_kib,
        };
        let mut per_test = Vec::with_capacity(problem.test_cases.len());
        for case in &problem.test_cases {
            let ws = Workspace::new(source)?;
            let run = self.sandbox.run(Mode::Run, &ws, &case.input, limits)?;
            let verdict = classify(&run, limits, &case.expected_output);
            per_test.push(TestRun {
                verdict,
                wall_ms: run.wall_ms,
                peak_kib: run.peak_kib,
            });
            if verdict != Verdict::AC {
                return Ok(JudgeResult {
                    verdict,
                    first_failed_test: Some(per_test.len()),
                    per_test,
                });
            }
        }
        Ok(JudgeResult {
            verdict: Verdict::AC,
            first_failed_test: None,
            per_test,
        })
    }

    /// Judge every candidate. `pair_problems` maps `pair_id` to
    /// `problem_id`. Byte-identical sources for the same problem are executed
    /// once when the cache is enabled. Output order follows input order.
    pub fn judge_batch(
        &self,
        candidates: &[Candidate],
        pair_problems: &BTreeMap<String, String>,
        problems: &ProblemSet,
    ) -> Vec<JudgedCandidate> {
        let resolved: Vec<Result<&ProblemSpec, BatchError>> = candidates
            .iter()
            .map(|c| {
                let pid = pair_problems
                    .get(&c.pair_id)
                    .ok_or_else(|| BatchError::UnknownPair(c.pair_id.clone()))?;
                problems
                    .get(pid)
                    .ok_or_else(|| BatchError::UnknownProblem(pid.clone()))
            })
            .collect();

        // distinct (problem, source) jobs that still need executing
        let mut jobs: Vec<(&ProblemSpec, &str)> = Vec::new();
        let mut job_of: Vec<Option<usize>> = vec![None; candidates.len()];
        let mut seen: HashMap<(&str, &str), usize> = HashMap::new();
        for (i, (cand, problem)) in candidates.iter().zip(&resolved).enumerate() {
            let Ok(problem) = problem else { continue };
            if let Some(cache) = &self.cache {
                if cache.get(&problem.problem_id, &cand.source).is_some() {
                    continue;
                }
                let key = (problem.problem_id.as_str(), cand.source.as_str());
                if let Some(&j) = seen.get(&key) {
                    job_of[i] = Some(j);
                    continue;
                }
                seen.insert(key, jobs.len());
            }
            job_of[i] = Some(jobs.len());
            jobs.push((problem, cand.source.as_str()));
        }

        let results: Vec<Result<JudgeResult, BatchError>> = self.workers.map(&jobs, |(problem, source)| {
            self.judge(source, problem)
                .map_err(|e| BatchError::Infrastructure(e.to_string()))
        });
        if let Some(cache) = &self.cache {
            for ((problem, source), res) in jobs.iter().zip(&results) {
                if let Ok(r) = res {
                    cache.insert(&problem.problem_id, source, r.clone());
                }
            }
        }

        candidates
            .iter()
            .zip(resolved)
            .zip(job_of)
            .map(|((cand, problem), job)| {
                let result = match (problem, job) {
                    (Err(e), _) => Err(e),
                    (Ok(_), Some(j)) => results[j].clone(),
                    (Ok(problem), None) => Ok(self
                        .cache
                        .as_ref()
                        .and_then(|c| c.get(&problem.problem_id, &cand.source))
                        .expect("cached result present")),
                };
                JudgedCandidate {
                    candidate: cand.clone(),
                    result,
                }
            })
            .collect()
    }
}

/// One line of a verdicts file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub pair_id: String,
    pub sample_index: u32,
    pub verdict: Verdict,
    pub first_failed_test: Option<usize>,
    pub wall_ms: u64,
    pub peak_kib: u64,
}

impl VerdictRecord {
    pub fn new(candidate: &Candidate, result: &JudgeResult) -> Self {
        Self {
            pair_id: candidate.pair_id.clone(),
            sample_index: candidate.sample_index,
            verdict: result.verdict,
            first_failed_test: result.first_failed_test,
            wall_ms: result.wall_ms(),
            peak_kib: result.peak_kib(),
        }
    }
}

pub fn read_verdicts(path: impl AsRef<Path>) -> Result<Vec<VerdictRecord>, JudgeError> {
    Ok(jsonl::read(path)?)
}

pub fn write_verdicts(path: impl AsRef<Path>, records: &[VerdictRecord]) -> Result<(), JudgeError> {
    Ok(jsonl::write(path, records)?)
}
