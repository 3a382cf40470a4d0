use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const DEFAULT_TIME_MS: u64 = 2000;
pub const DEFAULT_MEMORY_KIB: u64 = 262_144;

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("problem `{problem}`: {message}")]
    Invalid { problem: String, message: String },
    #[error("problem `{0}` not found")]
    Missing(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub input: Vec<u8>,
    pub expected_output: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeLimits {
    pub time_ms: u64,
    pub memory_kib: u64,
}

impl Default for JudgeLimits {
    fn default() -> Self {
        Self {
            time_ms: DEFAULT_TIME_MS,
            memory_kib: DEFAULT_MEMORY_KIB,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemSpec {
    pub problem_id: String,
    pub test_cases: Vec<TestCase>,
    pub limits: JudgeLimits,
}

impl ProblemSpec {
    pub fn new(
        problem_id: impl Into<String>,
        test_cases: Vec<TestCase>,
        limits: JudgeLimits,
    ) -> Result<Self, ProblemError> {
        let spec = Self {
            problem_id: problem_id.into(),
            test_cases,
            limits,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), ProblemError> {
        let invalid = |message: &str| ProblemError::Invalid {
            problem: self.problem_id.clone(),
            message: message.to_string(),
        };
        if self.test_cases.is_empty() {
            return Err(invalid("no test cases"));
        }
        if self.limits.time_ms == 0 || self.limits.memory_kib == 0 {
            return Err(invalid("limits must be positive"));
        }
        Ok(())
    }

    /// Load `<dir>/tests/NN.in` + `NN.out` pairs and optional
    /// `<dir>/limits.json`. The directory name is the problem id.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, ProblemError> {
        let dir = dir.as_ref();
        let problem_id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ProblemError::Io { path, source }
        };
        let invalid = |message: String| ProblemError::Invalid {
            problem: problem_id.clone(),
            message,
        };

        let tests_dir = dir.join("tests");
        let mut inputs: Vec<(u64, String, PathBuf)> = Vec::new();
        for entry in fs::read_dir(&tests_dir).map_err(io(&tests_dir))? {
            let path = entry.map_err(io(&tests_dir))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("in") {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
            let number = stem
                .parse::<u64>()
                .map_err(|_| invalid(format!("test file name `{stem}.in` is not numeric")))?;
            inputs.push((number, stem, path));
        }
        inputs.sort();

        let mut test_cases = Vec::with_capacity(inputs.len());
        for (_, stem, in_path) in inputs {
            let out_path = tests_dir.join(format!("{stem}.out"));
            if !out_path.exists() {
                return Err(invalid(format!("`{stem}.in` has no matching `{stem}.out`")));
            }
            test_cases.push(TestCase {
                input: fs::read(&in_path).map_err(io(&in_path))?,
                expected_output: fs::read(&out_path).map_err(io(&out_path))?,
            });
        }

        let limits_path = dir.join("limits.json");
        let limits = if limits_path.exists() {
            let text = fs::read_to_string(&limits_path).map_err(io(&limits_path))?;
            serde_json::from_str::<JudgeLimits>(&text)
                .map_err(|e| invalid(format!("limits.json: {e}")))?
        } else {
            JudgeLimits::default()
        };

        Self::new(problem_id, test_cases, limits)
    }

    /// Write the directory layout understood by [`ProblemSpec::load_dir`].
    pub fn save_dir(&self, root: impl AsRef<Path>) -> Result<PathBuf, ProblemError> {
        let dir = root.as_ref().join(&self.problem_id);
        let tests = dir.join("tests");
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ProblemError::Io { path, source }
        };
        fs::create_dir_all(&tests).map_err(io(&tests))?;
        for (i, case) in self.test_cases.iter().enumerate() {
            let stem = format!("{:02}", i + 1);
            let p = tests.join(format!("{stem}.in"));
            fs::write(&p, &case.input).map_err(io(&p))?;
            let p = tests.join(format!("{stem}.out"));
            fs::write(&p, &case.expected_output).map_err(io(&p))?;
        }
        let p = dir.join("limits.json");
        fs::write(&p, serde_json::to_string(&self.limits).expect("limits serialize")).map_err(io(&p))?;
        Ok(dir)
    }
}

/// All problems under a root directory, keyed by id.
#[derive(Debug, Clone, Default)]
pub struct ProblemSet {
    problems: BTreeMap<String, ProblemSpec>,
}

impl ProblemSet {
    pub fn load_root(root: impl AsRef<Path>) -> Result<Self, ProblemError> {
        let root = root.as_ref();
        let mut problems = BTreeMap::new();
        let entries = fs::read_dir(root).map_err(|source| ProblemError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        for entry in entries {
            let path = entry
                .map_err(|source| ProblemError::Io {
                    path: root.to_path_buf(),
                    source,
                })?
                .path();
            if path.join("tests").is_dir() {
                let spec = ProblemSpec::load_dir(&path)?;
                problems.insert(spec.problem_id.clone(), spec);
            }
        }
        Ok(Self { problems })
    }

    pub fn insert(&mut self, spec: ProblemSpec) {
        self.problems.insert(spec.problem_id.clone(), spec);
    }

    pub fn get(&self, id: &str) -> Option<&ProblemSpec> {
        self.problems.get(id)
    }

    pub fn require(&self, id: &str) -> Result<&ProblemSpec, ProblemError> {
        self.get(id).ok_or_else(|| ProblemError::Missing(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ProblemSpec> {
        self.problems.values()
    }
}

impl FromIterator<ProblemSpec> for ProblemSet {
    fn from_iter<I: IntoIterator<Item = ProblemSpec>>(iter: I) -> Self {
        Self {
            problems: iter.into_iter().map(|p| (p.problem_id.clone(), p)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(i: &str, o: &str) -> TestCase {
        TestCase {
            input: i.into(),
            expected_output: o.into(),
        }
    }

    #[test]
    fn save_load_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let cases: Vec<TestCase> = (1..=11).map(|i| case(&format!("{i}\n"), &format!("{}\n", i * 2))).collect();
        let spec = ProblemSpec::new("DOUBLE", cases, JudgeLimits { time_ms: 500, memory_kib: 65536 }).unwrap();
        spec.save_dir(tmp.path()).unwrap();
        let set = ProblemSet::load_root(tmp.path()).unwrap();
        // 01..11 sort numerically
        assert_eq!(set.require("DOUBLE").unwrap(), &spec);
    }

    #[test]
    fn defaults_and_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("P");
        fs::create_dir_all(dir.join("tests")).unwrap();
        assert!(matches!(ProblemSpec::load_dir(&dir), Err(ProblemError::Invalid { .. })));
        fs::write(dir.join("tests/01.in"), "").unwrap();
        assert!(matches!(ProblemSpec::load_dir(&dir), Err(ProblemError::Invalid { .. })));
        fs::write(dir.join("tests/01.out"), "x\n").unwrap();
        let spec = ProblemSpec::load_dir(&dir).unwrap();
        assert_eq!(spec.limits, JudgeLimits { time_ms: 2000, memory_kib: 262_144 });
        assert!(matches!(
            ProblemSpec::load_dir(tmp.path().join("absent")),
            Err(ProblemError::Io { .. })
        ));
    }
}
