#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use minrepair::corpus::{self, CodePair};
use minrepair::judge::ProblemSet;
use minrepair::Verdict;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn problems() -> ProblemSet {
    ProblemSet::load_root(fixtures().join("problems")).expect("fixture problems load")
}

pub fn mini_pairs() -> Vec<CodePair> {
    corpus::read_pairs(fixtures().join("mini_pairs.jsonl")).expect("mini corpus loads")
}

/// Verdict each mini-corpus wrong program is known to earn, by pair id.
pub fn expected_wrong_verdicts() -> BTreeMap<String, Verdict> {
    let text = std::fs::read_to_string(fixtures().join("mini_expected_verdicts.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn fake_generator(mode: &str) -> String {
    format!("python3 {} {mode}", fixtures().join("fake_generator.py").display())
}

/// Reference Levenshtein distance over chars, full table.
pub fn full_table_ed(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in t.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in t[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            t[i][j] = sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
        }
    }
    t[a.len()][b.len()]
}

/// pass@k by enumerating every k-subset of n samples, c of them good.
pub fn enumerated_pass_at_k(n: u32, c: u32, k: u32) -> f64 {
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() != k {
            continue;
        }
        total += 1;
        // samples 0..c are the good ones
        if mask & ((1u32 << c) - 1) != 0 {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

/// Apply a unified diff produced against `original`; panics on mismatch.
pub fn apply_unified_diff(original: &str, diff: &str) -> String {
    let old: Vec<&str> = original.split_inclusive('\n').collect();
    let mut out: Vec<String> = Vec::new();
    let mut cursor = 0usize;
    let mut lines = diff.split_inclusive('\n').peekable();
    while let Some(line) = lines.next() {
        if line.starts_with("---") || line.starts_with("+++") {
            continue;
        }
        let Some(rest) = line.strip_prefix("@@ -") else {
            continue;
        };
        let range = rest.split(' ').next().unwrap();
        let start: usize = range.split(',').next().unwrap().parse().unwrap();
        // an empty old range names the line before the insertion point
        let start = if range.ends_with(",0") { start } else { start - 1 };
        while cursor < start {
            out.push(old[cursor].to_string());
            cursor += 1;
        }
        let mut last_tag = "";
        while let Some(body) = lines.peek() {
            if body.starts_with("@@") {
                break;
            }
            let body = lines.next().unwrap();
            if body.starts_with('\\') {
                // "\ No newline at end of file" applies to the previous line
                // context lines were copied verbatim, so only added ones need trimming
                if last_tag == "+" {
                    if let Some(last) = out.last_mut() {
                        last.pop();
                    }
                }
                continue;
            }
            let (tag, text) = body.split_at(1);
            last_tag = tag;
            match tag {
                " " => {
                    assert_eq!(old[cursor].trim_end_matches('\n'), text.trim_end_matches('\n'));
                    out.push(old[cursor].to_string());
                    cursor += 1;
                }
                "-" => {
                    assert_eq!(old[cursor].trim_end_matches('\n'), text.trim_end_matches('\n'));
                    cursor += 1;
                }
                "+" => out.push(text.to_string()),
                _ => panic!("unexpected diff line {body:?}"),
            }
        }
    }
    out.extend(old[cursor..].iter().map(|s| s.to_string()));
    out.concat()
}

pub struct GoldenRun {
    pub evaluation: minrepair::evalreport::Evaluation,
    pub test_pairs: Vec<CodePair>,
    pub tokenizer: minrepair::TokenizerModel,
}

/// 30-record log → pair → filter → dedupe → split → evaluate the test
/// split with the mutate generator (5 samples, seed 7).
pub fn golden_run(workers: minrepair::Workers) -> GoldenRun {
    use minrepair::evalreport::{evaluate, EvalSettings};
    use minrepair::generate::{Generator, GeneratorConfig};
    use minrepair::judge::{Judge, Sandbox};
    use minrepair::tokenize::train_bpe;
    use minrepair::TokenizerModel;

    let records = corpus::read_submissions(fixtures().join("submissions_30.jsonl")).unwrap();
    let pairs = corpus::pair_submissions(&records);
    let pairs = corpus::filter_pairs(&pairs, &TokenizerModel::byte_level(), corpus::DEFAULT_MAX_TOKENS);
    let pairs = corpus::dedupe_pairs(&pairs);
    let split = corpus::split_pairs(&pairs, 7, GOLDEN_RATIOS).unwrap();
    let texts: Vec<&str> = split
        .train
        .iter()
        .flat_map(|p| [p.wrong_source.as_str(), p.correct_source.as_str()])
        .collect();
    let tokenizer = train_bpe(&texts, 320).unwrap();
    let settings = EvalSettings {
        model_id: "mutate".into(),
        config: GeneratorConfig {
            n_samples: 5,
            ..GeneratorConfig::default()
        },
        bucket_width: 10,
    };
    let judge = Judge::new(Sandbox::default()).with_workers(workers);
    let evaluation = evaluate(
        &split.test,
        &Generator::Mutate { seed: 7 },
        &problems(),
        &judge,
        &tokenizer,
        &settings,
        None,
    )
    .unwrap();
    GoldenRun {
        evaluation,
        test_pairs: split.test,
        tokenizer,
    }
}

pub const GOLDEN_RATIOS: (f64, f64, f64) = (0.4, 0.2, 0.4);

pub fn golden_dir() -> PathBuf {
    fixtures().join("golden")
}

/// Compare against a frozen file; `MINREPAIR_BLESS=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("MINREPAIR_BLESS").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{} differs from the produced output", path.display()))
    }
}
