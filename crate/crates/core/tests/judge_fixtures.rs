mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use minrepair::generate::Candidate;
use minrepair::judge::{Judge, JudgeCache, JudgeLimits, ProblemSpec, Sandbox, TestCase};
use minrepair::{Verdict, Workers};

fn judge() -> Judge {
    Judge::new(Sandbox::default()).with_workers(Workers::sequential())
}

#[test]
fn mini_corpus_wrongs_earn_their_recorded_verdicts() {
    let problems = common::problems();
    let expected = common::expected_wrong_verdicts();
    let judge = judge();
    let mut seen = std::collections::BTreeSet::new();
    for pair in common::mini_pairs() {
        let spec = problems.require(&pair.problem_id).unwrap();
        let wrong = judge.judge(&pair.wrong_source, spec).unwrap();
        assert_eq!(wrong.verdict, expected[&pair.pair_id], "{}", pair.wrong_source);
        seen.insert(wrong.verdict);
        let right = judge.judge(&pair.correct_source, spec).unwrap();
        assert_eq!(right.verdict, Verdict::AC, "{}", pair.correct_source);
        assert_eq!(right.per_test.len(), spec.test_cases.len());
    }
    for v in [Verdict::WA, Verdict::RE, Verdict::CE, Verdict::TLE] {
        assert!(seen.contains(&v), "mini corpus lacks a {v} pair");
    }
}

#[test]
fn first_failed_test_points_at_the_failing_case() {
    let problems = common::problems();
    // lexicographic sort only breaks on the third sort3 case
    let r = judge()
        .judge("a = sorted(input().split())\nprint(*a)\n", problems.require("sort3").unwrap())
        .unwrap();
    assert_eq!((r.verdict, r.first_failed_test), (Verdict::WA, Some(3)));
    assert_eq!(r.per_test.len(), 3);
}

fn hostile(source: &str) -> Verdict {
    let spec = ProblemSpec::new(
        "hostile",
        vec![TestCase {
            input: Vec::new(),
            expected_output: b"ok\n".to_vec(),
        }],
        JudgeLimits {
            time_ms: 2000,
            memory_kib: 262_144,
        },
    )
    .unwrap();
    judge().judge(source, &spec).unwrap().verdict
}

#[test]
fn hostile_programs_are_runtime_errors_and_leave_no_trace() {
    let probe = std::env::temp_dir().join(format!("minrepair-escape-{}", std::process::id()));
    let p = probe.display();
    let attempts = [
        "import socket\ns = socket.socket()\ns.connect(('1.1.1.1', 80))\nprint('ok')\n".to_string(),
        "import urllib.request\nurllib.request.urlopen('http://example.com', timeout=1)\nprint('ok')\n".to_string(),
        format!("open('{p}', 'w').write('x')\nprint('ok')\n"),
        format!("open('../../../../../../..{p}', 'a').write('x')\nprint('ok')\n"),
        format!("import os\nos.system('touch {p}')\nprint('ok')\n"),
        format!("import subprocess\nsubprocess.run(['touch', '{p}'])\nprint('ok')\n"),
        format!("import os\nos.mkdir('{p}')\nprint('ok')\n"),
        format!("import shutil\nshutil.copy('/etc/hostname', '{p}')\nprint('ok')\n"),
        "import ctypes\nctypes.CDLL(None)\nprint('ok')\n".to_string(),
        "import sys\nsys.addaudithook(lambda *a: None)\nimport socket\nsocket.socket()\nprint('ok')\n".to_string(),
    ];
    for src in &attempts {
        assert_eq!(hostile(src), Verdict::RE, "{src}");
        assert!(!Path::new(&probe).exists(), "escaped: {src}");
    }
    // writes inside the scratch directory are allowed
    assert_eq!(hostile("open('note.txt', 'w').write('x')\nprint(open('note.txt').read() and 'ok')\n"), Verdict::AC);
    // the harness still judges normally afterwards
    assert_eq!(hostile("print('ok')\n"), Verdict::AC);
}

#[test]
fn batch_dedupes_and_matches_single_judgements() {
    let problems = common::problems();
    let pairs = common::mini_pairs();
    let pair_problems: BTreeMap<String, String> =
        pairs.iter().map(|p| (p.pair_id.clone(), p.problem_id.clone())).collect();
    let mut cands = Vec::new();
    for p in pairs.iter().filter(|p| p.problem_id != "cube") {
        for (i, src) in [&p.wrong_source, &p.correct_source, &p.correct_source].into_iter().enumerate() {
            cands.push(Candidate {
                pair_id: p.pair_id.clone(),
                sample_index: i as u32,
                source: src.clone(),
                generator_id: "fixture".into(),
            });
        }
    }
    let distinct: std::collections::BTreeSet<(&str, &str)> = cands
        .iter()
        .map(|c| (pair_problems[&c.pair_id].as_str(), c.source.as_str()))
        .collect();

    let cached = judge().with_cache(Some(Arc::new(JudgeCache::new())));
    let a = cached.judge_batch(&cands, &pair_problems, &problems);
    assert_eq!(cached.executions(), distinct.len());
    let again = cached.judge_batch(&cands, &pair_problems, &problems);
    assert_eq!(cached.executions(), distinct.len(), "second batch is served from cache");

    let uncached = Judge::new(Sandbox::default())
        .with_workers(Workers::new(4))
        .with_cache(None);
    let b = uncached.judge_batch(&cands, &pair_problems, &problems);
    assert_eq!(uncached.executions(), cands.len());
    let verdicts = |v: &[minrepair::judge::JudgedCandidate]| -> Vec<(Candidate, Verdict, Option<usize>)> {
        v.iter()
            .map(|j| {
                let r = j.result.as_ref().unwrap();
                (j.candidate.clone(), r.verdict, r.first_failed_test)
            })
            .collect()
    };
    assert_eq!(verdicts(&a), verdicts(&b));
    assert_eq!(verdicts(&a), verdicts(&again));
    assert_eq!(a.iter().map(|j| &j.candidate).collect::<Vec<_>>(), cands.iter().collect::<Vec<_>>());
}

#[test]
fn batch_reports_unknown_pairs_per_candidate() {
    let problems = common::problems();
    let cands = vec![Candidate {
        pair_id: "nope".into(),
        sample_index: 0,
        source: "print(1)\n".into(),
        generator_id: "x".into(),
    }];
    let out = judge().judge_batch(&cands, &BTreeMap::new(), &problems);
    assert!(matches!(out[0].result, Err(minrepair::judge::BatchError::UnknownPair(_))));
}

#[test]
fn verdict_files_round_trip() {
    let problems = common::problems();
    let pair = &common::mini_pairs()[0];
    let cand = Candidate {
        pair_id: pair.pair_id.clone(),
        sample_index: 0,
        source: pair.correct_source.clone(),
        generator_id: "g".into(),
    };
    let r = judge().judge(&cand.source, problems.require(&pair.problem_id).unwrap()).unwrap();
    let rec = minrepair::judge::VerdictRecord::new(&cand, &r);
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("v.jsonl");
    minrepair::judge::write_verdicts(&path, std::slice::from_ref(&rec)).unwrap();
    assert_eq!(minrepair::judge::read_verdicts(&path).unwrap(), vec![rec]);
}
