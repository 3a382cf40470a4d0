use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn minrepair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minrepair"))
        .args(args)
        .env("MINREPAIR_PROBLEMS_DIR", fixtures().join("problems"))
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = minrepair(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_everywhere_and_usage_errors() {
    let commands: &[&[&str]] = &[
        &[],
        &["corpus"],
        &["corpus", "pair"],
        &["corpus", "filter"],
        &["corpus", "dedupe"],
        &["corpus", "split"],
        &["corpus", "stats"],
        &["tokenizer"],
        &["tokenizer", "train"],
        &["tokenizer", "encode"],
        &["generate"],
        &["judge"],
        &["judge", "run"],
        &["evaluate"],
        &["suggest"],
        &["report"],
        &["report", "render"],
    ];
    for cmd in commands {
        let mut args = cmd.to_vec();
        args.push("--help");
        let out = minrepair(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(!out.stdout.is_empty());
    }
    let out = minrepair(&["corpus", "stats", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(minrepair(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn stats_on_empty_pairs_file() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = ok(&["corpus", "stats", "--pairs", s(&empty)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["count"], 0);
    assert!(v["mean_ed"].is_null());
}

#[test]
fn missing_input_is_a_domain_error() {
    let out = minrepair(&["corpus", "stats", "--pairs", "/nonexistent/pairs.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_reproduces_the_golden_report() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let subs = fixtures().join("submissions_30.jsonl");
    ok(&["corpus", "pair", "--submissions", s(&subs), "--out", s(&t.join("pairs.jsonl"))]);
    ok(&["corpus", "filter", "--pairs", s(&t.join("pairs.jsonl")), "--out", s(&t.join("filtered.jsonl"))]);
    ok(&["corpus", "dedupe", "--pairs", s(&t.join("filtered.jsonl")), "--out", s(&t.join("deduped.jsonl"))]);
    let out = ok(&[
        "corpus", "split", "--pairs", s(&t.join("deduped.jsonl")), "--seed", "7",
        "--train-ratio", "0.4", "--valid-ratio", "0.2", "--test-ratio", "0.4",
        "--out-dir", s(&t.join("split")),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed: 7"));
    ok(&[
        "tokenizer", "train", "--pairs", s(&t.join("split/train.jsonl")), "--vocab-size", "320",
        "--out", s(&t.join("tok.json")),
    ]);
    assert_eq!(
        std::fs::read_to_string(t.join("tok.json")).unwrap(),
        std::fs::read_to_string(fixtures().join("golden/tokenizer.json")).unwrap()
    );
    let out = ok(&[
        "--jobs", "2", "evaluate", "--generator", "mutate", "--seed", "7", "--n-samples", "5",
        "--pairs", s(&t.join("split/test.jsonl")), "--tokenizer", s(&t.join("tok.json")),
        "--out", s(&t.join("report.json")), "--save-candidates", s(&t.join("cands.jsonl")),
        "--save-verdicts", s(&t.join("verdicts.jsonl")), "--scatter-csv", s(&t.join("scatter.csv")),
        "--grouped-csv", s(&t.join("grouped.csv")),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("Pass@1"));
    assert_eq!(
        std::fs::read_to_string(t.join("report.json")).unwrap(),
        std::fs::read_to_string(fixtures().join("golden/report.json")).unwrap()
    );
    assert_eq!(std::fs::read_to_string(t.join("scatter.csv")).unwrap().lines().count(), 26);
    assert!(std::fs::read_to_string(t.join("grouped.csv")).unwrap().starts_with("ed_lo,ed_hi,mean_pass_at_100,n_pairs\n"));

    // every artifact-producing step left a manifest
    for f in ["pairs.jsonl", "filtered.jsonl", "deduped.jsonl", "split/split.json", "tok.json", "report.json"] {
        let m = json(&t.join(format!("{f}.manifest.json")));
        assert_eq!(m["tool"], "minrepair");
        assert!(!m["inputs"].as_object().unwrap().is_empty(), "{f}");
    }
    assert_eq!(json(&t.join("report.json.manifest.json"))["seeds"]["generator"], 7);

    // re-running with cached candidates and verdicts gives the same report
    let out = ok(&[
        "evaluate", "--generator", &format!("replay:{}", s(&t.join("cands.jsonl"))), "--model-id", "mutate",
        "--n-samples", "5", "--verdicts", s(&t.join("verdicts.jsonl")),
        "--pairs", s(&t.join("split/test.jsonl")), "--tokenizer", s(&t.join("tok.json")),
        "--out", s(&t.join("replayed.json")),
    ]);
    assert!(out.status.success());
    let mut a = json(&t.join("report.json"));
    let mut b = json(&t.join("replayed.json"));
    for r in [&mut a, &mut b] {
        r.as_object_mut().unwrap().remove("generator");
        r.as_object_mut().unwrap().remove("seed");
    }
    assert_eq!(a, b);

    let out = ok(&["report", "render", s(&t.join("report.json")), s(&t.join("replayed.json"))]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 4);
}

#[test]
fn manifests_are_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let subs = fixtures().join("submissions_30.jsonl");
    let mut seen = Vec::new();
    for _ in 0..2 {
        let out = tmp.path().join("pairs.jsonl");
        ok(&["corpus", "pair", "--submissions", s(&subs), "--out", s(&out)]);
        let mut m = json(&tmp.path().join("pairs.jsonl.manifest.json"));
        let obj = m.as_object_mut().unwrap();
        obj.remove("started_at");
        obj.remove("finished_at");
        seen.push(m);
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn generate_then_judge() {
    let tmp = tempfile::tempdir().unwrap();
    let pairs = fixtures().join("mini_pairs.jsonl");
    let cands = tmp.path().join("c.jsonl");
    ok(&["generate", "--generator", "retrieval", "--train", s(&pairs), "--pairs", s(&pairs), "--out", s(&cands)]);
    assert_eq!(std::fs::read_to_string(&cands).unwrap().lines().count(), 12);
    let verdicts = tmp.path().join("v.jsonl");
    ok(&["judge", "run", "--candidates", s(&cands), "--pairs", s(&pairs), "--out", s(&verdicts)]);
    let text = std::fs::read_to_string(&verdicts).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().all(|l| l.contains("\"verdict\":\"AC\"")));

    let out = minrepair(&["generate", "--generator", "retrieval", "--pairs", s(&pairs), "--out", s(&cands)]);
    assert_eq!(out.status.code(), Some(1), "retrieval without --train");
    let out = minrepair(&["generate", "--generator", "nonsense", "--pairs", s(&pairs), "--out", s(&cands)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn suggest_reports_failure_and_uses_explicit_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    let wrong = tmp.path().join("wrong.py");
    std::fs::write(&wrong, "x = int(input())\nprint(x * 3)\n").unwrap();
    let out = minrepair(&["suggest", "--wrong", s(&wrong), "--problem", "cube", "--generator", "copy"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NoCorrectCandidate"));

    let pairs = fixtures().join("mini_pairs.jsonl");
    let out = ok(&[
        "suggest", "--wrong", s(&wrong), "--problem", "cube", "--generator", "copy",
        "--fallback", "retrieval", "--train", s(&pairs),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["source"], "x = int(input())\nprint(x ** 3)\n");
    assert_eq!(v["edit_distance"], 1);
    assert_eq!(v["generator_id"], "retrieval");
    assert!(v["diff"].as_str().unwrap().contains("+print(x ** 3)"));

    let out = minrepair(&["suggest", "--wrong", s(&wrong), "--problem", "nope", "--generator", "copy"]);
    assert_eq!(out.status.code(), Some(1));
}
