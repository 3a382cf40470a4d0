mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use minrepair::generate::{build_retrieval_index, gen_retrieval, Candidate};
use minrepair::judge::{Judge, Sandbox};
use minrepair::metrics::{ed_family, SampleOutcome};
use minrepair::suggest::{render_diff, select_minimal, SuggestError};
use minrepair::{JudgeResult, Verdict, Workers};

fn result(v: Verdict) -> JudgeResult {
    JudgeResult {
        verdict: v,
        first_failed_test: (v != Verdict::AC && v != Verdict::CE).then_some(1),
        per_test: Vec::new(),
    }
}

fn verdict() -> impl Strategy<Value = Verdict> {
    prop::sample::select(Verdict::ALL.to_vec())
}

fn source() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "\n", "x = 1\n", "print(x)\n", "é"]), 0..8)
        .prop_map(|parts| parts.concat())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn selection_matches_exhaustive_scan(
        wrong in source(),
        items in prop::collection::vec((source(), verdict(), 0u32..6, prop::sample::select(vec!["g1", "g2"])), 1..12),
    ) {
        let judged: Vec<(Candidate, JudgeResult)> = items
            .iter()
            .map(|(src, v, idx, g)| (
                Candidate { pair_id: "p".into(), sample_index: *idx, source: src.clone(), generator_id: g.to_string() },
                result(*v),
            ))
            .collect();

        // oracle: scan every accepted candidate, keep the smallest key
        let mut best: Option<(usize, u32, String, &Candidate)> = None;
        for (c, r) in &judged {
            if r.verdict != Verdict::AC {
                continue;
            }
            let key = (common::full_table_ed(&wrong, &c.source), c.sample_index, c.generator_id.clone(), c);
            if best.as_ref().is_none_or(|b| (key.0, key.1, &key.2) < (b.0, b.1, &b.2)) {
                best = Some(key);
            }
        }

        match (select_minimal(&wrong, &judged), best) {
            (Ok(s), Some((ed, idx, g, c))) => {
                prop_assert_eq!(s.edit_distance, ed);
                prop_assert_eq!((s.selected.sample_index, s.selected.generator_id.clone()), (idx, g));
                prop_assert_eq!(&s.selected.source, &c.source);
                prop_assert_eq!(s.n_correct, judged.iter().filter(|(_, r)| r.verdict == Verdict::AC).count());
                prop_assert_eq!(common::apply_unified_diff(&wrong, &s.unified_diff), s.selected.source.clone());

                // the suggestion's distance is the pair's top-1 distance
                let outcomes: Vec<SampleOutcome> = judged
                    .iter()
                    .enumerate()
                    .map(|(i, (c, r))| SampleOutcome::new("p", i as u32, r.verdict, common::full_table_ed(&wrong, &c.source), 0.0, false))
                    .collect();
                prop_assert_eq!(ed_family(&outcomes).ed_top1.unwrap().mean, s.edit_distance as f64);
            }
            (Err(SuggestError::NoCorrectCandidate { n_candidates, compilable }), None) => {
                prop_assert_eq!(n_candidates, judged.len());
                let want = judged.iter().filter(|(_, r)| r.verdict != Verdict::CE).count();
                prop_assert_eq!(compilable.len(), want);
                prop_assert!(compilable.windows(2).all(|w| w[0].1 <= w[1].1));
            }
            (got, want) => prop_assert!(false, "select_minimal {:?} vs oracle {:?}", got, want.map(|b| b.0)),
        }
    }

    #[test]
    fn diff_applies_back(a in source(), b in source()) {
        let d = render_diff(&a, &b);
        prop_assert_eq!(d.is_empty(), a == b);
        prop_assert_eq!(common::apply_unified_diff(&a, &d), b);
    }
}

#[test]
fn judged_retrieval_suggestions_are_accepted_and_minimal() {
    let problems = common::problems();
    let pairs = common::mini_pairs();
    let index = build_retrieval_index(&pairs);
    let judge = Judge::new(Sandbox::default()).with_workers(Workers::sequential());
    let pair_problems: BTreeMap<String, String> =
        pairs.iter().map(|p| (p.pair_id.clone(), p.problem_id.clone())).collect();
    for pair in &pairs {
        // offer the retrieved program plus the wrong program itself
        let mut cands = gen_retrieval(pair, &index).unwrap();
        cands.push(Candidate {
            pair_id: pair.pair_id.clone(),
            sample_index: 1,
            source: pair.wrong_source.clone(),
            generator_id: "copy".into(),
        });
        let judged: Vec<(Candidate, JudgeResult)> = judge
            .judge_batch(&cands, &pair_problems, &problems)
            .into_iter()
            .map(|j| (j.candidate, j.result.unwrap()))
            .collect();
        let s = select_minimal(&pair.wrong_source, &judged).unwrap();
        assert_eq!(s.selected.source, pair.correct_source);
        assert_eq!(s.edit_distance, pair.original_ed);
        assert_eq!(s.n_correct, 1);
        assert_eq!(common::apply_unified_diff(&pair.wrong_source, &s.unified_diff), pair.correct_source);
        let json = s.to_json();
        assert_eq!(json.diff, s.unified_diff);
        assert_eq!(json.generator_id, "retrieval");
    }
}
