use serde::{Deserialize, Serialize};

use crate::verdict::Verdict;

/// Per-sample quantities behind the report columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub pair_id: String,
    pub sample_index: u32,
    pub correct: bool,
    pub compilable: bool,
    pub ed_to_source: usize,
    pub bleu_vs_target: f64,
    pub exact_match_vs_target: bool,
}

impl SampleOutcome {
    pub fn new(
        pair_id: impl Into<String>,
        sample_index: u32,
        verdict: Verdict,
        ed_to_source: usize,
        bleu_vs_target: f64,
        exact_match_vs_target: bool,
    ) -> Self {
        Self {
            pair_id: pair_id.into(),
            sample_index,
            correct: verdict.is_accepted(),
            compilable: verdict.is_compilable(),
            ed_to_source,
            bleu_vs_target,
            exact_match_vs_target,
        }
    }
}

/// Mean with population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// `None` for an empty input; the caller reports it as undefined.
pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(MeanStd {
        mean,
        std: var.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdFamily {
    /// Every sample of every pair.
    pub ed_all: Option<MeanStd>,
    /// Only accepted samples.
    pub ed_correct: Option<MeanStd>,
    /// Per pair, the closest accepted sample; pairs without one are excluded.
    pub ed_top1: Option<MeanStd>,
}

/// Edit-distance aggregates over a set of outcomes.
///
/// Outcomes are reduced in `(pair_id, sample_index)` order so the floating
/// point result does not depend on the input order.
pub fn ed_family(outcomes: &[SampleOutcome]) -> EdFamily {
    let mut sorted: Vec<&SampleOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| {
        (a.pair_id.as_str(), a.sample_index).cmp(&(b.pair_id.as_str(), b.sample_index))
    });

    let all: Vec<f64> = sorted.iter().map(|o| o.ed_to_source as f64).collect();
    let correct: Vec<f64> = sorted
        .iter()
        .filter(|o| o.correct)
        .map(|o| o.ed_to_source as f64)
        .collect();

    let mut top1 = Vec::new();
    for group in sorted.chunk_by(|a, b| a.pair_id == b.pair_id) {
        if let Some(best) = group.iter().filter(|o| o.correct).map(|o| o.ed_to_source).min() {
            top1.push(best as f64);
        }
    }

    EdFamily {
        ed_all: mean_std(&all),
        ed_correct: mean_std(&correct),
        ed_top1: mean_std(&top1),
    }
}
