//! Pick the accepted candidate closest to the user's wrong program.

use serde::{Deserialize, Serialize};
use similar::TextDiff;

use crate::generate::Candidate;
use crate::judge::JudgeResult;
use crate::metrics::edit_distance;
use crate::verdict::Verdict;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suggestion {
    pub pair_id: String,
    pub selected: Candidate,
    pub edit_distance: usize,
    pub unified_diff: String,
    pub n_candidates: usize,
    pub n_correct: usize,
}

/// Wire shape of a suggestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionJson {
    pub pair_id: String,
    pub source: String,
    pub edit_distance: usize,
    pub diff: String,
    pub n_candidates: usize,
    pub n_correct: usize,
    pub generator_id: String,
    pub sample_index: u32,
}

impl Suggestion {
    pub fn to_json(&self) -> SuggestionJson {
        SuggestionJson {
            pair_id: self.pair_id.clone(),
            source: self.selected.source.clone(),
            edit_distance: self.edit_distance,
            diff: self.unified_diff.clone(),
            n_candidates: self.n_candidates,
            n_correct: self.n_correct,
            generator_id: self.selected.generator_id.clone(),
            sample_index: self.selected.sample_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SuggestError {
    #[error("no judged candidates")]
    Empty,
    /// Nothing was accepted. `compilable` lists the candidates that at
    /// least passed the syntax gate, closest first, for diagnostics only.
    #[error("no correct candidate among {n_candidates} (compilable: {})", compilable.len())]
    NoCorrectCandidate {
        n_candidates: usize,
        compilable: Vec<(Candidate, usize)>,
    },
}

/// Among accepted candidates, the one with the smallest edit distance to
/// `wrong_source`; ties go to the lower `(sample_index, generator_id)`.
pub fn select_minimal(
    wrong_source: &str,
    judged: &[(Candidate, JudgeResult)],
) -> Result<Suggestion, SuggestError> {
    let first = judged.first().ok_or(SuggestError::Empty)?;
    let scored = |v: fn(Verdict) -> bool| {
        let mut out: Vec<(&Candidate, usize)> = judged
            .iter()
            .filter(|(_, r)| v(r.verdict))
            .map(|(c, _)| (c, edit_distance(wrong_source, &c.source)))
            .collect();
        out.sort_by(|(a, da), (b, db)| {
            (da, a.sample_index, &a.generator_id).cmp(&(db, b.sample_index, &b.generator_id))
        });
        out
    };

    let accepted = scored(Verdict::is_accepted);
    let Some(&(best, distance)) = accepted.first() else {
        return Err(SuggestError::NoCorrectCandidate {
            n_candidates: judged.len(),
            compilable: scored(Verdict::is_compilable)
                .into_iter()
                .map(|(c, d)| (c.clone(), d))
                .collect(),
        });
    };
    Ok(Suggestion {
        pair_id: first.0.pair_id.clone(),
        selected: best.clone(),
        edit_distance: distance,
        unified_diff: render_diff(wrong_source, &best.source),
        n_candidates: judged.len(),
        n_correct: accepted.len(),
    })
}

/// Unified diff from `a` to `b` with three lines of context, after
/// converting CRLF to LF. Empty exactly when the normalized texts match.
pub fn render_diff(a: &str, b: &str) -> String {
    let a = a.replace("\r\n", "\n");
    let b = b.replace("\r\n", "\n");
    if a == b {
        return String::new();
    }
    TextDiff::from_lines(&a, &b)
        .unified_diff()
        .context_radius(3)
        .header("wrong", "suggested")
        .to_string()
}
