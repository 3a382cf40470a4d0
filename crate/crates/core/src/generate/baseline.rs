use std::collections::BTreeMap;

use super::{Candidate, GenerateError};
use crate::corpus::CodePair;
use crate::metrics::edit_distance;

pub fn gen_copy(pair: &CodePair) -> Vec<Candidate> {
    vec![Candidate {
        pair_id: pair.pair_id.clone(),
        sample_index: 0,
        source: pair.wrong_source.clone(),
        generator_id: "copy".into(),
    }]
}

/// Distinct correct programs per problem, in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RetrievalIndex {
    by_problem: BTreeMap<String, Vec<String>>,
}

impl RetrievalIndex {
    pub fn get(&self, problem_id: &str) -> Option<&[String]> {
        self.by_problem.get(problem_id).map(Vec::as_slice)
    }

    pub fn problems(&self) -> impl Iterator<Item = &str> {
        self.by_problem.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_problem.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_problem.is_empty()
    }
}

/// Build from the training split only.
pub fn build_retrieval_index(train: &[CodePair]) -> RetrievalIndex {
    let mut by_problem: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for pair in train {
        let list = by_problem.entry(pair.problem_id.clone()).or_default();
        if !list.contains(&pair.correct_source) {
            list.push(pair.correct_source.clone());
        }
    }
    RetrievalIndex { by_problem }
}

/// Linear scan for the indexed program closest to the wrong program;
/// the earliest one wins ties.
pub fn gen_retrieval(pair: &CodePair, index: &RetrievalIndex) -> Result<Vec<Candidate>, GenerateError> {
    let programs = index
        .get(&pair.problem_id)
        .filter(|p| !p.is_empty())
        .ok_or_else(|| GenerateError::NotIndexed(pair.problem_id.clone()))?;
    let mut best = (usize::MAX, 0);
    for (i, program) in programs.iter().enumerate() {
        let d = edit_distance(&pair.wrong_source, program);
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(vec![Candidate {
        pair_id: pair.pair_id.clone(),
        sample_index: 0,
        source: programs[best.1].clone(),
        generator_id: "retrieval".into(),
    }])
}
