//! Scalar repair metrics: the pass@k / compilable@k estimator, character
//! edit distance, smoothed BLEU-4, exact match, and the edit-distance
//! aggregates reported per model.

mod aggregate;
mod bleu;
mod edit;
mod estimator;

pub use aggregate::{ed_family, mean_std, EdFamily, MeanStd, SampleOutcome};
pub use bleu::bleu4_smoothed;
pub use edit::edit_distance;
pub use estimator::{compilable_at_k, pass_at_k, EstimatorError};

/// Byte equality, no normalization of whitespace or line endings.
pub fn exact_match(candidate: &str, target: &str) -> bool {
    candidate.as_bytes() == target.as_bytes()
}
