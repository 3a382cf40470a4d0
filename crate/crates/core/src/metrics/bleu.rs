use std::collections::HashMap;
use std::hash::Hash;

const MAX_ORDER: usize = 4;

fn ngram_counts<T: Eq + Hash>(tokens: &[T], order: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(order) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sentence-level BLEU-4 against a single reference, scaled to `[0, 100]`.
///
/// Uniform weights over orders 1..=4 with add-one smoothing on the
/// numerator and denominator of every order above unigrams. The brevity
/// penalty is `exp(1 - |ref| / |cand|)` for candidates shorter than the
/// reference. An empty candidate scores 0.
pub fn bleu4_smoothed<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }

    let mut log_sum = 0.0;
    for order in 1..=MAX_ORDER {
        let cand = ngram_counts(candidate, order);
        let refc = ngram_counts(reference, order);
        let total: usize = cand.values().sum();
        let clipped: usize = cand
            .iter()
            .map(|(gram, &n)| n.min(refc.get(gram).copied().unwrap_or(0)))
            .sum();
        let (num, den) = if order == 1 {
            (clipped as f64, total as f64)
        } else {
            (clipped as f64 + 1.0, total as f64 + 1.0)
        };
        if num == 0.0 {
            return 0.0;
        }
        log_sum += (num / den).ln() / MAX_ORDER as f64;
    }

    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let brevity = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    100.0 * brevity * log_sum.exp()
}
