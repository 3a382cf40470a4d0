use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{Candidate, GeneratorConfig};
use crate::corpus::CodePair;

const ALPHABET: &[char] = &[
    'a', 'b', 'e', 'i', 'n', 'p', 'r', 't', 'x', 'y', '0', '1', '2', '3', ' ', '\n', '+', '-',
    '*', '/', '=', '(', ')', '[', ']', ':', ',', '.', '\'', '"', '<', '>', '_',
];

/// Per-pair stream so results do not depend on pair order or pool width.
fn pair_rng(seed: u64, pair_id: &str) -> ChaCha8Rng {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(pair_id.as_bytes())
        .finalize();
    ChaCha8Rng::from_seed(digest.into())
}

/// `n_samples` perturbations of the correct program, each with 0..=3
/// random single-character insertions, deletions or substitutions.
/// Sample 0 is the correct program itself.
pub fn gen_mutate(pair: &CodePair, config: &GeneratorConfig, seed: u64) -> Vec<Candidate> {
    let mut rng = pair_rng(seed, &pair.pair_id);
    let base: Vec<char> = pair.correct_source.chars().collect();
    (0..config.n_samples)
        .map(|sample_index| {
            let source = if sample_index == 0 {
                pair.correct_source.clone()
            } else {
                let mut chars = base.clone();
                for _ in 0..rng.gen_range(0..=3) {
                    let op = if chars.is_empty() { 0 } else { rng.gen_range(0..3) };
                    let c = ALPHABET[rng.gen_range(0..ALPHABET.len())];
                    match op {
                        0 => {
                            let at = rng.gen_range(0..=chars.len());
                            chars.insert(at, c);
                        }
                        1 => {
                            let at = rng.gen_range(0..chars.len());
                            chars.remove(at);
                        }
                        _ => {
                            let at = rng.gen_range(0..chars.len());
                            chars[at] = c;
                        }
                    }
                }
                chars.into_iter().collect()
            };
            Candidate {
                pair_id: pair.pair_id.clone(),
                sample_index,
                source,
                generator_id: "mutate".into(),
            }
        })
        .collect()
}
