//! Byte-level BPE used for token-length filtering and token-level BLEU.
//!
//! Training starts from the 256 single-byte tokens and greedily merges the
//! most frequent adjacent pair. Ties go to the lexicographically smallest
//! `(left bytes, right bytes)`. Encoding replays the merges in training
//! order, so `decode(encode(x)) == x` for every byte string.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const BYTE_VOCAB: usize = 256;
pub const DEFAULT_VOCAB_SIZE: usize = 8192;

#[derive(Debug, thiserror::Error)]
pub enum TokenizerError {
    #[error("cannot train a tokenizer on an empty corpus")]
    EmptyCorpus,
    #[error("vocab_size {0} is below the byte alphabet size 256")]
    VocabTooSmall(usize),
    #[error("token index {index} out of range for vocabulary of {size}")]
    IndexOutOfRange { index: u32, size: usize },
    #[error("invalid tokenizer model: {0}")]
    InvalidModel(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Anything that can turn program text into token ids.
pub trait Tokenizer {
    fn encode_bytes(&self, bytes: &[u8]) -> TokenSeq;

    fn encode(&self, text: &str) -> TokenSeq {
        self.encode_bytes(text.as_bytes())
    }

    fn count_tokens(&self, text: &str) -> usize {
        self.encode(text).len()
    }
}

/// Token ids produced by a [`TokenizerModel`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(pub Vec<u32>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Merge {
    pub left: u32,
    pub right: u32,
    pub merged: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizerModel {
    vocab: Vec<Vec<u8>>,
    merges: Vec<Merge>,
    ranks: HashMap<(u32, u32), (usize, u32)>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    vocab: Vec<String>,
    merges: Vec<[u32; 3]>,
}

impl TokenizerModel {
    /// The 256-token model with no merges.
    pub fn byte_level() -> Self {
        Self::from_parts((0..=255u8).map(|b| vec![b]).collect(), Vec::new())
    }

    fn from_parts(vocab: Vec<Vec<u8>>, merges: Vec<Merge>) -> Self {
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(rank, m)| ((m.left, m.right), (rank, m.merged)))
            .collect();
        Self {
            vocab,
            merges,
            ranks,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[Vec<u8>] {
        &self.vocab
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn decode_bytes(&self, seq: &TokenSeq) -> Result<Vec<u8>, TokenizerError> {
        let mut out = Vec::new();
        for &id in seq.as_slice() {
            let token = self
                .vocab
                .get(id as usize)
                .ok_or(TokenizerError::IndexOutOfRange {
                    index: id,
                    size: self.vocab.len(),
                })?;
            out.extend_from_slice(token);
        }
        Ok(out)
    }

    /// Decode to text, replacing invalid UTF-8 sequences.
    pub fn decode(&self, seq: &TokenSeq) -> Result<String, TokenizerError> {
        Ok(String::from_utf8_lossy(&self.decode_bytes(seq)?).into_owned())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            vocab: self.vocab.iter().map(|t| BASE64.encode(t)).collect(),
            merges: self
                .merges
                .iter()
                .map(|m| [m.left, m.right, m.merged])
                .collect(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, TokenizerError> {
        let file: ModelFile =
            serde_json::from_str(json).map_err(|e| TokenizerError::InvalidModel(e.to_string()))?;
        let vocab = file
            .vocab
            .iter()
            .map(|t| BASE64.decode(t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| TokenizerError::InvalidModel(e.to_string()))?;
        if vocab.len() < BYTE_VOCAB || (0..BYTE_VOCAB).any(|b| vocab[b] != [b as u8]) {
            return Err(TokenizerError::InvalidModel(
                "the first 256 tokens must be the single bytes 0..=255".into(),
            ));
        }
        let mut merges = Vec::with_capacity(file.merges.len());
        for [left, right, merged] in file.merges {
            let get = |i: u32| vocab.get(i as usize);
            match (get(left), get(right), get(merged)) {
                (Some(l), Some(r), Some(m)) if m.len() == l.len() + r.len() && m.starts_with(l) && m.ends_with(r) => {}
                _ => {
                    return Err(TokenizerError::InvalidModel(format!(
                        "merge [{left}, {right}, {merged}] does not produce its output token"
                    )))
                }
            }
            merges.push(Merge {
                left,
                right,
                merged,
            });
        }
        Ok(Self::from_parts(vocab, merges))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        let path = path.as_ref();
        let json = fs::read_to_string(path).map_err(|source| TokenizerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&json)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TokenizerError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| TokenizerError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Short content hash identifying the model in reports.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        hex::encode(&digest[..8])
    }
}

impl Tokenizer for TokenizerModel {
    fn encode_bytes(&self, bytes: &[u8]) -> TokenSeq {
        let mut ids: Vec<u32> = bytes.iter().map(|&b| u32::from(b)).collect();
        if self.merges.is_empty() {
            return TokenSeq(ids);
        }
        loop {
            let best = ids
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0], w[1])).map(|&(rank, merged)| (rank, w[0], w[1], merged)))
                .min_by_key(|&(rank, ..)| rank);
            let Some((_, left, right, merged)) = best else {
                break;
            };
            ids = merge_pair(&ids, left, right, merged);
        }
        TokenSeq(ids)
    }
}

fn merge_pair(ids: &[u32], left: u32, right: u32, merged: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(ids.len());
    let mut i = 0;
    while i < ids.len() {
        if i + 1 < ids.len() && ids[i] == left && ids[i + 1] == right {
            out.push(merged);
            i += 2;
        } else {
            out.push(ids[i]);
            i += 1;
        }
    }
    out
}

/// Heap entry: highest count first, then smallest `(left, right)` bytes.
#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    key: Reverse<(Vec<u8>, Vec<u8>)>,
    pair: (u32, u32),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| self.key.cmp(&other.key))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy byte-level BPE training.
///
/// Stops once `vocab_size` tokens exist or no adjacent pair occurs at
/// least twice. Deterministic for a fixed corpus order.
pub fn train_bpe<S: AsRef<[u8]>>(
    texts: &[S],
    vocab_size: usize,
) -> Result<TokenizerModel, TokenizerError> {
    if vocab_size < BYTE_VOCAB {
        return Err(TokenizerError::VocabTooSmall(vocab_size));
    }
    if texts.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }

    // identical texts collapse to one weighted sequence
    let mut index: HashMap<&[u8], usize> = HashMap::new();
    let mut seqs: Vec<(Vec<u32>, u64)> = Vec::new();
    for text in texts {
        let bytes = text.as_ref();
        match index.get(bytes) {
            Some(&i) => seqs[i].1 += 1,
            None => {
                index.insert(bytes, seqs.len());
                seqs.push((bytes.iter().map(|&b| u32::from(b)).collect(), 1));
            }
        }
    }

    let mut vocab: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let mut merges = Vec::new();
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut holders: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (i, (seq, freq)) in seqs.iter().enumerate() {
        for w in seq.windows(2) {
            *counts.entry((w[0], w[1])).or_insert(0) += freq;
            holders.entry((w[0], w[1])).or_default().insert(i);
        }
    }

    let entry = |vocab: &[Vec<u8>], pair: (u32, u32), count: u64| Candidate {
        count,
        key: Reverse((vocab[pair.0 as usize].clone(), vocab[pair.1 as usize].clone())),
        pair,
    };
    let mut heap: BinaryHeap<Candidate> = counts
        .iter()
        .map(|(&pair, &count)| entry(&vocab, pair, count))
        .collect();

    while vocab.len() < vocab_size {
        let Some(top) = heap.pop() else { break };
        let current = counts.get(&top.pair).copied().unwrap_or(0);
        if current != top.count {
            continue; // stale
        }
        if current < 2 {
            break;
        }

        let (left, right) = top.pair;
        let merged = vocab.len() as u32;
        let mut bytes = vocab[left as usize].clone();
        bytes.extend_from_slice(&vocab[right as usize]);
        vocab.push(bytes);
        merges.push(Merge {
            left,
            right,
            merged,
        });

        let mut touched: HashSet<(u32, u32)> = HashSet::new();
        let mut affected: Vec<usize> = holders.remove(&top.pair).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        for i in affected {
            let (seq, freq) = &mut seqs[i];
            if !seq.windows(2).any(|w| (w[0], w[1]) == top.pair) {
                continue;
            }
            for w in seq.windows(2) {
                let p = (w[0], w[1]);
                if let Some(c) = counts.get_mut(&p) {
                    *c -= *freq;
                }
                touched.insert(p);
            }
            *seq = merge_pair(seq, left, right, merged);
            for w in seq.windows(2) {
                let p = (w[0], w[1]);
                *counts.entry(p).or_insert(0) += *freq;
                holders.entry(p).or_default().insert(i);
                touched.insert(p);
            }
        }
        counts.remove(&top.pair);
        let mut touched: Vec<(u32, u32)> = touched.into_iter().collect();
        touched.sort_unstable();
        for p in touched {
            match counts.get(&p).copied() {
                Some(0) => {
                    counts.remove(&p);
                }
                Some(c) if p != top.pair => heap.push(entry(&vocab, p, c)),
                _ => {}
            }
        }
    }

    Ok(TokenizerModel::from_parts(vocab, merges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_corpus() -> Vec<&'static str> {
        vec![
            "print(input())\n",
            "a, b = map(int, input().split())\nprint(a + b)\n",
            "x = int(input())\nprint(x ** 3)\n",
            "for i in range(1000):\n    print('Hello World')\n",
            "a, b = map(int, input().split())\nprint(a * b, 2 * (a + b))\n",
        ]
    }

    #[test]
    fn first_merge_on_repeated_byte() {
        let m = train_bpe(&["aaaa"], 258).unwrap();
        assert_eq!(m.merges()[0], Merge { left: 97, right: 97, merged: 256 });
        assert_eq!(m.vocab()[256], b"aa");
    }

    #[test]
    fn byte_level_when_no_room() {
        let m = train_bpe(&sample_corpus(), 256).unwrap();
        assert!(m.merges().is_empty());
        assert_eq!(m.encode("ab").len(), 2);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        // "ab" and "cd" both occur twice; "ab" < "cd"
        let m = train_bpe(&["cdab", "abcd"], 257).unwrap();
        assert_eq!(m.vocab()[256], b"ab");
    }

    #[test]
    fn stops_when_nothing_repeats() {
        let m = train_bpe(&["abcdef"], 1000).unwrap();
        assert!(m.merges().is_empty());
    }

    #[test]
    fn deterministic_training() {
        let a = train_bpe(&sample_corpus(), 400).unwrap();
        let b = train_bpe(&sample_corpus(), 400).unwrap();
        assert_eq!(a.merges(), b.merges());
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn errors() {
        assert!(matches!(train_bpe::<&str>(&[], 300), Err(TokenizerError::EmptyCorpus)));
        assert!(matches!(train_bpe(&["x"], 255), Err(TokenizerError::VocabTooSmall(255))));
        let m = TokenizerModel::byte_level();
        assert!(matches!(
            m.decode(&TokenSeq(vec![256])),
            Err(TokenizerError::IndexOutOfRange { index: 256, .. })
        ));
    }

    #[test]
    fn encode_decode_basics() {
        let m = train_bpe(&sample_corpus(), 320).unwrap();
        assert!(m.encode("").is_empty());
        assert_eq!(m.decode(&TokenSeq(vec![])).unwrap(), "");
        assert_eq!(m.decode(&m.encode("print(1)")).unwrap(), "print(1)");
        assert!(m.encode("print(input())\n").len() < "print(input())\n".len());
    }

    #[test]
    fn training_counts_match_brute_force_on_first_merge() {
        // oracle: recount every adjacent pair from scratch
        let corpus = sample_corpus();
        let mut counts: HashMap<(u8, u8), u64> = HashMap::new();
        for t in &corpus {
            for w in t.as_bytes().windows(2) {
                *counts.entry((w[0], w[1])).or_default() += 1;
            }
        }
        let best = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .unwrap();
        let m = train_bpe(&corpus, 257).unwrap();
        assert_eq!(m.vocab()[256], vec![best.0 .0, best.0 .1]);
    }

    #[test]
    fn model_file_round_trip() {
        let m = train_bpe(&sample_corpus(), 300).unwrap();
        let back = TokenizerModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(TokenizerModel::from_json(r#"{"vocab":[],"merges":[]}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn round_trip_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            thread_local! {
                static MODEL: TokenizerModel = train_bpe(&sample_corpus(), 360).unwrap();
            }
            MODEL.with(|m| {
                let seq = m.encode_bytes(&bytes);
                assert!(seq.as_slice().iter().all(|&t| (t as usize) < m.vocab_size()));
                assert_eq!(m.decode_bytes(&seq).unwrap(), bytes.clone());
                assert!(seq.len() <= TokenizerModel::byte_level().encode_bytes(&bytes).len());
            });
        }
    }
}
