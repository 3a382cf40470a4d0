//! Minimal-edit program repair harness.
//!
//! The pipeline mines `(wrong, correct)` program pairs from online-judge
//! submission logs ([`corpus`]), generates repair candidates ([`generate`]),
//! validates them in a sandboxed judge ([`judge`]) and suggests the accepted
//! candidate closest to the user's wrong program ([`suggest`]). The
//! [`evalreport`] module aggregates everything into a results table with
//! pass@k, compilable@k, BLEU, exact match and edit-distance columns.

pub mod corpus;
pub mod evalreport;
pub mod generate;
pub mod jsonl;
pub mod judge;
pub mod manifest;
pub mod metrics;
pub mod suggest;
pub mod tokenize;
pub mod verdict;
pub mod workers;

pub use corpus::{CodePair, CorpusSplit, SubmissionRecord};
pub use generate::{Candidate, GeneratorConfig};
pub use judge::{JudgeResult, ProblemSpec, TestCase};
pub use tokenize::{TokenizerModel, Tokenizer};
pub use verdict::Verdict;
pub use workers::Workers;
