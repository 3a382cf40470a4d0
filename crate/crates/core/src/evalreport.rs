//! Generate → judge → score over a split, aggregated into a results table.
//!
//! pass@k and compilable@k use the unbiased estimator per pair and are
//! averaged over pairs, for every `k ∈ {1, 10, 100}` not exceeding the
//! number of samples per pair. BLEU and exact match are averaged over all
//! samples of all pairs. Edit distances follow [`metrics::ed_family`].
//! Every reduction runs in `(pair_id, sample_index)` order, so a report is
//! a pure function of its inputs.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::CodePair;
use crate::generate::{Candidate, GenerateError, Generator, GeneratorConfig, PairError};
use crate::judge::{Judge, JudgeLimits, ProblemSet, VerdictRecord};
use crate::metrics::{self, bleu4_smoothed, edit_distance, exact_match, EdFamily, MeanStd, SampleOutcome};
use crate::tokenize::{Tokenizer, TokenizerModel};
use crate::verdict::Verdict;

pub const REPORT_KS: [u32; 3] = [1, 10, 100];
pub const DEFAULT_BUCKET_WIDTH: usize = 10;
/// How BLEU and exact match are aggregated; recorded in every report.
pub const BLEU_EM_AGGREGATION: &str = "mean over all samples of all pairs";

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("problem `{problem_id}` required by pair `{pair_id}` is not loaded")]
    MissingProblem { pair_id: String, problem_id: String },
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error("pair `{pair_id}` has {got} samples, expected {expected}")]
    SampleCount {
        pair_id: String,
        got: usize,
        expected: usize,
    },
    #[error("evaluation aborted during {stage}: {message}")]
    Aborted {
        stage: &'static str,
        message: String,
        progress: PartialProgress,
    },
    #[error("bucket width must be positive")]
    BadBucketWidth,
}

/// What had finished when an evaluation aborted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialProgress {
    pub completed_pairs: Vec<String>,
    pub failed_pairs: Vec<PairError>,
    pub total_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    /// Half-open `[lo, hi)` range of original edit distance.
    pub ed_range: [usize; 2],
    /// Mean per-pair pass@min(100, n); `null` for an empty bucket.
    pub mean_pass_at_100: Option<f64>,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedPass {
    pub bucket_width: usize,
    pub buckets: Vec<Bucket>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub original_ed: usize,
    pub generated_ed: usize,
    pub pair_correct: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScatterData {
    pub points: Vec<ScatterPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub pair_id: String,
    pub problem_id: String,
    pub original_ed: usize,
    pub n_samples: usize,
    pub n_correct: usize,
    pub n_compilable: usize,
    /// pass@min(100, n) for this pair.
    pub pass_at_100: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub generator: String,
    pub seed: Option<u64>,
    pub pass_at: BTreeMap<u32, f64>,
    pub compilable_at: BTreeMap<u32, f64>,
    pub bleu: Option<f64>,
    pub exact_match_rate: Option<f64>,
    pub ed_all: Option<MeanStd>,
    pub ed_correct: Option<MeanStd>,
    pub ed_top1: Option<MeanStd>,
    pub n_pairs: usize,
    pub n_samples_per_pair: usize,
    pub config: GeneratorConfig,
    pub judge_limits: BTreeMap<String, JudgeLimits>,
    pub tokenizer: String,
    pub bleu_em_aggregation: String,
    pub grouped_pass: GroupedPass,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Ordering constraints every report must satisfy.
    pub fn check_invariants(&self) -> Result<(), String> {
        const EPS: f64 = 1e-12;
        let chain = |m: &BTreeMap<u32, f64>, name: &str| -> Result<(), String> {
            for (a, b) in m.iter().zip(m.iter().skip(1)) {
                if a.1 > &(b.1 + EPS) {
                    return Err(format!("{name}[{}] = {} > {name}[{}] = {}", a.0, a.1, b.0, b.1));
                }
            }
            Ok(())
        };
        chain(&self.pass_at, "pass_at")?;
        chain(&self.compilable_at, "compilable_at")?;
        for (k, p) in &self.pass_at {
            let c = self.compilable_at.get(k).ok_or(format!("compilable_at[{k}] missing"))?;
            if *p > c + EPS {
                return Err(format!("pass_at[{k}] = {p} > compilable_at[{k}] = {c}"));
            }
            if *k as usize > self.n_samples_per_pair {
                return Err(format!("k = {k} exceeds {} samples per pair", self.n_samples_per_pair));
            }
        }
        if let (Some((_, p)), Some((_, c))) = (self.pass_at.last_key_value(), self.compilable_at.last_key_value()) {
            if *p > c + EPS {
                return Err(format!("largest-k pass {p} exceeds largest-k compilable {c}"));
            }
        }
        let bucketed: usize = self.grouped_pass.buckets.iter().map(|b| b.n_pairs).sum();
        if bucketed != self.n_pairs {
            return Err(format!("buckets hold {bucketed} pairs, report has {}", self.n_pairs));
        }
        Ok(())
    }
}

/// Everything an evaluation produced, for writing side files.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub candidates: Vec<Candidate>,
    pub verdicts: Vec<VerdictRecord>,
    pub outcomes: Vec<SampleOutcome>,
    pub pairs: Vec<PairResult>,
}

impl Evaluation {
    pub fn scatter(&self) -> ScatterData {
        scatter(&self.pairs, &self.outcomes)
    }
}

#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub model_id: String,
    pub config: GeneratorConfig,
    pub bucket_width: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            model_id: "model".into(),
            config: GeneratorConfig::default(),
            bucket_width: DEFAULT_BUCKET_WIDTH,
        }
    }
}

/// Evaluate `generator` on `pairs`. `prior` verdicts, keyed by
/// `(pair_id, sample_index)`, are reused instead of re-judging.
pub fn evaluate(
    pairs: &[CodePair],
    generator: &Generator,
    problems: &ProblemSet,
    judge: &Judge,
    tokenizer: &TokenizerModel,
    settings: &EvalSettings,
    prior: Option<&[VerdictRecord]>,
) -> Result<Evaluation, EvalError> {
    if settings.bucket_width == 0 {
        return Err(EvalError::BadBucketWidth);
    }
    let mut judge_limits = BTreeMap::new();
    for p in pairs {
        let spec = problems.get(&p.problem_id).ok_or_else(|| EvalError::MissingProblem {
            pair_id: p.pair_id.clone(),
            problem_id: p.problem_id.clone(),
        })?;
        judge_limits.insert(spec.problem_id.clone(), spec.limits);
    }

    let mut pairs: Vec<CodePair> = pairs.to_vec();
    pairs.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    pairs.dedup_by(|a, b| a.pair_id == b.pair_id);

    let generated = generator.generate(&pairs, &settings.config, judge.workers())?;
    if !generated.errors.is_empty() {
        let failed: std::collections::HashSet<&str> =
            generated.errors.iter().map(|e| e.pair_id.as_str()).collect();
        return Err(EvalError::Aborted {
            stage: "generation",
            message: format!("{} pair(s) could not be generated", generated.errors.len()),
            progress: PartialProgress {
                completed_pairs: pairs
                    .iter()
                    .filter(|p| !failed.contains(p.pair_id.as_str()))
                    .map(|p| p.pair_id.clone())
                    .collect(),
                failed_pairs: generated.errors.clone(),
                total_pairs: pairs.len(),
            },
        });
    }

    let mut by_pair: BTreeMap<&str, Vec<&Candidate>> =
        pairs.iter().map(|p| (p.pair_id.as_str(), Vec::new())).collect();
    for c in &generated.candidates {
        if let Some(v) = by_pair.get_mut(c.pair_id.as_str()) {
            v.push(c);
        }
    }
    let n_samples = by_pair.values().map(Vec::len).next().unwrap_or(0);
    for (pair_id, cands) in &by_pair {
        if cands.is_empty() || cands.len() != n_samples {
            return Err(EvalError::SampleCount {
                pair_id: pair_id.to_string(),
                got: cands.len(),
                expected: n_samples.max(1),
            });
        }
    }
    let mut candidates: Vec<Candidate> = by_pair.values().flatten().map(|c| (*c).clone()).collect();
    candidates.sort_by(|a, b| (a.pair_id.as_str(), a.sample_index).cmp(&(b.pair_id.as_str(), b.sample_index)));

    // judging, reusing prior verdicts where present
    let known: HashMap<(&str, u32), &VerdictRecord> = prior
        .unwrap_or_default()
        .iter()
        .map(|r| ((r.pair_id.as_str(), r.sample_index), r))
        .collect();
    let to_judge: Vec<Candidate> = candidates
        .iter()
        .filter(|c| !known.contains_key(&(c.pair_id.as_str(), c.sample_index)))
        .cloned()
        .collect();
    let pair_problems: BTreeMap<String, String> = pairs
        .iter()
        .map(|p| (p.pair_id.clone(), p.problem_id.clone()))
        .collect();
    let judged = judge.judge_batch(&to_judge, &pair_problems, problems);
    let mut fresh: HashMap<(String, u32), VerdictRecord> = HashMap::new();
    let mut failures: Vec<PairError> = Vec::new();
    for j in judged {
        match j.result {
            Ok(r) => {
                fresh.insert(
                    (j.candidate.pair_id.clone(), j.candidate.sample_index),
                    VerdictRecord::new(&j.candidate, &r),
                );
            }
            Err(e) => failures.push(PairError {
                pair_id: j.candidate.pair_id.clone(),
                message: e.to_string(),
            }),
        }
    }
    if !failures.is_empty() {
        let failed: std::collections::HashSet<&str> = failures.iter().map(|e| e.pair_id.as_str()).collect();
        return Err(EvalError::Aborted {
            stage: "judging",
            message: format!("{} candidate(s) could not be judged", failures.len()),
            progress: PartialProgress {
                completed_pairs: pairs
                    .iter()
                    .filter(|p| !failed.contains(p.pair_id.as_str()))
                    .map(|p| p.pair_id.clone())
                    .collect(),
                failed_pairs: failures,
                total_pairs: pairs.len(),
            },
        });
    }
    let verdicts: Vec<VerdictRecord> = candidates
        .iter()
        .map(|c| {
            known
                .get(&(c.pair_id.as_str(), c.sample_index))
                .map(|r| (*r).clone())
                .unwrap_or_else(|| fresh[&(c.pair_id.clone(), c.sample_index)].clone())
        })
        .collect();

    // per-sample scoring
    let pair_of: HashMap<&str, &CodePair> = pairs.iter().map(|p| (p.pair_id.as_str(), p)).collect();
    let targets: HashMap<&str, Vec<u32>> = pairs
        .iter()
        .map(|p| (p.pair_id.as_str(), tokenizer.encode(&p.correct_source).0))
        .collect();
    let jobs: Vec<(&Candidate, Verdict)> = candidates.iter().zip(&verdicts).map(|(c, v)| (c, v.verdict)).collect();
    let outcomes: Vec<SampleOutcome> = judge.workers().map(&jobs, |(c, verdict)| {
        let pair = pair_of[c.pair_id.as_str()];
        let tokens = tokenizer.encode(&c.source);
        SampleOutcome::new(
            &c.pair_id,
            c.sample_index,
            *verdict,
            edit_distance(&pair.wrong_source, &c.source),
            bleu4_smoothed(tokens.as_slice(), &targets[c.pair_id.as_str()]),
            exact_match(&c.source, &pair.correct_source),
        )
    });

    let pair_results = summarize_pairs(&pairs, &outcomes);
    let report = aggregate(
        &pair_results,
        &outcomes,
        AggregateMeta {
            model_id: settings.model_id.clone(),
            generator: generator.id(),
            seed: generator.seed(),
            config: settings.config,
            judge_limits,
            tokenizer: tokenizer.fingerprint(),
            bucket_width: settings.bucket_width,
            n_samples,
        },
    )?;

    Ok(Evaluation {
        report,
        candidates,
        verdicts,
        outcomes,
        pairs: pair_results,
    })
}

fn summarize_pairs(pairs: &[CodePair], outcomes: &[SampleOutcome]) -> Vec<PairResult> {
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for o in outcomes {
        let e = counts.entry(o.pair_id.as_str()).or_default();
        e.0 += 1;
        e.1 += usize::from(o.correct);
        e.2 += usize::from(o.compilable);
    }
    pairs
        .iter()
        .map(|p| {
            let (n, c, comp) = counts.get(p.pair_id.as_str()).copied().unwrap_or_default();
            let pass = if n == 0 {
                0.0
            } else {
                metrics::pass_at_k(n as u64, c as u64, n.min(100) as u64).expect("valid counts")
            };
            PairResult {
                pair_id: p.pair_id.clone(),
                problem_id: p.problem_id.clone(),
                original_ed: p.original_ed,
                n_samples: n,
                n_correct: c,
                n_compilable: comp,
                pass_at_100: pass,
            }
        })
        .collect()
}

struct AggregateMeta {
    model_id: String,
    generator: String,
    seed: Option<u64>,
    config: GeneratorConfig,
    judge_limits: BTreeMap<String, JudgeLimits>,
    tokenizer: String,
    bucket_width: usize,
    n_samples: usize,
}

fn aggregate(pairs: &[PairResult], outcomes: &[SampleOutcome], meta: AggregateMeta) -> Result<EvalReport, EvalError> {
    let mut sorted: Vec<&SampleOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| (a.pair_id.as_str(), a.sample_index).cmp(&(b.pair_id.as_str(), b.sample_index)));

    let mut pass_at = BTreeMap::new();
    let mut compilable_at = BTreeMap::new();
    if !pairs.is_empty() {
        for k in REPORT_KS.into_iter().filter(|&k| k as usize <= meta.n_samples) {
            let mean = |count: fn(&PairResult) -> usize| {
                pairs
                    .iter()
                    .map(|p| metrics::pass_at_k(p.n_samples as u64, count(p) as u64, k.into()).expect("k <= n"))
                    .sum::<f64>()
                    / pairs.len() as f64
            };
            pass_at.insert(k, mean(|p| p.n_correct));
            compilable_at.insert(k, mean(|p| p.n_compilable));
        }
    }

    let mean = |values: Vec<f64>| metrics::mean_std(&values).map(|m| m.mean);
    let EdFamily {
        ed_all,
        ed_correct,
        ed_top1,
    } = metrics::ed_family(outcomes);
    let per_pair: Vec<(usize, f64)> = pairs.iter().map(|p| (p.original_ed, p.pass_at_100)).collect();

    Ok(EvalReport {
        model_id: meta.model_id,
        generator: meta.generator,
        seed: meta.seed,
        pass_at,
        compilable_at,
        bleu: mean(sorted.iter().map(|o| o.bleu_vs_target).collect()),
        exact_match_rate: mean(sorted.iter().map(|o| f64::from(u8::from(o.exact_match_vs_target))).collect()),
        ed_all,
        ed_correct,
        ed_top1,
        n_pairs: pairs.len(),
        n_samples_per_pair: meta.n_samples,
        config: meta.config,
        judge_limits: meta.judge_limits,
        tokenizer: meta.tokenizer,
        bleu_em_aggregation: BLEU_EM_AGGREGATION.into(),
        grouped_pass: group_pass_by_original_ed(&per_pair, meta.bucket_width)?,
    })
}

/// Bucket per-pair pass values by original edit distance into
/// `[0, w), [w, 2w), …` up to the largest observed distance. Empty
/// buckets in that range are kept with `n_pairs == 0`.
pub fn group_pass_by_original_ed(per_pair: &[(usize, f64)], width: usize) -> Result<GroupedPass, EvalError> {
    if width == 0 {
        return Err(EvalError::BadBucketWidth);
    }
    let Some(max_ed) = per_pair.iter().map(|(ed, _)| *ed).max() else {
        return Ok(GroupedPass {
            bucket_width: width,
            buckets: Vec::new(),
        });
    };
    let mut sums = vec![(0.0f64, 0usize); max_ed / width + 1];
    for &(ed, pass) in per_pair {
        let slot = &mut sums[ed / width];
        slot.0 += pass;
        slot.1 += 1;
    }
    let buckets = sums
        .into_iter()
        .enumerate()
        .map(|(i, (sum, n))| Bucket {
            ed_range: [i * width, (i + 1) * width],
            mean_pass_at_100: (n > 0).then(|| sum / n as f64),
            n_pairs: n,
        })
        .collect();
    Ok(GroupedPass {
        bucket_width: width,
        buckets,
    })
}

/// One point per sample; the flag marks pairs with at least one accepted
/// sample.
pub fn scatter(pairs: &[PairResult], outcomes: &[SampleOutcome]) -> ScatterData {
    let info: HashMap<&str, (usize, bool)> = pairs
        .iter()
        .map(|p| (p.pair_id.as_str(), (p.original_ed, p.n_correct > 0)))
        .collect();
    let mut sorted: Vec<&SampleOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| (a.pair_id.as_str(), a.sample_index).cmp(&(b.pair_id.as_str(), b.sample_index)));
    ScatterData {
        points: sorted
            .into_iter()
            .filter_map(|o| {
                let &(original_ed, pair_correct) = info.get(o.pair_id.as_str())?;
                Some(ScatterPoint {
                    original_ed,
                    generated_ed: o.ed_to_source,
                    pair_correct,
                })
            })
            .collect(),
    }
}

pub fn scatter_csv(data: &ScatterData) -> String {
    let mut out = String::from("original_ed,generated_ed,pair_correct\n");
    for p in &data.points {
        let _ = writeln!(out, "{},{},{}", p.original_ed, p.generated_ed, p.pair_correct);
    }
    out
}

pub fn grouped_csv(data: &GroupedPass) -> String {
    let mut out = String::from("ed_lo,ed_hi,mean_pass_at_100,n_pairs\n");
    for b in &data.buckets {
        let mean = b.mean_pass_at_100.map(|m| m.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", b.ed_range[0], b.ed_range[1], mean, b.n_pairs);
    }
    out
}

/// Plain-text results table, one row per report.
pub fn render_table(reports: &[EvalReport]) -> String {
    let pct = |v: Option<&f64>| v.map(|v| format!("{:.2}%", v * 100.0)).unwrap_or_else(|| "---".into());
    let ed = |m: &Option<MeanStd>| m.map(|m| format!("{:.2} ({:.2})", m.mean, m.std)).unwrap_or_else(|| "NA".into());
    let header = [
        "Model", "Pass@1", "Pass@10", "Pass@100", "Compilable@1", "Compilable@10", "Compilable@100",
        "BLEU", "Exact Match", "ED All", "ED Correct", "ED Top-1",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in reports {
        let mut row = vec![r.model_id.clone()];
        row.extend(REPORT_KS.iter().map(|k| pct(r.pass_at.get(k))));
        row.extend(REPORT_KS.iter().map(|k| pct(r.compilable_at.get(k))));
        row.push(r.bleu.map(|b| format!("{b:.2}")).unwrap_or_else(|| "NA".into()));
        row.push(pct(r.exact_match_rate.as_ref()));
        row.extend([ed(&r.ed_all), ed(&r.ed_correct), ed(&r.ed_top1)]);
        rows.push(row);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (n, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
        if n == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("-+-"));
        }
    }
    out
}
