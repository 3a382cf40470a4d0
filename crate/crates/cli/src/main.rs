use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use minrepair::corpus::{self, CodePair};
use minrepair::evalreport::{self, EvalError, EvalReport, EvalSettings};
use minrepair::generate::{self, Generator, GeneratorConfig, GeneratorKind};
use minrepair::judge::{self, Judge, JudgeCache, ProblemSet, Sandbox, VerdictRecord};
use minrepair::manifest::ManifestBuilder;
use minrepair::suggest::{self, SuggestError};
use minrepair::tokenize::{self, Tokenizer, TokenizerModel};
use minrepair::Workers;

/// Mine program-repair pairs, generate and judge candidates, and report.
#[derive(Debug, Parser)]
#[command(name = "minrepair", version)]
struct Cli {
    /// Worker threads for generation and judging.
    #[arg(long, global = true, default_value_t = minrepair::workers::default_jobs())]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build, clean and split the pair corpus.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Train or apply the BPE tokenizer.
    #[command(subcommand)]
    Tokenizer(TokenizerCmd),
    /// Produce candidates for a pairs file.
    Generate(GenerateArgs),
    /// Judge candidates against problem test cases.
    #[command(subcommand)]
    Judge(JudgeCmd),
    /// Generate, judge and score a split.
    Evaluate(EvaluateArgs),
    /// Suggest the closest accepted fix for one wrong program.
    Suggest(SuggestArgs),
    /// Render reports.
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Debug, Subcommand)]
enum CorpusCmd {
    /// Pair each rejected submission with the user's next accepted one.
    Pair(PairArgs),
    /// Keep pairs whose sides are both 1..max-tokens tokens long.
    Filter(FilterArgs),
    /// Drop exact duplicate (wrong, correct, problem) triples.
    Dedupe(InOut),
    /// Seeded train/valid/test split.
    Split(SplitArgs),
    /// Count and edit-distance statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Args, Serialize)]
struct PairArgs {
    #[arg(long)]
    submissions: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct FilterArgs {
    #[arg(long)]
    pairs: PathBuf,
    /// Tokenizer model; byte-level when omitted.
    #[arg(long)]
    tokenizer: Option<PathBuf>,
    #[arg(long, default_value_t = corpus::DEFAULT_MAX_TOKENS)]
    max_tokens: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct InOut {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = corpus::DEFAULT_RATIOS.0)]
    train_ratio: f64,
    #[arg(long, default_value_t = corpus::DEFAULT_RATIOS.1)]
    valid_ratio: f64,
    #[arg(long, default_value_t = corpus::DEFAULT_RATIOS.2)]
    test_ratio: f64,
    /// Receives train.jsonl, valid.jsonl, test.jsonl and split.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    pairs: PathBuf,
}

#[derive(Debug, Subcommand)]
enum TokenizerCmd {
    /// Train on both sides of every pair.
    Train(TrainArgs),
    /// Print the token ids of a file as a JSON array.
    Encode(EncodeArgs),
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = tokenize::DEFAULT_VOCAB_SIZE)]
    vocab_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct GeneratorArgs {
    /// copy | retrieval | mutate | external:<cmd> | replay:<file>
    #[arg(long)]
    generator: String,
    /// Training pairs for the retrieval index.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON GeneratorConfig; individual flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_samples: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Per-response timeout for external generators.
    #[arg(long, default_value_t = 600)]
    timeout_secs: u64,
}

#[derive(Debug, Args, Serialize)]
struct GenerateArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum JudgeCmd {
    /// Judge a candidates file and write verdicts.
    Run(JudgeRunArgs),
}

#[derive(Debug, Args, Serialize)]
struct ProblemsArg {
    /// Root with one directory per problem.
    #[arg(long, env = "MINREPAIR_PROBLEMS_DIR")]
    problems: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct JudgeRunArgs {
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    problems: ProblemsArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    problems: ProblemsArg,
    /// Tokenizer model for BLEU; byte-level when omitted.
    #[arg(long)]
    tokenizer: Option<PathBuf>,
    /// Row label in rendered tables; defaults to the generator id.
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long, default_value_t = evalreport::DEFAULT_BUCKET_WIDTH)]
    bucket_width: usize,
    /// Previously written verdicts to reuse instead of re-judging.
    #[arg(long)]
    verdicts: Option<PathBuf>,
    #[arg(long)]
    save_candidates: Option<PathBuf>,
    #[arg(long)]
    save_verdicts: Option<PathBuf>,
    /// Per-sample original vs generated edit distance.
    #[arg(long)]
    scatter_csv: Option<PathBuf>,
    /// Mean pass by original edit distance bucket.
    #[arg(long)]
    grouped_csv: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SuggestArgs {
    /// File holding the wrong program.
    #[arg(long)]
    wrong: PathBuf,
    #[arg(long)]
    problem: String,
    #[command(flatten)]
    problems: ProblemsArg,
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Try this generator when nothing is accepted.
    #[arg(long, value_parser = ["retrieval"])]
    fallback: Option<String>,
    /// Write the suggestion JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ReportCmd {
    /// Print a results table for one or more report files.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let workers = Workers::new(cli.jobs);
    match cli.command {
        Command::Corpus(c) => corpus_cmd(c),
        Command::Tokenizer(c) => tokenizer_cmd(c),
        Command::Generate(a) => generate_cmd(a, &workers),
        Command::Judge(JudgeCmd::Run(a)) => judge_cmd(a, workers),
        Command::Evaluate(a) => evaluate_cmd(a, workers),
        Command::Suggest(a) => suggest_cmd(a, workers),
        Command::Report(ReportCmd::Render(a)) => {
            let reports = a
                .reports
                .iter()
                .map(|p| -> Result<EvalReport> {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            print!("{}", evalreport::render_table(&reports));
            Ok(())
        }
    }
}

fn manifest(config: &impl Serialize) -> ManifestBuilder {
    ManifestBuilder::start(std::env::args().collect(), config)
}

fn finish(mut m: ManifestBuilder, inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    for p in inputs {
        m.input(p).with_context(|| format!("hashing {}", p.display()))?;
    }
    for p in outputs {
        m.output(p).with_context(|| format!("hashing {}", p.display()))?;
    }
    let primary = outputs.first().expect("artifact commands have an output");
    m.finish().write(primary)?;
    Ok(())
}

fn load_tokenizer(path: Option<&Path>) -> Result<TokenizerModel> {
    match path {
        Some(p) => TokenizerModel::load(p).with_context(|| format!("loading tokenizer {}", p.display())),
        None => Ok(TokenizerModel::byte_level()),
    }
}

fn corpus_cmd(cmd: CorpusCmd) -> Result<()> {
    match cmd {
        CorpusCmd::Pair(a) => {
            let records = corpus::read_submissions(&a.submissions)?;
            let pairs = corpus::pair_submissions(&records);
            corpus::write_pairs(&a.out, &pairs)?;
            eprintln!("{} submissions -> {} pairs", records.len(), pairs.len());
            finish(manifest(&a), &[&a.submissions], &[&a.out])
        }
        CorpusCmd::Filter(a) => {
            let pairs = corpus::read_pairs(&a.pairs)?;
            let tok = load_tokenizer(a.tokenizer.as_deref())?;
            let kept = corpus::filter_pairs(&pairs, &tok, a.max_tokens);
            corpus::write_pairs(&a.out, &kept)?;
            eprintln!("kept {} of {} pairs", kept.len(), pairs.len());
            let mut inputs: Vec<&Path> = vec![&a.pairs];
            inputs.extend(a.tokenizer.as_deref());
            finish(manifest(&a), &inputs, &[&a.out])
        }
        CorpusCmd::Dedupe(a) => {
            let pairs = corpus::read_pairs(&a.pairs)?;
            let kept = corpus::dedupe_pairs(&pairs);
            corpus::write_pairs(&a.out, &kept)?;
            eprintln!("kept {} of {} pairs", kept.len(), pairs.len());
            finish(manifest(&a), &[&a.pairs], &[&a.out])
        }
        CorpusCmd::Split(a) => {
            let pairs = corpus::read_pairs(&a.pairs)?;
            eprintln!("seed: {}", a.seed);
            let split = corpus::split_pairs(&pairs, a.seed, (a.train_ratio, a.valid_ratio, a.test_ratio))?;
            std::fs::create_dir_all(&a.out_dir)?;
            let files = ["train.jsonl", "valid.jsonl", "test.jsonl", "split.json"].map(|f| a.out_dir.join(f));
            corpus::write_pairs(&files[0], &split.train)?;
            corpus::write_pairs(&files[1], &split.valid)?;
            corpus::write_pairs(&files[2], &split.test)?;
            let mut json = serde_json::to_string_pretty(&split.manifest())?;
            json.push('\n');
            std::fs::write(&files[3], json)?;
            let (tr, va, te) = split.sizes();
            eprintln!("train {tr}, valid {va}, test {te}");
            let mut m = manifest(&a);
            m.seed("split", a.seed);
            let outputs: Vec<&Path> = [3, 0, 1, 2].iter().map(|&i| files[i].as_path()).collect();
            finish(m, &[&a.pairs], &outputs)
        }
        CorpusCmd::Stats(a) => {
            let pairs = corpus::read_pairs(&a.pairs)?;
            println!("{}", serde_json::to_string(&corpus::corpus_stats(&pairs))?);
            Ok(())
        }
    }
}

fn tokenizer_cmd(cmd: TokenizerCmd) -> Result<()> {
    match cmd {
        TokenizerCmd::Train(a) => {
            let pairs = corpus::read_pairs(&a.pairs)?;
            let texts: Vec<&str> = pairs
                .iter()
                .flat_map(|p| [p.wrong_source.as_str(), p.correct_source.as_str()])
                .collect();
            let model = tokenize::train_bpe(&texts, a.vocab_size)?;
            model.save(&a.out)?;
            eprintln!("vocab {} ({} merges), fingerprint {}", model.vocab_size(), model.merges().len(), model.fingerprint());
            finish(manifest(&a), &[&a.pairs], &[&a.out])
        }
        TokenizerCmd::Encode(a) => {
            let model = TokenizerModel::load(&a.model)?;
            let bytes = std::fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            println!("{}", serde_json::to_string(&model.encode_bytes(&bytes))?);
            Ok(())
        }
    }
}

fn resolve_config(a: &GeneratorArgs) -> Result<GeneratorConfig> {
    let mut config = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(n) = a.n_samples {
        config.n_samples = n;
    }
    if let Some(t) = a.temperature {
        config.temperature = t;
    }
    if let Some(m) = a.max_tokens {
        config.max_tokens = m;
    }
    config.validate()?;
    Ok(config)
}

fn build_generator(a: &GeneratorArgs) -> Result<Generator> {
    let kind: GeneratorKind = a.generator.parse()?;
    Ok(match kind {
        GeneratorKind::Copy => Generator::Copy,
        GeneratorKind::Retrieval => {
            let Some(train) = &a.train else {
                bail!("the retrieval generator needs --train");
            };
            Generator::Retrieval(generate::build_retrieval_index(&corpus::read_pairs(train)?))
        }
        GeneratorKind::Mutate => {
            eprintln!("seed: {}", a.seed);
            Generator::Mutate { seed: a.seed }
        }
        GeneratorKind::External(command) => Generator::External {
            command,
            timeout: Duration::from_secs(a.timeout_secs),
        },
        GeneratorKind::Replay(path) => Generator::Replay {
            label: format!("replay:{}", path.display()),
            candidates: generate::load_candidates(&path)?,
        },
    })
}

fn generator_inputs(a: &GeneratorArgs) -> Vec<&Path> {
    let mut out: Vec<&Path> = Vec::new();
    out.extend(a.train.as_deref());
    out.extend(a.config.as_deref());
    if let Some(file) = a.generator.strip_prefix("replay:") {
        out.push(Path::new(file));
    }
    out
}

fn generate_cmd(a: GenerateArgs, workers: &Workers) -> Result<()> {
    let config = resolve_config(&a.generator)?;
    let generator = build_generator(&a.generator)?;
    let pairs = corpus::read_pairs(&a.pairs)?;
    let generated = generator.generate(&pairs, &config, workers)?;
    generate::write_candidates(&a.out, &generated.candidates)?;
    for e in &generated.errors {
        eprintln!("pair {}: {}", e.pair_id, e.message);
    }
    let mut m = manifest(&(&a, config));
    if let Some(seed) = generator.seed() {
        m.seed("generator", seed);
    }
    let mut inputs: Vec<&Path> = vec![&a.pairs];
    inputs.extend(generator_inputs(&a.generator));
    finish(m, &inputs, &[&a.out])?;
    if !generated.errors.is_empty() {
        bail!("{} pair(s) failed to generate", generated.errors.len());
    }
    Ok(())
}

fn make_judge(workers: Workers) -> Judge {
    Judge::new(Sandbox::default())
        .with_workers(workers)
        .with_cache(Some(Arc::new(JudgeCache::new())))
}

fn load_problems(a: &ProblemsArg) -> Result<ProblemSet> {
    ProblemSet::load_root(&a.problems).with_context(|| format!("loading problems from {}", a.problems.display()))
}

fn judge_cmd(a: JudgeRunArgs, workers: Workers) -> Result<()> {
    let problems = load_problems(&a.problems)?;
    let pairs = corpus::read_pairs(&a.pairs)?;
    let candidates = generate::load_candidates(&a.candidates)?;
    let pair_problems: BTreeMap<String, String> =
        pairs.iter().map(|p| (p.pair_id.clone(), p.problem_id.clone())).collect();
    let judge = make_judge(workers);
    let judged = judge.judge_batch(&candidates, &pair_problems, &problems);
    let mut records = Vec::with_capacity(judged.len());
    let mut failures = 0;
    for j in &judged {
        match &j.result {
            Ok(r) => records.push(VerdictRecord::new(&j.candidate, r)),
            Err(e) => {
                failures += 1;
                eprintln!("pair {} sample {}: {e}", j.candidate.pair_id, j.candidate.sample_index);
            }
        }
    }
    judge::write_verdicts(&a.out, &records)?;
    finish(manifest(&a), &[&a.candidates, &a.pairs, &a.problems.problems], &[&a.out])?;
    if failures > 0 {
        bail!("{failures} candidate(s) could not be judged");
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs, workers: Workers) -> Result<()> {
    let config = resolve_config(&a.generator)?;
    let generator = build_generator(&a.generator)?;
    let problems = load_problems(&a.problems)?;
    let pairs = corpus::read_pairs(&a.pairs)?;
    let tokenizer = load_tokenizer(a.tokenizer.as_deref())?;
    let prior = a.verdicts.as_ref().map(judge::read_verdicts).transpose()?;
    let settings = EvalSettings {
        model_id: a.model_id.clone().unwrap_or_else(|| generator.id()),
        config,
        bucket_width: a.bucket_width,
    };
    let judge = make_judge(workers);
    let evaluation = match evalreport::evaluate(&pairs, &generator, &problems, &judge, &tokenizer, &settings, prior.as_deref()) {
        Ok(e) => e,
        Err(EvalError::Aborted { stage, message, progress }) => {
            let path = a.out.with_file_name(format!(
                "{}.partial.json",
                a.out.file_name().unwrap_or_default().to_string_lossy()
            ));
            std::fs::write(&path, serde_json::to_string_pretty(&progress)? + "\n")?;
            bail!("evaluation aborted during {stage}: {message}; progress written to {}", path.display());
        }
        Err(e) => return Err(e.into()),
    };

    std::fs::write(&a.out, evaluation.report.to_json())?;
    let mut outputs: Vec<&Path> = vec![&a.out];
    if let Some(p) = &a.save_candidates {
        generate::write_candidates(p, &evaluation.candidates)?;
        outputs.push(p);
    }
    if let Some(p) = &a.save_verdicts {
        judge::write_verdicts(p, &evaluation.verdicts)?;
        outputs.push(p);
    }
    if let Some(p) = &a.scatter_csv {
        std::fs::write(p, evalreport::scatter_csv(&evaluation.scatter()))?;
        outputs.push(p);
    }
    if let Some(p) = &a.grouped_csv {
        std::fs::write(p, evalreport::grouped_csv(&evaluation.report.grouped_pass))?;
        outputs.push(p);
    }
    if let Err(e) = evaluation.report.check_invariants() {
        bail!("report invariant violated: {e}");
    }
    print!("{}", evalreport::render_table(std::slice::from_ref(&evaluation.report)));

    let mut m = manifest(&(&a, config));
    if let Some(seed) = generator.seed() {
        m.seed("generator", seed);
    }
    let mut inputs: Vec<&Path> = vec![&a.pairs, &a.problems.problems];
    inputs.extend(a.tokenizer.as_deref());
    inputs.extend(a.verdicts.as_deref());
    inputs.extend(generator_inputs(&a.generator));
    finish(m, &inputs, &outputs)
}

fn suggest_cmd(a: SuggestArgs, workers: Workers) -> Result<()> {
    let wrong = std::fs::read_to_string(&a.wrong).with_context(|| format!("reading {}", a.wrong.display()))?;
    let problems = load_problems(&a.problems)?;
    problems.require(&a.problem)?;
    let config = resolve_config(&a.generator)?;
    let judge = make_judge(workers);
    let pair = CodePair::new(&a.problem, "", &wrong, "");

    let attempt = |generator: &Generator| -> Result<Result<suggest::Suggestion, SuggestError>> {
        let generated = generator.generate(std::slice::from_ref(&pair), &config, judge.workers())?;
        if let Some(e) = generated.errors.first() {
            bail!("generation failed: {}", e.message);
        }
        let pair_problems = BTreeMap::from([(pair.pair_id.clone(), pair.problem_id.clone())]);
        let judged = judge
            .judge_batch(&generated.candidates, &pair_problems, &problems)
            .into_iter()
            .map(|j| Ok((j.candidate, j.result?)))
            .collect::<std::result::Result<Vec<_>, judge::BatchError>>()?;
        Ok(suggest::select_minimal(&wrong, &judged))
    };

    let generator = build_generator(&a.generator)?;
    let mut outcome = attempt(&generator)?;
    if outcome.is_err() && a.fallback.as_deref() == Some("retrieval") {
        let Some(train) = &a.generator.train else {
            bail!("--fallback retrieval needs --train");
        };
        eprintln!("no accepted candidate; falling back to retrieval");
        let index = generate::build_retrieval_index(&corpus::read_pairs(train)?);
        outcome = attempt(&Generator::Retrieval(index))?;
    }
    let suggestion = match outcome {
        Ok(s) => s,
        Err(SuggestError::NoCorrectCandidate { n_candidates, compilable }) => {
            for (c, ed) in compilable.iter().take(5) {
                eprintln!("compilable sample {} ({}) at edit distance {ed}", c.sample_index, c.generator_id);
            }
            bail!("NoCorrectCandidate: none of {n_candidates} candidates was accepted");
        }
        Err(e) => return Err(e.into()),
    };
    let mut json = serde_json::to_string_pretty(&suggestion.to_json())?;
    json.push('\n');
    match &a.out {
        Some(p) => {
            std::fs::write(p, json)?;
            let mut m = manifest(&(&a, config));
            if let Some(seed) = generator.seed() {
                m.seed("generator", seed);
            }
            let mut inputs: Vec<&Path> = vec![&a.wrong, &a.problems.problems];
            inputs.extend(generator_inputs(&a.generator));
            finish(m, &inputs, &[p])?;
        }
        None => print!("{json}"),
    }
    Ok(())
}
