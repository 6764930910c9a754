//! The `agreeprobe` command line.
//!
//! Settings resolve as: command-line flag, then `--config` file, then the
//! built-in defaults. Results are printed to stdout, diagnostics go to
//! stderr, and data is only written to the declared output paths.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result, bail, ensure};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;

use crate::corpus::{EncodedCorpus, Normalizer, Split, Vocabulary, build_vocab, encode};
use crate::evaluator::{
    AccuracyTable, Grouping, ModelScorer, PairOutcome, ReportFormat, SeedOutcomes, aggregate, emit_report,
    evaluate_suite, read_outcomes, write_outcomes,
};
use crate::lstm::{
    Checkpoint, GradCheckSetup, TrainConfig, gradient_check, parse_checkpoint, perplexity, save_checkpoint,
    select_best, stored_width, train,
};
use crate::numerics::Real;
use crate::synth::{GrammarConfig, SyntheticCorpus, generate_corpus, grammar_lexicon, held_out_suite};
use crate::testgen::{
    Condition, Gender, Lexicon, MinimalPair, Number, OovPolicy, SuiteRequest, generate_suite, load_external_suite,
    suite_to_string,
};

pub const DEFAULT_CAP: usize = 50_000;

#[derive(Debug, Parser)]
#[command(name = "agreeprobe", version, about = "Train word-level LSTM language models and probe their agreement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalise raw text, build the vocabulary and encode the splits.
    Preprocess(PreprocessArgs),
    /// Train one model per seed.
    Train(TrainArgs),
    /// Perplexity of a checkpoint on an encoded or raw split.
    Ppl(PplArgs),
    /// Generate a minimal-pair suite from a lexicon.
    GenTestset(GenTestsetArgs),
    /// Score a suite with one or more checkpoints and write the report.
    Score(ScoreArgs),
    /// Rebuild a report from saved per-pair outcomes.
    Report(ReportArgs),
    /// Finite-difference check of the hand-derived gradients.
    Gradcheck(GradcheckArgs),
    /// Write a corpus and held-out suite from the artificial agreement grammar.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Jsonl => ReportFormat::Jsonl,
        }
    }
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Keep this many most frequent tokens [default: 50000].
    #[arg(long)]
    pub cap: Option<usize>,
    /// Tab-separated `from<TAB>to` token merges applied after normalisation.
    #[arg(long)]
    pub merge_map: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for vocab.tsv and the encoded splits.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct TrainOverrides {
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub bptt: Option<usize>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub anneal: Option<f64>,
    #[arg(long)]
    pub init_range: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `preprocess`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated seeds; defaults to the configured seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    /// Also write selection.csv with the K lowest-perplexity seeds.
    #[arg(long, value_name = "K")]
    pub select_best: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PplArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Encoded split written by `preprocess`.
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    pub ids: Option<PathBuf>,
    /// Raw text, normalised and encoded with the checkpoint's vocabulary.
    #[arg(long)]
    pub text: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenTestsetArgs {
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Comma-separated conditions [default: all six].
    #[arg(long, value_delimiter = ',')]
    pub conditions: Vec<Condition>,
    /// Comma-separated distractor lengths [default: 1].
    #[arg(long, value_delimiter = ',')]
    pub lengths: Vec<usize>,
    /// Comma-separated numbers (sg, pl) [default: both].
    #[arg(long, value_delimiter = ',')]
    pub numbers: Vec<Number>,
    /// Only use main nouns of this gender (m or f).
    #[arg(long)]
    pub main_gender: Option<Gender>,
    /// Check lexicon forms against this vocabulary.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Drop out-of-vocabulary entries instead of failing.
    #[arg(long)]
    pub lenient: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregationArgs {
    /// Only keep pairs with at most this many distractors.
    #[arg(long)]
    pub max_distractors: Option<usize>,
    /// Merge all distractor counts into one cell with this label.
    #[arg(long, value_name = "LABEL")]
    pub pool_distractors: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long = "checkpoint", required = true, num_args = 1..)]
    pub checkpoints: Vec<PathBuf>,
    #[arg(long)]
    pub suite: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Also save per-pair outcomes (JSON lines tagged by seed).
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    /// Skip pairs with out-of-vocabulary tokens instead of failing.
    #[arg(long)]
    pub lenient: bool,
    /// Feed the end-of-sentence token before each prefix.
    #[arg(long)]
    pub sentence_start: bool,
    #[command(flatten)]
    pub agg: AggregationArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "outcomes", required = true, num_args = 1..)]
    pub outcomes: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub agg: AggregationArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Corrupt the analytic gradient; the check must then fail.
    #[arg(long)]
    pub inject_bug: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Grammar lexicon [default: the bundled one].
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub train_tokens: usize,
    #[arg(long, default_value_t = 10_000)]
    pub valid_tokens: usize,
    #[arg(long, default_value_t = 10_000)]
    pub test_tokens: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Distractor lengths of the held-out suite.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub suite_lengths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "NA")]
    pub suite_conditions: Vec<Condition>,
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').with_context(|| format!("config line {}: expected key = value", i + 1))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn load_config(path: Option<&Path>) -> Result<BTreeMap<String, String>> {
    match path {
        Some(p) => parse_config(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => Ok(BTreeMap::new()),
    }
}

/// Training-related settings after applying the config file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedTrain {
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
    pub precision: Precision,
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().ok().with_context(|| format!("config key `{key}`: cannot parse `{v}`"))
}

pub fn resolve_train(
    file: &BTreeMap<String, String>,
    o: &TrainOverrides,
    seeds: &[u64],
    precision: Option<Precision>,
) -> Result<ResolvedTrain> {
    let mut c = TrainConfig::default();
    let mut file_seeds = None;
    let mut file_precision = None;
    for (k, v) in file {
        match k.as_str() {
            "layers" => c.layers = parse_value(k, v)?,
            "hidden" => c.hidden = parse_value(k, v)?,
            "embed_dim" => c.embed_dim = parse_value(k, v)?,
            "batch_size" => c.batch_size = parse_value(k, v)?,
            "dropout" => c.dropout_p = parse_value(k, v)?,
            "lr" => c.lr_initial = parse_value(k, v)?,
            "bptt" => c.bptt_len = parse_value(k, v)?,
            "clip" => c.clip_norm = parse_value(k, v)?,
            "epochs" => c.max_epochs = parse_value(k, v)?,
            "anneal" => c.anneal_factor = parse_value(k, v)?,
            "init_range" => c.init_range = parse_value(k, v)?,
            "seed" => c.seed = parse_value(k, v)?,
            "seeds" => {
                let s: Result<Vec<u64>> = v.split(',').map(|x| parse_value(k, x.trim())).collect();
                file_seeds = Some(s?);
            }
            "precision" => {
                file_precision = Some(match v.as_str() {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => bail!("config key `precision`: expected f32 or f64, got `{v}`"),
                })
            }
            "cap" => {}
            _ => bail!("unknown config key `{k}`"),
        }
    }
    macro_rules! over {
        ($($field:ident => $target:ident),*) => { $(if let Some(v) = o.$field { c.$target = v; })* };
    }
    over!(layers => layers, hidden => hidden, embed_dim => embed_dim, batch_size => batch_size,
          dropout => dropout_p, lr => lr_initial, bptt => bptt_len, clip => clip_norm,
          epochs => max_epochs, anneal => anneal_factor, init_range => init_range);
    let seeds = if !seeds.is_empty() { seeds.to_vec() } else { file_seeds.unwrap_or_else(|| vec![c.seed]) };
    ensure!(!seeds.is_empty(), "seed list is empty");
    c.validate()?;
    Ok(ResolvedTrain { config: c, seeds, precision: precision.or(file_precision).unwrap_or(Precision::F32) })
}

fn read_lines(path: &Path, norm: &Normalizer) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(|l| norm.normalize_line(l)).collect())
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> Result<usize> {
    let file = load_config(a.config.as_deref())?;
    let cap = match (a.cap, file.get("cap")) {
        (Some(c), _) => c,
        (None, Some(v)) => parse_value("cap", v)?,
        (None, None) => DEFAULT_CAP,
    };
    let norm = match &a.merge_map {
        Some(p) => Normalizer::from_merge_file(p)?,
        None => Normalizer::new(),
    };
    let train = read_lines(&a.train, &norm)?;
    let valid = read_lines(&a.valid, &norm)?;
    let test = a.test.as_ref().map(|p| read_lines(p, &norm)).transpose()?;
    let vocab = build_vocab(&train, cap)?;
    fs::create_dir_all(&a.out)?;
    vocab.save(&a.out.join("vocab.tsv"))?;
    encode(&train, &vocab, Split::Train).save(&a.out.join("train.ids"))?;
    encode(&valid, &vocab, Split::Valid).save(&a.out.join("valid.ids"))?;
    if let Some(t) = &test {
        encode(t, &vocab, Split::Test).save(&a.out.join("test.ids"))?;
    }
    println!("vocabulary size: {}", vocab.len());
    Ok(vocab.len())
}

pub fn checkpoint_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("model-seed{seed}.ckpt"))
}

fn train_seed<F: Real>(cfg: &TrainConfig, vocab: &Vocabulary, tr: &EncodedCorpus, va: &EncodedCorpus, out: &Path) -> Result<f64> {
    let (params, log) = train::<F>(cfg, vocab.len(), tr, va).with_context(|| format!("seed {}", cfg.seed))?;
    save_checkpoint(&params, vocab, cfg.seed, &checkpoint_path(out, cfg.seed))?;
    fs::write(out.join(format!("train-log-seed{}.csv", cfg.seed)), log.to_csv())?;
    Ok(log.best_valid_ppl())
}

pub fn cmd_train(a: &TrainArgs) -> Result<Vec<(u64, f64)>> {
    let file = load_config(a.config.as_deref())?;
    let r = resolve_train(&file, &a.overrides, &a.seeds, a.precision)?;
    let vocab = Vocabulary::load(&a.data.join("vocab.tsv"))?;
    let tr = EncodedCorpus::load(&a.data.join("train.ids"))?;
    let va = EncodedCorpus::load(&a.data.join("valid.ids"))?;
    tr.check_against(&vocab)?;
    va.check_against(&vocab)?;
    fs::create_dir_all(&a.out)?;
    info!("training {} seed(s) with {:?}", r.seeds.len(), r.config);
    let results: Vec<Result<(u64, f64)>> = r
        .seeds
        .par_iter()
        .map(|&seed| {
            let cfg = TrainConfig { seed, ..r.config.clone() };
            let ppl = match r.precision {
                Precision::F32 => train_seed::<f32>(&cfg, &vocab, &tr, &va, &a.out)?,
                Precision::F64 => train_seed::<f64>(&cfg, &vocab, &tr, &va, &a.out)?,
            };
            Ok((seed, ppl))
        })
        .collect();
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    for (seed, ppl) in &runs {
        println!("seed {seed}: best validation perplexity {ppl}");
    }
    if let Some(k) = a.select_best {
        let s = select_best(&runs, k);
        let mut csv = String::from("seed,valid_ppl\n");
        for (seed, ppl) in &s.chosen {
            csv.push_str(&format!("{seed},{ppl}\n"));
        }
        csv.push_str(&format!("MEAN,{}\nSD,{}\n", s.mean_ppl, s.sd_ppl));
        fs::write(a.out.join("selection.csv"), csv)?;
        println!("best {} of {}: mean perplexity {} (sd {})", s.chosen.len(), runs.len(), s.mean_ppl, s.sd_ppl);
    }
    Ok(runs)
}

/// A checkpoint at its stored precision.
pub enum AnyCheckpoint {
    F32(Checkpoint<f32>),
    F64(Checkpoint<f64>),
}

impl AnyCheckpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let ck = match stored_width(&bytes)? {
            4 => AnyCheckpoint::F32(parse_checkpoint(&bytes)?),
            _ => AnyCheckpoint::F64(parse_checkpoint(&bytes)?),
        };
        Ok(ck)
    }

    pub fn vocab(&self) -> &Vocabulary {
        match self {
            AnyCheckpoint::F32(c) => &c.vocab,
            AnyCheckpoint::F64(c) => &c.vocab,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            AnyCheckpoint::F32(c) => c.seed,
            AnyCheckpoint::F64(c) => c.seed,
        }
    }

    pub fn perplexity(&self, ids: &[u32]) -> Result<f64> {
        Ok(match self {
            AnyCheckpoint::F32(c) => perplexity(&c.params, ids)?,
            AnyCheckpoint::F64(c) => perplexity(&c.params, ids)?,
        })
    }

    pub fn score(&self, pairs: &[MinimalPair], policy: OovPolicy, sentence_start: bool) -> Result<(Vec<PairOutcome>, usize)> {
        fn go<F: Real>(c: &Checkpoint<F>, pairs: &[MinimalPair], policy: OovPolicy, start: bool) -> Result<(Vec<PairOutcome>, usize)> {
            let scorer = ModelScorer { params: &c.params, vocab: &c.vocab, sentence_start: start };
            let ev = evaluate_suite(&scorer, pairs, policy)?;
            Ok((ev.outcomes, ev.skipped))
        }
        match self {
            AnyCheckpoint::F32(c) => go(c, pairs, policy, sentence_start),
            AnyCheckpoint::F64(c) => go(c, pairs, policy, sentence_start),
        }
    }
}

pub fn cmd_ppl(a: &PplArgs) -> Result<f64> {
    let ck = AnyCheckpoint::load(&a.checkpoint)?;
    let ids = match (&a.ids, &a.text) {
        (Some(p), _) => {
            let c = EncodedCorpus::load(p)?;
            c.check_against(ck.vocab())?;
            c.ids
        }
        (None, Some(p)) => encode(&read_lines(p, &Normalizer::new())?, ck.vocab(), Split::Test).ids,
        (None, None) => bail!("either --ids or --text is required"),
    };
    let ppl = ck.perplexity(&ids)?;
    println!("perplexity: {ppl}");
    Ok(ppl)
}

pub fn cmd_gen_testset(a: &GenTestsetArgs) -> Result<usize> {
    let vocab = a.vocab.as_ref().map(|p| Vocabulary::load(p)).transpose()?;
    let policy = if a.lenient { OovPolicy::Lenient } else { OovPolicy::Strict };
    let lex = Lexicon::load(&a.lexicon, vocab.as_ref(), policy)?;
    let mut req = SuiteRequest { main_gender: a.main_gender, ..SuiteRequest::default() };
    if !a.conditions.is_empty() {
        req.conditions = a.conditions.clone();
    }
    if !a.lengths.is_empty() {
        req.lengths = a.lengths.clone();
    }
    if !a.numbers.is_empty() {
        req.numbers = a.numbers.clone();
    }
    let suite = generate_suite(&lex, &req)?;
    fs::write(&a.out, suite_to_string(&suite))?;
    println!("pairs: {}", suite.len());
    Ok(suite.len())
}

fn build_table(runs: Vec<SeedOutcomes>, agg: &AggregationArgs) -> Result<AccuracyTable> {
    let runs: Vec<SeedOutcomes> = runs
        .into_iter()
        .map(|mut r| {
            if let Some(max) = agg.max_distractors {
                r.outcomes.retain(|o| o.meta.get("distractors").and_then(|d| d.parse::<usize>().ok()).is_some_and(|d| d <= max));
            }
            r
        })
        .collect();
    let grouping = match &agg.pool_distractors {
        Some(label) => Grouping::PooledDistractors(label.clone()),
        None => Grouping::PerDistractorCount,
    };
    Ok(aggregate(&runs, &grouping)?)
}

pub fn cmd_score(a: &ScoreArgs) -> Result<AccuracyTable> {
    let pairs = load_external_suite(&a.suite)?;
    let policy = if a.lenient { OovPolicy::Lenient } else { OovPolicy::Strict };
    let mut runs = Vec::new();
    let mut outcome_text = String::new();
    for path in &a.checkpoints {
        let ck = AnyCheckpoint::load(path)?;
        let (outcomes, skipped) =
            ck.score(&pairs, policy, a.sentence_start).with_context(|| format!("scoring with {}", path.display()))?;
        if a.lenient {
            eprintln!("{}: skipped {skipped} of {} pairs (out of vocabulary)", path.display(), pairs.len());
        }
        outcome_text.push_str(&write_outcomes(ck.seed(), &outcomes));
        runs.push(SeedOutcomes { seed: ck.seed(), outcomes });
    }
    if let Some(p) = &a.outcomes {
        fs::write(p, outcome_text)?;
    }
    let table = build_table(runs, &a.agg)?;
    emit_report(&table, a.agg.format.into(), &a.report)?;
    for s in &table.summaries {
        println!(
            "{} {} {}: accuracy {:.4} (sd {:.4}, {} items, {} ties)",
            s.key.condition, s.key.number, s.key.distractors, s.mean, s.sd, s.items, s.ties
        );
    }
    Ok(table)
}

pub fn cmd_report(a: &ReportArgs) -> Result<AccuracyTable> {
    let mut runs: Vec<SeedOutcomes> = Vec::new();
    for p in &a.outcomes {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        runs.extend(read_outcomes(&text)?);
    }
    let table = build_table(runs, &a.agg)?;
    emit_report(&table, a.agg.format.into(), &a.out)?;
    println!("cells: {}", table.summaries.len());
    Ok(table)
}

pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<f64> {
    let setup = GradCheckSetup { seed: a.seed, eps: a.eps, ..GradCheckSetup::default() };
    let r = gradient_check(&setup, a.inject_bug)?;
    println!("max relative error: {:e} (parameter {} of {})", r.max_rel_error, r.worst_index, r.checked);
    ensure!(r.max_rel_error < a.tolerance, "gradient check failed: {:e} >= {:e}", r.max_rel_error, a.tolerance);
    Ok(r.max_rel_error)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let lex = match &a.lexicon {
        Some(p) => Lexicon::load(p, None, OovPolicy::Strict)?,
        None => grammar_lexicon(),
    };
    let cfg = GrammarConfig {
        train_tokens: a.train_tokens,
        valid_tokens: a.valid_tokens,
        test_tokens: a.test_tokens,
        seed: a.seed,
        ..GrammarConfig::default()
    };
    let c = generate_corpus(&lex, &cfg)?;
    let suite = held_out_suite(&lex, &a.suite_conditions, &a.suite_lengths, cfg.holdout_modulus)?;
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("train.txt"), SyntheticCorpus::split_text(&c.train))?;
    fs::write(a.out.join("valid.txt"), SyntheticCorpus::split_text(&c.valid))?;
    fs::write(a.out.join("test.txt"), SyntheticCorpus::split_text(&c.test))?;
    fs::write(a.out.join("heldout_suite.jsonl"), suite_to_string(&suite))?;
    println!("sentences: {} train, {} valid, {} test; held-out pairs: {}", c.train.len(), c.valid.len(), c.test.len(), suite.len());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(a).map(drop),
        Command::Train(a) => cmd_train(a).map(drop),
        Command::Ppl(a) => cmd_ppl(a).map(drop),
        Command::GenTestset(a) => cmd_gen_testset(a).map(drop),
        Command::Score(a) => cmd_score(a).map(drop),
        Command::Report(a) => cmd_report(a).map(drop),
        Command::Gradcheck(a) => cmd_gradcheck(a).map(drop),
        Command::Synth(a) => cmd_synth(a),
    }
}
