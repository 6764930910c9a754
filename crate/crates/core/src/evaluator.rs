//! Minimal-pair scoring, accuracy aggregation and reports.
//!
//! A pair succeeds when the model gives the grammatical target a strictly
//! higher next-token probability than the ungrammatical one; exact ties are
//! failures and are counted separately.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EOS, Vocabulary};
use crate::lstm::{ModelError, ModelParams, next_token_log_probs};
use crate::numerics::{Real, Rng};
use crate::testgen::{MinimalPair, OovPolicy};

pub const REPORT_HEADER: [&str; 7] = ["condition", "number", "distractor_count", "seed", "items", "ties", "accuracy"];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("token `{0}` is not in the vocabulary")]
    Oov(String),
    #[error("no outcomes to aggregate")]
    Empty,
    #[error("seed {0} appears more than once")]
    DuplicateSeed(u64),
    #[error("malformed report: {0}")]
    Report(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub prefix: String,
    pub correct: String,
    pub wrong: String,
    pub meta: BTreeMap<String, String>,
    pub log_prob_correct: f64,
    pub log_prob_incorrect: f64,
    pub success: bool,
    pub tie: bool,
}

impl PairOutcome {
    pub fn from_scores(pair: &MinimalPair, log_prob_correct: f64, log_prob_incorrect: f64) -> Self {
        Self {
            prefix: pair.prefix_text(),
            correct: pair.correct.clone(),
            wrong: pair.wrong.clone(),
            meta: pair.meta.clone(),
            log_prob_correct,
            log_prob_incorrect,
            success: log_prob_correct > log_prob_incorrect,
            tie: log_prob_correct == log_prob_incorrect,
        }
    }
}

/// Anything that can assign next-token log-probabilities to a pair's targets.
pub trait PairScorer: Sync {
    fn score(&self, pair: &MinimalPair) -> Result<PairOutcome, EvalError>;
}

/// Scores pairs with a trained model, one forward pass per pair from a zero
/// state. With `sentence_start` the prefix is preceded by `<eos>`, matching
/// how sentence-initial words appear in training streams.
pub struct ModelScorer<'a, F> {
    pub params: &'a ModelParams<F>,
    pub vocab: &'a Vocabulary,
    pub sentence_start: bool,
}

impl<'a, F: Real> ModelScorer<'a, F> {
    pub fn new(params: &'a ModelParams<F>, vocab: &'a Vocabulary) -> Self {
        Self { params, vocab, sentence_start: false }
    }

    fn id(&self, token: &str) -> Result<u32, EvalError> {
        self.vocab.id(token).ok_or_else(|| EvalError::Oov(token.to_string()))
    }
}

impl<F: Real> PairScorer for ModelScorer<'_, F> {
    fn score(&self, pair: &MinimalPair) -> Result<PairOutcome, EvalError> {
        let mut ids = Vec::with_capacity(pair.prefix.len() + 1);
        if self.sentence_start {
            ids.push(self.id(EOS)?);
        }
        for t in &pair.prefix {
            ids.push(self.id(t)?);
        }
        let c = self.id(&pair.correct)?;
        let w = self.id(&pair.wrong)?;
        let lp = next_token_log_probs(self.params, &ids)?;
        let (lc, lw) = (lp[c as usize], lp[w as usize]);
        Ok(PairOutcome::from_scores(pair, lc.to_f64().unwrap(), lw.to_f64().unwrap()))
    }
}

/// Scores `pair` under the model from a zero initial state.
pub fn score_pair<F: Real>(
    params: &ModelParams<F>,
    vocab: &Vocabulary,
    pair: &MinimalPair,
) -> Result<PairOutcome, EvalError> {
    ModelScorer::new(params, vocab).score(pair)
}

/// Parameter-free coin flip per pair, keyed on the pair text so the decision
/// does not depend on evaluation order. Used to validate the harness.
pub struct RandomScorer {
    pub seed: u64,
}

impl PairScorer for RandomScorer {
    fn score(&self, pair: &MinimalPair) -> Result<PairOutcome, EvalError> {
        // FNV-1a over the pair text.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in pair.prefix_text().bytes().chain([0]).chain(pair.correct.bytes()).chain([0]).chain(pair.wrong.bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        let mut rng = Rng::new(h ^ self.seed);
        let (a, b) = (rng.uniform(), rng.uniform());
        Ok(PairOutcome::from_scores(pair, a.ln(), b.ln()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEvaluation {
    pub outcomes: Vec<PairOutcome>,
    /// Pairs dropped for out-of-vocabulary tokens (lenient mode only).
    pub skipped: usize,
}

/// Scores every pair in parallel; outcomes keep input order. In strict mode
/// the first failing pair (in input order) aborts.
pub fn evaluate_suite<S: PairScorer>(
    scorer: &S,
    pairs: &[MinimalPair],
    policy: OovPolicy,
) -> Result<SuiteEvaluation, EvalError> {
    let scored: Vec<Result<PairOutcome, EvalError>> = pairs.par_iter().map(|p| scorer.score(p)).collect();
    let mut outcomes = Vec::with_capacity(pairs.len());
    let mut skipped = 0;
    for r in scored {
        match r {
            Ok(o) => outcomes.push(o),
            Err(EvalError::Oov(_)) if policy == OovPolicy::Lenient => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(SuiteEvaluation { outcomes, skipped })
}

/// Mean and sample standard deviation; the deviation is 0 for fewer than two
/// values.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Report cell: condition × number × distractor count. Distractor counts
/// order numerically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellKey {
    pub condition: String,
    pub number: String,
    pub distractors: String,
}

impl Ord for CellKey {
    fn cmp(&self, other: &Self) -> Ordering {
        let num = |s: &str| s.parse::<u64>().ok();
        self.condition
            .cmp(&other.condition)
            .then_with(|| self.number.cmp(&other.number))
            .then_with(|| match (num(&self.distractors), num(&other.distractors)) {
                (Some(a), Some(b)) => a.cmp(&b),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => self.distractors.cmp(&other.distractors),
            })
    }
}

impl PartialOrd for CellKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub key: CellKey,
    pub seed: u64,
    pub items: usize,
    pub successes: usize,
    pub ties: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub key: CellKey,
    pub seeds: usize,
    pub items: usize,
    pub ties: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Per-seed rows sorted by (cell, seed) and one summary per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTable {
    pub rows: Vec<CellRow>,
    pub summaries: Vec<CellSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcomes {
    pub seed: u64,
    pub outcomes: Vec<PairOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Grouping {
    #[default]
    PerDistractorCount,
    /// Collapse all distractor counts into one cell labelled with the string.
    PooledDistractors(String),
}

fn meta_or_dash(o: &PairOutcome, key: &str) -> String {
    o.meta.get(key).cloned().unwrap_or_else(|| "-".to_string())
}

pub fn aggregate(runs: &[SeedOutcomes], grouping: &Grouping) -> Result<AccuracyTable, EvalError> {
    if runs.iter().all(|r| r.outcomes.is_empty()) {
        return Err(EvalError::Empty);
    }
    let mut seen = BTreeSet::new();
    // (key, seed) -> (items, successes, ties)
    let mut cells: BTreeMap<(CellKey, u64), (usize, usize, usize)> = BTreeMap::new();
    for run in runs {
        if !seen.insert(run.seed) {
            return Err(EvalError::DuplicateSeed(run.seed));
        }
        for o in &run.outcomes {
            let key = CellKey {
                condition: meta_or_dash(o, "condition"),
                number: meta_or_dash(o, "number"),
                distractors: match grouping {
                    Grouping::PerDistractorCount => meta_or_dash(o, "distractors"),
                    Grouping::PooledDistractors(label) => label.clone(),
                },
            };
            let c = cells.entry((key, run.seed)).or_default();
            c.0 += 1;
            c.1 += o.success as usize;
            c.2 += o.tie as usize;
        }
    }
    let rows: Vec<CellRow> = cells
        .into_iter()
        .map(|((key, seed), (items, successes, ties))| CellRow {
            key,
            seed,
            items,
            successes,
            ties,
            accuracy: successes as f64 / items as f64,
        })
        .collect();
    Ok(AccuracyTable { summaries: summarize(&rows), rows })
}

fn summarize(rows: &[CellRow]) -> Vec<CellSummary> {
    let mut out: Vec<CellSummary> = Vec::new();
    for group in rows.chunk_by(|a, b| a.key == b.key) {
        let accs: Vec<f64> = group.iter().map(|r| r.accuracy).collect();
        let (mean, sd) = mean_sd(&accs);
        out.push(CellSummary {
            key: group[0].key.clone(),
            seeds: group.len(),
            items: group.iter().map(|r| r.items).sum(),
            ties: group.iter().map(|r| r.ties).sum(),
            mean,
            sd,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    /// One JSON object per line with the CSV fields.
    Jsonl,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "jsonl" | "json" | "structured" => Ok(ReportFormat::Jsonl),
            _ => Err(format!("unknown report format `{s}`")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ReportLine<'a> {
    condition: &'a str,
    number: &'a str,
    distractor_count: &'a str,
    seed: String,
    items: usize,
    ties: usize,
    accuracy: f64,
}

/// Report lines in output order: per cell, the seed rows, then `MEAN`
/// (accuracy = mean, items/ties = totals) and `SD`.
fn report_lines(table: &AccuracyTable) -> Vec<ReportLine<'_>> {
    let mut out = Vec::new();
    for s in &table.summaries {
        for r in table.rows.iter().filter(|r| r.key == s.key) {
            out.push(ReportLine {
                condition: &r.key.condition,
                number: &r.key.number,
                distractor_count: &r.key.distractors,
                seed: r.seed.to_string(),
                items: r.items,
                ties: r.ties,
                accuracy: r.accuracy,
            });
        }
        for (label, v) in [("MEAN", s.mean), ("SD", s.sd)] {
            out.push(ReportLine {
                condition: &s.key.condition,
                number: &s.key.number,
                distractor_count: &s.key.distractors,
                seed: label.to_string(),
                items: s.items,
                ties: s.ties,
                accuracy: v,
            });
        }
    }
    out
}

pub fn render_report(table: &AccuracyTable, format: ReportFormat) -> String {
    let lines = report_lines(table);
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(REPORT_HEADER).unwrap();
            for l in &lines {
                w.write_record([
                    l.condition,
                    l.number,
                    l.distractor_count,
                    &l.seed,
                    &l.items.to_string(),
                    &l.ties.to_string(),
                    &l.accuracy.to_string(),
                ])
                .unwrap();
            }
            String::from_utf8(w.into_inner().unwrap()).unwrap()
        }
        ReportFormat::Jsonl => {
            let mut s = String::new();
            for l in &lines {
                writeln!(s, "{}", serde_json::to_string(l).unwrap()).unwrap();
            }
            s
        }
    }
}

pub fn emit_report(table: &AccuracyTable, format: ReportFormat, path: &Path) -> Result<(), EvalError> {
    if table.rows.is_empty() {
        return Err(EvalError::Empty);
    }
    std::fs::write(path, render_report(table, format))?;
    Ok(())
}

/// Rebuilds a table from its CSV report.
pub fn read_report_csv(text: &str) -> Result<AccuracyTable, EvalError> {
    let bad = |m: String| EvalError::Report(m);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != REPORT_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    let mut means: BTreeMap<CellKey, (usize, usize, f64)> = BTreeMap::new();
    let mut sds: BTreeMap<CellKey, f64> = BTreeMap::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| rec.get(k).ok_or_else(|| bad(format!("row {}: missing field {k}", i + 1)));
        let key = CellKey {
            condition: field(0)?.to_string(),
            number: field(1)?.to_string(),
            distractors: field(2)?.to_string(),
        };
        let int = |k: usize| -> Result<usize, EvalError> {
            field(k)?.parse().map_err(|_| bad(format!("row {}: bad integer", i + 1)))
        };
        let items = int(4)?;
        let ties = int(5)?;
        let accuracy: f64 = field(6)?.parse().map_err(|_| bad(format!("row {}: bad accuracy", i + 1)))?;
        match field(3)? {
            "MEAN" => {
                means.insert(key, (items, ties, accuracy));
            }
            "SD" => {
                sds.insert(key, accuracy);
            }
            seed => {
                let seed: u64 = seed.parse().map_err(|_| bad(format!("row {}: bad seed", i + 1)))?;
                let successes = (accuracy * items as f64).round() as usize;
                rows.push(CellRow { key, seed, items, successes, ties, accuracy });
            }
        }
    }
    rows.sort_by(|a, b| a.key.cmp(&b.key).then(a.seed.cmp(&b.seed)));
    let mut summaries = Vec::new();
    for group in rows.chunk_by(|a, b| a.key == b.key) {
        let key = group[0].key.clone();
        let (items, ties, mean) =
            *means.get(&key).ok_or_else(|| bad(format!("missing MEAN row for {key:?}")))?;
        let sd = *sds.get(&key).ok_or_else(|| bad(format!("missing SD row for {key:?}")))?;
        summaries.push(CellSummary { key, seeds: group.len(), items, ties, mean, sd });
    }
    Ok(AccuracyTable { rows, summaries })
}

#[derive(Serialize, Deserialize)]
struct OutcomeRecord {
    seed: u64,
    #[serde(flatten)]
    outcome: PairOutcome,
}

/// Per-pair outcomes as JSON lines, each tagged with the model seed.
pub fn write_outcomes(seed: u64, outcomes: &[PairOutcome]) -> String {
    let mut s = String::new();
    for o in outcomes {
        let rec = OutcomeRecord { seed, outcome: o.clone() };
        writeln!(s, "{}", serde_json::to_string(&rec).unwrap()).unwrap();
    }
    s
}

/// Reads outcome lines, grouping them by seed in order of first appearance.
pub fn read_outcomes(text: &str) -> Result<Vec<SeedOutcomes>, EvalError> {
    let mut runs: Vec<SeedOutcomes> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: OutcomeRecord =
            serde_json::from_str(line).map_err(|e| EvalError::Report(format!("outcome line {}: {e}", i + 1)))?;
        match runs.iter_mut().find(|r| r.seed == rec.seed) {
            Some(r) => r.outcomes.push(rec.outcome),
            None => runs.push(SeedOutcomes { seed: rec.seed, outcomes: vec![rec.outcome] }),
        }
    }
    Ok(runs)
}
