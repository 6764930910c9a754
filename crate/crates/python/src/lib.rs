//! Python bindings for agreeprobe.
//!
//! Exposes text normalisation, vocabularies, lexica and suite generation,
//! model training, checkpoint loading, perplexity and minimal-pair scoring.
//!
//! ```python
//! import agreeprobe as ap
//! lex = ap.Lexicon.example()
//! pairs = lex.generate_suite(lengths=[1, 2], main_gender="f")
//! model = ap.Model.load("runs/model-seed1.ckpt")
//! outcomes = model.score(pairs)
//! ```

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use agreeprobe::cli::AnyCheckpoint;
use agreeprobe::corpus::{self, Split};
use agreeprobe::lstm::{self, Checkpoint, GradCheckSetup, save_checkpoint};
use agreeprobe::testgen::{self, Condition, Gender, Number, OovPolicy, SuiteRequest};
use agreeprobe::{PairOutcome, TrainConfig};

fn err<E: Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_all<T: std::str::FromStr>(items: &[String]) -> PyResult<Vec<T>>
where
    T::Err: Display,
{
    items.iter().map(|s| s.parse().map_err(err)).collect()
}

/// Splits a raw line into normalised tokens.
#[pyfunction]
fn normalize_line(text: &str) -> Vec<String> {
    corpus::normalize_line(text)
}

#[pyclass(name = "Vocabulary", frozen)]
struct PyVocabulary(corpus::Vocabulary);

#[pymethods]
impl PyVocabulary {
    /// Keeps the `cap` most frequent tokens of already-normalised lines.
    #[staticmethod]
    fn build(lines: Vec<Vec<String>>, cap: usize) -> PyResult<Self> {
        corpus::build_vocab(&lines, cap).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_tokens(tokens: Vec<String>) -> PyResult<Self> {
        corpus::Vocabulary::from_tokens(tokens).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        corpus::Vocabulary::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    fn id(&self, token: &str) -> Option<u32> {
        self.0.id(token)
    }

    fn token(&self, id: u32) -> Option<String> {
        self.0.token(id).map(str::to_string)
    }

    fn tokens(&self) -> Vec<String> {
        self.0.tokens().to_vec()
    }

    /// Ids of a token list followed by `<eos>`; unknown tokens map to `<unk>`.
    fn encode(&self, tokens: Vec<String>) -> Vec<u32> {
        self.0.encode_line(&tokens)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Vocabulary(size={})", self.0.len())
    }
}

#[pyclass(name = "MinimalPair", get_all, from_py_object)]
#[derive(Clone)]
struct PyMinimalPair {
    prefix: Vec<String>,
    correct: String,
    wrong: String,
    meta: BTreeMap<String, String>,
}

#[pymethods]
impl PyMinimalPair {
    #[new]
    #[pyo3(signature = (prefix, correct, wrong, meta=None))]
    fn new(prefix: Vec<String>, correct: String, wrong: String, meta: Option<BTreeMap<String, String>>) -> Self {
        Self { prefix, correct, wrong, meta: meta.unwrap_or_default() }
    }

    fn __repr__(&self) -> String {
        format!("MinimalPair({:?}, {:?}, {:?})", self.prefix.join(" "), self.correct, self.wrong)
    }
}

impl From<testgen::MinimalPair> for PyMinimalPair {
    fn from(p: testgen::MinimalPair) -> Self {
        Self { prefix: p.prefix, correct: p.correct, wrong: p.wrong, meta: p.meta }
    }
}

impl From<&PyMinimalPair> for testgen::MinimalPair {
    fn from(p: &PyMinimalPair) -> Self {
        Self { prefix: p.prefix.clone(), correct: p.correct.clone(), wrong: p.wrong.clone(), meta: p.meta.clone() }
    }
}

fn to_core(pairs: &[PyMinimalPair]) -> Vec<testgen::MinimalPair> {
    pairs.iter().map(Into::into).collect()
}

#[pyclass(name = "Lexicon", frozen)]
struct PyLexicon(testgen::Lexicon);

#[pymethods]
impl PyLexicon {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        testgen::Lexicon::parse(text, "<string>").map(Self).map_err(err)
    }

    /// Loads a lexicon file; with `vocab`, forms must be in-vocabulary
    /// unless `lenient` drops the offending entries.
    #[staticmethod]
    #[pyo3(signature = (path, vocab=None, lenient=false))]
    fn load(path: PathBuf, vocab: Option<&PyVocabulary>, lenient: bool) -> PyResult<Self> {
        let policy = if lenient { OovPolicy::Lenient } else { OovPolicy::Strict };
        testgen::Lexicon::load(&path, vocab.map(|v| &v.0), policy).map(Self).map_err(err)
    }

    /// The robe/sac lexicon behind the example phrases.
    #[staticmethod]
    fn example() -> Self {
        Self(agreeprobe::synth::example_lexicon())
    }

    /// The lexicon of the synthetic grammar.
    #[staticmethod]
    fn grammar() -> Self {
        Self(agreeprobe::synth::grammar_lexicon())
    }

    fn surface_forms(&self) -> Vec<String> {
        self.0.surface_forms().into_iter().map(str::to_string).collect()
    }

    /// Enumerates minimal pairs. Conditions and numbers default to all.
    #[pyo3(signature = (conditions=None, lengths=vec![1], numbers=None, main_gender=None))]
    fn generate_suite(
        &self,
        conditions: Option<Vec<String>>,
        lengths: Vec<usize>,
        numbers: Option<Vec<String>>,
        main_gender: Option<String>,
    ) -> PyResult<Vec<PyMinimalPair>> {
        let req = SuiteRequest {
            conditions: conditions.map_or(Ok(Condition::ALL.to_vec()), |c| parse_all(&c))?,
            lengths,
            numbers: numbers.map_or(Ok(Number::ALL.to_vec()), |n| parse_all(&n))?,
            main_gender: main_gender.map(|g| g.parse::<Gender>()).transpose().map_err(err)?,
        };
        let suite = testgen::generate_suite(&self.0, &req).map_err(err)?;
        Ok(suite.into_iter().map(Into::into).collect())
    }
}

/// Reads a JSON-lines suite, including externally produced ones.
#[pyfunction]
fn load_suite(path: PathBuf) -> PyResult<Vec<PyMinimalPair>> {
    let suite = testgen::load_external_suite(&path).map_err(err)?;
    Ok(suite.into_iter().map(Into::into).collect())
}

#[pyfunction]
fn save_suite(pairs: Vec<PyMinimalPair>, path: PathBuf) -> PyResult<()> {
    std::fs::write(&path, testgen::suite_to_string(&to_core(&pairs))).map_err(err)
}

fn outcome_dict<'py>(py: Python<'py>, o: &PairOutcome) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("prefix", &o.prefix)?;
    d.set_item("correct", &o.correct)?;
    d.set_item("wrong", &o.wrong)?;
    d.set_item("meta", &o.meta)?;
    d.set_item("log_prob_correct", o.log_prob_correct)?;
    d.set_item("log_prob_incorrect", o.log_prob_incorrect)?;
    d.set_item("success", o.success)?;
    d.set_item("tie", o.tie)?;
    Ok(d)
}

/// A trained or loaded LSTM language model at its stored precision.
#[pyclass(name = "Model", frozen)]
struct PyModel(AnyCheckpoint);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        AnyCheckpoint::load(&path).map(Self).map_err(|e| err(format!("{e:#}")))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        match &self.0 {
            AnyCheckpoint::F32(c) => save_checkpoint(&c.params, &c.vocab, c.seed, &path),
            AnyCheckpoint::F64(c) => save_checkpoint(&c.params, &c.vocab, c.seed, &path),
        }
        .map_err(err)
    }

    #[getter]
    fn vocab(&self) -> PyVocabulary {
        PyVocabulary(self.0.vocab().clone())
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed()
    }

    #[getter]
    fn precision(&self) -> &'static str {
        match self.0 {
            AnyCheckpoint::F32(_) => "f32",
            AnyCheckpoint::F64(_) => "f64",
        }
    }

    /// Perplexity of an id stream, predicting every token after the first.
    fn perplexity(&self, py: Python<'_>, ids: Vec<u32>) -> PyResult<f64> {
        py.detach(|| self.0.perplexity(&ids)).map_err(|e| err(format!("{e:#}")))
    }

    /// Scores minimal pairs and returns one dict per pair. With `lenient`,
    /// pairs containing unknown tokens are dropped.
    #[pyo3(signature = (pairs, sentence_start=false, lenient=false))]
    fn score<'py>(
        &self,
        py: Python<'py>,
        pairs: Vec<PyMinimalPair>,
        sentence_start: bool,
        lenient: bool,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let core = to_core(&pairs);
        let policy = if lenient { OovPolicy::Lenient } else { OovPolicy::Strict };
        let (outcomes, _) = py.detach(|| self.0.score(&core, policy, sentence_start)).map_err(|e| err(format!("{e:#}")))?;
        outcomes.iter().map(|o| outcome_dict(py, o)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Model(vocab={}, seed={}, precision={})", self.0.vocab().len(), self.0.seed(), self.precision())
    }
}

/// Trains one model on raw text lines. Returns the model with the best
/// validation perplexity and the per-epoch log.
#[pyfunction]
#[pyo3(signature = (
    train_lines, valid_lines, *, cap=50_000, layers=2, hidden=650, embed_dim=650, batch_size=128,
    dropout=0.2, lr=20.0, bptt=35, clip=0.25, epochs=40, anneal=4.0, init_range=0.1, seed=1111,
    precision="f32"
))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    train_lines: Vec<String>,
    valid_lines: Vec<String>,
    cap: usize,
    layers: usize,
    hidden: usize,
    embed_dim: usize,
    batch_size: usize,
    dropout: f64,
    lr: f64,
    bptt: usize,
    clip: f64,
    epochs: usize,
    anneal: f64,
    init_range: f64,
    seed: u64,
    precision: &str,
) -> PyResult<(PyModel, Vec<Bound<'py, PyDict>>)> {
    let cfg = TrainConfig {
        layers,
        hidden,
        embed_dim,
        batch_size,
        dropout_p: dropout,
        lr_initial: lr,
        bptt_len: bptt,
        clip_norm: clip,
        max_epochs: epochs,
        anneal_factor: anneal,
        init_range,
        seed,
    };
    let f64_mode = match precision {
        "f32" => false,
        "f64" => true,
        other => return Err(err(format!("precision must be f32 or f64, got `{other}`"))),
    };
    let run = || -> Result<(AnyCheckpoint, lstm::TrainLog), String> {
        let tr: Vec<Vec<String>> = train_lines.iter().map(|l| corpus::normalize_line(l)).collect();
        let va: Vec<Vec<String>> = valid_lines.iter().map(|l| corpus::normalize_line(l)).collect();
        let vocab = corpus::build_vocab(&tr, cap).map_err(|e| e.to_string())?;
        let tr = corpus::encode(&tr, &vocab, Split::Train);
        let va = corpus::encode(&va, &vocab, Split::Valid);
        let v = vocab.len();
        Ok(if f64_mode {
            let (params, log) = lstm::train::<f64>(&cfg, v, &tr, &va).map_err(|e| e.to_string())?;
            (AnyCheckpoint::F64(Checkpoint { params, vocab, seed }), log)
        } else {
            let (params, log) = lstm::train::<f32>(&cfg, v, &tr, &va).map_err(|e| e.to_string())?;
            (AnyCheckpoint::F32(Checkpoint { params, vocab, seed }), log)
        })
    };
    let (ck, log) = py.detach(run).map_err(err)?;
    let records = log
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("epoch", r.epoch)?;
            d.set_item("lr", r.lr)?;
            d.set_item("train_loss", r.train_loss)?;
            d.set_item("valid_ppl", r.valid_ppl)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((PyModel(ck), records))
}

/// Largest relative error between the analytic and central-difference
/// gradients of a small random model.
#[pyfunction]
#[pyo3(signature = (seed=0, eps=1e-5, inject_bug=false))]
fn gradcheck(py: Python<'_>, seed: u64, eps: f64, inject_bug: bool) -> PyResult<f64> {
    let setup = GradCheckSetup { seed, eps, ..GradCheckSetup::default() };
    let report = py.detach(|| lstm::gradient_check(&setup, inject_bug)).map_err(err)?;
    Ok(report.max_rel_error)
}

#[pymodule]
#[pyo3(name = "agreeprobe")]
fn agreeprobe_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyVocabulary>()?;
    m.add_class::<PyMinimalPair>()?;
    m.add_class::<PyLexicon>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(normalize_line, m)?)?;
    m.add_function(wrap_pyfunction!(load_suite, m)?)?;
    m.add_function(wrap_pyfunction!(save_suite, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    Ok(())
}
