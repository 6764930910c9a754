//! Acceptance checks, one per criterion. Each prints a single `PASS`/`FAIL`
//! line with the measured quantity; the process fails if any check does.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use agreeprobe::corpus::{Block, EncodedCorpus, Split, Vocabulary, build_vocab, encode};
use agreeprobe::evaluator::{
    Grouping, ModelScorer, RandomScorer, ReportFormat, SeedOutcomes, aggregate, evaluate_suite, read_report_csv,
    render_report, score_pair,
};
use agreeprobe::lstm::{
    Dropout, GradCheckSetup, HiddenState, LayerParams, ModelDims, ModelParams, checkpoint_bytes, gradient_check,
    load_checkpoint, loss_and_grads, lstm_cell, perplexity, save_checkpoint, train,
};
use agreeprobe::numerics::{Matrix, Rng, softmax};
use agreeprobe::synth::{GrammarConfig, generate_corpus, grammar_lexicon, held_out_suite};
use agreeprobe::testgen::{
    Condition, DistractorPhrase, Gender, Lexicon, MinimalPair, NounEntry, Number, OovPolicy, PredicateEntry,
    PredicateKind, SuiteRequest, generate_suite, load_external_suite, read_suite, suite_to_string,
};
use agreeprobe::{TrainConfig, testgen::ArticleTable};

fn verdict(criterion: &str, pass: bool, detail: String) {
    println!("{} {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{criterion}: {detail}");
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agreeprobe"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(out.status.success(), "{cmd:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn gradient_correctness() {
    let setup = GradCheckSetup {
        dims: ModelDims { vocab: 17, embed: 6, hidden: 6, layers: 2 },
        batch: 2,
        bptt: 5,
        eps: 1e-5,
        ..GradCheckSetup::default()
    };
    let t0 = Instant::now();
    let r = gradient_check(&setup, false).unwrap();
    let took = t0.elapsed();
    verdict(
        "gradient correctness",
        r.max_rel_error < 1e-4 && r.checked == setup.dims.num_params() && took < Duration::from_secs(60),
        format!("max relative error {:.3e} over {} parameters in {:.2?} (bound 1e-4, 60 s)", r.max_rel_error, r.checked, took),
    );
}

fn uniform_model_sanity() {
    let v = 37;
    let d = ModelDims { vocab: v, embed: 5, hidden: 4, layers: 2 };
    let p = ModelParams::<f64>::zeros(d);
    let mut rng = Rng::new(3);
    let block = Block {
        batch_size: 3,
        len: 7,
        inputs: (0..21).map(|_| rng.below(v) as u32).collect(),
        targets: (0..21).map(|_| rng.below(v) as u32).collect(),
    };
    let (loss, _, _) = loss_and_grads(&p, &block, &HiddenState::for_model(&p, 3), Dropout::Off).unwrap();
    let ids: Vec<u32> = (0..1000).map(|_| rng.below(v) as u32).collect();
    let ppl = perplexity(&p, &ids).unwrap();
    let loss_err = (loss - (v as f64).ln()).abs();
    let ppl_err = (ppl - v as f64).abs();
    verdict(
        "uniform-model sanity",
        loss_err <= 1e-9 && ppl_err <= 1e-6 * v as f64,
        format!("|loss - ln V| = {loss_err:.2e}, |ppl - V| = {ppl_err:.2e} for V = {v}"),
    );
}

fn softmax_properties() {
    let mut rng = Rng::new(11);
    let (mut worst_sum, mut worst_shift, mut argmax_ok) = (0.0f64, 0.0f64, true);
    let n = 1000;
    for _ in 0..n {
        let len = 1 + rng.below(64);
        let z: Vec<f64> = (0..len).map(|_| rng.uniform_range(-30.0, 30.0)).collect();
        let s = softmax(&z).unwrap();
        worst_sum = worst_sum.max((s.iter().sum::<f64>() - 1.0).abs());
        let c = rng.uniform_range(-100.0, 100.0);
        let shifted: Vec<f64> = z.iter().map(|x| x + c).collect();
        let t = softmax(&shifted).unwrap();
        worst_shift = worst_shift.max(s.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let am = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        argmax_ok &= am(&z) == am(&s);
    }
    verdict(
        "softmax properties",
        worst_sum <= 1e-12 && worst_shift <= 1e-12 && argmax_ok,
        format!("{n} vectors: sum error {worst_sum:.2e}, shift error {worst_shift:.2e}, argmax preserved {argmax_ok}"),
    );
}

/// Independent scalar LSTM step with gate order input, forget, cell, output.
fn oracle_cell(x: &[f64], h: &[f64], c: &[f64], w: &[Vec<f64>], u: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let pre = |r: usize| {
        let mut s = b[r];
        for j in 0..x.len() {
            s += w[r][j] * x[j];
        }
        for j in 0..n {
            s += u[r][j] * h[j];
        }
        s
    };
    let mut h2 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    for k in 0..n {
        let i = sigmoid(pre(k));
        let f = sigmoid(pre(n + k));
        let g = pre(2 * n + k).tanh();
        let o = sigmoid(pre(3 * n + k));
        c2[k] = f * c[k] + i * g;
        h2[k] = o * c2[k].tanh();
    }
    (h2, c2)
}

fn cell_oracle() {
    let mut rng = Rng::new(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (inp, hid) = (1 + rng.below(6), 1 + rng.below(6));
        let mut draw = |n: usize, s: f64| (0..n).map(|_| rng.uniform_range(-s, s)).collect::<Vec<f64>>();
        let w: Vec<Vec<f64>> = (0..4 * hid).map(|_| draw(inp, 1.0)).collect();
        let u: Vec<Vec<f64>> = (0..4 * hid).map(|_| draw(hid, 1.0)).collect();
        let b = draw(4 * hid, 1.0);
        let (x, h, c) = (draw(inp, 2.0), draw(hid, 1.0), draw(hid, 2.0));
        let layer = LayerParams {
            w: Matrix::from_vec(4 * hid, inp, w.concat()).unwrap(),
            u: Matrix::from_vec(4 * hid, hid, u.concat()).unwrap(),
            b: b.clone(),
        };
        let (h1, c1) = lstm_cell(&x, &h, &c, &layer).unwrap();
        let (h2, c2) = oracle_cell(&x, &h, &c, &w, &u, &b);
        for (a, e) in h1.iter().zip(&h2).chain(c1.iter().zip(&c2)) {
            worst = worst.max((a - e).abs() / e.abs().max(1e-12));
        }
    }
    verdict("cell oracle", worst <= 1e-12, format!("100 instances, worst relative error {worst:.2e}"));
}

fn template_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("suite.jsonl");
    run_ok(bin().args(["gen-testset", "--main-gender", "f", "--lengths", "1,2,5", "--lexicon"]).arg(data_file("example_lexicon.txt")).arg("--out").arg(&out));
    let suite = load_external_suite(&out).unwrap();
    let got: HashSet<(String, String, String)> =
        suite.iter().map(|p| (p.prefix_text(), p.correct.clone(), p.wrong.clone())).collect();
    let expected = [
        ("la robe est", "bleue", "bleu"),
        ("les robes sont", "bleues", "bleus"),
        ("la robe avec le sac est", "bleue", "bleu"),
        ("les robes avec les sacs sont", "bleues", "bleus"),
        ("la robe avec les sacs est", "bleue", "bleu"),
        ("les robes avec le sac sont", "bleues", "bleus"),
        ("la robe est", "tombée", "tombé"),
        ("les robes sont", "tombées", "tombés"),
        ("la robe avec le sac est", "tombée", "tombé"),
        ("les robes avec les sacs sont", "tombées", "tombés"),
        ("la robe avec les sacs est", "tombée", "tombé"),
        ("les robes avec le sac sont", "tombées", "tombés"),
        ("la robe est très", "bleue", "bleu"),
        ("la robe que j' aime beaucoup est", "bleue", "bleu"),
        ("la robe avec le sac est très", "bleue", "bleu"),
        ("la robe avec le sac que j' aime beaucoup est", "bleue", "bleu"),
        ("la robe avec les sacs est très", "bleue", "bleu"),
        ("la robe avec les sacs que j' aime beaucoup est", "bleue", "bleu"),
    ];
    let missing: Vec<_> = expected
        .iter()
        .filter(|(p, c, w)| !got.contains(&(p.to_string(), c.to_string(), w.to_string())))
        .collect();
    verdict(
        "template fidelity",
        missing.is_empty(),
        format!("{} of {} example phrase pairs reproduced byte-exactly; missing {missing:?}", expected.len() - missing.len(), expected.len()),
    );
}

fn random_lexicon(rng: &mut Rng) -> Lexicon {
    let mut nouns = Vec::new();
    for (g, tag) in [(Gender::Masculine, "m"), (Gender::Feminine, "f")] {
        for k in 0..1 + rng.below(3) {
            nouns.push(NounEntry { lemma: format!("n{tag}{k}"), gender: g, singular: format!("n{tag}{k}"), plural: format!("n{tag}{k}s") });
        }
    }
    let mut predicates = Vec::new();
    for k in 0..2 + rng.below(4) {
        let kind = if rng.bernoulli(0.5) { PredicateKind::Adjective } else { PredicateKind::Participle };
        let l = format!("p{k}");
        // Some predicates share masculine and feminine forms in one number.
        let f_sg = if rng.bernoulli(0.2) { l.clone() } else { format!("{l}e") };
        let f_pl = if rng.bernoulli(0.2) { format!("{l}s") } else { format!("{l}es") };
        predicates.push(PredicateEntry { lemma: l.clone(), kind, m_sg: l.clone(), f_sg, m_pl: format!("{l}s"), f_pl });
    }
    let mut distractors = Vec::new();
    for k in 0..1 + rng.below(4) {
        let len = rng.below(4);
        let sg: Vec<String> = (0..len).map(|j| format!("d{k}{j}")).collect();
        let pl: Vec<String> = (0..len).map(|j| format!("d{k}{j}p")).collect();
        distractors.push(DistractorPhrase::new(&sg.join(" "), &pl.join(" ")).unwrap());
    }
    Lexicon { nouns, predicates, distractors, articles: ArticleTable::default(), preposition: "avec".into() }
}

/// Counts pairs by enumerating every (condition, number, length, noun,
/// attractor, predicate, distractor) tuple and keeping the admissible ones.
fn brute_force_count(lex: &Lexicon, req: &SuiteRequest) -> usize {
    let mut n = 0;
    let attractor_options: Vec<Option<&NounEntry>> = std::iter::once(None).chain(lex.nouns.iter().map(Some)).collect();
    for &cond in &req.conditions {
        for &num in &req.numbers {
            for &len in &req.lengths {
                for noun in &lex.nouns {
                    for att in &attractor_options {
                        for pred in &lex.predicates {
                            for dist in &lex.distractors {
                                let att_ok = match att {
                                    None => !cond.has_attractor(),
                                    Some(a) => cond.has_attractor() && a.gender != noun.gender,
                                };
                                if att_ok
                                    && dist.len() == len
                                    && req.main_gender.is_none_or(|g| g == noun.gender)
                                    && pred.kind == cond.predicate_kind()
                                    && pred.form(Gender::Masculine, num) != pred.form(Gender::Feminine, num)
                                {
                                    n += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    n
}

fn pair_invariants(lex: &Lexicon, p: &MinimalPair) -> Result<(), String> {
    p.validate().map_err(|e| e.to_string())?;
    let noun = lex.noun(p.meta_value("noun").unwrap()).unwrap();
    let num: Number = p.meta_value("number").unwrap().parse().unwrap();
    let cond: Condition = p.condition().unwrap().parse().unwrap();
    let pred = lex.predicate(p.meta_value("predicate").unwrap()).unwrap();
    if p.correct != pred.form(noun.gender, num) || p.wrong != pred.form(noun.gender.opposite(), num) {
        return Err(format!("targets of {p:?} differ in more than gender"));
    }
    if num == Number::Plural && p.prefix[0] != lex.articles.plural {
        return Err(format!("plural article in {p:?} is not the shared form"));
    }
    if let Some(an) = cond.attractor_number(num) {
        let att = lex.noun(p.meta_value("attractor").unwrap()).unwrap();
        if att.gender == noun.gender || p.prefix[4] != att.form(an) || p.prefix[3] != lex.articles.get(att.gender, an) {
            return Err(format!("attractor of {p:?} violates opposition"));
        }
        if an == Number::Plural && p.prefix[3] != lex.articles.plural {
            return Err(format!("plural attractor article in {p:?} is gendered"));
        }
    }
    Ok(())
}

fn suite_size_oracle() {
    let mut rng = Rng::new(21);
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut total_pairs = 0;
    for k in 0..8 {
        let lex = random_lexicon(&mut rng);
        let mut lengths: Vec<usize> = lex.distractors.iter().map(|d| d.len()).collect();
        lengths.sort();
        lengths.dedup();
        let req = SuiteRequest {
            conditions: Condition::ALL.to_vec(),
            lengths,
            numbers: Number::ALL.to_vec(),
            main_gender: if k % 3 == 2 { Some(Gender::Feminine) } else { None },
        };
        let suite = generate_suite(&lex, &req).unwrap();
        let want = brute_force_count(&lex, &req);
        if suite.len() != want {
            failures.push(format!("lexicon {k}: generated {} vs enumerated {want}", suite.len()));
        }
        for p in &suite {
            if let Err(e) = pair_invariants(&lex, p) {
                failures.push(e);
            }
        }
        total_pairs += suite.len();
        checked += 1;
    }
    verdict(
        "suite-size oracle",
        failures.is_empty() && checked >= 5,
        format!("{checked} random lexica, {total_pairs} pairs; failures {failures:?}"),
    );
}

fn unigram_perplexity(train: &EncodedCorpus, valid: &EncodedCorpus, vocab: usize) -> f64 {
    let mut counts = vec![1.0f64; vocab];
    for &id in &train.ids {
        counts[id as usize] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    // Same targets as model perplexity: every token after the first.
    let nll: f64 = valid.ids[1..].iter().map(|&id| -(counts[id as usize] / total).ln()).sum();
    (nll / (valid.ids.len() - 1) as f64).exp()
}

fn end_to_end_synthetic_grammar() {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let t0 = Instant::now();
        let lex = grammar_lexicon();
        let gcfg = GrammarConfig::default();
        let corpus = generate_corpus(&lex, &gcfg).unwrap();
        let vocab = build_vocab(&corpus.train, 10_000).unwrap();
        let tr = encode(&corpus.train, &vocab, Split::Train);
        let va = encode(&corpus.valid, &vocab, Split::Valid);
        let cfg = TrainConfig {
            layers: 2,
            hidden: 64,
            embed_dim: 64,
            batch_size: 16,
            lr_initial: 1.0,
            max_epochs: 10,
            bptt_len: 5,
            dropout_p: 0.0,
            seed: 1,
            ..TrainConfig::default()
        };
        let (params, log) = train::<f32>(&cfg, vocab.len(), &tr, &va).unwrap();
        let valid_ppl = log.best_valid_ppl();
        let unigram = unigram_perplexity(&tr, &va, vocab.len());

        let suite = held_out_suite(&lex, &[Condition::NA], &[0, 1, 2], gcfg.holdout_modulus).unwrap();
        let scorer = ModelScorer { params: &params, vocab: &vocab, sentence_start: true };
        let ev = evaluate_suite(&scorer, &suite, OovPolicy::Strict).unwrap();
        let acc = ev.outcomes.iter().filter(|o| o.success).count() as f64 / ev.outcomes.len() as f64;
        let chance = evaluate_suite(&RandomScorer { seed: 7 }, &suite, OovPolicy::Strict).unwrap();
        let n = chance.outcomes.len() as f64;
        let chance_acc = chance.outcomes.iter().filter(|o| o.success).count() as f64 / n;
        let three_sigma = 3.0 * (0.25 / n).sqrt();
        let took = t0.elapsed();

        verdict(
            "end-to-end synthetic grammar",
            vocab.len() >= 150
                && vocab.len() <= 250
                && acc >= 0.95
                && (chance_acc - 0.5).abs() <= three_sigma
                && valid_ppl < unigram
                && took < Duration::from_secs(15 * 60),
            format!(
                "V = {}, {} train tokens, NA 0-2 distractor accuracy {acc:.4} on {} held-out pairs (chance scorer {chance_acc:.4}), \
                 valid ppl {valid_ppl:.3} vs unigram {unigram:.3}, {:.1?}",
                vocab.len(),
                tr.len(),
                ev.outcomes.len(),
                took
            ),
        );
    });
}

/// Hand-set 1-layer model with embedding and hidden size 2 over
/// `<unk>`, `<eos>`, `x`.
fn tiny_model() -> (ModelParams<f64>, Vocabulary) {
    let vocab = Vocabulary::from_tokens(["x"]).unwrap();
    let d = ModelDims { vocab: 3, embed: 2, hidden: 2, layers: 1 };
    let mut p = ModelParams::<f64>::zeros(d);
    p.embedding = Matrix::from_vec(3, 2, vec![0.0, 0.0, 0.5, -0.5, 1.0, 0.3]).unwrap();
    let l = &mut p.layers[0];
    l.w = Matrix::from_vec(8, 2, vec![
        0.5, 0.1, -0.3, 0.8, // input gate
        0.9, 0.2, 0.4, -0.1, // forget gate
        1.2, -0.7, 0.3, 0.6, // cell candidate
        0.2, 0.4, -0.5, 0.9, // output gate
    ])
    .unwrap();
    l.u = Matrix::from_vec(8, 2, vec![
        0.3, -0.2, 0.1, 0.4, //
        0.6, 0.1, -0.2, 0.5, //
        -0.9, 0.8, 1.1, -0.4, //
        0.2, 0.3, 0.7, -0.6,
    ])
    .unwrap();
    l.b = vec![0.1, -0.1, 1.0, 1.0, 0.0, 0.2, 0.0, -0.3];
    p.w_out = Matrix::from_vec(3, 2, vec![0.4, 1.5, -1.0, 2.0, 0.3, -0.2]).unwrap();
    // `<eos>` is preferred after one or two `x` and `<unk>` after more.
    p.b_out = vec![0.0, 0.55, 0.1];
    (p, vocab)
}

/// Logits after feeding `prefix` through the tiny model, by hand.
fn tiny_oracle_logits(p: &ModelParams<f64>, prefix: &[u32]) -> [f64; 3] {
    let l = &p.layers[0];
    let (mut h, mut c) = ([0.0f64; 2], [0.0f64; 2]);
    for &id in prefix {
        let x = p.embedding.row(id as usize);
        let pre = |r: usize| l.b[r] + l.w.get(r, 0) * x[0] + l.w.get(r, 1) * x[1] + l.u.get(r, 0) * h[0] + l.u.get(r, 1) * h[1];
        let mut nh = [0.0; 2];
        let mut nc = [0.0; 2];
        for k in 0..2 {
            let i = sigmoid(pre(k));
            let f = sigmoid(pre(2 + k));
            let g = pre(4 + k).tanh();
            let o = sigmoid(pre(6 + k));
            nc[k] = f * c[k] + i * g;
            nh[k] = o * nc[k].tanh();
        }
        h = nh;
        c = nc;
    }
    let z = |v: usize| p.b_out[v] + p.w_out.get(v, 0) * h[0] + p.w_out.get(v, 1) * h[1];
    [z(0), z(1), z(2)]
}

fn scoring_oracle() {
    let (p, vocab) = tiny_model();
    let pairs: Vec<MinimalPair> = (1..=4)
        .map(|k| MinimalPair {
            prefix: vec!["x".to_string(); k],
            correct: "<eos>".into(),
            wrong: "<unk>".into(),
            meta: BTreeMap::new(),
        })
        .collect();
    let mut agree = 0;
    let mut decisions = Vec::new();
    let mut worst = 0.0f64;
    for pair in &pairs {
        let out = score_pair(&p, &vocab, pair).unwrap();
        let ids = vec![2u32; pair.prefix.len()];
        let z = tiny_oracle_logits(&p, &ids);
        let (c, w) = (vocab.id(&pair.correct).unwrap() as usize, vocab.id(&pair.wrong).unwrap() as usize);
        let oracle_success = z[c] > z[w];
        // Shared softmax: the log-probability gap equals the logit gap.
        worst = worst.max(((out.log_prob_correct - out.log_prob_incorrect) - (z[c] - z[w])).abs());
        agree += (out.success == oracle_success) as usize;
        decisions.push(oracle_success);
    }
    let mixed = decisions.contains(&true) && decisions.contains(&false);
    verdict(
        "scoring oracle",
        agree == pairs.len() && mixed && decisions == [true, true, false, false] && worst < 1e-12,
        format!("{agree}/{} decisions match hand enumeration {decisions:?}; logit-gap error {worst:.2e}", pairs.len()),
    );
}

fn files_equal(a: &Path, b: &Path) -> bool {
    std::fs::read(a).unwrap() == std::fs::read(b).unwrap()
}

fn determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut mismatches = Vec::new();
    run_ok(bin().args(["synth", "--train-tokens", "6000", "--valid-tokens", "800", "--test-tokens", "800", "--out"]).arg(d.join("corpus")));
    for run in ["a", "b"] {
        let c = d.join("corpus");
        run_ok(bin().arg("preprocess").arg("--train").arg(c.join("train.txt")).arg("--valid").arg(c.join("valid.txt"))
            .arg("--test").arg(c.join("test.txt")).arg("--out").arg(d.join(format!("data-{run}"))));
        run_ok(bin().args(["train", "--seeds", "5", "--layers", "1", "--hidden", "16", "--embed-dim", "16", "--batch-size", "4",
            "--bptt", "10", "--epochs", "2", "--lr", "1", "--data"]).arg(d.join("data-a")).arg("--out").arg(d.join(format!("runs-{run}"))));
        run_ok(bin().args(["gen-testset", "--conditions", "NA,NANO", "--lengths", "0,1", "--lexicon"]).arg(data_file("grammar_lexicon.txt"))
            .arg("--out").arg(d.join(format!("suite-{run}.jsonl"))));
        run_ok(bin().arg("score").arg("--checkpoint").arg(d.join("runs-a/model-seed5.ckpt")).arg("--suite").arg(d.join("suite-a.jsonl"))
            .arg("--report").arg(d.join(format!("report-{run}.csv"))).arg("--outcomes").arg(d.join(format!("outcomes-{run}.jsonl"))));
    }
    for f in ["data-{}/vocab.tsv", "data-{}/train.ids", "data-{}/valid.ids", "data-{}/test.ids", "runs-{}/model-seed5.ckpt",
        "runs-{}/train-log-seed5.csv", "suite-{}.jsonl", "report-{}.csv", "outcomes-{}.jsonl"] {
        if !files_equal(&d.join(f.replace("{}", "a")), &d.join(f.replace("{}", "b"))) {
            mismatches.push(f.replace("{}", "*"));
        }
    }
    let ck = load_checkpoint::<f32>(&d.join("runs-a/model-seed5.ckpt")).unwrap();
    let reserialised = checkpoint_bytes(&ck.params, &ck.vocab, ck.seed).unwrap();
    let round_trip = reserialised == std::fs::read(d.join("runs-a/model-seed5.ckpt")).unwrap();
    let again = d.join("again.ckpt");
    save_checkpoint(&ck.params, &ck.vocab, ck.seed, &again).unwrap();
    let reloaded = load_checkpoint::<f32>(&again).unwrap();
    let bit_exact = round_trip
        && reloaded.params.to_flat().iter().zip(ck.params.to_flat()).all(|(a, b)| a.to_bits() == b.to_bits())
        && reloaded.vocab == ck.vocab;
    verdict(
        "determinism",
        mismatches.is_empty() && bit_exact,
        format!("repeated preprocess/train/gen-testset/score outputs differing: {mismatches:?}; checkpoint round trip bit-exact {bit_exact}"),
    );
}

fn external_suite_replication_path() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let records = [
        r#"{"prefix":"les pilotes","correct":"retournent","wrong":"retourne","meta":{"condition":"simple_agrmt"}}"#,
        r#"{"prefix":"le pilote","correct":"retourne","wrong":"retournent","meta":{"condition":"simple_agrmt"}}"#,
        r#"{"prefix":"les pilotes que le garçon aime","correct":"retournent","wrong":"retourne","meta":{"condition":"obj_rel_across"}}"#,
        r#"{"prefix":"le pilote que les garçons aiment","correct":"retourne","wrong":"retournent","meta":{"condition":"obj_rel_across"}}"#,
    ];
    let suite_path = d.join("external.jsonl");
    std::fs::write(&suite_path, records.join("\n") + "\n").unwrap();
    let loaded = load_external_suite(&suite_path).unwrap();
    let round_trip = read_suite(suite_to_string(&loaded).as_bytes()).unwrap() == loaded;
    let first_ok = loaded[0].prefix == ["les", "pilotes"] && loaded[0].correct == "retournent" && loaded[0].wrong == "retourne";

    let vocab = Vocabulary::from_tokens("les le pilotes pilote retournent retourne que garçon garçons aime aiment".split(' ')).unwrap();
    let d_ = ModelDims { vocab: vocab.len(), embed: 8, hidden: 8, layers: 2 };
    let mut checkpoints = Vec::new();
    for seed in [1u64, 2] {
        let p = ModelParams::<f32>::init(d_, 0.5, &mut Rng::new(seed));
        let path = d.join(format!("m{seed}.ckpt"));
        save_checkpoint(&p, &vocab, seed, &path).unwrap();
        checkpoints.push(path);
    }
    let report = d.join("report.csv");
    run_ok(bin().arg("score").arg("--checkpoint").args(&checkpoints).arg("--suite").arg(&suite_path).arg("--report").arg(&report));
    let table = read_report_csv(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let conditions: HashSet<&str> = table.summaries.iter().map(|s| s.key.condition.as_str()).collect();
    let rows_ok = conditions == HashSet::from(["simple_agrmt", "obj_rel_across"])
        && table.rows.len() == 4
        && table.summaries.iter().all(|s| s.items == 4 && s.seeds == 2);

    // The library path agrees with the CLI report.
    let mut runs = Vec::new();
    for (seed, path) in [1u64, 2].iter().zip(&checkpoints) {
        let ck = load_checkpoint::<f32>(path).unwrap();
        let scorer = ModelScorer::new(&ck.params, &ck.vocab);
        runs.push(SeedOutcomes { seed: *seed, outcomes: evaluate_suite(&scorer, &loaded, OovPolicy::Strict).unwrap().outcomes });
    }
    let lib_table = aggregate(&runs, &Grouping::PerDistractorCount).unwrap();
    let same = render_report(&lib_table, ReportFormat::Csv) == std::fs::read_to_string(&report).unwrap();
    verdict(
        "external-suite replication path",
        round_trip && first_ok && rows_ok && same,
        format!("{} records loaded, round trip {round_trip}, conditions {conditions:?}, report matches library {same}", loaded.len()),
    );
}

fn main() -> std::process::ExitCode {
    let checks: [(&str, fn()); 10] = [
        ("gradient correctness", gradient_correctness),
        ("uniform-model sanity", uniform_model_sanity),
        ("softmax properties", softmax_properties),
        ("cell oracle", cell_oracle),
        ("template fidelity", template_fidelity),
        ("suite-size oracle", suite_size_oracle),
        ("end-to-end synthetic grammar", end_to_end_synthetic_grammar),
        ("scoring oracle", scoring_oracle),
        ("determinism", determinism),
        ("external-suite replication path", external_suite_replication_path),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        if let Err(e) = std::panic::catch_unwind(check) {
            failed += 1;
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            // Failed verdicts already printed their line.
            if !msg.as_deref().is_some_and(|m| m.starts_with(name)) {
                println!("FAIL {name}: {}", msg.unwrap_or_else(|| "panicked".into()));
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 { std::process::ExitCode::SUCCESS } else { std::process::ExitCode::FAILURE }
}
