//! Artificial agreement grammar for desk-scale end-to-end runs.
//!
//! Sentences follow the test-suite template with every agreement honoured:
//!
//! ```text
//! ART(g, n) NOUN(n) [avec ART(g', n') NOUN(n')] DISTRACTOR(n) PRED(g, n)
//! ```
//!
//! A fixed fraction of (noun, predicate) combinations never occurs in any
//! split. Suites built from those combinations test whether a model has
//! learned noun gender rather than memorised co-occurrences.

use crate::numerics::Rng;
use crate::testgen::{
    Condition, Lexicon, MinimalPair, NounEntry, Number, PredicateKind, SuiteRequest, TestgenError,
    generate_suite,
};

pub const GRAMMAR_LEXICON: &str = include_str!("../data/grammar_lexicon.txt");
pub const EXAMPLE_LEXICON: &str = include_str!("../data/example_lexicon.txt");

/// The lexicon of the artificial grammar.
pub fn grammar_lexicon() -> Lexicon {
    Lexicon::parse(GRAMMAR_LEXICON, "grammar_lexicon.txt").expect("bundled lexicon is valid")
}

/// The robe/sac lexicon that reproduces the example test phrases.
pub fn example_lexicon() -> Lexicon {
    Lexicon::parse(EXAMPLE_LEXICON, "example_lexicon.txt").expect("bundled lexicon is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrammarConfig {
    pub train_tokens: usize,
    pub valid_tokens: usize,
    pub test_tokens: usize,
    /// Probability that a sentence carries an attractor phrase.
    pub attractor_prob: f64,
    /// Probability that the predicate is a participle rather than an adjective.
    pub participle_prob: f64,
    /// One in `holdout_modulus` (noun, predicate) combinations is held out;
    /// 0 disables holding out.
    pub holdout_modulus: usize,
    pub seed: u64,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        Self {
            train_tokens: 100_000,
            valid_tokens: 10_000,
            test_tokens: 10_000,
            attractor_prob: 0.3,
            participle_prob: 0.3,
            holdout_modulus: 5,
            seed: 2024,
        }
    }
}

/// Tokenised sentences per split, without `<eos>` markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub train: Vec<Vec<String>>,
    pub valid: Vec<Vec<String>>,
    pub test: Vec<Vec<String>>,
}

impl SyntheticCorpus {
    pub fn split_text(lines: &[Vec<String>]) -> String {
        let mut s = String::new();
        for l in lines {
            s.push_str(&l.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Whether the combination of the `noun`-th noun and `pred`-th predicate is
/// withheld from the corpus.
pub fn is_held_out(noun: usize, pred: usize, modulus: usize) -> bool {
    modulus > 0 && (noun * 7 + pred) % modulus == 0
}

fn held_out_lemmas(lex: &Lexicon, noun: &str, pred: &str, modulus: usize) -> bool {
    let n = lex.nouns.iter().position(|e| e.lemma == noun);
    let p = lex.predicates.iter().position(|e| e.lemma == pred);
    matches!((n, p), (Some(n), Some(p)) if is_held_out(n, p, modulus))
}

fn sentence(lex: &Lexicon, cfg: &GrammarConfig, rng: &mut Rng) -> Vec<String> {
    let kind = if rng.bernoulli(cfg.participle_prob) { PredicateKind::Participle } else { PredicateKind::Adjective };
    let (ni, pi) = loop {
        let ni = rng.below(lex.nouns.len());
        let candidates: Vec<usize> = (0..lex.predicates.len())
            .filter(|&p| lex.predicates[p].kind == kind && !is_held_out(ni, p, cfg.holdout_modulus))
            .collect();
        if !candidates.is_empty() {
            break (ni, *rng.choose(&candidates));
        }
    };
    let noun = &lex.nouns[ni];
    let pred = &lex.predicates[pi];
    let num = if rng.bernoulli(0.5) { Number::Plural } else { Number::Singular };

    let mut out = vec![lex.articles.get(noun.gender, num).to_string(), noun.form(num).to_string()];
    if rng.bernoulli(cfg.attractor_prob) {
        let others: Vec<&NounEntry> = lex.nouns.iter().filter(|a| a.gender != noun.gender).collect();
        if !others.is_empty() {
            let att = *rng.choose(&others);
            let an = if rng.bernoulli(0.5) { Number::Plural } else { Number::Singular };
            out.push(lex.preposition.clone());
            out.push(lex.articles.get(att.gender, an).to_string());
            out.push(att.form(an).to_string());
        }
    }
    if !lex.distractors.is_empty() {
        out.extend(rng.choose(&lex.distractors).tokens(num).iter().cloned());
    }
    out.push(pred.form(noun.gender, num).to_string());
    out
}

fn fill(lex: &Lexicon, cfg: &GrammarConfig, rng: &mut Rng, tokens: usize) -> Vec<Vec<String>> {
    let mut lines = Vec::new();
    let mut n = 0;
    while n < tokens {
        let s = sentence(lex, cfg, rng);
        // Each sentence contributes its words plus one end-of-sentence marker.
        n += s.len() + 1;
        lines.push(s);
    }
    lines
}

/// Samples the three splits from one seeded stream.
pub fn generate_corpus(lex: &Lexicon, cfg: &GrammarConfig) -> Result<SyntheticCorpus, TestgenError> {
    lex.validate()?;
    for kind in [PredicateKind::Adjective, PredicateKind::Participle] {
        if !lex.predicates.iter().any(|p| p.kind == kind) {
            return Err(TestgenError::InvalidLexicon(format!("grammar needs at least one {}", kind.name())));
        }
    }
    if !(0.0..=1.0).contains(&cfg.attractor_prob) || !(0.0..=1.0).contains(&cfg.participle_prob) {
        return Err(TestgenError::Precondition("probabilities must lie in [0, 1]".into()));
    }
    let mut rng = Rng::new(cfg.seed);
    Ok(SyntheticCorpus {
        train: fill(lex, cfg, &mut rng, cfg.train_tokens),
        valid: fill(lex, cfg, &mut rng, cfg.valid_tokens),
        test: fill(lex, cfg, &mut rng, cfg.test_tokens),
    })
}

/// The suite for `conditions` × `lengths`, both numbers and both main-noun
/// genders, restricted to held-out (noun, predicate) combinations.
pub fn held_out_suite(
    lex: &Lexicon,
    conditions: &[Condition],
    lengths: &[usize],
    modulus: usize,
) -> Result<Vec<MinimalPair>, TestgenError> {
    let req = SuiteRequest {
        conditions: conditions.to_vec(),
        lengths: lengths.to_vec(),
        numbers: Number::ALL.to_vec(),
        main_gender: None,
    };
    let all = generate_suite(lex, &req)?;
    Ok(all
        .into_iter()
        .filter(|p| {
            held_out_lemmas(lex, p.meta_value("noun").unwrap_or(""), p.meta_value("predicate").unwrap_or(""), modulus)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small() -> GrammarConfig {
        GrammarConfig { train_tokens: 5_000, valid_tokens: 500, test_tokens: 500, ..GrammarConfig::default() }
    }

    #[test]
    fn bundled_lexica_parse() {
        let g = grammar_lexicon();
        assert_eq!(g.nouns.len(), 40);
        assert_eq!(g.predicates.len(), 25);
        let forms: HashSet<&str> = g.surface_forms().into_iter().collect();
        // Together with the two specials this is the grammar's vocabulary.
        assert!((190..=210).contains(&(forms.len() + 2)), "{}", forms.len());
        assert_eq!(example_lexicon().nouns.len(), 2);
    }

    #[test]
    fn sentences_agree_and_avoid_held_out_pairs() {
        let lex = grammar_lexicon();
        let c = generate_corpus(&lex, &small()).unwrap();
        let n_tokens: usize = c.train.iter().map(|l| l.len() + 1).sum();
        assert!((5_000..5_020).contains(&n_tokens));
        for line in c.train.iter().chain(&c.valid).chain(&c.test) {
            let noun = lex.nouns.iter().position(|n| n.singular == line[1] || n.plural == line[1]).unwrap();
            let entry = &lex.nouns[noun];
            let num = if entry.plural == line[1] { Number::Plural } else { Number::Singular };
            assert_eq!(line[0], lex.articles.get(entry.gender, num));
            let last = line.last().unwrap();
            let pred = lex
                .predicates
                .iter()
                .position(|p| p.form(entry.gender, num) == last)
                .unwrap_or_else(|| panic!("no agreeing predicate in {line:?}"));
            assert!(!is_held_out(noun, pred, 5), "{line:?}");
        }
    }

    #[test]
    fn corpus_is_seeded() {
        let lex = grammar_lexicon();
        assert_eq!(generate_corpus(&lex, &small()).unwrap(), generate_corpus(&lex, &small()).unwrap());
        let other = GrammarConfig { seed: 1, ..small() };
        assert_ne!(generate_corpus(&lex, &small()).unwrap(), generate_corpus(&lex, &other).unwrap());
    }

    #[test]
    fn held_out_suite_only_uses_unseen_pairs() {
        let lex = grammar_lexicon();
        let s = held_out_suite(&lex, &[Condition::NA], &[0, 1, 2], 5).unwrap();
        // 40 nouns × 15 adjectives, one in five held out, 2 numbers, 5 phrases.
        let combos = (0..40).flat_map(|n| (0..15).map(move |p| (n, p))).filter(|&(n, p)| is_held_out(n, p, 5)).count();
        assert_eq!(s.len(), combos * 2 * 5);
        assert!(s.iter().all(|p| held_out_lemmas(&lex, p.meta_value("noun").unwrap(), p.meta_value("predicate").unwrap(), 5)));
    }
}
