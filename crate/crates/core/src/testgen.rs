//! Morphological lexicons and minimal-pair suite generation.
//!
//! A generated sentence prefix has the shape
//!
//! ```text
//! ART(g, n) NOUN(n) [PREP ART(g', n') ATTRACTOR(n')] DISTRACTOR(n)
//! ```
//!
//! followed by one of two predicate forms that differ only in gender.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Vocabulary;

pub const MAX_DISTRACTOR_LEN: usize = 11;

#[derive(Debug, Error)]
pub enum TestgenError {
    #[error("{origin}:{line}: {msg}")]
    Parse { origin: String, line: usize, msg: String },
    #[error("{origin}:{line}: duplicate lemma `{lemma}`")]
    DuplicateLemma { origin: String, line: usize, lemma: String },
    #[error("{origin}:{line}: predicate `{lemma}` lacks the {slot} form")]
    MissingInflection { origin: String, line: usize, lemma: String, slot: &'static str },
    #[error("{origin}:{line}: `{token}` is not in the vocabulary")]
    Oov { origin: String, line: usize, token: String },
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no distractor phrase of length {0}")]
    NoDistractor(usize),
    #[error("suite record {index}: {msg}")]
    Record { index: usize, msg: String },
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Masculine,
    Feminine,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Masculine, Gender::Feminine];

    pub fn opposite(self) -> Self {
        match self {
            Gender::Masculine => Gender::Feminine,
            Gender::Feminine => Gender::Masculine,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Gender::Masculine => "m",
            Gender::Feminine => "f",
        }
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "m" | "masc" | "masculine" => Ok(Gender::Masculine),
            "f" | "fem" | "feminine" => Ok(Gender::Feminine),
            _ => Err(format!("unknown gender `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Number {
    Singular,
    Plural,
}

impl Number {
    pub const ALL: [Number; 2] = [Number::Singular, Number::Plural];

    pub fn opposite(self) -> Self {
        match self {
            Number::Singular => Number::Plural,
            Number::Plural => Number::Singular,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Number::Singular => "sg",
            Number::Plural => "pl",
        }
    }
}

impl FromStr for Number {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sg" | "singular" => Ok(Number::Singular),
            "pl" | "plural" => Ok(Number::Plural),
            _ => Err(format!("unknown number `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredicateKind {
    Adjective,
    Participle,
}

impl FromStr for PredicateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adj" | "adjective" => Ok(PredicateKind::Adjective),
            "part" | "participle" => Ok(PredicateKind::Participle),
            _ => Err(format!("unknown predicate kind `{s}`")),
        }
    }
}

impl PredicateKind {
    pub fn name(self) -> &'static str {
        match self {
            PredicateKind::Adjective => "adjective",
            PredicateKind::Participle => "participle",
        }
    }
}

/// The six agreement conditions. `N?` = no attractor, `*NS` = attractor of
/// the same number, `*NO` = attractor of the opposite number; the attractor
/// always has the opposite gender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    NA,
    NANS,
    NANO,
    NP,
    NPNS,
    NPNO,
}

impl Condition {
    pub const ALL: [Condition; 6] =
        [Condition::NA, Condition::NANS, Condition::NANO, Condition::NP, Condition::NPNS, Condition::NPNO];

    pub fn name(self) -> &'static str {
        match self {
            Condition::NA => "NA",
            Condition::NANS => "NANS",
            Condition::NANO => "NANO",
            Condition::NP => "NP",
            Condition::NPNS => "NPNS",
            Condition::NPNO => "NPNO",
        }
    }

    pub fn predicate_kind(self) -> PredicateKind {
        match self {
            Condition::NA | Condition::NANS | Condition::NANO => PredicateKind::Adjective,
            _ => PredicateKind::Participle,
        }
    }

    pub fn has_attractor(self) -> bool {
        !matches!(self, Condition::NA | Condition::NP)
    }

    /// Number of the attractor noun given the main noun's number.
    pub fn attractor_number(self, main: Number) -> Option<Number> {
        match self {
            Condition::NA | Condition::NP => None,
            Condition::NANS | Condition::NPNS => Some(main),
            Condition::NANO | Condition::NPNO => Some(main.opposite()),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown condition `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NounEntry {
    pub lemma: String,
    pub gender: Gender,
    pub singular: String,
    pub plural: String,
}

impl NounEntry {
    pub fn form(&self, n: Number) -> &str {
        match n {
            Number::Singular => &self.singular,
            Number::Plural => &self.plural,
        }
    }
}

/// An adjective or passive participle with its four gender × number forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateEntry {
    pub lemma: String,
    pub kind: PredicateKind,
    pub m_sg: String,
    pub f_sg: String,
    pub m_pl: String,
    pub f_pl: String,
}

impl PredicateEntry {
    pub fn form(&self, g: Gender, n: Number) -> &str {
        match (g, n) {
            (Gender::Masculine, Number::Singular) => &self.m_sg,
            (Gender::Feminine, Number::Singular) => &self.f_sg,
            (Gender::Masculine, Number::Plural) => &self.m_pl,
            (Gender::Feminine, Number::Plural) => &self.f_pl,
        }
    }

    /// Whether the masculine and feminine forms differ for `n`.
    pub fn distinguishes(&self, n: Number) -> bool {
        self.form(Gender::Masculine, n) != self.form(Gender::Feminine, n)
    }

    fn forms(&self) -> [&str; 4] {
        [&self.m_sg, &self.f_sg, &self.m_pl, &self.f_pl]
    }
}

/// Gender-neutral material between the noun phrase and the target, with a
/// singular and a plural realisation of equal length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistractorPhrase {
    pub singular: Vec<String>,
    pub plural: Vec<String>,
}

impl DistractorPhrase {
    pub fn new(singular: &str, plural: &str) -> Result<Self, TestgenError> {
        let split = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
        let d = Self { singular: split(singular), plural: split(plural) };
        if d.singular.len() != d.plural.len() {
            return Err(TestgenError::InvalidLexicon(format!(
                "distractor `{singular}` / `{plural}` differ in length"
            )));
        }
        if d.len() > MAX_DISTRACTOR_LEN {
            return Err(TestgenError::InvalidLexicon(format!(
                "distractor `{singular}` exceeds {MAX_DISTRACTOR_LEN} tokens"
            )));
        }
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.singular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular.is_empty()
    }

    pub fn tokens(&self, n: Number) -> &[String] {
        match n {
            Number::Singular => &self.singular,
            Number::Plural => &self.plural,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleTable {
    pub m_sg: String,
    pub f_sg: String,
    /// Shared by both genders.
    pub plural: String,
}

impl Default for ArticleTable {
    fn default() -> Self {
        Self { m_sg: "le".into(), f_sg: "la".into(), plural: "les".into() }
    }
}

impl ArticleTable {
    pub fn get(&self, g: Gender, n: Number) -> &str {
        match (g, n) {
            (Gender::Masculine, Number::Singular) => &self.m_sg,
            (Gender::Feminine, Number::Singular) => &self.f_sg,
            (_, Number::Plural) => &self.plural,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub nouns: Vec<NounEntry>,
    pub predicates: Vec<PredicateEntry>,
    pub distractors: Vec<DistractorPhrase>,
    pub articles: ArticleTable,
    pub preposition: String,
}

/// What to do with lexicon forms missing from a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    #[default]
    Strict,
    /// Drop the offending entry and log it.
    Lenient,
}

fn valid_form(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace) && s.to_lowercase() == s
}

/// A single minimal pair: a shared prefix and two competing targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimalPair {
    pub prefix: Vec<String>,
    pub correct: String,
    pub wrong: String,
    pub meta: BTreeMap<String, String>,
}

impl MinimalPair {
    pub fn validate(&self) -> Result<(), TestgenError> {
        let err = |m: String| Err(TestgenError::InvalidPair(m));
        if self.prefix.is_empty() {
            return err("empty prefix".into());
        }
        for t in [&self.correct, &self.wrong] {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return err(format!("target `{t}` is not a single token"));
            }
        }
        if self.correct == self.wrong {
            return err(format!("both targets are `{}`", self.correct));
        }
        if self.prefix.iter().any(|t| *t == self.correct || *t == self.wrong) {
            return err(format!("prefix `{}` contains a target form", self.prefix.join(" ")));
        }
        Ok(())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    pub fn condition(&self) -> Option<&str> {
        self.meta_value("condition")
    }

    pub fn prefix_text(&self) -> String {
        self.prefix.join(" ")
    }
}

/// Selection of cells to expand in [`generate_suite`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteRequest {
    pub conditions: Vec<Condition>,
    pub lengths: Vec<usize>,
    pub numbers: Vec<Number>,
    /// Restrict main nouns to one gender; `None` generates both directions.
    pub main_gender: Option<Gender>,
}

impl Default for SuiteRequest {
    fn default() -> Self {
        Self {
            conditions: Condition::ALL.to_vec(),
            lengths: vec![1],
            numbers: Number::ALL.to_vec(),
            main_gender: None,
        }
    }
}

impl Lexicon {
    pub fn validate(&self) -> Result<(), TestgenError> {
        let bad = |m: String| Err(TestgenError::InvalidLexicon(m));
        if self.nouns.is_empty() || self.predicates.is_empty() {
            return bad("lexicon needs at least one noun and one predicate".into());
        }
        let mut seen = HashSet::new();
        for n in &self.nouns {
            if !seen.insert(("n", n.lemma.as_str())) {
                return bad(format!("duplicate noun `{}`", n.lemma));
            }
            if !valid_form(&n.singular) || !valid_form(&n.plural) {
                return bad(format!("noun `{}` has an invalid form", n.lemma));
            }
        }
        for p in &self.predicates {
            if !seen.insert(("p", p.lemma.as_str())) {
                return bad(format!("duplicate predicate `{}`", p.lemma));
            }
            if !p.forms().iter().all(|f| valid_form(f)) {
                return bad(format!("predicate `{}` has an invalid form", p.lemma));
            }
        }
        for d in &self.distractors {
            if d.singular.len() != d.plural.len() || d.len() > MAX_DISTRACTOR_LEN {
                return bad(format!("distractor `{}` is malformed", d.singular.join(" ")));
            }
        }
        let a = &self.articles;
        if ![&a.m_sg, &a.f_sg, &a.plural, &self.preposition].iter().all(|t| valid_form(t)) {
            return bad("articles and preposition must be single lowercase tokens".into());
        }
        Ok(())
    }

    /// Parses the sectioned text format:
    ///
    /// ```text
    /// [nouns]        lemma,gender,sg,pl
    /// [predicates]   lemma,kind,m_sg,f_sg,m_pl,f_pl
    /// [distractors]  length,sg tokens|pl tokens
    /// [articles]     gender,number,token
    /// [preposition]  token
    /// ```
    ///
    /// `#` starts a comment line.
    pub fn parse(text: &str, origin: &str) -> Result<Self, TestgenError> {
        Self::parse_checked(text, origin, None, OovPolicy::Strict)
    }

    pub fn load(path: &Path, vocab: Option<&Vocabulary>, policy: OovPolicy) -> Result<Self, TestgenError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_checked(&text, &path.display().to_string(), vocab, policy)
    }

    pub fn parse_checked(
        text: &str,
        origin: &str,
        vocab: Option<&Vocabulary>,
        policy: OovPolicy,
    ) -> Result<Self, TestgenError> {
        let perr = |line: usize, msg: String| TestgenError::Parse { origin: origin.into(), line, msg };
        let oov = |line: usize, forms: &[&str]| -> Result<bool, TestgenError> {
            let Some(v) = vocab else { return Ok(false) };
            match forms.iter().find(|f| !v.contains(f)) {
                None => Ok(false),
                Some(t) if policy == OovPolicy::Strict => {
                    Err(TestgenError::Oov { origin: origin.into(), line, token: t.to_string() })
                }
                Some(t) => {
                    info!("{origin}:{line}: excluding entry with out-of-vocabulary form `{t}`");
                    Ok(true)
                }
            }
        };

        let mut section = String::new();
        let mut nouns = Vec::new();
        let mut predicates = Vec::new();
        let mut distractors = Vec::new();
        let mut articles: BTreeMap<(Gender, Number), String> = BTreeMap::new();
        let mut preposition: Option<String> = None;
        let mut lemmas: HashSet<(bool, String)> = HashSet::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                section = name.trim().to_lowercase();
                if !["nouns", "predicates", "distractors", "articles", "preposition"].contains(&section.as_str()) {
                    return Err(perr(line, format!("unknown section `{name}`")));
                }
                continue;
            }
            let fields: Vec<&str> = s.split(',').map(str::trim).collect();
            match section.as_str() {
                "nouns" => {
                    if fields.len() != 4 || fields.iter().any(|f| f.is_empty()) {
                        return Err(perr(line, "noun entries are `lemma,gender,sg,pl`".into()));
                    }
                    let gender = fields[1].parse().map_err(|e| perr(line, e))?;
                    if !lemmas.insert((true, fields[0].to_string())) {
                        return Err(TestgenError::DuplicateLemma {
                            origin: origin.into(),
                            line,
                            lemma: fields[0].into(),
                        });
                    }
                    if !valid_form(fields[2]) || !valid_form(fields[3]) {
                        return Err(perr(line, "noun forms must be single lowercase tokens".into()));
                    }
                    if oov(line, &fields[2..4])? {
                        continue;
                    }
                    nouns.push(NounEntry {
                        lemma: fields[0].into(),
                        gender,
                        singular: fields[2].into(),
                        plural: fields[3].into(),
                    });
                }
                "predicates" => {
                    let lemma = fields[0];
                    if lemma.is_empty() || fields.len() < 2 {
                        return Err(perr(line, "predicate entries are `lemma,kind,m_sg,f_sg,m_pl,f_pl`".into()));
                    }
                    if fields.len() > 6 {
                        return Err(perr(line, format!("predicate `{lemma}` has too many fields")));
                    }
                    const SLOTS: [&str; 4] = ["m_sg", "f_sg", "m_pl", "f_pl"];
                    for (k, slot) in SLOTS.iter().enumerate() {
                        if fields.get(2 + k).is_none_or(|f| f.is_empty()) {
                            return Err(TestgenError::MissingInflection {
                                origin: origin.into(),
                                line,
                                lemma: lemma.into(),
                                slot,
                            });
                        }
                    }
                    let kind = fields[1].parse().map_err(|e| perr(line, e))?;
                    if !lemmas.insert((false, lemma.to_string())) {
                        return Err(TestgenError::DuplicateLemma { origin: origin.into(), line, lemma: lemma.into() });
                    }
                    if !fields[2..6].iter().all(|f| valid_form(f)) {
                        return Err(perr(line, "predicate forms must be single lowercase tokens".into()));
                    }
                    if oov(line, &fields[2..6])? {
                        continue;
                    }
                    predicates.push(PredicateEntry {
                        lemma: lemma.into(),
                        kind,
                        m_sg: fields[2].into(),
                        f_sg: fields[3].into(),
                        m_pl: fields[4].into(),
                        f_pl: fields[5].into(),
                    });
                }
                "distractors" => {
                    // The token lists may not contain commas, so split once.
                    let (len, rest) = s
                        .split_once(',')
                        .ok_or_else(|| perr(line, "distractor entries are `length,sg tokens|pl tokens`".into()))?;
                    let len: usize = len.trim().parse().map_err(|_| perr(line, format!("bad length `{len}`")))?;
                    let (sg, pl) = rest
                        .split_once('|')
                        .ok_or_else(|| perr(line, "missing `|` between singular and plural tokens".into()))?;
                    let d = DistractorPhrase::new(sg, pl).map_err(|e| perr(line, e.to_string()))?;
                    if d.len() != len {
                        return Err(perr(line, format!("declared length {len} but phrase has {} tokens", d.len())));
                    }
                    let toks: Vec<&str> = d.singular.iter().chain(&d.plural).map(String::as_str).collect();
                    if oov(line, &toks)? {
                        continue;
                    }
                    distractors.push(d);
                }
                "articles" => {
                    if fields.len() != 3 {
                        return Err(perr(line, "article entries are `gender,number,token`".into()));
                    }
                    let g: Gender = fields[0].parse().map_err(|e| perr(line, e))?;
                    let n: Number = fields[1].parse().map_err(|e| perr(line, e))?;
                    if !valid_form(fields[2]) {
                        return Err(perr(line, "article must be a single lowercase token".into()));
                    }
                    if oov(line, &fields[2..3])? {
                        return Err(perr(line, "articles cannot be excluded".into()));
                    }
                    articles.insert((g, n), fields[2].into());
                }
                "preposition" => {
                    if fields.len() != 1 || !valid_form(fields[0]) {
                        return Err(perr(line, "preposition must be a single lowercase token".into()));
                    }
                    if oov(line, &fields[..1])? {
                        return Err(perr(line, "the preposition cannot be excluded".into()));
                    }
                    preposition = Some(fields[0].into());
                }
                _ => return Err(perr(line, "entry outside of any section".into())),
            }
        }

        let mut table = ArticleTable::default();
        let pick = |g, n, dflt: &str| articles.get(&(g, n)).cloned().unwrap_or_else(|| dflt.to_string());
        table.m_sg = pick(Gender::Masculine, Number::Singular, &table.m_sg);
        table.f_sg = pick(Gender::Feminine, Number::Singular, &table.f_sg);
        let m_pl = pick(Gender::Masculine, Number::Plural, &table.plural);
        let f_pl = pick(Gender::Feminine, Number::Plural, &table.plural);
        if m_pl != f_pl {
            return Err(TestgenError::InvalidLexicon(format!(
                "plural articles must coincide, got `{m_pl}` and `{f_pl}`"
            )));
        }
        table.plural = m_pl;

        let lex = Lexicon {
            nouns,
            predicates,
            distractors,
            articles: table,
            preposition: preposition.unwrap_or_else(|| "avec".into()),
        };
        lex.validate()?;
        Ok(lex)
    }

    pub fn noun(&self, lemma: &str) -> Option<&NounEntry> {
        self.nouns.iter().find(|n| n.lemma == lemma)
    }

    pub fn predicate(&self, lemma: &str) -> Option<&PredicateEntry> {
        self.predicates.iter().find(|p| p.lemma == lemma)
    }

    /// Every surface form the lexicon can place in a pair.
    pub fn surface_forms(&self) -> Vec<&str> {
        let mut out: Vec<&str> = vec![
            &self.articles.m_sg,
            &self.articles.f_sg,
            &self.articles.plural,
            &self.preposition,
        ];
        for n in &self.nouns {
            out.push(&n.singular);
            out.push(&n.plural);
        }
        for p in &self.predicates {
            out.extend(p.forms());
        }
        for d in &self.distractors {
            out.extend(d.singular.iter().chain(&d.plural).map(String::as_str));
        }
        out
    }

    /// Builds one minimal pair.
    pub fn realize(
        &self,
        cond: Condition,
        noun: &NounEntry,
        pred: &PredicateEntry,
        attractor: Option<&NounEntry>,
        dist: &DistractorPhrase,
        num: Number,
    ) -> Result<MinimalPair, TestgenError> {
        let pre = |m: String| Err(TestgenError::Precondition(m));
        if pred.kind != cond.predicate_kind() {
            return pre(format!("{cond} needs a {}, `{}` is a {}", cond.predicate_kind().name(), pred.lemma, pred.kind.name()));
        }
        let mut prefix = vec![self.articles.get(noun.gender, num).to_string(), noun.form(num).to_string()];
        match (cond.attractor_number(num), attractor) {
            (None, None) => {}
            (Some(an), Some(att)) => {
                if att.gender == noun.gender {
                    return pre(format!("attractor `{}` has the same gender as `{}`", att.lemma, noun.lemma));
                }
                prefix.push(self.preposition.clone());
                prefix.push(self.articles.get(att.gender, an).to_string());
                prefix.push(att.form(an).to_string());
            }
            (None, Some(_)) => return pre(format!("{cond} takes no attractor")),
            (Some(_), None) => return pre(format!("{cond} requires an attractor")),
        }
        prefix.extend(dist.tokens(num).iter().cloned());

        let mut meta = BTreeMap::new();
        meta.insert("condition".to_string(), cond.name().to_string());
        meta.insert("noun".to_string(), noun.lemma.clone());
        meta.insert("gender".to_string(), noun.gender.code().to_string());
        meta.insert("number".to_string(), num.code().to_string());
        meta.insert("distractors".to_string(), dist.len().to_string());
        meta.insert("predicate".to_string(), pred.lemma.clone());
        meta.insert("attractor".to_string(), attractor.map_or("-".to_string(), |a| a.lemma.clone()));

        let pair = MinimalPair {
            prefix,
            correct: pred.form(noun.gender, num).to_string(),
            wrong: pred.form(noun.gender.opposite(), num).to_string(),
            meta,
        };
        pair.validate()?;
        Ok(pair)
    }
}

/// Full Cartesian expansion of `req` over `lex`.
///
/// Output order: condition, number, distractor length, main noun, attractor,
/// predicate, distractor. Predicates whose masculine and feminine forms
/// coincide for a number are skipped for that number.
pub fn generate_suite(lex: &Lexicon, req: &SuiteRequest) -> Result<Vec<MinimalPair>, TestgenError> {
    lex.validate()?;
    let mut by_len: BTreeMap<usize, Vec<&DistractorPhrase>> = BTreeMap::new();
    for d in &lex.distractors {
        by_len.entry(d.len()).or_default().push(d);
    }
    if !req.conditions.is_empty() && !req.numbers.is_empty() {
        if let Some(&missing) = req.lengths.iter().find(|l| !by_len.contains_key(l)) {
            return Err(TestgenError::NoDistractor(missing));
        }
    }

    let mut out = Vec::new();
    let mut logged = HashSet::new();
    for &cond in dedup(&req.conditions).iter() {
        let preds: Vec<&PredicateEntry> =
            lex.predicates.iter().filter(|p| p.kind == cond.predicate_kind()).collect();
        for &num in dedup(&req.numbers).iter() {
            let cell_preds: Vec<&PredicateEntry> = preds
                .iter()
                .copied()
                .filter(|p| {
                    let ok = p.distinguishes(num);
                    if !ok && logged.insert((p.lemma.clone(), num)) {
                        info!("skipping `{}` for {}: gender forms coincide", p.lemma, num.code());
                    }
                    ok
                })
                .collect();
            for &len in dedup(&req.lengths).iter() {
                let dists = &by_len[&len];
                for noun in &lex.nouns {
                    if req.main_gender.is_some_and(|g| g != noun.gender) {
                        continue;
                    }
                    let attractors: Vec<Option<&NounEntry>> = if cond.has_attractor() {
                        lex.nouns.iter().filter(|a| a.gender != noun.gender).map(Some).collect()
                    } else {
                        vec![None]
                    };
                    for att in attractors {
                        for pred in &cell_preds {
                            for dist in dists {
                                out.push(lex.realize(cond, noun, pred, att, dist, num)?);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn dedup<T: PartialEq + Copy>(items: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(items.len());
    for &i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct SuiteRecord {
    prefix: String,
    correct: String,
    wrong: String,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

/// One JSON object per line: `prefix`, `correct`, `wrong`, `meta`.
pub fn write_suite<W: Write>(pairs: &[MinimalPair], mut out: W) -> Result<(), TestgenError> {
    for p in pairs {
        let rec = SuiteRecord {
            prefix: p.prefix.join(" "),
            correct: p.correct.clone(),
            wrong: p.wrong.clone(),
            meta: p.meta.clone(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn suite_to_string(pairs: &[MinimalPair]) -> String {
    let mut buf = Vec::new();
    write_suite(pairs, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("suite is UTF-8")
}

/// Reads a suite; blank lines are ignored and record indices are 1-based
/// line numbers.
pub fn read_suite<R: BufRead>(input: R) -> Result<Vec<MinimalPair>, TestgenError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec_err = |msg: String| TestgenError::Record { index: i + 1, msg };
        let rec: SuiteRecord = serde_json::from_str(&line).map_err(|e| rec_err(e.to_string()))?;
        let pair = MinimalPair {
            prefix: rec.prefix.split_whitespace().map(String::from).collect(),
            correct: rec.correct,
            wrong: rec.wrong,
            meta: rec.meta,
        };
        pair.validate().map_err(|e| rec_err(e.to_string()))?;
        out.push(pair);
    }
    Ok(out)
}

pub fn load_external_suite(path: &Path) -> Result<Vec<MinimalPair>, TestgenError> {
    let f = std::fs::File::open(path)?;
    read_suite(std::io::BufReader::new(f))
}
