//! Corpus normalisation, vocabulary construction, id encoding and batching.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;
use unicode_general_category::{GeneralCategory, get_general_category};
use unicode_normalization::UnicodeNormalization;

pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";

const IDS_MAGIC: &[u8; 8] = b"AGPIDS01";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("insufficient data: {len} ids cannot fill {batch_size} streams of {bptt_len}+1 tokens")]
    InsufficientData { len: usize, batch_size: usize, bptt_len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("malformed id file: {0}")]
    MalformedIds(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// A token is dropped iff every character is Unicode punctuation, so clitics
/// such as `j'` survive while `,` `...` and `«` do not.
pub fn is_punctuation_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(is_punctuation)
}

fn canonical(token: &str) -> String {
    token.to_lowercase().nfc().collect()
}

/// Line normaliser: lowercasing, NFC composition, punctuation removal and
/// an optional variant → canonical merge map.
#[derive(Debug, Clone, Default)]
pub struct Normalizer {
    merges: HashMap<String, String>,
}

impl Normalizer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keys and values are canonicalised the same way as corpus tokens.
    pub fn with_merges<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let merges = pairs
            .into_iter()
            .map(|(v, c)| (canonical(v.as_ref()), canonical(c.as_ref())))
            .collect();
        Self { merges }
    }

    /// Reads a `variant<TAB>canonical` file. Blank lines are ignored.
    pub fn from_merge_file(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(v), Some(c), None) if !v.trim().is_empty() && !c.trim().is_empty() => {
                    pairs.push((v.trim().to_string(), c.trim().to_string()))
                }
                _ => {
                    return Err(CorpusError::Parse {
                        path: path.display().to_string(),
                        line: i + 1,
                        msg: "expected `variant<TAB>canonical`".into(),
                    });
                }
            }
        }
        Ok(Self::with_merges(pairs))
    }

    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    pub fn normalize_line(&self, text: &str) -> Vec<String> {
        text.split_whitespace()
            .map(canonical)
            .filter(|t| !is_punctuation_token(t))
            .map(|t| self.merges.get(&t).cloned().unwrap_or(t))
            .collect()
    }
}

/// Normalises one line with no merge map.
pub fn normalize_line(text: &str) -> Vec<String> {
    Normalizer::new().normalize_line(text)
}

/// Bijective token ↔ id map. Ids 0 and 1 are `<unk>` and `<eos>`; the
/// remaining ids follow descending training frequency, ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, u32>,
    counts: Vec<u64>,
    unk_id: u32,
    eos_id: u32,
}

impl Vocabulary {
    fn from_parts(id_to_token: Vec<String>, counts: Vec<u64>) -> Result<Self, CorpusError> {
        let mut token_to_id = HashMap::with_capacity(id_to_token.len());
        for (i, t) in id_to_token.iter().enumerate() {
            if token_to_id.insert(t.clone(), i as u32).is_some() {
                return Err(CorpusError::InvalidArgument(format!("duplicate token `{t}`")));
            }
        }
        let unk_id = *token_to_id
            .get(UNK)
            .ok_or_else(|| CorpusError::InvalidArgument("vocabulary lacks <unk>".into()))?;
        let eos_id = *token_to_id
            .get(EOS)
            .ok_or_else(|| CorpusError::InvalidArgument("vocabulary lacks <eos>".into()))?;
        Ok(Self { id_to_token, token_to_id, counts, unk_id, eos_id })
    }

    /// Builds a vocabulary directly from an ordered token list (specials are
    /// added in front when missing). Counts are zero.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut list: Vec<String> = vec![UNK.into(), EOS.into()];
        for t in tokens {
            let t = t.into();
            if t != UNK && t != EOS {
                list.push(t);
            }
        }
        let n = list.len();
        Self::from_parts(list, vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn eos_id(&self) -> u32 {
        self.eos_id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn is_special(&self, id: u32) -> bool {
        id == self.unk_id || id == self.eos_id
    }

    /// Ids for one line, OOV tokens mapped to `<unk>`, `<eos>` appended.
    pub fn encode_line<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        let mut ids: Vec<u32> = tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(self.unk_id))
            .collect();
        ids.push(self.eos_id);
        ids
    }

    /// Unknown ids decode to `<unk>`.
    pub fn decode(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i).unwrap_or(UNK)).collect()
    }

    /// `token<TAB>count` per line in id order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (t, c) in self.id_to_token.iter().zip(&self.counts) {
            writeln!(out, "{t}\t{c}")?;
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("tokens are UTF-8")
    }

    pub fn read_tsv<R: BufRead>(input: R, origin: &str) -> Result<Self, CorpusError> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let parse_err = |msg: &str| CorpusError::Parse {
                path: origin.to_string(),
                line: i + 1,
                msg: msg.to_string(),
            };
            let (tok, count) = line.split_once('\t').ok_or_else(|| parse_err("missing tab"))?;
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(parse_err("invalid token"));
            }
            let count: u64 = count.parse().map_err(|_| parse_err("invalid count"))?;
            tokens.push(tok.to_string());
            counts.push(count);
        }
        Self::from_parts(tokens, counts)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let f = std::fs::File::open(path)?;
        Self::read_tsv(std::io::BufReader::new(f), &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_tsv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Keeps the `cap` most frequent tokens of an already-normalised stream.
///
/// Literal `<unk>` / `<eos>` tokens in the stream count towards the specials
/// and never occupy a regular slot.
pub fn build_vocab<I, L, S>(lines: I, cap: usize) -> Result<Vocabulary, CorpusError>
where
    I: IntoIterator<Item = L>,
    L: AsRef<[S]>,
    S: AsRef<str>,
{
    if cap == 0 {
        return Err(CorpusError::InvalidArgument("vocabulary cap must be at least 1".into()));
    }
    let mut freq: HashMap<String, u64> = HashMap::new();
    let mut n_lines = 0u64;
    let mut n_tokens = 0u64;
    for line in lines {
        n_lines += 1;
        for t in line.as_ref() {
            n_tokens += 1;
            *freq.entry(t.as_ref().to_string()).or_insert(0) += 1;
        }
    }
    if n_tokens == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut unk_count = freq.remove(UNK).unwrap_or(0);
    let eos_count = n_lines + freq.remove(EOS).unwrap_or(0);
    let mut ranked: Vec<(String, u64)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    unk_count += ranked.iter().skip(cap).map(|(_, c)| c).sum::<u64>();
    ranked.truncate(cap);

    let mut tokens = vec![UNK.to_string(), EOS.to_string()];
    let mut counts = vec![unk_count, eos_count];
    for (t, c) in ranked {
        tokens.push(t);
        counts.push(c);
    }
    Vocabulary::from_parts(tokens, counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    fn tag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Split::Train),
            1 => Some(Split::Valid),
            2 => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedCorpus {
    pub ids: Vec<u32>,
    pub split: Split,
}

impl EncodedCorpus {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Binary layout: 8-byte magic, split tag byte, u64 LE length, u32 LE ids.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(17 + 4 * self.ids.len());
        out.extend_from_slice(IDS_MAGIC);
        out.push(self.split.tag());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        for id in &self.ids {
            out.extend_from_slice(&id.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CorpusError> {
        if bytes.len() < 17 || &bytes[..8] != IDS_MAGIC {
            return Err(CorpusError::MalformedIds("bad magic".into()));
        }
        let split = Split::from_tag(bytes[8])
            .ok_or_else(|| CorpusError::MalformedIds(format!("bad split tag {}", bytes[8])))?;
        let n = u64::from_le_bytes(bytes[9..17].try_into().unwrap()) as usize;
        let body = &bytes[17..];
        if body.len() != n * 4 {
            return Err(CorpusError::MalformedIds(format!(
                "expected {n} ids, found {} bytes",
                body.len()
            )));
        }
        let ids = body.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { ids, split })
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn check_against(&self, vocab: &Vocabulary) -> Result<(), CorpusError> {
        match self.ids.iter().find(|&&i| i as usize >= vocab.len()) {
            Some(bad) => Err(CorpusError::InvalidArgument(format!(
                "id {bad} outside vocabulary of {}",
                vocab.len()
            ))),
            None => Ok(()),
        }
    }
}

/// Encodes normalised lines, one `<eos>` per line.
pub fn encode<I, L, S>(lines: I, vocab: &Vocabulary, split: Split) -> EncodedCorpus
where
    I: IntoIterator<Item = L>,
    L: AsRef<[S]>,
    S: AsRef<str>,
{
    let mut ids = Vec::new();
    for line in lines {
        ids.extend(vocab.encode_line(line.as_ref()));
    }
    EncodedCorpus { ids, split }
}

/// One BPTT block: `batch_size × len` inputs and targets, row-major by stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub batch_size: usize,
    pub len: usize,
    pub inputs: Vec<u32>,
    pub targets: Vec<u32>,
}

impl Block {
    pub fn input_row(&self, b: usize) -> &[u32] {
        &self.inputs[b * self.len..(b + 1) * self.len]
    }

    pub fn target_row(&self, b: usize) -> &[u32] {
        &self.targets[b * self.len..(b + 1) * self.len]
    }
}

/// Contiguous-stream batching: the corpus is cut into `batch_size` equal
/// streams and each stream is walked in windows of `bptt_len`. Only full
/// windows are produced.
#[derive(Debug, Clone)]
pub struct BatchPlan {
    batch_size: usize,
    bptt_len: usize,
    stream_len: usize,
    streams: Vec<u32>,
}

pub fn batchify(
    corpus: &EncodedCorpus,
    batch_size: usize,
    bptt_len: usize,
) -> Result<BatchPlan, CorpusError> {
    if batch_size == 0 || bptt_len == 0 {
        return Err(CorpusError::InvalidArgument("batch size and bptt length must be positive".into()));
    }
    let len = corpus.ids.len();
    if len < batch_size * (bptt_len + 1) {
        return Err(CorpusError::InsufficientData { len, batch_size, bptt_len });
    }
    let stream_len = len / batch_size;
    Ok(BatchPlan {
        batch_size,
        bptt_len,
        stream_len,
        streams: corpus.ids[..stream_len * batch_size].to_vec(),
    })
}

impl BatchPlan {
    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn bptt_len(&self) -> usize {
        self.bptt_len
    }

    pub fn stream(&self, b: usize) -> &[u32] {
        &self.streams[b * self.stream_len..(b + 1) * self.stream_len]
    }

    pub fn num_blocks(&self) -> usize {
        (self.stream_len - 1) / self.bptt_len
    }

    pub fn block(&self, k: usize) -> Block {
        assert!(k < self.num_blocks(), "block index out of range");
        let start = k * self.bptt_len;
        let t = self.bptt_len;
        let mut inputs = Vec::with_capacity(self.batch_size * t);
        let mut targets = Vec::with_capacity(self.batch_size * t);
        for b in 0..self.batch_size {
            let s = self.stream(b);
            inputs.extend_from_slice(&s[start..start + t]);
            targets.extend_from_slice(&s[start + 1..start + t + 1]);
        }
        Block { batch_size: self.batch_size, len: t, inputs, targets }
    }

    pub fn blocks(&self) -> impl Iterator<Item = Block> + '_ {
        (0..self.num_blocks()).map(|k| self.block(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_line("La robe , est Bleue ."), toks("la robe est bleue"));
        assert!(normalize_line("").is_empty());
        assert_eq!(normalize_line("les pilotes retournent"), toks("les pilotes retournent"));
    }

    #[test]
    fn normalize_keeps_clitics_and_composes() {
        assert_eq!(normalize_line("que J' aime ... « beaucoup »"), toks("que j' aime beaucoup"));
        // "e" + combining acute → "é"
        assert_eq!(normalize_line("tombe\u{301}e"), vec!["tombée".to_string()]);
        assert_eq!(normalize_line("<unk> x-y"), toks("<unk> x-y"));
    }

    #[test]
    fn merge_map_rewrites_variants() {
        let n = Normalizer::with_merges([("Tombèe", "tombée")]);
        assert_eq!(n.normalize_line("la robe est TOMBÈE"), toks("la robe est tombée"));
        assert_eq!(n.merge_count(), 1);
    }

    #[test]
    fn merge_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tsv");
        std::fs::write(&p, "evenement\tévénement\n\n").unwrap();
        let n = Normalizer::from_merge_file(&p).unwrap();
        assert_eq!(n.normalize_line("Evenement"), toks("événement"));
        std::fs::write(&p, "only-one-column\n").unwrap();
        assert!(matches!(Normalizer::from_merge_file(&p), Err(CorpusError::Parse { line: 1, .. })));
    }

    #[test]
    fn build_vocab_caps_and_breaks_ties() {
        // 11 tokens: a×5, b×5, c×1
        let lines = vec![toks("a b a b c"), toks("a b a b a b")];
        let v = build_vocab(&lines, 2).unwrap();
        assert_eq!(v.tokens(), &toks("<unk> <eos> a b")[..]);
        assert_eq!(v.count(v.id("a").unwrap()), 5);
        assert_eq!(v.count(v.unk_id()), 1);
        assert_eq!(v.count(v.eos_id()), 2);

        let lines = vec![toks("z y x z y x w")];
        let v = build_vocab(&lines, 2).unwrap();
        assert_eq!(v.tokens(), &toks("<unk> <eos> x y")[..]);
    }

    #[test]
    fn build_vocab_three_tokens_cap_two() {
        let lines = vec![toks("p p p q q r")];
        let v = build_vocab(&lines, 2).unwrap();
        assert_eq!(v.len(), 4);
        assert!(!v.contains("r"));
    }

    #[test]
    fn build_vocab_errors() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(matches!(build_vocab(&empty, 5), Err(CorpusError::EmptyCorpus)));
        let blank = vec![Vec::<String>::new()];
        assert!(matches!(build_vocab(&blank, 5), Err(CorpusError::EmptyCorpus)));
        assert!(matches!(build_vocab(&[toks("a")], 0), Err(CorpusError::InvalidArgument(_))));
    }

    #[test]
    fn encode_and_decode() {
        let v = Vocabulary::from_tokens(["la", "robe"]).unwrap();
        let la = v.id("la").unwrap();
        let robe = v.id("robe").unwrap();
        assert_eq!(v.encode_line(&["la", "robe"]), vec![la, robe, v.eos_id()]);
        assert_eq!(v.encode_line(&["zzzunseen"]), vec![v.unk_id(), v.eos_id()]);
        let ids = v.encode_line(&["la", "zzz", "robe"]);
        assert_eq!(v.decode(&ids), vec!["la", "<unk>", "robe", "<eos>"]);
        let c = encode(vec![toks("la robe"), toks("robe")], &v, Split::Valid);
        assert_eq!(c.ids, vec![la, robe, v.eos_id(), robe, v.eos_id()]);
    }

    #[test]
    fn vocab_tsv_round_trip() {
        let lines = vec![toks("le chat dort"), toks("le chien dort")];
        let v = build_vocab(&lines, 10).unwrap();
        let s = v.to_tsv_string();
        assert!(s.starts_with("<unk>\t0\n<eos>\t2\n"));
        let back = Vocabulary::read_tsv(s.as_bytes(), "mem").unwrap();
        assert_eq!(back, v);
        assert!(Vocabulary::read_tsv("a\t1\n".as_bytes(), "mem").is_err());
        assert!(matches!(
            Vocabulary::read_tsv("<unk>\t1\n<eos>\tx\n".as_bytes(), "mem"),
            Err(CorpusError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn ids_binary_round_trip() {
        let c = EncodedCorpus { ids: vec![3, 0, 1, 70000], split: Split::Test };
        let b = c.to_bytes();
        assert_eq!(EncodedCorpus::from_bytes(&b).unwrap(), c);
        assert!(EncodedCorpus::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(EncodedCorpus::from_bytes(&bad).is_err());
    }

    #[test]
    fn batchify_layout() {
        let c = EncodedCorpus { ids: (0..20).collect(), split: Split::Train };
        let plan = batchify(&c, 2, 3).unwrap();
        let b0 = plan.block(0);
        assert_eq!(b0.input_row(0), &[0, 1, 2]);
        assert_eq!(b0.input_row(1), &[10, 11, 12]);
        assert_eq!(b0.target_row(0), &[1, 2, 3]);
        assert_eq!(b0.target_row(1), &[11, 12, 13]);
        assert_eq!(plan.num_blocks(), 3);
        let last = plan.block(2);
        assert_eq!(last.input_row(1), &[16, 17, 18]);
        assert_eq!(last.target_row(1), &[17, 18, 19]);
    }

    #[test]
    fn batchify_degenerate_and_short() {
        let c = EncodedCorpus { ids: (0..9).collect(), split: Split::Train };
        let plan = batchify(&c, 1, 8).unwrap();
        assert_eq!(plan.num_blocks(), 1);
        let b = plan.block(0);
        assert_eq!(b.inputs, (0..8).collect::<Vec<_>>());
        assert_eq!(b.targets, (1..9).collect::<Vec<_>>());

        let short = EncodedCorpus { ids: (0..5).collect(), split: Split::Train };
        assert!(matches!(batchify(&short, 4, 3), Err(CorpusError::InsufficientData { .. })));
    }
}
