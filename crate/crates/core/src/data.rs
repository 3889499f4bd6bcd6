//! Vocabulary construction, tokenization pipelines, and dataset ingestion.
//!
//! Datasets are exchanged as UTF-8 TSV files, one `input<TAB>output` pair per
//! line. Tokenization is per-domain; outputs get the stop token appended on
//! ingestion.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Reserved end-of-sequence marker, present in every output vocabulary.
pub const STOP_TOKEN: &str = "<s>";

/// Punctuation inventory used by the `geo_in` (strip) and `zh_en_in` /
/// `zh_out` (detach) pipelines. The ASCII set plus full-width CJK marks.
pub const PUNCTUATION: &[char] =
    &['.', ',', '?', '!', '\'', '"', ';', ':', '。', '？', '！', '，'];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizeMode {
    Colors,
    GeoIn,
    GeoOut,
    Wsj,
    ZhEnIn,
    ZhOut,
}

impl FromStr for TokenizeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "colors" => Ok(TokenizeMode::Colors),
            "geo_in" => Ok(TokenizeMode::GeoIn),
            "geo_out" => Ok(TokenizeMode::GeoOut),
            "wsj" => Ok(TokenizeMode::Wsj),
            "zh_en_in" => Ok(TokenizeMode::ZhEnIn),
            "zh_out" => Ok(TokenizeMode::ZhOut),
            other => Err(Error::Config(format!("unknown tokenize mode {other:?}"))),
        }
    }
}

/// Task domain; fixes the tokenization mode of each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Colors,
    Geo,
    Wsj,
    Zh,
}

impl Domain {
    pub fn modes(self) -> (TokenizeMode, TokenizeMode) {
        match self {
            Domain::Colors => (TokenizeMode::Colors, TokenizeMode::Colors),
            Domain::Geo => (TokenizeMode::GeoIn, TokenizeMode::GeoOut),
            Domain::Wsj => (TokenizeMode::Wsj, TokenizeMode::Wsj),
            Domain::Zh => (TokenizeMode::ZhEnIn, TokenizeMode::ZhOut),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Domain::Colors => 0,
            Domain::Geo => 1,
            Domain::Wsj => 2,
            Domain::Zh => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Domain::Colors),
            1 => Ok(Domain::Geo),
            2 => Ok(Domain::Wsj),
            3 => Ok(Domain::Zh),
            other => Err(Error::Checkpoint(format!("unknown domain tag {other}"))),
        }
    }
}

impl FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "colors" => Ok(Domain::Colors),
            "geo" => Ok(Domain::Geo),
            "wsj" => Ok(Domain::Wsj),
            "zh" => Ok(Domain::Zh),
            other => Err(Error::Config(format!("unknown domain {other:?}"))),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Domain::Colors => "colors",
            Domain::Geo => "geo",
            Domain::Wsj => "wsj",
            Domain::Zh => "zh",
        };
        f.write_str(s)
    }
}

/// One aligned sentence pair. Output tokens end with the stop token once
/// ingested.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    pub input: Vec<String>,
    pub output: Vec<String>,
}

/// Which side of a pair a vocabulary indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Input,
    Output,
}

/// The three dataset splits plus their domain tag. Splits are taken as
/// provided; disjointness is the supplier's responsibility.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<ParallelPair>,
    pub validation: Vec<ParallelPair>,
    pub test: Vec<ParallelPair>,
    pub domain: Domain,
}

fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{4E00}'..='\u{9FFF}' | '\u{3400}'..='\u{4DBF}' | '\u{F900}'..='\u{FAFF}')
}

fn is_punct(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

/// Split `text` per the domain rules. Errors if no tokens remain.
pub fn tokenize(text: &str, mode: TokenizeMode) -> Result<Vec<String>> {
    let tokens: Vec<String> = match mode {
        TokenizeMode::Colors | TokenizeMode::Wsj => {
            text.split_whitespace().map(str::to_string).collect()
        }
        TokenizeMode::GeoIn => {
            let cleaned: String = text.chars().filter(|c| !is_punct(*c)).collect();
            cleaned.split_whitespace().map(str::to_string).collect()
        }
        TokenizeMode::GeoOut => {
            let mut out = Vec::new();
            let mut run = String::new();
            for c in text.chars() {
                match c {
                    ',' => flush(&mut run, &mut out),
                    c if c.is_whitespace() => flush(&mut run, &mut out),
                    '(' | ')' => {
                        flush(&mut run, &mut out);
                        out.push(c.to_string());
                    }
                    // Parse variables stand alone.
                    'A'..='D' => {
                        flush(&mut run, &mut out);
                        out.push(c.to_string());
                    }
                    c => run.push(c),
                }
            }
            flush(&mut run, &mut out);
            out
        }
        TokenizeMode::ZhEnIn => {
            let mut out = Vec::new();
            for chunk in text.split_whitespace() {
                let mut run = String::new();
                for c in chunk.chars() {
                    if is_punct(c) {
                        flush(&mut run, &mut out);
                        out.push(c.to_string());
                    } else {
                        run.push(c);
                    }
                }
                flush(&mut run, &mut out);
            }
            out
        }
        TokenizeMode::ZhOut => {
            let mut out = Vec::new();
            let mut run = String::new();
            for c in text.chars() {
                if c.is_whitespace() {
                    flush(&mut run, &mut out);
                } else if is_punct(c) || is_cjk(c) {
                    flush(&mut run, &mut out);
                    out.push(c.to_string());
                } else {
                    run.push(c);
                }
            }
            flush(&mut run, &mut out);
            out
        }
    };
    if tokens.is_empty() {
        return Err(Error::Precondition { op: "tokenize", msg: "empty token sequence".into() });
    }
    Ok(tokens)
}

fn flush(run: &mut String, out: &mut Vec<String>) {
    if !run.is_empty() {
        out.push(std::mem::take(run));
    }
}

/// Rewrites a linearized constituency parse so each left parenthesis merges
/// with its nonterminal and each terminal absorbs its closing parenthesis;
/// the result is lowercased. `"(X (Y w))"` becomes `"(x (y w) )"`.
pub fn wsj_paren_transform(parse: &str) -> Result<String> {
    #[derive(PartialEq)]
    enum Sym {
        Open,
        Close,
        Atom(String),
    }
    let mut syms = Vec::new();
    let mut run = String::new();
    for c in parse.chars() {
        match c {
            '(' | ')' => {
                if !run.is_empty() {
                    syms.push(Sym::Atom(std::mem::take(&mut run)));
                }
                syms.push(if c == '(' { Sym::Open } else { Sym::Close });
            }
            c if c.is_whitespace() => {
                if !run.is_empty() {
                    syms.push(Sym::Atom(std::mem::take(&mut run)));
                }
            }
            c => run.push(c),
        }
    }
    if !run.is_empty() {
        syms.push(Sym::Atom(run));
    }

    let unbalanced = || Error::Precondition {
        op: "wsj_paren_transform",
        msg: "unbalanced parentheses".into(),
    };
    let mut depth: i64 = 0;
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < syms.len() {
        match &syms[i] {
            Sym::Open => {
                depth += 1;
                let Some(Sym::Atom(nt)) = syms.get(i + 1) else {
                    return Err(Error::Precondition {
                        op: "wsj_paren_transform",
                        msg: "expected nonterminal after '('".into(),
                    });
                };
                out.push(format!("({}", nt.to_lowercase()));
                i += 2;
            }
            Sym::Close => {
                depth -= 1;
                if depth < 0 {
                    return Err(unbalanced());
                }
                out.push(")".into());
                i += 1;
            }
            Sym::Atom(word) => {
                // Terminal position: pair it with its closing parenthesis.
                let mut tok = word.to_lowercase();
                if let Some(Sym::Close) = syms.get(i + 1) {
                    depth -= 1;
                    if depth < 0 {
                        return Err(unbalanced());
                    }
                    tok.push(')');
                    i += 1;
                }
                out.push(tok);
                i += 1;
            }
        }
    }
    if depth != 0 {
        return Err(unbalanced());
    }
    Ok(out.join(" "))
}

/// Token table with dense ids in first-occurrence order. Output-side tables
/// contain the stop token; input-side tables reserve a virtual
/// out-of-vocabulary id equal to `len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    stop_id: Option<usize>,
}

impl Vocabulary {
    pub(crate) fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        let stop_id = tokens.iter().position(|t| t == STOP_TOKEN);
        Vocabulary { tokens, index, stop_id }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Result<&str> {
        self.tokens
            .get(id)
            .map(String::as_str)
            .ok_or(Error::UnknownId { id, size: self.tokens.len() })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn stop_id(&self) -> Option<usize> {
        self.stop_id
    }

    /// Virtual id for out-of-vocabulary input tokens; one past the table.
    pub fn unk_id(&self) -> usize {
        self.tokens.len()
    }

    /// Input-side encoding: unknown tokens map to [`Vocabulary::unk_id`].
    pub fn encode_with_unk(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t).unwrap_or(self.tokens.len())).collect()
    }

    /// Strict encoding for output-side sequences.
    pub fn encode_strict(&self, tokens: &[String]) -> Result<Vec<usize>> {
        tokens
            .iter()
            .map(|t| self.id(t).ok_or_else(|| Error::UnknownToken { token: t.clone() }))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>> {
        ids.iter().map(|&i| self.token(i).map(str::to_string)).collect()
    }

    /// FNV-1a over the ordered token list; stored in checkpoints to detect
    /// mismatched vocabularies.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for t in &self.tokens {
            for b in t.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= 0x0a;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = format!("stop\t{STOP_TOKEN}\n");
        for t in &self.tokens {
            body.push_str(t);
            body.push('\n');
        }
        std::fs::write(path, body)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Ingestion {
            path: path.display().to_string(),
            line: 1,
            msg: "empty vocabulary file".into(),
        })?;
        if header != format!("stop\t{STOP_TOKEN}") {
            return Err(Error::Ingestion {
                path: path.display().to_string(),
                line: 1,
                msg: format!("bad vocabulary header {header:?}"),
            });
        }
        Ok(Vocabulary::from_tokens(lines.map(str::to_string).collect()))
    }
}

/// Assigns dense ids in first-occurrence order over `pairs`; the stop token
/// lands on the output side via the ingested trailing stop.
pub fn build_vocab(pairs: &[ParallelPair], side: Side) -> Result<Vocabulary> {
    build_vocab_all(&[pairs], side)
}

/// Vocabulary over several splits at once (train, validation, test), so test
/// tokens are representable at evaluation time.
pub fn build_vocab_all(splits: &[&[ParallelPair]], side: Side) -> Result<Vocabulary> {
    if splits.iter().all(|s| s.is_empty()) {
        return Err(Error::Precondition { op: "build_vocab", msg: "no pairs".into() });
    }
    let mut tokens = Vec::new();
    let mut seen = HashMap::new();
    for split in splits {
        for pair in *split {
            let toks = match side {
                Side::Input => &pair.input,
                Side::Output => &pair.output,
            };
            for t in toks {
                if !seen.contains_key(t) {
                    seen.insert(t.clone(), tokens.len());
                    tokens.push(t.clone());
                }
            }
        }
    }
    Ok(Vocabulary::from_tokens(tokens))
}

/// Reads one TSV split: tokenizes both sides and appends the stop token to
/// each output sequence.
pub fn load_tsv(path: &Path, in_mode: TokenizeMode, out_mode: TokenizeMode) -> Result<Vec<ParallelPair>> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Ingestion {
                path: display.clone(),
                line: lineno,
                msg: format!("expected input<TAB>output, found {} fields", fields.len()),
            });
        }
        let wrap = |e: Error| match e {
            Error::Precondition { msg, .. } => {
                Error::Ingestion { path: display.clone(), line: lineno, msg }
            }
            other => other,
        };
        let input = tokenize(fields[0], in_mode).map_err(wrap)?;
        let mut output = tokenize(fields[1], out_mode).map_err(wrap)?;
        output.push(STOP_TOKEN.to_string());
        pairs.push(ParallelPair { input, output });
    }
    if pairs.is_empty() {
        return Err(Error::Ingestion { path: display, line: 0, msg: "empty dataset file".into() });
    }
    Ok(pairs)
}

/// Loads train/validation/test files of one domain.
pub fn load_split(
    train: &Path,
    validation: &Path,
    test: &Path,
    domain: Domain,
) -> Result<DatasetSplit> {
    let (in_mode, out_mode) = domain.modes();
    Ok(DatasetSplit {
        train: load_tsv(train, in_mode, out_mode)?,
        validation: load_tsv(validation, in_mode, out_mode)?,
        test: load_tsv(test, in_mode, out_mode)?,
        domain,
    })
}
