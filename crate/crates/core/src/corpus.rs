//! Whitespace tokenization, line formats and the three corpus filters.
//!
//! Filters are single pass. Each one exposes a pure [`Verdict`] computation
//! (safe to run on any number of workers) and a stateful `admit` step that
//! records the verdict in a [`FilterReport`]; dedup is the only part that needs
//! shared state.

use std::borrow::Cow;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use compact_str::CompactString;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A non-empty run of non-whitespace characters. Short tokens are stored
/// inline, so tokenizing and cloning typical text does not allocate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(CompactString);

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(Error::InvalidToken(text));
        }
        Ok(Token(CompactString::from(text)))
    }

    /// Caller guarantees the invariant (e.g. the text came out of a whitespace split).
    pub(crate) fn from_piece(text: &str) -> Self {
        debug_assert!(!text.is_empty() && !text.chars().any(char::is_whitespace));
        Token(CompactString::new(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl PartialEq<str> for Token {
    fn eq(&self, other: &str) -> bool {
        self.0.as_str() == other
    }
}

impl PartialEq<&str> for Token {
    fn eq(&self, other: &&str) -> bool {
        self.0.as_str() == *other
    }
}

/// A tokenized line. `raw_char_len` is the character count of the trimmed
/// source line, which is what the character limits are checked against.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence {
    tokens: Vec<Token>,
    raw_char_len: usize,
}

impl Sentence {
    pub fn tokenize(line: &str) -> Self {
        let trimmed = line.trim();
        if !trimmed.is_ascii() {
            return Sentence {
                tokens: trimmed.split_whitespace().map(Token::from_piece).collect(),
                raw_char_len: trimmed.chars().count(),
            };
        }
        // ASCII fast path with the token vector sized up front.
        let mut tokens = Vec::with_capacity(ascii_pieces(trimmed).count());
        for p in ascii_pieces(trimmed) {
            // An ASCII byte run split at ASCII bytes is valid UTF-8.
            tokens.push(Token::from_piece(std::str::from_utf8(p).expect("ASCII")));
        }
        Sentence {
            tokens,
            raw_char_len: trimmed.len(),
        }
    }

    /// Builds a sentence from tokens; the character length is that of the
    /// single-space rendering.
    pub fn from_tokens(tokens: Vec<Token>) -> Self {
        let raw_char_len = rendered_char_len(&tokens);
        Sentence {
            tokens,
            raw_char_len,
        }
    }

    /// Convenience for tests and fixtures: whitespace-splits `words`.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let tokens = words
            .iter()
            .map(|w| Token::new(w.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Sentence::from_tokens(tokens))
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn raw_char_len(&self) -> usize {
        self.raw_char_len
    }

    pub fn render(&self) -> String {
        let bytes: usize = self.tokens.iter().map(|t| t.as_str().len()).sum();
        let mut out = String::with_capacity(bytes + self.tokens.len());
        for (i, tok) in self.tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(tok.as_str());
        }
        out
    }
}

/// Same split as `split_whitespace` for ASCII text.
fn ascii_pieces(text: &str) -> impl Iterator<Item = &[u8]> {
    text.as_bytes()
        .split(|b| matches!(b, b' ' | b'\t' | b'\n' | 0x0b | 0x0c | b'\r'))
        .filter(|p| !p.is_empty())
}

/// Token and character counts of `Sentence::tokenize(line)`, without building
/// the tokens.
pub fn measure(line: &str) -> (usize, usize) {
    let trimmed = line.trim();
    if trimmed.is_ascii() {
        (ascii_pieces(trimmed).count(), trimmed.len())
    } else {
        (trimmed.split_whitespace().count(), trimmed.chars().count())
    }
}

/// `Sentence::tokenize(line).render()`, borrowing when `line` is already
/// single-space separated.
pub fn normalize(line: &str) -> Cow<'_, str> {
    let clean = if line.is_ascii() {
        let b = line.as_bytes();
        b.first() != Some(&b' ')
            && b.last() != Some(&b' ')
            && !b.windows(2).any(|w| w == b"  ")
            && !b.iter().any(|c| matches!(c, b'\t' | b'\n' | 0x0b | 0x0c | b'\r'))
    } else {
        is_clean(line)
    };
    if clean {
        Cow::Borrowed(line)
    } else {
        let mut out = String::with_capacity(line.len());
        for (i, w) in line.split_whitespace().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(w);
        }
        Cow::Owned(out)
    }
}

fn is_clean(line: &str) -> bool {
    let mut prev_space = true;
    let mut clean = true;
    for c in line.chars() {
        if c == ' ' {
            if prev_space {
                clean = false;
                break;
            }
            prev_space = true;
        } else if c.is_whitespace() {
            clean = false;
            break;
        } else {
            prev_space = false;
        }
    }
    clean && !line.ends_with(' ')
}

fn rendered_char_len(tokens: &[Token]) -> usize {
    let chars: usize = tokens.iter().map(|t| t.as_str().chars().count()).sum();
    chars + tokens.len().saturating_sub(1)
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tok) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(tok.as_str())?;
        }
        Ok(())
    }
}

/// Whitespace tokenization of one line.
pub fn tokenize_whitespace(line: &str) -> Sentence {
    Sentence::tokenize(line)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Bitext,
    Bt,
    Ft,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Bitext => "bitext",
            Origin::Bt => "bt",
            Origin::Ft => "ft",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bitext" => Ok(Origin::Bitext),
            "bt" => Ok(Origin::Bt),
            "ft" => Ok(Origin::Ft),
            other => Err(format!("unknown origin {other:?} (expected bitext, bt or ft)")),
        }
    }
}

/// A parallel example. The origin is fixed at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Sentence,
    pub target: Sentence,
    origin: Origin,
}

impl SentencePair {
    pub fn new(source: Sentence, target: Sentence, origin: Origin) -> Self {
        SentencePair {
            source,
            target,
            origin,
        }
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn with_source(self, source: Sentence) -> Self {
        SentencePair { source, ..self }
    }

    pub fn with_target(self, target: Sentence) -> Self {
        SentencePair { target, ..self }
    }

    /// Swaps the two sides, keeping the origin.
    pub fn reversed(self) -> Self {
        SentencePair {
            source: self.target,
            target: self.source,
            origin: self.origin,
        }
    }

    /// `source TAB target`, optionally followed by `TAB origin`.
    pub fn to_tsv(&self, with_origin: bool) -> String {
        let mut line = self.source.render();
        line.push('\t');
        line.push_str(&self.target.render());
        if with_origin {
            line.push('\t');
            line.push_str(self.origin.as_str());
        }
        line
    }
}

/// The fields of one TSV line, not yet tokenized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TsvFields<'a> {
    pub source: &'a str,
    pub target: &'a str,
    /// `None` when the line has only two fields.
    pub origin: Option<Origin>,
}

/// Splits `source TAB target [TAB origin]`. The error is a human-readable
/// reason; callers attach the line number.
pub fn split_tsv(line: &str) -> std::result::Result<TsvFields<'_>, String> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut fields = line.split('\t');
    let (source, target) = match (fields.next(), fields.next()) {
        (Some(s), Some(t)) => (s, t),
        _ => return Err("expected 2 or 3 tab-separated fields, found 1".to_owned()),
    };
    let origin = match fields.next() {
        None => None,
        Some(o) => Some(o.trim().parse()?),
    };
    let extra = fields.count();
    if extra > 0 {
        return Err(format!("expected 2 or 3 tab-separated fields, found {}", 3 + extra));
    }
    Ok(TsvFields {
        source,
        target,
        origin,
    })
}

/// Parses one TSV line (`source TAB target [TAB origin]`). Lines with two
/// fields take `default_origin`.
pub fn parse_tsv_pair(line: &str, default_origin: Origin) -> std::result::Result<SentencePair, String> {
    let f = split_tsv(line)?;
    Ok(SentencePair::new(
        Sentence::tokenize(f.source),
        Sentence::tokenize(f.target),
        f.origin.unwrap_or(default_origin),
    ))
}

/// Counts for one filter invocation.
///
/// `kept` plus every `dropped_*` field equals the number of input lines.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: u64,
    pub dropped_empty: u64,
    pub dropped_length: u64,
    pub dropped_ratio: u64,
    pub dropped_dup: u64,
    pub dropped_malformed: u64,
}

impl FilterReport {
    pub fn input_count(&self) -> u64 {
        self.kept
            + self.dropped_empty
            + self.dropped_length
            + self.dropped_ratio
            + self.dropped_dup
            + self.dropped_malformed
    }

    pub fn record(&mut self, verdict: Verdict) {
        match verdict {
            Verdict::Keep => self.kept += 1,
            Verdict::Empty => self.dropped_empty += 1,
            Verdict::Length => self.dropped_length += 1,
            Verdict::Ratio => self.dropped_ratio += 1,
            Verdict::Duplicate => self.dropped_dup += 1,
            Verdict::Malformed => self.dropped_malformed += 1,
        }
    }

    pub fn merge(&mut self, other: &FilterReport) {
        self.kept += other.kept;
        self.dropped_empty += other.dropped_empty;
        self.dropped_length += other.dropped_length;
        self.dropped_ratio += other.dropped_ratio;
        self.dropped_dup += other.dropped_dup;
        self.dropped_malformed += other.dropped_malformed;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Empty,
    Length,
    Ratio,
    Duplicate,
    Malformed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitextLimits {
    pub max_tokens: usize,
    pub max_ratio: f64,
}

impl Default for BitextLimits {
    fn default() -> Self {
        BitextLimits {
            max_tokens: 250,
            max_ratio: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonoLimits {
    pub max_tokens: usize,
    pub max_chars: usize,
    pub dedup: bool,
}

impl Default for MonoLimits {
    fn default() -> Self {
        MonoLimits {
            max_tokens: 70,
            max_chars: 500,
            dedup: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BtLimits {
    pub max_src_tokens: usize,
    pub max_src_chars: usize,
}

impl Default for BtLimits {
    fn default() -> Self {
        BtLimits {
            max_src_tokens: 75,
            max_src_chars: 550,
        }
    }
}

/// Bitext filter: empty sides, over-long sides, and pairs whose token-length
/// ratio `max/min` exceeds the limit. Limits are inclusive.
#[derive(Debug, Clone, Default)]
pub struct BitextFilter {
    limits: BitextLimits,
    report: FilterReport,
}

impl BitextFilter {
    pub fn new(limits: BitextLimits) -> Self {
        BitextFilter {
            limits,
            report: FilterReport::default(),
        }
    }

    pub fn verdict(&self, pair: &SentencePair) -> Verdict {
        let (s, t) = (pair.source.len(), pair.target.len());
        if s == 0 || t == 0 {
            Verdict::Empty
        } else if s > self.limits.max_tokens || t > self.limits.max_tokens {
            Verdict::Length
        } else if s.max(t) as f64 / s.min(t) as f64 > self.limits.max_ratio {
            Verdict::Ratio
        } else {
            Verdict::Keep
        }
    }

    pub fn admit(&mut self, pair: &SentencePair) -> bool {
        let v = self.verdict(pair);
        self.report.record(v);
        v == Verdict::Keep
    }

    pub fn report_mut(&mut self) -> &mut FilterReport {
        &mut self.report
    }

    pub fn report(&self) -> &FilterReport {
        &self.report
    }
}

/// Exact-line dedup over 128-bit fingerprints of the rendered line.
///
/// Memory is one 16-byte fingerprint per distinct line plus hash-set overhead,
/// roughly 32 bytes per distinct line.
#[derive(Debug, Default)]
pub struct Deduper {
    seen: HashSet<u128>,
}

impl Deduper {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fingerprint(line: &str) -> u128 {
        let mut lo = DefaultHasher::new();
        0u8.hash(&mut lo);
        line.hash(&mut lo);
        let mut hi = DefaultHasher::new();
        1u8.hash(&mut hi);
        line.hash(&mut hi);
        ((hi.finish() as u128) << 64) | lo.finish() as u128
    }

    /// True when the line had not been seen before.
    pub fn insert(&mut self, line: &str) -> bool {
        self.insert_fingerprint(Self::fingerprint(line))
    }

    pub fn insert_fingerprint(&mut self, fp: u128) -> bool {
        self.seen.insert(fp)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Monolingual filter: drops empty lines, lines over the token or character
/// limit and (optionally) repeats of an earlier line.
#[derive(Debug, Default)]
pub struct MonoFilter {
    limits: MonoLimits,
    dedup: Deduper,
    report: FilterReport,
}

impl MonoFilter {
    pub fn new(limits: MonoLimits) -> Self {
        MonoFilter {
            limits,
            dedup: Deduper::new(),
            report: FilterReport::default(),
        }
    }

    /// Length part of the verdict; does not consult dedup state.
    pub fn verdict(&self, sent: &Sentence) -> Verdict {
        if sent.is_empty() {
            Verdict::Empty
        } else if sent.len() > self.limits.max_tokens || sent.raw_char_len() > self.limits.max_chars
        {
            Verdict::Length
        } else {
            Verdict::Keep
        }
    }

    pub fn admit(&mut self, sent: &Sentence) -> bool {
        let v = self.verdict(sent);
        if v == Verdict::Keep && self.limits.dedup {
            return self.admit_fingerprint(Deduper::fingerprint(&sent.render()));
        }
        self.report.record(v);
        v == Verdict::Keep
    }

    /// Second half of a split verdict: the length check already passed and the
    /// fingerprint was computed elsewhere (e.g. on a worker thread).
    pub fn admit_fingerprint(&mut self, fp: u128) -> bool {
        let v = if !self.limits.dedup || self.dedup.insert_fingerprint(fp) {
            Verdict::Keep
        } else {
            Verdict::Duplicate
        };
        self.report.record(v);
        v == Verdict::Keep
    }

    pub fn dedup_enabled(&self) -> bool {
        self.limits.dedup
    }

    pub fn report_mut(&mut self) -> &mut FilterReport {
        &mut self.report
    }

    pub fn report(&self) -> &FilterReport {
        &self.report
    }
}

/// Post-back-translation filter on the synthetic source side.
#[derive(Debug, Clone, Default)]
pub struct BtFilter {
    limits: BtLimits,
    report: FilterReport,
}

impl BtFilter {
    pub fn new(limits: BtLimits) -> Self {
        BtFilter {
            limits,
            report: FilterReport::default(),
        }
    }

    pub fn verdict(&self, pair: &SentencePair) -> Result<Verdict> {
        self.verdict_measured(pair.origin(), pair.source.len(), pair.source.raw_char_len())
    }

    /// The verdict from the source's token and character counts alone (see
    /// [`measure`]).
    pub fn verdict_measured(&self, origin: Origin, src_tokens: usize, src_chars: usize) -> Result<Verdict> {
        if origin != Origin::Bt {
            return Err(Error::OriginMismatch {
                expected: "bt",
                found: origin.as_str(),
            });
        }
        Ok(
            if src_tokens > self.limits.max_src_tokens || src_chars > self.limits.max_src_chars {
                Verdict::Length
            } else {
                Verdict::Keep
            },
        )
    }

    pub fn admit(&mut self, pair: &SentencePair) -> Result<bool> {
        let v = self.verdict(pair)?;
        self.report.record(v);
        Ok(v == Verdict::Keep)
    }

    pub fn report_mut(&mut self) -> &mut FilterReport {
        &mut self.report
    }

    pub fn report(&self) -> &FilterReport {
        &self.report
    }
}

pub fn filter_bitext<I>(pairs: I, limits: BitextLimits) -> (Vec<SentencePair>, FilterReport)
where
    I: IntoIterator<Item = SentencePair>,
{
    let mut filter = BitextFilter::new(limits);
    let kept = pairs.into_iter().filter(|p| filter.admit(p)).collect();
    (kept, filter.report)
}

pub fn filter_monolingual<I>(sents: I, limits: MonoLimits) -> (Vec<Sentence>, FilterReport)
where
    I: IntoIterator<Item = Sentence>,
{
    let mut filter = MonoFilter::new(limits);
    let kept = sents.into_iter().filter(|s| filter.admit(s)).collect();
    (kept, filter.report)
}

pub fn filter_bt_pairs<I>(pairs: I, limits: BtLimits) -> Result<(Vec<SentencePair>, FilterReport)>
where
    I: IntoIterator<Item = SentencePair>,
{
    let mut filter = BtFilter::new(limits);
    let mut kept = Vec::new();
    for pair in pairs {
        if filter.admit(&pair)? {
            kept.push(pair);
        }
    }
    Ok((kept, filter.report))
}
