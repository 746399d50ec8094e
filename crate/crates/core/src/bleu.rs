//! Corpus BLEU with 13a tokenization, mixed case, one reference and
//! exponential smoothing, compatible with the de-facto reference scorer.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;

use crate::corpus::{Sentence, Token};
use crate::{Error, Result};

pub const SIGNATURE: &str = "BLEU+case.mixed+numrefs.1+smooth.exp+tok.13a";
pub const MAX_ORDER: usize = 4;

/// The only supported configuration; the fields exist so the signature is
/// self-describing in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BleuConfig {
    pub max_order: usize,
    pub num_refs: usize,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_order: MAX_ORDER,
            num_refs: 1,
        }
    }
}

impl BleuConfig {
    pub fn signature(&self) -> &'static str {
        SIGNATURE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    pub score: f64,
    /// Percentages, smoothed where an order had no matches.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
    pub counts: NgramCounts,
    /// Set when the hypotheses contain no tokens at all.
    pub empty_hypotheses: bool,
    pub signature: String,
}

impl BleuScore {
    /// `score` rounded to two decimals followed by the counts, in the usual
    /// one-line format.
    pub fn summary(&self) -> String {
        let p = self.precisions;
        format!(
            "BLEU = {:.2} {:.1}/{:.1}/{:.1}/{:.1} (BP = {:.3} ratio = {:.3} hyp_len = {} ref_len = {})",
            self.score,
            p[0],
            p[1],
            p[2],
            p[3],
            self.brevity_penalty,
            if self.ref_len == 0 { 0.0 } else { self.hyp_len as f64 / self.ref_len as f64 },
            self.hyp_len,
            self.ref_len
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NgramCounts {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
}

impl NgramCounts {
    pub fn merge(&mut self, other: &NgramCounts) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
    }
}

/// Python's `str.isspace`, which also treats the ASCII separators
/// U+001C..U+001F as whitespace.
fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

struct Rules {
    symbols: Regex,
    period_comma_after: Regex,
    period_comma_before: Regex,
    digit_dash: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| Rules {
        symbols: Regex::new(r"([\x7B-\x7E\x5B-\x60\x20-\x26\x28-\x2B\x3A-\x40\x2F])").unwrap(),
        period_comma_after: Regex::new(r"([^0-9])([\.,])").unwrap(),
        period_comma_before: Regex::new(r"([\.,])([^0-9])").unwrap(),
        digit_dash: Regex::new(r"([0-9])(-)").unwrap(),
    })
}

pub fn tokenize_13a(line: &str) -> Sentence {
    let r = rules();
    let norm = line
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ")
        .replace("&quot;", "\"")
        .replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">");
    let norm = format!(" {norm} ");
    let norm = r.symbols.replace_all(&norm, " ${1} ");
    let norm = r.period_comma_after.replace_all(&norm, "${1} ${2} ");
    let norm = r.period_comma_before.replace_all(&norm, " ${1} ${2}");
    let norm = r.digit_dash.replace_all(&norm, "${1} ${2} ");
    let tokens = norm
        .split(is_py_space)
        .filter(|t| !t.is_empty())
        .map(Token::from_piece)
        .collect();
    Sentence::from_tokens(tokens)
}

fn ngrams(tokens: &[Token], max_order: usize) -> HashMap<&[Token], u64> {
    let mut out = HashMap::new();
    for n in 1..=max_order.min(tokens.len()) {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// Clipped n-gram matches and hypothesis n-gram totals for one segment.
pub fn segment_counts(hyp: &Sentence, reference: &Sentence) -> NgramCounts {
    let h = ngrams(hyp.tokens(), MAX_ORDER);
    let r = ngrams(reference.tokens(), MAX_ORDER);
    let mut c = NgramCounts::default();
    for (gram, &count) in &h {
        let n = gram.len() - 1;
        c.totals[n] += count;
        c.matches[n] += count.min(r.get(gram).copied().unwrap_or(0));
    }
    c
}

pub fn ngram_precisions(hyps: &[Sentence], refs: &[Sentence]) -> Result<NgramCounts> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    let mut total = NgramCounts::default();
    for (h, r) in hyps.iter().zip(refs) {
        total.merge(&segment_counts(h, r));
    }
    Ok(total)
}

/// Sufficient statistics for a whole corpus, suitable for merging across
/// workers before scoring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub counts: NgramCounts,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn add_segment(&mut self, hyp: &str, reference: &str) {
        let h = tokenize_13a(hyp.trim_end_matches(is_py_space));
        let r = tokenize_13a(reference.trim_end_matches(is_py_space));
        self.counts.merge(&segment_counts(&h, &r));
        self.hyp_len += h.len() as u64;
        self.ref_len += r.len() as u64;
    }

    pub fn merge(&mut self, other: &BleuStats) {
        self.counts.merge(&other.counts);
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    pub fn score(&self) -> BleuScore {
        let NgramCounts { matches, totals } = self.counts;
        let mut precisions = [0.0; MAX_ORDER];
        let mut smooth = 1.0;
        for n in 0..MAX_ORDER {
            if totals[n] == 0 {
                break;
            }
            precisions[n] = if matches[n] == 0 {
                smooth *= 2.0;
                100.0 / (smooth * totals[n] as f64)
            } else {
                100.0 * matches[n] as f64 / totals[n] as f64
            };
        }
        let brevity_penalty = if self.hyp_len >= self.ref_len {
            1.0
        } else if self.hyp_len == 0 {
            0.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        };
        let score = if precisions.contains(&0.0) {
            0.0
        } else {
            let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
            brevity_penalty * mean_log.exp()
        };
        BleuScore {
            score,
            precisions,
            brevity_penalty,
            hyp_len: self.hyp_len,
            ref_len: self.ref_len,
            counts: self.counts,
            empty_hypotheses: self.hyp_len == 0,
            signature: SIGNATURE.to_owned(),
        }
    }
}

pub fn corpus_bleu<H, R>(hyps: &[H], refs: &[R], _cfg: &BleuConfig) -> Result<BleuScore>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    let mut stats = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        stats.add_segment(h.as_ref(), r.as_ref());
    }
    Ok(stats.score())
}
