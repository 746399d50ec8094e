//! Count-based word-for-word translator with one learned swap decision per
//! domain.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::corpus::{Sentence, SentencePair, Token};
use crate::noise::{noise_sentence, NoiseSpec};
use crate::rng::SeededRng;
use crate::tag::{apply_tag, TagSpec};
use crate::Result;

/// Which token of a site `(2i, 2i+1)` decides whether the site is eligible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    Lead,
    Trail,
}

/// The known site inventory: positions `(2i, 2i+1)` where the anchor token
/// is one of the triggers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteRule {
    pub triggers: BTreeSet<Token>,
    pub anchor: Anchor,
}

impl SiteRule {
    pub fn sites(&self, input: &[Token]) -> Vec<usize> {
        (0..input.len() / 2)
            .map(|i| 2 * i)
            .filter(|&p| {
                let t = match self.anchor {
                    Anchor::Lead => &input[p],
                    Anchor::Trail => &input[p + 1],
                };
                self.triggers.contains(t)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Natural,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Standard,
    AsIfBt,
}

/// How a model marks input as synthetic when decoding as if it were BT.
#[derive(Debug, Clone, PartialEq)]
pub enum Marker {
    None,
    Tag(TagSpec),
    Noise { spec: NoiseSpec, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub tag_aware: bool,
    pub alpha: f64,
    pub rule: SiteRule,
    pub tag: TagSpec,
}

impl TrainConfig {
    pub fn new(rule: SiteRule) -> Self {
        TrainConfig {
            tag_aware: false,
            alpha: 0.5,
            rule,
            tag: TagSpec::default(),
        }
    }

    pub fn tag_aware(self, tag_aware: bool) -> Self {
        TrainConfig { tag_aware, ..self }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SwapStats {
    pub sites: u64,
    pub swapped: u64,
}

impl SwapStats {
    pub fn prob(&self) -> Option<f64> {
        (self.sites > 0).then(|| self.swapped as f64 / self.sites as f64)
    }

    fn add(&mut self, other: &SwapStats) {
        self.sites += other.sites;
        self.swapped += other.swapped;
    }
}

/// Per-training-run counts of what was skipped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TrainDiagnostics {
    pub pairs: u64,
    pub unaligned_pairs: u64,
    pub ambiguous_sites: u64,
    pub undetermined_sites: u64,
    pub synthetic_pairs: u64,
}

type Counts = BTreeMap<Token, BTreeMap<Token, u64>>;

fn bump(c: &mut Counts, s: &Token, t: &Token, by: u64) {
    *c.entry(s.clone()).or_default().entry(t.clone()).or_insert(0) += by;
}

fn argmax_count(row: &BTreeMap<Token, u64>) -> Option<&Token> {
    // Highest count; BTreeMap order makes the smallest token win ties.
    let mut best: Option<(&Token, u64)> = None;
    for (t, &c) in row {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((t, c));
        }
    }
    best.map(|(t, _)| t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthModel {
    config: TrainConfig,
    marker: Marker,
    pooled: Counts,
    by_domain: BTreeMap<Domain, Counts>,
    swaps: BTreeMap<Domain, SwapStats>,
    target_types: usize,
    diagnostics: TrainDiagnostics,
}

impl SynthModel {
    pub fn train<'a, I>(corpus: I, config: TrainConfig) -> Result<SynthModel>
    where
        I: IntoIterator<Item = &'a SentencePair>,
    {
        let mut diagnostics = TrainDiagnostics::default();
        let mut examples: Vec<(Domain, &[Token], &[Token])> = Vec::new();
        for pair in corpus {
            diagnostics.pairs += 1;
            let src = pair.source.tokens();
            let (domain, src) = match src.first() {
                Some(first) if config.tag_aware && config.tag.is_reserved(first) => {
                    (Domain::Synthetic, &src[1..])
                }
                _ => (Domain::Natural, src),
            };
            if domain == Domain::Synthetic {
                diagnostics.synthetic_pairs += 1;
            }
            if src.len() != pair.target.len() {
                diagnostics.unaligned_pairs += 1;
                continue;
            }
            examples.push((domain, src, pair.target.tokens()));
        }
        if diagnostics.pairs == 0 {
            return Err(crate::Error::EmptyInput("training corpus"));
        }

        let mut pooled = Counts::new();
        let mut by_domain: BTreeMap<Domain, Counts> = BTreeMap::new();
        let mut site_lists = Vec::with_capacity(examples.len());
        for &(domain, src, tgt) in &examples {
            let sites = config.rule.sites(src);
            let mut at_site = vec![false; src.len()];
            for &p in &sites {
                at_site[p] = true;
                at_site[p + 1] = true;
            }
            for p in (0..src.len()).filter(|&p| !at_site[p]) {
                bump(&mut pooled, &src[p], &tgt[p], 1);
                bump(by_domain.entry(domain).or_default(), &src[p], &tgt[p], 1);
            }
            site_lists.push(sites);
        }
        let best1: BTreeMap<Token, Token> = pooled
            .iter()
            .filter_map(|(s, row)| argmax_count(row).map(|t| (s.clone(), t.clone())))
            .collect();

        let mut swaps: BTreeMap<Domain, SwapStats> = BTreeMap::new();
        for (&(domain, src, tgt), sites) in examples.iter().zip(&site_lists) {
            for &p in sites {
                let (a, b) = (&src[p], &src[p + 1]);
                let monotone = best1.get(a) == Some(&tgt[p]);
                let swapped = best1.get(b) == Some(&tgt[p]);
                let (ta, tb) = match (monotone, swapped) {
                    (true, true) => {
                        diagnostics.ambiguous_sites += 1;
                        continue;
                    }
                    (false, false) => {
                        diagnostics.undetermined_sites += 1;
                        continue;
                    }
                    (true, false) => (&tgt[p], &tgt[p + 1]),
                    (false, true) => (&tgt[p + 1], &tgt[p]),
                };
                let stats = swaps.entry(domain).or_default();
                stats.sites += 1;
                stats.swapped += swapped as u64;
                bump(&mut pooled, a, ta, 1);
                bump(&mut pooled, b, tb, 1);
                let d = by_domain.entry(domain).or_default();
                bump(d, a, ta, 1);
                bump(d, b, tb, 1);
            }
        }

        let target_types = pooled
            .values()
            .flat_map(|row| row.keys())
            .collect::<BTreeSet<_>>()
            .len();
        Ok(SynthModel {
            config,
            marker: Marker::None,
            pooled,
            by_domain,
            swaps,
            target_types,
            diagnostics,
        })
    }

    /// Records how `as_if_bt` decoding marks its input.
    pub fn with_marker(self, marker: Marker) -> Self {
        SynthModel { marker, ..self }
    }

    pub fn marker(&self) -> &Marker {
        &self.marker
    }

    pub fn is_tag_aware(&self) -> bool {
        self.config.tag_aware
    }

    pub fn diagnostics(&self) -> &TrainDiagnostics {
        &self.diagnostics
    }

    pub fn swap_stats(&self, domain: Domain) -> SwapStats {
        self.swaps.get(&domain).copied().unwrap_or_default()
    }

    pub fn pooled_swap_stats(&self) -> SwapStats {
        let mut all = SwapStats::default();
        for s in self.swaps.values() {
            all.add(s);
        }
        all
    }

    /// Swap probability used when decoding `domain`. Pooled models, and
    /// domains without any observed site, fall back to the pooled estimate.
    pub fn swap_prob(&self, domain: Domain) -> f64 {
        let own = if self.config.tag_aware {
            self.swap_stats(domain).prob()
        } else {
            None
        };
        own.or_else(|| self.pooled_swap_stats().prob()).unwrap_or(0.0)
    }

    fn pooled_prob(&self, s: &Token, t: &Token) -> f64 {
        let row = self.pooled.get(s);
        let c = row.and_then(|r| r.get(t)).copied().unwrap_or(0) as f64;
        let total = row.map_or(0, |r| r.values().sum::<u64>()) as f64;
        let a = self.config.alpha;
        (c + a) / (total + a * self.target_types.max(1) as f64)
    }

    /// Smoothed translation probability. Tag-aware models back off from the
    /// domain counts to the pooled estimate.
    pub fn prob(&self, s: &Token, t: &Token, domain: Domain) -> f64 {
        let pooled = self.pooled_prob(s, t);
        if !self.config.tag_aware {
            return pooled;
        }
        let row = self.by_domain.get(&domain).and_then(|c| c.get(s));
        let c = row.and_then(|r| r.get(t)).copied().unwrap_or(0) as f64;
        let total = row.map_or(0, |r| r.values().sum::<u64>()) as f64;
        let a = self.config.alpha;
        (c + a * pooled) / (total + a)
    }

    /// Most probable translation; unknown tokens are copied.
    pub fn translate_token(&self, s: &Token, domain: Domain) -> Token {
        let Some(row) = self.pooled.get(s) else {
            return s.clone();
        };
        let mut best: Option<(&Token, f64)> = None;
        for t in row.keys() {
            let p = self.prob(s, t, domain);
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((t, p));
            }
        }
        best.map_or_else(|| s.clone(), |(t, _)| t.clone())
    }

    /// Decodes input as given: a leading tag selects the synthetic domain for
    /// tag-aware models.
    pub fn translate(&self, input: &Sentence) -> Sentence {
        let tokens = input.tokens();
        let (domain, tokens) = match tokens.first() {
            Some(first) if self.config.tag_aware && self.config.tag.is_reserved(first) => {
                (Domain::Synthetic, &tokens[1..])
            }
            _ => (Domain::Natural, tokens),
        };
        let mut out: Vec<Token> = tokens.iter().map(|s| self.translate_token(s, domain)).collect();
        if self.swap_prob(domain) > 0.5 {
            for p in self.config.rule.sites(tokens) {
                out.swap(p, p + 1);
            }
        }
        Sentence::from_tokens(out)
    }

    /// `line` picks the noise substream when the marker is noise.
    pub fn decode(&self, source: &Sentence, mode: DecodeMode, line: u64) -> Result<Sentence> {
        match (mode, &self.marker) {
            (DecodeMode::Standard, _) | (DecodeMode::AsIfBt, Marker::None) => Ok(self.translate(source)),
            (DecodeMode::AsIfBt, Marker::Tag(spec)) => Ok(self.translate(&apply_tag(source, spec, None)?)),
            (DecodeMode::AsIfBt, Marker::Noise { spec, seed }) => {
                let noised = noise_sentence(source, spec, &SeededRng::new(*seed), line)?;
                Ok(self.translate(&noised))
            }
        }
    }

    /// Multiplies every stored count by `k`.
    pub fn scale_counts(&mut self, k: u64) {
        let scale = |c: &mut Counts| {
            for row in c.values_mut() {
                for v in row.values_mut() {
                    *v *= k;
                }
            }
        };
        scale(&mut self.pooled);
        for c in self.by_domain.values_mut() {
            scale(c);
        }
        for s in self.swaps.values_mut() {
            s.sites *= k;
            s.swapped *= k;
        }
    }
}
