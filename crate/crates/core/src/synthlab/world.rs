//! Random toy languages: a source bigram model, a noisy dictionary and one
//! local reordering rule.

use std::collections::{BTreeSet, HashMap};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{Origin, Sentence, SentencePair, Token};
use crate::rng::{SeededRng, StreamId};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldParams {
    /// Source types with their own target translation.
    pub native_types: usize,
    /// Source types spelled identically in the target language.
    pub loan_types: usize,
    /// Share of source types that trigger the swap rule.
    pub reorder_fraction: f64,
    /// Share of native types with a second sense.
    pub alt_sense_fraction: f64,
    /// Chance that a second sense is a loanword.
    pub loan_sense_prob: f64,
    /// Range of the probability of a native type's main sense.
    pub best_prob: (f64, f64),
    /// Share of native types that are typical of the test domain.
    pub in_domain_fraction: f64,
    /// Weight multiplier applied to in-domain types when sampling bitext.
    pub bitext_in_domain_weight: f64,
    /// Exponent of the power law over type popularity ranks.
    pub zipf_exponent: f64,
    /// Extra bigram weight for a trigger followed by another trigger.
    pub trigger_cohesion: f64,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            native_types: 44,
            loan_types: 6,
            reorder_fraction: 0.2,
            alt_sense_fraction: 0.5,
            loan_sense_prob: 0.8,
            best_prob: (0.6, 0.85),
            in_domain_fraction: 0.3,
            bitext_in_domain_weight: 0.0,
            zipf_exponent: 0.3,
            trigger_cohesion: 12.0,
            min_len: 5,
            max_len: 15,
        }
    }
}

impl WorldParams {
    /// Same world shape with the reordering rule disabled.
    pub fn without_reordering() -> Self {
        WorldParams {
            reorder_fraction: 0.0,
            ..WorldParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub best: Token,
    pub best_prob: f64,
    pub alt: Option<Token>,
}

impl Entry {
    fn sample(&self, rng: &mut ChaCha8Rng) -> &Token {
        match &self.alt {
            Some(alt) if !rng.gen_bool(self.best_prob) => alt,
            _ => &self.best,
        }
    }
}

/// Bigram model over source type indices.
#[derive(Debug, Clone, PartialEq)]
struct Bigram {
    start: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
}

impl Bigram {
    fn new(popularity: &[f64], affinity: &[Vec<f64>], scale: &[f64]) -> Self {
        let weights = |row: Option<usize>| -> Vec<f64> {
            (0..popularity.len())
                .map(|b| match row {
                    Some(a) if a == b => 0.0,
                    Some(a) => popularity[b] * scale[b] * affinity[a][b],
                    None => popularity[b] * scale[b],
                })
                .collect()
        };
        Bigram {
            start: WeightedIndex::new(weights(None)).expect("positive start weights"),
            rows: (0..popularity.len())
                .map(|a| WeightedIndex::new(weights(Some(a))).expect("positive row weights"))
                .collect(),
        }
    }

    fn sample(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(len);
        let mut prev = self.start.sample(rng);
        out.push(prev);
        while out.len() < len {
            prev = self.rows[prev].sample(rng);
            out.push(prev);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub seed: u64,
    pub params: WorldParams,
    pub source_vocab: Vec<Token>,
    pub target_vocab: Vec<Token>,
    /// Indexed like `source_vocab`.
    pub dictionary: Vec<Entry>,
    pub reorder_class: BTreeSet<Token>,
    pub in_domain: BTreeSet<Token>,
    lm: Bigram,
    bitext_lm: Bigram,
    inverse: HashMap<Token, Token>,
}

/// Generated data for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpora {
    pub bitext: Vec<SentencePair>,
    pub mono_targets: Vec<Sentence>,
    pub mono_sources: Vec<Sentence>,
    pub test: Vec<SentencePair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CorpusSizes {
    pub bitext_n: usize,
    pub mono_n: usize,
    pub source_mono_n: usize,
    pub test_n: usize,
}

impl Default for CorpusSizes {
    fn default() -> Self {
        CorpusSizes {
            bitext_n: 2000,
            mono_n: 20_000,
            source_mono_n: 20_000,
            test_n: 500,
        }
    }
}

fn tok(s: String) -> Token {
    Token::new(s).expect("generated names contain no whitespace")
}

impl SynthWorld {
    pub fn generate(seed: u64, params: WorldParams) -> Self {
        let mut rng = SeededRng::new(seed).substream(0, StreamId::WORLD);
        let n_native = params.native_types;
        let n = n_native + params.loan_types;
        let source_vocab: Vec<Token> = (0..n_native)
            .map(|i| tok(format!("s{i:02}")))
            .chain((0..params.loan_types).map(|i| tok(format!("L{i}"))))
            .collect();
        let target_vocab: Vec<Token> = (0..n_native)
            .map(|i| tok(format!("t{i:02}")))
            .chain((0..params.loan_types).map(|i| tok(format!("L{i}"))))
            .collect();

        let n_in_domain = (params.in_domain_fraction * n_native as f64).round() as usize;
        let in_domain_idx: Vec<usize> = (0..n_native).collect::<Vec<_>>()
            .choose_multiple(&mut rng, n_in_domain)
            .copied()
            .collect();
        // Second senses borrow general-domain words only.
        let general: Vec<usize> = (0..n_native).filter(|i| !in_domain_idx.contains(i)).collect();

        let mut dictionary = Vec::with_capacity(n);
        for i in 0..n {
            let best = target_vocab[i].clone();
            if i >= n_native {
                dictionary.push(Entry {
                    best,
                    best_prob: 1.0,
                    alt: None,
                });
                continue;
            }
            let best_prob = rng.gen_range(params.best_prob.0..=params.best_prob.1);
            let alt = if rng.gen_bool(params.alt_sense_fraction) {
                let j = if params.loan_types > 0 && rng.gen_bool(params.loan_sense_prob) {
                    n_native + rng.gen_range(0..params.loan_types)
                } else {
                    let others: Vec<usize> = general.iter().copied().filter(|&j| j != i).collect();
                    *others.choose(&mut rng).expect("more than one general-domain type")
                };
                Some(target_vocab[j].clone())
            } else {
                None
            };
            dictionary.push(Entry {
                best,
                best_prob,
                alt,
            });
        }

        let n_reorder = (params.reorder_fraction * n as f64).round() as usize;
        let reorder_idx: Vec<usize> = (0..n).collect::<Vec<_>>()
            .choose_multiple(&mut rng, n_reorder)
            .copied()
            .collect();
        let reorder_class = reorder_idx.iter().map(|&i| source_vocab[i].clone()).collect();

        // Zipf-like popularity over a random ranking, with random pairwise affinities.
        let mut ranks: Vec<usize> = (0..n).collect();
        ranks.shuffle(&mut rng);
        let popularity: Vec<f64> = ranks
            .iter()
            .map(|&r| (r as f64 + 1.0).powf(-params.zipf_exponent))
            .collect();
        let mut affinity: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(0.2..1.8)).collect())
            .collect();
        for &a in &reorder_idx {
            for &b in &reorder_idx {
                affinity[a][b] *= params.trigger_cohesion;
            }
        }
        let flat = vec![1.0; n];
        let mut shifted = flat.clone();
        for &i in &in_domain_idx {
            shifted[i] = params.bitext_in_domain_weight;
        }
        let lm = Bigram::new(&popularity, &affinity, &flat);
        let bitext_lm = Bigram::new(&popularity, &affinity, &shifted);

        let inverse = dictionary
            .iter()
            .zip(&source_vocab)
            .map(|(e, s)| (e.best.clone(), s.clone()))
            .collect();
        let in_domain = in_domain_idx.iter().map(|&i| source_vocab[i].clone()).collect();

        SynthWorld {
            seed,
            params,
            source_vocab,
            target_vocab,
            dictionary,
            reorder_class,
            in_domain,
            lm,
            bitext_lm,
            inverse,
        }
    }

    fn index_of(&self, t: &Token) -> Option<usize> {
        self.source_vocab.iter().position(|s| s == t)
    }

    pub fn entry(&self, source: &Token) -> Option<&Entry> {
        self.index_of(source).map(|i| &self.dictionary[i])
    }

    /// Main-sense translations of the reordering triggers.
    pub fn reorder_targets(&self) -> BTreeSet<Token> {
        self.reorder_class
            .iter()
            .filter_map(|s| self.entry(s).map(|e| e.best.clone()))
            .collect()
    }

    fn sentence(&self, idx: &[usize]) -> Sentence {
        Sentence::from_tokens(idx.iter().map(|&i| self.source_vocab[i].clone()).collect())
    }

    fn sample_indices(&self, lm: &Bigram, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let len = rng.gen_range(self.params.min_len..=self.params.max_len);
        lm.sample(len, rng)
    }

    /// Dictionary sample per token, then the pair at (2i, 2i+1) is swapped
    /// whenever the token at 2i is a trigger.
    pub fn translate_true(&self, source: &Sentence, rng: &mut ChaCha8Rng) -> Sentence {
        let mut out: Vec<Token> = source
            .tokens()
            .iter()
            .map(|s| {
                self.entry(s)
                    .map(|e| e.sample(rng).clone())
                    .unwrap_or_else(|| s.clone())
            })
            .collect();
        apply_swaps(source.tokens(), &mut out, |t| self.reorder_class.contains(t));
        Sentence::from_tokens(out)
    }

    pub fn generate_corpora(&self, sizes: CorpusSizes) -> Corpora {
        let rng = SeededRng::new(self.seed);
        let pairs = |n: usize, lm: &Bigram, part: u64| -> Vec<SentencePair> {
            let mut r = rng.substream(part, StreamId::CORPUS);
            (0..n)
                .map(|_| {
                    let src = self.sentence(&self.sample_indices(lm, &mut r));
                    let tgt = self.translate_true(&src, &mut r);
                    SentencePair::new(src, tgt, Origin::Bitext)
                })
                .collect()
        };
        let bitext = pairs(sizes.bitext_n, &self.bitext_lm, 0);
        let mono_targets = pairs(sizes.mono_n, &self.lm, 1)
            .into_iter()
            .map(|p| p.target)
            .collect();
        let mono_sources = pairs(sizes.source_mono_n, &self.lm, 2)
            .into_iter()
            .map(|p| p.source)
            .collect();
        let test = pairs(sizes.test_n, &self.lm, 3);
        Corpora {
            bitext,
            mono_targets,
            mono_sources,
            test,
        }
    }

    /// Word-for-word inverse through each token's main sense. Word order is
    /// left as is, so swapped targets come back in swapped order.
    pub fn biased_back_translate(&self, target: &Sentence) -> Result<Sentence> {
        target
            .tokens()
            .iter()
            .map(|t| {
                self.inverse
                    .get(t)
                    .cloned()
                    .ok_or_else(|| Error::Untranslatable(t.to_string()))
            })
            .collect::<Result<Vec<_>>>()
            .map(Sentence::from_tokens)
    }
}

/// Swaps `out[2i]` and `out[2i+1]` wherever `trigger(input[2i])` holds.
pub(crate) fn apply_swaps<F>(input: &[Token], out: &mut [Token], trigger: F)
where
    F: Fn(&Token) -> bool,
{
    let n = input.len().min(out.len());
    let mut i = 0;
    while i + 1 < n {
        if trigger(&input[i]) {
            out.swap(i, i + 1);
        }
        i += 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(seed: u64) -> SynthWorld {
        SynthWorld::generate(seed, WorldParams::default())
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let (a, b) = (world(1), world(1));
        assert_eq!(a.dictionary, b.dictionary);
        assert_eq!(a.reorder_class, b.reorder_class);
        let c = world(2);
        assert_ne!(a.dictionary, c.dictionary);
        assert_eq!(
            a.generate_corpora(CorpusSizes::default()),
            b.generate_corpora(CorpusSizes::default())
        );
    }

    #[test]
    fn world_shape() {
        let w = world(3);
        assert_eq!(w.source_vocab.len(), 50);
        assert_eq!(w.reorder_class.len(), 10);
        assert!(w.reorder_class.iter().all(|t| w.source_vocab.contains(t)));
        // Every target type is the main sense of exactly one source type.
        let mut bests: Vec<_> = w.dictionary.iter().map(|e| e.best.clone()).collect();
        bests.sort();
        bests.dedup();
        assert_eq!(bests.len(), w.target_vocab.len());
        for e in &w.dictionary {
            assert!(e.alt.as_ref().is_none_or(|a| *a != e.best));
        }
    }

    #[test]
    fn rule_examples() {
        let w = world(4);
        let r = w.reorder_class.iter().next().unwrap().clone();
        let x = w
            .source_vocab
            .iter()
            .find(|t| !w.reorder_class.contains(*t) && w.entry(t).unwrap().alt.is_none())
            .unwrap()
            .clone();
        let mut rng = SeededRng::new(0).substream(0, StreamId::CORPUS);
        let monotone = Sentence::from_tokens(vec![x.clone(), x.clone(), x.clone()]);
        let t = w.translate_true(&monotone, &mut rng);
        assert!(t.tokens().iter().all(|t| *t == w.entry(&x).unwrap().best));
        let fired = Sentence::from_tokens(vec![r.clone(), x.clone()]);
        let t = w.translate_true(&fired, &mut rng);
        assert_eq!(t.tokens()[0], w.entry(&x).unwrap().best);
        // Odd positions never fire.
        let odd = Sentence::from_tokens(vec![x.clone(), r.clone(), x.clone()]);
        let t = w.translate_true(&odd, &mut rng);
        assert_eq!(t.tokens()[2], w.entry(&x).unwrap().best);
    }

    #[test]
    fn no_reordering_world_never_swaps() {
        let w = SynthWorld::generate(5, WorldParams::without_reordering());
        assert!(w.reorder_class.is_empty());
        let c = w.generate_corpora(CorpusSizes {
            bitext_n: 200,
            mono_n: 10,
            source_mono_n: 10,
            test_n: 10,
        });
        for p in &c.bitext {
            for (s, t) in p.source.tokens().iter().zip(p.target.tokens()) {
                let e = w.entry(s).unwrap();
                assert!(*t == e.best || Some(t) == e.alt.as_ref());
            }
        }
    }

    #[test]
    fn coverage_and_domain_shift() {
        let w = world(1);
        let c = w.generate_corpora(CorpusSizes::default());
        let mono_types: BTreeSet<&Token> = c.mono_targets.iter().flat_map(|s| s.tokens()).collect();
        assert_eq!(mono_types.len(), w.target_vocab.len());
        let bitext_types: BTreeSet<&Token> = c.bitext.iter().flat_map(|p| p.target.tokens()).collect();
        assert!(bitext_types.len() < w.target_vocab.len());
        for p in c.bitext.iter().chain(&c.test) {
            assert!((5..=15).contains(&p.source.len()));
            assert_eq!(p.source.len(), p.target.len());
        }
    }

    #[test]
    fn back_translation_is_monotone() {
        let w = world(2);
        let x: Vec<Token> = w
            .source_vocab
            .iter()
            .filter(|t| !w.reorder_class.contains(*t))
            .take(2)
            .cloned()
            .collect();
        let r = w.reorder_class.iter().next().unwrap().clone();
        // Four tokens, main senses only, one fired site at position 0.
        let best = |s: &Token| w.entry(s).unwrap().best.clone();
        let src = vec![r.clone(), x[0].clone(), x[1].clone(), x[0].clone()];
        let mut tgt: Vec<Token> = src.iter().map(best).collect();
        apply_swaps(&src, &mut tgt, |t| w.reorder_class.contains(t));
        let bt = w.biased_back_translate(&Sentence::from_tokens(tgt)).unwrap();
        assert_eq!(bt.tokens(), &[x[0].clone(), r, x[1].clone(), x[0].clone()]);
        assert!(matches!(
            w.biased_back_translate(&Sentence::tokenize("nope")),
            Err(Error::Untranslatable(_))
        ));
    }

    #[test]
    fn biased_inverse_disagrees_on_fired_sentences() {
        let w = world(6);
        let c = w.generate_corpora(CorpusSizes {
            bitext_n: 1000,
            mono_n: 1,
            source_mono_n: 1,
            test_n: 1,
        });
        let mut fired = 0;
        for p in &c.bitext {
            let src = p.source.tokens();
            let fires = (0..src.len() / 2).any(|i| {
                w.reorder_class.contains(&src[2 * i]) && src[2 * i] != src[2 * i + 1]
            });
            if !fires {
                continue;
            }
            fired += 1;
            let bt = w.biased_back_translate(&p.target).unwrap();
            assert_ne!(bt.tokens(), src);
        }
        assert!(fired > 500);
    }
}
