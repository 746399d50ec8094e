//! Static source-side noise: word dropout, word blanking and k-constrained
//! permutation, applied in that order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, SentencePair, Token};
use crate::rng::{SeededRng, StreamId};
use crate::{Error, Result};

pub const DEFAULT_BLANK: &str = "⟨BLANK⟩";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseOps {
    pub dropout: bool,
    pub blank: bool,
    pub permute: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub dropout_p: f64,
    pub blank_p: f64,
    pub permute_k: usize,
    pub ops: NoiseOps,
    pub blank_token: String,
}

impl NoiseSpec {
    /// 10% dropout, 10% blanking, 3-constrained permutation.
    pub fn noised_bt() -> Self {
        NoiseSpec {
            dropout_p: 0.10,
            blank_p: 0.10,
            permute_k: 3,
            ops: NoiseOps {
                dropout: true,
                blank: true,
                permute: true,
            },
            blank_token: DEFAULT_BLANK.to_owned(),
        }
    }

    /// Permutation only.
    pub fn p3bt() -> Self {
        NoiseSpec {
            ops: NoiseOps {
                dropout: false,
                blank: false,
                permute: true,
            },
            ..Self::noised_bt()
        }
    }

    pub fn identity() -> Self {
        NoiseSpec {
            ops: NoiseOps {
                dropout: false,
                blank: false,
                permute: false,
            },
            ..Self::noised_bt()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("dropout probability", self.dropout_p)?;
        check_probability("blank probability", self.blank_p)?;
        Token::new(self.blank_token.as_str())?;
        Ok(())
    }

    pub fn blank(&self) -> Result<Token> {
        Token::new(self.blank_token.as_str())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::noised_bt()
    }
}

pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            range: "[0, 1]",
            value: p,
        })
    }
}

/// Reorders tokens so none moves more than `k` positions: each index `i` gets
/// the key `i + u` with `u ~ U[0, k+1)` and indices are stably sorted by key.
pub fn permute_k<R: Rng + ?Sized>(s: &Sentence, k: usize, rng: &mut R) -> Sentence {
    let mut tokens = s.tokens().to_vec();
    permute_in_place(&mut tokens, k, rng);
    Sentence::from_tokens(tokens)
}

/// Deletes each token independently with probability `p`.
pub fn word_dropout<R: Rng + ?Sized>(s: &Sentence, p: f64, rng: &mut R) -> Sentence {
    let mut tokens = s.tokens().to_vec();
    tokens.retain(|_| !rng.gen_bool(p));
    Sentence::from_tokens(tokens)
}

/// Replaces each token independently with `blank` with probability `p`.
pub fn word_blank<R: Rng + ?Sized>(
    s: &Sentence,
    p: f64,
    blank: &Token,
    rng: &mut R,
) -> Result<Sentence> {
    let mut tokens = s.tokens().to_vec();
    blank_in_place(&mut tokens, p, blank, rng)?;
    Ok(Sentence::from_tokens(tokens))
}

fn permute_in_place<R: Rng + ?Sized>(tokens: &mut Vec<Token>, k: usize, rng: &mut R) {
    if k == 0 || tokens.len() < 2 {
        return;
    }
    let width = (k + 1) as f64;
    let mut keyed: Vec<(f64, usize)> = (0..tokens.len())
        .map(|i| (i as f64 + rng.gen_range(0.0..width), i))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let old = std::mem::take(tokens);
    tokens.extend(keyed.into_iter().map(|(_, i)| old[i].clone()));
}

fn blank_in_place<R: Rng + ?Sized>(tokens: &mut [Token], p: f64, blank: &Token, rng: &mut R) -> Result<()> {
    if let Some(position) = tokens.iter().position(|t| t == blank) {
        return Err(Error::ReservedCollision {
            token: blank.to_string(),
            position,
        });
    }
    for t in tokens.iter_mut() {
        if rng.gen_bool(p) {
            *t = blank.clone();
        }
    }
    Ok(())
}

/// Applies the enabled ops (dropout, then blank, then permute). `line` selects
/// the per-line substreams.
pub fn noise_sentence(s: &Sentence, spec: &NoiseSpec, rng: &SeededRng, line: u64) -> Result<Sentence> {
    spec.validate()?;
    apply_ops(s, spec, &spec.blank()?, rng, line)
}

// `spec` is already validated and `blank` is its blank token.
fn apply_ops(s: &Sentence, spec: &NoiseSpec, blank: &Token, rng: &SeededRng, line: u64) -> Result<Sentence> {
    let mut tokens = s.tokens().to_vec();
    if spec.ops.dropout {
        let rng = &mut rng.substream(line, StreamId::DROPOUT);
        tokens.retain(|_| !rng.gen_bool(spec.dropout_p));
    }
    if spec.ops.blank {
        blank_in_place(&mut tokens, spec.blank_p, blank, &mut rng.substream(line, StreamId::BLANK))?;
    }
    if spec.ops.permute {
        permute_in_place(&mut tokens, spec.permute_k, &mut rng.substream(line, StreamId::PERMUTE));
    }
    Ok(Sentence::from_tokens(tokens))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Source,
    Target,
}

/// Per-pair coin flip followed by `noise_sentence` on one side.
#[derive(Debug, Clone)]
pub struct CorpusNoiser {
    spec: NoiseSpec,
    blank: Token,
    sentence_prob: f64,
    rng: SeededRng,
    side: Side,
}

impl CorpusNoiser {
    pub fn new(spec: NoiseSpec, sentence_prob: f64, seed: u64, side: Side) -> Result<Self> {
        spec.validate()?;
        check_probability("sentence probability", sentence_prob)?;
        Ok(CorpusNoiser {
            blank: spec.blank()?,
            spec,
            sentence_prob,
            rng: SeededRng::new(seed),
            side,
        })
    }

    pub fn selects(&self, line: u64) -> bool {
        self.rng
            .substream(line, StreamId::SENTENCE_COIN)
            .gen_bool(self.sentence_prob)
    }

    pub fn noise_line(&self, line: u64, s: &Sentence) -> Result<Option<Sentence>> {
        if !self.selects(line) {
            return Ok(None);
        }
        apply_ops(s, &self.spec, &self.blank, &self.rng, line).map(Some)
    }

    /// Returns the (possibly) noised pair and whether it was selected.
    pub fn noise_pair(&self, line: u64, pair: SentencePair) -> Result<(SentencePair, bool)> {
        let side = match self.side {
            Side::Source => &pair.source,
            Side::Target => &pair.target,
        };
        Ok(match self.noise_line(line, side)? {
            None => (pair, false),
            Some(noised) => match self.side {
                Side::Source => (pair.with_source(noised), true),
                Side::Target => (pair.with_target(noised), true),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NoiseStats {
    pub pairs: u64,
    pub noised: u64,
}

impl NoiseStats {
    pub fn noised_fraction(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.noised as f64 / self.pairs as f64
        }
    }
}

/// Noises the source side of each pair with probability `sentence_prob`.
/// Line indices start at 0 in iteration order.
pub fn noise_corpus<I>(
    pairs: I,
    spec: &NoiseSpec,
    sentence_prob: f64,
    seed: u64,
) -> Result<(Vec<SentencePair>, NoiseStats)>
where
    I: IntoIterator<Item = SentencePair>,
{
    let noiser = CorpusNoiser::new(spec.clone(), sentence_prob, seed, Side::Source)?;
    let mut stats = NoiseStats::default();
    let mut out = Vec::new();
    for (line, pair) in pairs.into_iter().enumerate() {
        let (pair, noised) = noiser.noise_pair(line as u64, pair)?;
        stats.pairs += 1;
        stats.noised += noised as u64;
        out.push(pair);
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Origin;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn numbered(n: usize) -> Sentence {
        Sentence::from_tokens((0..n).map(|i| Token::new(format!("t{i}")).unwrap()).collect())
    }

    fn positions(out: &Sentence) -> Vec<usize> {
        out.tokens()
            .iter()
            .map(|t| t.as_str()[1..].parse().unwrap())
            .collect()
    }

    #[test]
    fn permute_single_and_zero_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = Sentence::tokenize("a");
        assert_eq!(permute_k(&one, 5, &mut rng), one);
        let s = numbered(12);
        assert_eq!(permute_k(&s, 0, &mut rng), s);
    }

    #[test]
    fn permute_respects_bound_over_many_trials() {
        let s = numbered(10);
        let rng = SeededRng::new(3);
        let mut moved = false;
        for trial in 0..10_000u64 {
            let out = permute_k(&s, 3, &mut rng.substream(trial, StreamId::PERMUTE));
            let pos = positions(&out);
            let mut seen = [false; 10];
            for (new, &old) in pos.iter().enumerate() {
                assert!(new.abs_diff(old) <= 3, "trial {trial}: {pos:?}");
                assert!(!seen[old]);
                seen[old] = true;
                moved |= new != old;
            }
        }
        assert!(moved);
    }

    #[test]
    fn dropout_extremes() {
        let s = numbered(20);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(word_dropout(&s, 0.0, &mut rng), s);
        assert!(word_dropout(&s, 1.0, &mut rng).is_empty());
    }

    #[test]
    fn blank_extremes_and_collision() {
        let s = numbered(20);
        let blank = Token::new(DEFAULT_BLANK).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(word_blank(&s, 0.0, &blank, &mut rng).unwrap(), s);
        let all = word_blank(&s, 1.0, &blank, &mut rng).unwrap();
        assert_eq!(all.len(), 20);
        assert!(all.tokens().iter().all(|t| t == &blank));
        let dirty = Sentence::tokenize("a ⟨BLANK⟩ b");
        assert!(matches!(
            word_blank(&dirty, 0.1, &blank, &mut rng),
            Err(Error::ReservedCollision { position: 1, .. })
        ));
    }

    #[test]
    fn dropout_and_blank_rates() {
        let s = numbered(100_000);
        let rng = SeededRng::new(11);
        let kept = word_dropout(&s, 0.1, &mut rng.substream(0, StreamId::DROPOUT)).len() as f64;
        assert!((0.89..=0.91).contains(&(kept / 1e5)), "{kept}");
        let blank = Token::new(DEFAULT_BLANK).unwrap();
        let out = word_blank(&s, 0.1, &blank, &mut rng.substream(0, StreamId::BLANK)).unwrap();
        let blanks = out.tokens().iter().filter(|t| *t == &blank).count() as f64;
        assert!((0.09..=0.11).contains(&(blanks / 1e5)), "{blanks}");
    }

    #[test]
    fn noised_bt_on_table_sentence() {
        let s = Sentence::tokenize("Raise the child, love the child.");
        let spec = NoiseSpec::noised_bt();
        for seed in 0..200 {
            let out = noise_sentence(&s, &spec, &SeededRng::new(seed), 0).unwrap();
            assert!(out.len() <= 6);
            for t in out.tokens() {
                assert!(t == DEFAULT_BLANK || s.tokens().contains(t));
            }
        }
    }

    #[test]
    fn identity_and_p3bt_specs() {
        let s = Sentence::tokenize("Raise the child, love the child.");
        let rng = SeededRng::new(5);
        assert_eq!(noise_sentence(&s, &NoiseSpec::identity(), &rng, 0).unwrap(), s);
        for line in 0..100 {
            let out = noise_sentence(&s, &NoiseSpec::p3bt(), &rng, line).unwrap();
            let mut a: Vec<_> = out.tokens().to_vec();
            let mut b: Vec<_> = s.tokens().to_vec();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn displacement_is_measured_after_dropout() {
        // Tokens carry their original index; after dropout the survivors are
        // renumbered, and the permutation bound holds on those new indices.
        let s = numbered(30);
        let spec = NoiseSpec {
            blank_p: 0.0,
            ..NoiseSpec::noised_bt()
        };
        let rng = SeededRng::new(17);
        for line in 0..500 {
            let dropped = word_dropout(&s, spec.dropout_p, &mut rng.substream(line, StreamId::DROPOUT));
            let out = noise_sentence(&s, &spec, &rng, line).unwrap();
            let survivors = positions(&dropped);
            for (new, old) in positions(&out).into_iter().enumerate() {
                let post_dropout = survivors.iter().position(|&p| p == old).unwrap();
                assert!(new.abs_diff(post_dropout) <= 3);
            }
        }
    }

    #[test]
    fn corpus_noising_extremes_keep_targets() {
        let pairs: Vec<SentencePair> = (0..200)
            .map(|i| {
                SentencePair::new(numbered(8 + i % 5), Sentence::tokenize("tgt side"), Origin::Bt)
            })
            .collect();
        let spec = NoiseSpec::noised_bt();
        let (out, stats) = noise_corpus(pairs.clone(), &spec, 0.0, 1).unwrap();
        assert_eq!(out, pairs);
        assert_eq!(stats.noised, 0);
        let (out, stats) = noise_corpus(pairs.clone(), &spec, 1.0, 1).unwrap();
        assert_eq!(stats.noised, 200);
        assert!(out.iter().all(|p| p.target.render() == "tgt side"));
        assert!(out.iter().zip(&pairs).any(|(a, b)| a.source != b.source));
    }

    #[test]
    fn rejects_bad_probabilities() {
        let spec = NoiseSpec {
            dropout_p: 1.5,
            ..NoiseSpec::noised_bt()
        };
        assert!(spec.validate().is_err());
        assert!(CorpusNoiser::new(NoiseSpec::noised_bt(), -0.1, 0, Side::Source).is_err());
    }

    proptest! {
        #[test]
        fn permutation_is_bounded_bijection(n in 1usize..40, k in 0usize..6, seed in any::<u64>()) {
            let s = numbered(n);
            let out = permute_k(&s, k, &mut ChaCha8Rng::seed_from_u64(seed));
            let pos = positions(&out);
            let mut sorted = pos.clone();
            sorted.sort();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            for (new, old) in pos.into_iter().enumerate() {
                prop_assert!(new.abs_diff(old) <= k);
            }
        }

        #[test]
        fn blank_preserves_length_and_dropout_order(n in 0usize..60, p in 0.0f64..=1.0, seed in any::<u64>()) {
            let s = numbered(n);
            let blank = Token::new(DEFAULT_BLANK).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            prop_assert_eq!(word_blank(&s, p, &blank, &mut rng).unwrap().len(), n);
            let kept = positions(&word_dropout(&s, p, &mut rng));
            prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
