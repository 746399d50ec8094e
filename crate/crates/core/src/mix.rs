//! Training mixtures of bitext and synthetic pairs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::SentencePair;
use crate::rng::{SeededRng, StreamId};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    /// Expected share of bitext among emitted examples. `None` concatenates
    /// the two corpora instead.
    pub bitext_fraction: Option<f64>,
    /// Downsample the synthetic corpus to this many pairs first.
    pub bt_sample_size: Option<usize>,
    pub seed: u64,
    pub shuffle: bool,
    /// Number of draws in fraction mode. Without it, drawing stops once every
    /// source that can be selected has been emitted in full at least once.
    pub total: Option<usize>,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            bitext_fraction: Some(0.2),
            bt_sample_size: None,
            seed: 0,
            shuffle: true,
            total: None,
        }
    }
}

/// Uniform sample of exactly `n` items without replacement, in a seeded
/// random order. Single pass (reservoir), memory O(n).
pub fn sample_n<T, I>(corpus: I, n: usize, seed: u64) -> Result<Vec<T>>
where
    I: IntoIterator<Item = T>,
{
    let rng = SeededRng::new(seed);
    let mut pick = rng.substream(0, StreamId::SAMPLE);
    let mut reservoir = Vec::with_capacity(n);
    let mut seen = 0usize;
    for item in corpus {
        if reservoir.len() < n {
            reservoir.push(item);
        } else {
            let j = pick.gen_range(0..=seen);
            if j < n {
                reservoir[j] = item;
            }
        }
        seen += 1;
    }
    if seen < n {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: seen,
        });
    }
    reservoir.shuffle(&mut rng.substream(0, StreamId::SAMPLE_SHUFFLE));
    Ok(reservoir)
}

/// Cycles over a corpus, reshuffling at the start of every pass.
struct Cycler<'a> {
    items: &'a [SentencePair],
    order: Vec<usize>,
    cursor: usize,
    passes_done: usize,
    rng: SeededRng,
    stream: StreamId,
    shuffle: bool,
}

impl<'a> Cycler<'a> {
    fn new(items: &'a [SentencePair], rng: SeededRng, stream: StreamId, shuffle: bool) -> Self {
        let mut c = Cycler {
            items,
            order: (0..items.len()).collect(),
            cursor: 0,
            passes_done: 0,
            rng,
            stream,
            shuffle,
        };
        c.reshuffle();
        c
    }

    fn reshuffle(&mut self) {
        if self.shuffle {
            self.order.sort_unstable();
            let mut r = self.rng.substream(self.passes_done as u64, self.stream);
            self.order.shuffle(&mut r);
        }
    }

    fn next(&mut self) -> &'a SentencePair {
        let item = &self.items[self.order[self.cursor]];
        self.cursor += 1;
        if self.cursor == self.order.len() {
            self.cursor = 0;
            self.passes_done += 1;
            self.reshuffle();
        }
        item
    }
}

/// Builds a training mixture. Every emitted pair keeps its origin.
///
/// In fraction mode each example is drawn from the bitext with probability
/// `bitext_fraction` and from the synthetic corpus otherwise; whichever runs
/// out first is repeated with a fresh shuffle per pass.
pub fn build_mixture(
    bitext: &[SentencePair],
    bt: &[SentencePair],
    spec: &MixtureSpec,
) -> Result<Vec<SentencePair>> {
    if bitext.is_empty() {
        return Err(Error::EmptyInput("bitext corpus"));
    }
    if bt.is_empty() {
        return Err(Error::EmptyInput("synthetic corpus"));
    }
    let rng = SeededRng::new(spec.seed);
    let sampled;
    let bt = match spec.bt_sample_size {
        Some(n) => {
            sampled = sample_n(bt.iter().cloned(), n, rng.derive(1).seed())?;
            if sampled.is_empty() {
                return Err(Error::EmptyInput("synthetic sample"));
            }
            &sampled[..]
        }
        None => bt,
    };

    let Some(fraction) = spec.bitext_fraction else {
        let mut out: Vec<SentencePair> = bitext.iter().chain(bt).cloned().collect();
        if spec.shuffle {
            out.shuffle(&mut rng.substream(0, StreamId::MIX_CONCAT));
        }
        return Ok(out);
    };
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::OutOfRange {
            name: "bitext fraction",
            range: "(0, 1]",
            value: fraction,
        });
    }

    let mut select = rng.substream(0, StreamId::MIX_SELECT);
    let mut bitext_src = Cycler::new(bitext, rng, StreamId::MIX_PASS_BITEXT, spec.shuffle);
    let mut bt_src = Cycler::new(bt, rng, StreamId::MIX_PASS_BT, spec.shuffle);
    let bt_selectable = fraction < 1.0;
    let mut out = Vec::with_capacity(spec.total.unwrap_or(bitext.len() + bt.len()));
    loop {
        match spec.total {
            Some(total) if out.len() >= total => break,
            None if bitext_src.passes_done >= 1 && (!bt_selectable || bt_src.passes_done >= 1) => {
                break
            }
            _ => {}
        }
        let pair = if select.gen_bool(fraction) {
            bitext_src.next()
        } else {
            bt_src.next()
        };
        out.push(pair.clone());
    }
    Ok(out)
}
