//! Deterministic random substreams.
//!
//! A substream is a ChaCha8 generator seeded with
//! `splitmix64(splitmix64(splitmix64(seed) ^ line) ^ stream)`. Any two draws
//! that share `(seed, line, stream)` are identical no matter which worker
//! makes them or in what order lines are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies which operation a substream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId(pub u64);

impl StreamId {
    pub const DROPOUT: StreamId = StreamId(1);
    pub const BLANK: StreamId = StreamId(2);
    pub const PERMUTE: StreamId = StreamId(3);
    pub const SENTENCE_COIN: StreamId = StreamId(4);
    pub const SAMPLE: StreamId = StreamId(5);
    pub const SAMPLE_SHUFFLE: StreamId = StreamId(6);
    pub const MIX_SELECT: StreamId = StreamId(7);
    pub const MIX_PASS_BITEXT: StreamId = StreamId(8);
    pub const MIX_PASS_BT: StreamId = StreamId(9);
    pub const MIX_CONCAT: StreamId = StreamId(10);
    pub const WORLD: StreamId = StreamId(11);
    pub const CORPUS: StreamId = StreamId(12);
    pub const EXPERIMENT: StreamId = StreamId(13);
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededRng {
    seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream_key(&self, line: u64, stream: StreamId) -> u64 {
        splitmix64(splitmix64(splitmix64(self.seed) ^ line) ^ stream.0)
    }

    pub fn substream(&self, line: u64, stream: StreamId) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.substream_key(line, stream))
    }

    /// A child generator whose substreams are independent of this one's.
    pub fn derive(&self, label: u64) -> SeededRng {
        SeededRng::new(splitmix64(self.seed ^ splitmix64(label ^ 0xA5A5_A5A5_A5A5_A5A5)))
    }
}
