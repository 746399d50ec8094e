//! Back-translation data engineering.
//!
//! The crate covers the full life of synthetic parallel data: whitespace
//! tokenization and the bitext / monolingual / back-translation filters
//! ([`corpus`]), static source-side noising ([`noise`]), reserved-token
//! tagging ([`tag`]), bitext/synthetic mixing ([`mix`]), a BLEU scorer with the
//! fixed `13a` / exponential-smoothing signature ([`bleu`]), attention and
//! copy-rate statistics ([`attnstats`]) and a small synthetic-language
//! laboratory that exercises all of the above end to end ([`synthlab`]).
//!
//! Every randomized operation draws from [`rng::SeededRng`], whose substreams
//! are keyed by `(seed, line index, stream id)`, so results do not depend on
//! worker count or processing order.

pub mod attnstats;
pub mod bleu;
pub mod corpus;
mod error;
pub mod mix;
pub mod noise;
pub mod rng;
pub mod synthlab;
pub mod tag;

pub use error::{Error, Result};
