//! Desk-scale synthetic translation experiments.
//!
//! A generated source language is translated into a target language by a
//! noisy dictionary plus one local reordering rule. Biased back-translation of
//! target text gets the words right but the order wrong, and a count-based
//! model trained on the mix can only tell the two kinds of data apart when
//! the synthetic half is tagged.

mod experiment;
mod model;
mod world;

pub use experiment::{
    run_experiment, run_iterative, Chain, Condition, ConditionResult, Direction, ExperimentConfig,
    ExperimentReport, IterationResult, IterativeReport, Lab,
};
pub use model::{Anchor, DecodeMode, Domain, Marker, SiteRule, SwapStats, SynthModel, TrainConfig, TrainDiagnostics};
pub use world::{Corpora, CorpusSizes, Entry, SynthWorld, WorldParams};
