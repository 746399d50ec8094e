//! End-to-end runs: build each training mixture, train, score on the natural
//! test set.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::Serialize;

use crate::attnstats::{copy_rate, CopyMode};
use crate::bleu::{corpus_bleu, BleuConfig, SIGNATURE};
use crate::corpus::{Origin, Sentence, SentencePair};
use crate::mix::{build_mixture, MixtureSpec};
use crate::noise::{noise_corpus, NoiseSpec};
use crate::rng::SeededRng;
use crate::tag::{tag_pair, TagSpec};
use crate::{Error, Result};

use super::model::{Anchor, DecodeMode, Domain, Marker, SiteRule, SynthModel, TrainConfig, TrainDiagnostics};
use super::world::{Corpora, CorpusSizes, SynthWorld, WorldParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Bitext,
    Bt,
    NoisedBt,
    TaggedBt,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::Bitext, Condition::Bt, Condition::NoisedBt, Condition::TaggedBt];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Bitext => "bitext",
            Condition::Bt => "bt",
            Condition::NoisedBt => "noisedbt",
            Condition::TaggedBt => "taggedbt",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Condition::Bitext => "Bitext",
            Condition::Bt => "BT",
            Condition::NoisedBt => "NoisedBT",
            Condition::TaggedBt => "TaggedBT",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown condition {s:?} (expected bitext, bt, noisedbt or taggedbt)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub world: WorldParams,
    pub sizes: CorpusSizes,
    pub bitext_fraction: f64,
    pub alpha: f64,
}

impl ExperimentConfig {
    pub fn new(seed: u64) -> Self {
        ExperimentConfig {
            seed,
            world: WorldParams::default(),
            sizes: CorpusSizes::default(),
            bitext_fraction: 0.2,
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub condition: Condition,
    /// Test BLEU with standard decoding.
    pub bleu: f64,
    /// Test BLEU with the synthetic-data marker applied to the input, for
    /// conditions that have one.
    pub as_if_bt_bleu: Option<f64>,
    pub swap_prob_natural: f64,
    pub swap_prob_synthetic: Option<f64>,
    pub swap_prob_pooled: f64,
    pub train_pairs: usize,
    pub train_copy_rate: f64,
    pub diagnostics: TrainDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub iteration: u32,
    pub signature: String,
    pub sizes: CorpusSizes,
    pub reorder_types: usize,
    pub in_domain_types: usize,
    pub copy_rate_bitext: f64,
    pub copy_rate_bt: f64,
    pub conditions: Vec<ConditionResult>,
}

impl ExperimentReport {
    pub fn result(&self, c: Condition) -> Option<&ConditionResult> {
        self.conditions.iter().find(|r| r.condition == c)
    }

    pub fn bleu(&self, c: Condition) -> Option<f64> {
        self.result(c).map(|r| r.bleu)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed {} | {}", self.seed, self.signature);
        let _ = writeln!(s);
        let _ = writeln!(s, "| Model | BLEU | as-if-BT BLEU | swap (natural) | swap (synthetic) | train copy % |");
        let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|");
        for r in &self.conditions {
            let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_owned(), |v| format!("{v:.prec$}"));
            let _ = writeln!(
                s,
                "| {} | {:.2} | {} | {:.3} | {} | {:.1} |",
                r.condition.label(),
                r.bleu,
                opt(r.as_if_bt_bleu, 2),
                r.swap_prob_natural,
                opt(r.swap_prob_synthetic, 3),
                r.train_copy_rate
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "copy rate: bitext {:.1}%, BT data {:.1}%",
            self.copy_rate_bitext, self.copy_rate_bt
        );
        s
    }
}

/// A generated world with its corpora and the biased back-translation of the
/// target-side monolingual data.
#[derive(Debug, Clone)]
pub struct Lab {
    pub config: ExperimentConfig,
    pub world: SynthWorld,
    pub corpora: Corpora,
    pub bt_pairs: Vec<SentencePair>,
}

// Labels for derived seeds.
const MIX: u64 = 1;
const NOISE: u64 = 2;
const AS_IF_BT_NOISE: u64 = 3;
const ITERATION: u64 = 100;

impl Lab {
    pub fn new(config: ExperimentConfig) -> Result<Lab> {
        let world = SynthWorld::generate(config.seed, config.world.clone());
        let corpora = world.generate_corpora(config.sizes);
        let bt_pairs = corpora
            .mono_targets
            .iter()
            .map(|t| Ok(SentencePair::new(world.biased_back_translate(t)?, t.clone(), Origin::Bt)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Lab {
            config,
            world,
            corpora,
            bt_pairs,
        })
    }

    fn rng(&self) -> SeededRng {
        SeededRng::new(self.config.seed)
    }

    pub fn forward_rule(&self) -> SiteRule {
        SiteRule {
            triggers: self.world.reorder_class.clone(),
            anchor: Anchor::Lead,
        }
    }

    pub fn reverse_rule(&self) -> SiteRule {
        SiteRule {
            triggers: self.world.reorder_targets(),
            anchor: Anchor::Trail,
        }
    }

    fn mixture(&self, bitext: &[SentencePair], synthetic: &[SentencePair], label: u64) -> Result<Vec<SentencePair>> {
        let spec = MixtureSpec {
            bitext_fraction: Some(self.config.bitext_fraction),
            seed: self.rng().derive(label).seed(),
            ..MixtureSpec::default()
        };
        build_mixture(bitext, synthetic, &spec)
    }

    /// Training data for a condition given the bitext and synthetic pairs.
    fn training_data(
        &self,
        condition: Condition,
        bitext: &[SentencePair],
        synthetic: &[SentencePair],
        salt: u64,
    ) -> Result<Vec<SentencePair>> {
        let label = |l: u64| salt.wrapping_mul(1000) + l * 10 + condition as u64;
        match condition {
            Condition::Bitext => Ok(bitext.to_vec()),
            Condition::Bt => self.mixture(bitext, synthetic, label(MIX)),
            Condition::NoisedBt => {
                let seed = self.rng().derive(label(NOISE)).seed();
                let (noised, _) = noise_corpus(synthetic.iter().cloned(), &NoiseSpec::noised_bt(), 1.0, seed)?;
                self.mixture(bitext, &noised, label(MIX))
            }
            Condition::TaggedBt => {
                let spec = TagSpec::default();
                let tagged = synthetic
                    .iter()
                    .map(|p| tag_pair(p.clone(), &spec, None, false))
                    .collect::<Result<Vec<_>>>()?;
                self.mixture(bitext, &tagged, label(MIX))
            }
        }
    }

    fn train(&self, condition: Condition, data: &[SentencePair], rule: SiteRule, salt: u64) -> Result<SynthModel> {
        let config = TrainConfig {
            alpha: self.config.alpha,
            ..TrainConfig::new(rule).tag_aware(condition == Condition::TaggedBt)
        };
        let model = SynthModel::train(data, config)?;
        Ok(match condition {
            Condition::TaggedBt => model.with_marker(Marker::Tag(TagSpec::default())),
            Condition::NoisedBt => model.with_marker(Marker::Noise {
                spec: NoiseSpec::noised_bt(),
                seed: self.rng().derive(salt.wrapping_mul(1000) + AS_IF_BT_NOISE).seed(),
            }),
            _ => model,
        })
    }

    fn evaluate(&self, model: &SynthModel, test: &[SentencePair], mode: DecodeMode) -> Result<f64> {
        let hyps = test
            .iter()
            .enumerate()
            .map(|(i, p)| model.decode(&p.source, mode, i as u64).map(|s| s.render()))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<String> = test.iter().map(|p| p.target.render()).collect();
        Ok(corpus_bleu(&hyps, &refs, &BleuConfig::default())?.score)
    }

    fn condition_result(
        &self,
        condition: Condition,
        model: &SynthModel,
        data: &[SentencePair],
        test: &[SentencePair],
    ) -> Result<ConditionResult> {
        let has_marker = !matches!(model.marker(), Marker::None);
        Ok(ConditionResult {
            condition,
            bleu: self.evaluate(model, test, DecodeMode::Standard)?,
            as_if_bt_bleu: if has_marker {
                Some(self.evaluate(model, test, DecodeMode::AsIfBt)?)
            } else {
                None
            },
            swap_prob_natural: model.swap_prob(Domain::Natural),
            swap_prob_synthetic: model.is_tag_aware().then(|| model.swap_prob(Domain::Synthetic)),
            swap_prob_pooled: model.pooled_swap_stats().prob().unwrap_or(0.0),
            train_pairs: data.len(),
            train_copy_rate: copy_rate(data, CopyMode::Clipped)?,
            diagnostics: *model.diagnostics(),
        })
    }

    /// Trains the forward model of one condition on the given synthetic pairs.
    pub fn forward_model(&self, condition: Condition, synthetic: &[SentencePair], salt: u64) -> Result<(SynthModel, Vec<SentencePair>)> {
        let data = self.training_data(condition, &self.corpora.bitext, synthetic, salt)?;
        let model = self.train(condition, &data, self.forward_rule(), salt)?;
        Ok((model, data))
    }

    pub fn run(&self, conditions: &[Condition]) -> Result<ExperimentReport> {
        if conditions.is_empty() {
            return Err(Error::EmptyInput("condition list"));
        }
        let mut results = Vec::with_capacity(conditions.len());
        for &c in conditions {
            let (model, data) = self.forward_model(c, &self.bt_pairs, 0)?;
            results.push(self.condition_result(c, &model, &data, &self.corpora.test)?);
        }
        Ok(ExperimentReport {
            seed: self.config.seed,
            iteration: 1,
            signature: SIGNATURE.to_owned(),
            sizes: self.config.sizes,
            reorder_types: self.world.reorder_class.len(),
            in_domain_types: self.world.in_domain.len(),
            copy_rate_bitext: copy_rate(&self.corpora.bitext, CopyMode::Clipped)?,
            copy_rate_bt: copy_rate(&self.bt_pairs, CopyMode::Clipped)?,
            conditions: results,
        })
    }

    /// Alternates directions: odd iterations train source-to-target models on
    /// back-translated target text, even ones train target-to-source models on
    /// forward translations of source text. Iteration 1 uses the biased
    /// word-for-word back-translation.
    pub fn run_iterative(&self, iterations: u32) -> Result<IterativeReport> {
        if iterations == 0 {
            return Err(Error::OutOfRange {
                name: "iterations",
                range: ">= 1",
                value: 0.0,
            });
        }
        let reversed_bitext: Vec<SentencePair> = self.corpora.bitext.iter().cloned().map(SentencePair::reversed).collect();
        let reversed_test: Vec<SentencePair> = self.corpora.test.iter().cloned().map(SentencePair::reversed).collect();
        let mut chains = Vec::new();
        for condition in [Condition::Bt, Condition::TaggedBt] {
            let mut steps = Vec::new();
            let (mut model, _) = self.forward_model(condition, &self.bt_pairs, 0)?;
            steps.push(IterationResult {
                iteration: 1,
                direction: Direction::Forward,
                bleu: self.evaluate(&model, &self.corpora.test, DecodeMode::Standard)?,
            });
            for it in 2..=iterations {
                let salt = ITERATION + it as u64;
                let forward = it % 2 == 1;
                let inputs: &[Sentence] = if forward {
                    &self.corpora.mono_targets
                } else {
                    &self.corpora.mono_sources
                };
                // The previous model translates into this iteration's source language.
                let synthetic = inputs
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let out = model.decode(s, DecodeMode::Standard, i as u64)?;
                        Ok(SentencePair::new(out, s.clone(), Origin::Bt))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (bitext, rule, test) = if forward {
                    (&self.corpora.bitext, self.forward_rule(), &self.corpora.test)
                } else {
                    (&reversed_bitext, self.reverse_rule(), &reversed_test)
                };
                let data = self.training_data(condition, bitext, &synthetic, salt)?;
                model = self.train(condition, &data, rule, salt)?;
                steps.push(IterationResult {
                    iteration: it,
                    direction: if forward { Direction::Forward } else { Direction::Reverse },
                    bleu: self.evaluate(&model, test, DecodeMode::Standard)?,
                });
            }
            chains.push(Chain {
                tagged: condition == Condition::TaggedBt,
                steps,
            });
        }
        Ok(IterativeReport {
            seed: self.config.seed,
            iterations,
            chains,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationResult {
    pub iteration: u32,
    pub direction: Direction,
    pub bleu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chain {
    pub tagged: bool,
    pub steps: Vec<IterationResult>,
}

impl Chain {
    pub fn bleu_at(&self, iteration: u32) -> Option<f64> {
        self.steps.iter().find(|s| s.iteration == iteration).map(|s| s.bleu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterativeReport {
    pub seed: u64,
    pub iterations: u32,
    pub chains: Vec<Chain>,
}

impl IterativeReport {
    pub fn chain(&self, tagged: bool) -> Option<&Chain> {
        self.chains.iter().find(|c| c.tagged == tagged)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "| Model |");
        for i in 1..=self.iterations {
            let _ = write!(s, " It.-{i} |");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "|---|{}", "---:|".repeat(self.iterations as usize));
        for c in &self.chains {
            let _ = write!(s, "| {} |", if c.tagged { "TaggedBT" } else { "BT" });
            for step in &c.steps {
                let arrow = match step.direction {
                    Direction::Forward => "",
                    Direction::Reverse => " (rev)",
                };
                let _ = write!(s, " {:.2}{arrow} |", step.bleu);
            }
            let _ = writeln!(s);
        }
        s
    }
}

pub fn run_experiment(config: ExperimentConfig, conditions: &[Condition]) -> Result<ExperimentReport> {
    Lab::new(config)?.run(conditions)
}

pub fn run_iterative(config: ExperimentConfig, iterations: u32) -> Result<IterativeReport> {
    Lab::new(config)?.run_iterative(iterations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            sizes: CorpusSizes {
                bitext_n: 300,
                mono_n: 2000,
                source_mono_n: 2000,
                test_n: 100,
            },
            ..ExperimentConfig::new(seed)
        }
    }

    #[test]
    fn conditions_parse() {
        assert_eq!("TaggedBT".parse::<Condition>().unwrap(), Condition::TaggedBt);
        assert_eq!("noisedbt".parse::<Condition>().unwrap(), Condition::NoisedBt);
        assert!("p3bt".parse::<Condition>().is_err());
    }

    #[test]
    fn report_is_deterministic() {
        let a = run_experiment(small(3), &Condition::ALL).unwrap();
        let b = run_experiment(small(3), &Condition::ALL).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for r in &a.conditions {
            assert!((0.0..=100.0).contains(&r.bleu));
        }
        assert!(a.to_markdown().contains("TaggedBT"));
    }

    #[test]
    fn one_iteration_matches_experiment() {
        let lab = Lab::new(small(4)).unwrap();
        let exp = lab.run(&Condition::ALL).unwrap();
        let it = lab.run_iterative(1).unwrap();
        assert_eq!(it.chain(false).unwrap().bleu_at(1), exp.bleu(Condition::Bt));
        assert_eq!(it.chain(true).unwrap().bleu_at(1), exp.bleu(Condition::TaggedBt));
        assert!(lab.run_iterative(0).is_err());
        assert!(lab.run(&[]).is_err());
    }
}
