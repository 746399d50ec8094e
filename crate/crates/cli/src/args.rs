use std::path::PathBuf;

use btkit_core::attnstats::{CopyMode, ReportMode};
use btkit_core::corpus::Origin;
use btkit_core::noise::Side;
use btkit_core::synthlab::Condition;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "btkit", about = "Back-translation data toolkit", disable_version_flag = true)]
pub struct Cli {
    /// Print the BLEU signature and exit.
    #[arg(long, short = 'V')]
    pub version: bool,

    #[command(subcommand)]
    pub command: Option<Cmd>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Drop empty, over-long and badly length-matched sentence pairs.
    FilterBitext(FilterBitextArgs),
    /// Drop over-long monolingual lines and, by default, exact repeats.
    FilterMono(FilterMonoArgs),
    /// Drop back-translated pairs whose synthetic source is over-long.
    FilterBt(FilterBtArgs),
    /// Apply word dropout, blanking and constrained permutation.
    Noise(NoiseArgs),
    /// Prepend a reserved tag to synthetic sources.
    Tag(TagArgs),
    /// Report lines that contain reserved tokens (exit 1 if any).
    Validate(ValidateArgs),
    /// Build a training mixture of bitext and back-translated pairs.
    Mix(MixArgs),
    /// Corpus BLEU with 13a tokenization.
    Bleu(BleuArgs),
    /// Attention sink ratio and normalized entropy over JSON-lines matrices.
    AttnReport(AttnArgs),
    /// Share of target tokens copied from the source.
    CopyRate(CopyRateArgs),
    /// The synthetic translation world.
    #[command(subcommand)]
    Synthlab(SynthlabCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// One sentence per line.
    Text,
    /// `source TAB target [TAB origin]`.
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OriginArg {
    Bitext,
    Bt,
    Ft,
}

impl From<OriginArg> for Origin {
    fn from(o: OriginArg) -> Origin {
        match o {
            OriginArg::Bitext => Origin::Bitext,
            OriginArg::Bt => Origin::Bt,
            OriginArg::Ft => Origin::Ft,
        }
    }
}

#[derive(Debug, Args)]
pub struct Io {
    /// Input file; `-` or absent reads stdin.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Output file; absent writes stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Worker threads. Output order never depends on this.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: u16,
}

#[derive(Debug, Args)]
pub struct PairInput {
    #[command(flatten)]
    pub io: Io,
    /// Source side as a separate file, line-aligned with --target.
    #[arg(long, requires = "target", conflicts_with = "input")]
    pub source: Option<PathBuf>,
    #[arg(long, requires = "source")]
    pub target: Option<PathBuf>,
    /// Origin for lines without a third column.
    #[arg(long, value_enum)]
    pub origin: Option<OriginArg>,
    /// JSON report sidecar.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterBitextArgs {
    #[command(flatten)]
    pub pairs: PairInput,
    #[arg(long, default_value_t = 250)]
    pub max_tokens: usize,
    #[arg(long, default_value_t = 2.0)]
    pub max_ratio: f64,
}

#[derive(Debug, Args)]
pub struct FilterMonoArgs {
    #[command(flatten)]
    pub io: Io,
    #[arg(long, default_value_t = 70)]
    pub max_tokens: usize,
    #[arg(long, default_value_t = 500)]
    pub max_chars: usize,
    /// Keep repeated lines.
    #[arg(long)]
    pub no_dedup: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterBtArgs {
    #[command(flatten)]
    pub pairs: PairInput,
    #[arg(long, default_value_t = 75)]
    pub max_src_tokens: usize,
    #[arg(long, default_value_t = 550)]
    pub max_src_chars: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Op {
    Dropout,
    Blank,
    Permute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Source,
    Target,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Source => Side::Source,
            SideArg::Target => Side::Target,
        }
    }
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub io: Io,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1, value_parser = probability)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0.1, value_parser = probability)]
    pub blank: f64,
    #[arg(long, default_value_t = 3)]
    pub permute_k: usize,
    /// Probability that a given line is noised at all.
    #[arg(long, default_value_t = 1.0, value_parser = probability)]
    pub sentence_prob: f64,
    /// Operations to apply, comma separated; always run in the order
    /// dropout, blank, permute.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dropout,blank,permute")]
    pub ops: Vec<Op>,
    #[arg(long, default_value = btkit_core::noise::DEFAULT_BLANK)]
    pub blank_token: String,
    #[arg(long, value_enum, default_value = "source")]
    pub side: SideArg,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: Format,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TagModeArg {
    Constant,
    PerMetadata,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[command(flatten)]
    pub io: Io,
    #[arg(long, default_value = btkit_core::tag::DEFAULT_TAG)]
    pub token: String,
    #[arg(long, value_enum, default_value = "constant")]
    pub mode: TagModeArg,
    /// TSV with a header row of keys and one row per input line.
    #[arg(long, required_if_eq("mode", "per-metadata"))]
    pub metadata_file: Option<PathBuf>,
    /// Metadata column that selects the tag in per-metadata mode.
    #[arg(long, default_value = "year")]
    pub metadata_key: String,
    /// Tag pairs whose origin is bitext too.
    #[arg(long)]
    pub tag_bitext: bool,
    /// Origin for TSV lines without a third column.
    #[arg(long, value_enum, default_value = "bt")]
    pub origin: OriginArg,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: u16,
    /// Reserved tokens, comma separated. Each also reserves its `_value` family.
    #[arg(long, value_delimiter = ',', default_value = "⟨BT⟩,⟨BLANK⟩")]
    pub reserved: Vec<String>,
    /// Which TSV columns to check. Text input is checked whole.
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub bitext: PathBuf,
    #[arg(long)]
    pub bt: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Expected share of bitext per example.
    #[arg(long, default_value_t = 0.2, value_parser = fraction, conflicts_with = "concat")]
    pub bitext_fraction: f64,
    /// Concatenate and shuffle instead of upsampling.
    #[arg(long)]
    pub concat: bool,
    /// Sample this many back-translated pairs first.
    #[arg(long)]
    pub bt_sample_size: Option<usize>,
    /// Stop after this many examples.
    #[arg(long)]
    pub total: Option<usize>,
    /// Keep input order in concatenation mode.
    #[arg(long)]
    pub no_shuffle: bool,
    #[arg(long, alias = "output")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BleuArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Print only the score.
    #[arg(long)]
    pub score_only: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttnModeArg {
    AsBt,
    Natural,
}

impl From<AttnModeArg> for ReportMode {
    fn from(m: AttnModeArg) -> ReportMode {
        match m {
            AttnModeArg::AsBt => ReportMode::AsBt,
            AttnModeArg::Natural => ReportMode::Natural,
        }
    }
}

#[derive(Debug, Args)]
pub struct AttnArgs {
    /// JSON lines of `{"src_len", "tgt_len", "rows"}`.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "natural")]
    pub mode: AttnModeArg,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CopyModeArg {
    Clipped,
    Membership,
}

impl From<CopyModeArg> for CopyMode {
    fn from(m: CopyModeArg) -> CopyMode {
        match m {
            CopyModeArg::Clipped => CopyMode::Clipped,
            CopyModeArg::Membership => CopyMode::Membership,
        }
    }
}

#[derive(Debug, Args)]
pub struct CopyRateArgs {
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "clipped")]
    pub mode: CopyModeArg,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SynthlabCmd {
    /// Train and score every condition, optionally with iterative chains.
    Run(SynthlabRunArgs),
}

#[derive(Debug, Args)]
pub struct SynthlabRunArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "bitext,bt,noisedbt,taggedbt")]
    pub conditions: Vec<Condition>,
    /// Iterations of back-translation; above 1 adds tagged and untagged chains.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=9))]
    pub iters: u32,
    #[arg(long)]
    pub bitext_n: Option<usize>,
    #[arg(long)]
    pub mono_n: Option<usize>,
    #[arg(long)]
    pub test_n: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is not in [0, 1]"))
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    let p = probability(s)?;
    if p > 0.0 {
        Ok(p)
    } else {
        Err("must be greater than 0".into())
    }
}
