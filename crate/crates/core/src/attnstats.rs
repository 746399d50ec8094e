//! Attention sink ratio, length-normalized attention entropy and copy rate.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::SentencePair;
use crate::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-6;

/// Rows are target positions, columns source positions.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    rows: Vec<Vec<f64>>,
    source_len: usize,
}

#[derive(Debug, Deserialize)]
struct RawMatrix {
    src_len: usize,
    tgt_len: usize,
    rows: Vec<Vec<f64>>,
}

impl AttentionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let source_len = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || source_len == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != source_len {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} columns, expected {source_len}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidMatrix(format!("row {i} has entry {v} outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidMatrix(format!("row {i} sums to {sum}")));
            }
        }
        Ok(AttentionMatrix { rows, source_len })
    }

    /// Parses one line of the JSON-lines attention format.
    pub fn from_json_line(line: &str) -> Result<Self> {
        let raw: RawMatrix = serde_json::from_str(line)?;
        if raw.rows.len() != raw.tgt_len {
            return Err(Error::InvalidMatrix(format!(
                "tgt_len is {} but {} rows given",
                raw.tgt_len,
                raw.rows.len()
            )));
        }
        let m = AttentionMatrix::new(raw.rows)?;
        if m.source_len != raw.src_len {
            return Err(Error::InvalidMatrix(format!(
                "src_len is {} but rows have {} columns",
                raw.src_len, m.source_len
            )));
        }
        Ok(m)
    }

    pub fn uniform(target_len: usize, source_len: usize) -> Result<Self> {
        AttentionMatrix::new(vec![vec![1.0 / source_len as f64; source_len]; target_len])
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn target_len(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Column mean scaled by the source length, so uniform attention gives 1.
pub fn asr(m: &AttentionMatrix, j: usize) -> Result<f64> {
    if j >= m.source_len {
        return Err(Error::ColumnOutOfRange {
            index: j,
            len: m.source_len,
        });
    }
    let col: f64 = m.rows.iter().map(|r| r[j]).sum();
    Ok(col * m.source_len as f64 / m.target_len() as f64)
}

/// Mean row entropy divided by `ln |x|`, with `0 ln 0 = 0`.
pub fn norm_entropy(m: &AttentionMatrix) -> Result<f64> {
    if m.source_len < 2 {
        return Err(Error::DegenerateSource);
    }
    let norm = (m.source_len as f64).ln();
    let total: f64 = m
        .rows
        .iter()
        .map(|row| {
            -row.iter()
                .filter(|&&a| a > 0.0)
                .map(|&a| a * a.ln())
                .sum::<f64>()
                / norm
        })
        .sum();
    Ok(total / m.target_len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMode {
    AsBt,
    Natural,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttentionReport {
    pub asr_first: f64,
    pub asr_last: f64,
    pub entropy: f64,
    pub n_sentences: u64,
    pub mode: ReportMode,
}

impl AttentionReport {
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| mode | sentences | ASR_0 | ASR_|x| | H~ |");
        let _ = writeln!(s, "|---|---:|---:|---:|---:|");
        let mode = match self.mode {
            ReportMode::AsBt => "as_bt",
            ReportMode::Natural => "natural",
        };
        let _ = writeln!(
            s,
            "| {mode} | {} | {:.2} | {:.2} | {:.2} |",
            self.n_sentences, self.asr_first, self.asr_last, self.entropy
        );
        s
    }
}

/// Running sums for [`AttentionReport`]; merge partial accumulators to
/// reduce across workers.
#[derive(Debug, Clone, Default)]
pub struct AttentionAccumulator {
    asr_first: f64,
    asr_last: f64,
    entropy: f64,
    n: u64,
}

impl AttentionAccumulator {
    pub fn add(&mut self, m: &AttentionMatrix) -> Result<()> {
        let entropy = norm_entropy(m)?;
        self.asr_first += asr(m, 0)?;
        self.asr_last += asr(m, m.source_len - 1)?;
        self.entropy += entropy;
        self.n += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &AttentionAccumulator) {
        self.asr_first += other.asr_first;
        self.asr_last += other.asr_last;
        self.entropy += other.entropy;
        self.n += other.n;
    }

    pub fn finish(&self, mode: ReportMode) -> Result<AttentionReport> {
        if self.n == 0 {
            return Err(Error::EmptyInput("attention matrices"));
        }
        let n = self.n as f64;
        Ok(AttentionReport {
            asr_first: self.asr_first / n,
            asr_last: self.asr_last / n,
            entropy: self.entropy / n,
            n_sentences: self.n,
            mode,
        })
    }
}

pub fn attention_report<'a, I>(matrices: I, mode: ReportMode) -> Result<AttentionReport>
where
    I: IntoIterator<Item = &'a AttentionMatrix>,
{
    let mut acc = AttentionAccumulator::default();
    for m in matrices {
        acc.add(m)?;
    }
    acc.finish(mode)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopyMode {
    /// Per type, the smaller of its source and target counts.
    #[default]
    Clipped,
    /// Every target token whose type occurs anywhere in the source.
    Membership,
}

/// Overlapping and total target token counts for one pair.
pub fn copy_counts(pair: &SentencePair, mode: CopyMode) -> (u64, u64) {
    let mut src: HashMap<&str, u64> = HashMap::new();
    for t in pair.source.tokens() {
        *src.entry(t.as_str()).or_insert(0) += 1;
    }
    let overlap = match mode {
        CopyMode::Membership => pair
            .target
            .tokens()
            .iter()
            .filter(|t| src.contains_key(t.as_str()))
            .count() as u64,
        CopyMode::Clipped => {
            let mut tgt: HashMap<&str, u64> = HashMap::new();
            for t in pair.target.tokens() {
                *tgt.entry(t.as_str()).or_insert(0) += 1;
            }
            tgt.iter()
                .map(|(w, &c)| c.min(src.get(w).copied().unwrap_or(0)))
                .sum()
        }
    };
    (overlap, pair.target.len() as u64)
}

/// Percentage of target tokens also found in the source.
pub fn copy_rate<'a, I>(pairs: I, mode: CopyMode) -> Result<f64>
where
    I: IntoIterator<Item = &'a SentencePair>,
{
    let (overlap, total) = pairs
        .into_iter()
        .map(|p| copy_counts(p, mode))
        .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if total == 0 {
        return Err(Error::EmptyInput("target tokens"));
    }
    Ok(100.0 * overlap as f64 / total as f64)
}
