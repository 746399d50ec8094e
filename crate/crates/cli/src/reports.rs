//! Commands that need the whole input before producing output.

use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use btkit_core::attnstats::{copy_counts, AttentionAccumulator, AttentionMatrix, CopyMode};
use btkit_core::bleu::{corpus_bleu, BleuConfig};
use btkit_core::corpus::{parse_tsv_pair, Origin, SentencePair};
use btkit_core::mix::{build_mixture, MixtureSpec};
use btkit_core::synthlab::{ExperimentConfig, Lab};
use serde_json::json;

use crate::args::{AttnArgs, BleuArgs, CopyRateArgs, MixArgs, SynthlabCmd};
use crate::io::{open_output, read_lines, write_report};

fn read_pairs(path: Option<&Path>, default_origin: Origin) -> Result<Vec<SentencePair>> {
    let name = path.map_or("stdin".into(), |p| p.display().to_string());
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| parse_tsv_pair(l, default_origin).map_err(|e| anyhow!("{name}: line {}: {e}", i + 1)))
        .collect()
}

pub fn mix(a: MixArgs) -> Result<()> {
    let bitext = read_pairs(Some(&a.bitext), Origin::Bitext)?;
    let bt = read_pairs(Some(&a.bt), Origin::Bt)?;
    let spec = MixtureSpec {
        bitext_fraction: (!a.concat).then_some(a.bitext_fraction),
        bt_sample_size: a.bt_sample_size,
        seed: a.seed,
        shuffle: !a.no_shuffle,
        total: a.total,
    };
    let mixed = build_mixture(&bitext, &bt, &spec)?;
    let mut out = open_output(a.out.as_deref())?;
    let mut from_bitext = 0usize;
    for p in &mixed {
        from_bitext += (p.origin() == Origin::Bitext) as usize;
        writeln!(out, "{}", p.to_tsv(true))?;
    }
    out.flush()?;
    let share = from_bitext as f64 / mixed.len().max(1) as f64;
    eprintln!("mix: {} examples, bitext share {share:.4}", mixed.len());
    write_report(
        a.report.as_ref(),
        &json!({
            "seed": a.seed,
            "mode": if a.concat { "concat" } else { "upsample" },
            "bitext_fraction": spec.bitext_fraction,
            "bitext_in": bitext.len(),
            "bt_in": bt.len(),
            "examples": mixed.len(),
            "from_bitext": from_bitext,
            "bitext_share": share,
        }),
    )
}

pub fn bleu(a: BleuArgs) -> Result<()> {
    let hyps = read_lines(Some(&a.hyp))?;
    let refs = read_lines(Some(&a.reference))?;
    if hyps.len() != refs.len() {
        bail!(
            "{} has {} lines but {} has {}",
            a.hyp.display(),
            hyps.len(),
            a.reference.display(),
            refs.len()
        );
    }
    let score = corpus_bleu(&hyps, &refs, &BleuConfig::default())?;
    if a.score_only {
        println!("{:.2}", score.score);
    } else {
        println!("{}", score.summary());
        println!("{}", score.signature);
    }
    write_report(a.report.as_ref(), &score)
}

pub fn attn_report(a: AttnArgs) -> Result<()> {
    let mut acc = AttentionAccumulator::default();
    for (i, line) in read_lines(a.input.as_deref())?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let m = AttentionMatrix::from_json_line(line).map_err(|e| anyhow!("line {}: {e}", i + 1))?;
        acc.add(&m).map_err(|e| anyhow!("line {}: {e}", i + 1))?;
    }
    let report = acc.finish(a.mode.into())?;
    print!("{}", report.to_markdown());
    write_report(a.report.as_ref(), &report)
}

pub fn copy_rate(a: CopyRateArgs) -> Result<()> {
    let mode: CopyMode = a.mode.into();
    let (mut overlap, mut total) = (0u64, 0u64);
    for p in read_pairs(a.input.as_deref(), Origin::Bitext)? {
        let (o, t) = copy_counts(&p, mode);
        overlap += o;
        total += t;
    }
    if total == 0 {
        bail!("no target tokens in input");
    }
    let rate = 100.0 * overlap as f64 / total as f64;
    println!("{rate:.2}");
    eprintln!("copy-rate: {overlap} of {total} target tokens");
    write_report(
        a.report.as_ref(),
        &json!({ "mode": mode, "overlap": overlap, "target_tokens": total, "copy_rate": rate }),
    )
}

pub fn synthlab(cmd: SynthlabCmd) -> Result<()> {
    let SynthlabCmd::Run(a) = cmd;
    let mut config = ExperimentConfig::new(a.seed);
    if let Some(n) = a.bitext_n {
        config.sizes.bitext_n = n;
    }
    if let Some(n) = a.mono_n {
        config.sizes.mono_n = n;
        config.sizes.source_mono_n = n;
    }
    if let Some(n) = a.test_n {
        config.sizes.test_n = n;
    }
    let lab = Lab::new(config)?;
    let experiment = lab.run(&a.conditions)?;
    print!("{}", experiment.to_markdown());
    let iterative = if a.iters > 1 {
        let it = lab.run_iterative(a.iters)?;
        println!();
        print!("{}", it.to_markdown());
        Some(it)
    } else {
        None
    };
    write_report(
        a.report.as_ref(),
        &json!({ "experiment": experiment, "iterative": iterative }),
    )
}
