//! Per-line commands. Each maps lines on the worker pool and writes results
//! back in input order.

use std::collections::BTreeMap;
use std::io::Write;

use anyhow::{bail, Context, Result};
use btkit_core::corpus::{
    measure, normalize, parse_tsv_pair, split_tsv, BitextFilter, BitextLimits, BtFilter,
    BtLimits, Deduper, FilterReport, MonoFilter, MonoLimits, Origin, Sentence, SentencePair,
    Token, Verdict,
};
use btkit_core::noise::{CorpusNoiser, NoiseOps, NoiseSpec, NoiseStats, Side};
use btkit_core::tag::{apply_tag, TagSpec};
use serde_json::json;

use crate::args::{
    FilterBitextArgs, FilterBtArgs, FilterMonoArgs, Format, NoiseArgs, Op, PairInput, TagArgs,
    TagModeArg, ValidateArgs,
};
use crate::io::{at_line, for_each_line, open_input, open_output, write_report, Chunks};
use crate::Usage;

/// A parsed TSV pair and whether its line carried an origin column.
type Parsed = std::result::Result<(SentencePair, bool), String>;

fn parse_pair(line: &str, default_origin: Origin) -> Parsed {
    let with_origin = line.split('\t').nth(2).is_some();
    parse_tsv_pair(line, default_origin).map(|p| (p, with_origin))
}

/// `source TAB target [TAB origin]` from already rendered sides.
fn join_fields(source: &str, target: &str, origin: Option<Origin>) -> String {
    let mut line = String::with_capacity(source.len() + target.len() + 8);
    line.push_str(source);
    line.push('\t');
    line.push_str(target);
    if let Some(o) = origin {
        line.push('\t');
        line.push_str(o.as_str());
    }
    line
}

fn write_line(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

fn pair_chunks(p: &PairInput) -> Result<Chunks> {
    match (&p.source, &p.target) {
        (Some(s), Some(t)) => Ok(Chunks::aligned(open_input(Some(s))?, open_input(Some(t))?)),
        _ => Ok(Chunks::new(open_input(p.io.input.as_deref())?)),
    }
}

fn summarize(cmd: &str, r: &FilterReport) {
    eprintln!(
        "{cmd}: kept {} of {} (empty {}, length {}, ratio {}, duplicate {}, malformed {})",
        r.kept,
        r.input_count(),
        r.dropped_empty,
        r.dropped_length,
        r.dropped_ratio,
        r.dropped_dup,
        r.dropped_malformed
    );
}

pub fn filter_bitext(a: FilterBitextArgs) -> Result<()> {
    if a.max_ratio < 1.0 || a.max_ratio.is_nan() {
        return Err(Usage(format!("--max-ratio must be at least 1, got {}", a.max_ratio)).into());
    }
    let origin = a.pairs.origin.map_or(Origin::Bitext, Origin::from);
    let limits = BitextLimits {
        max_tokens: a.max_tokens,
        max_ratio: a.max_ratio,
    };
    // Verdicts are pure; only the report needs the sequential copy.
    let checker = BitextFilter::new(limits);
    let mut filter = BitextFilter::new(limits);
    let mut out = open_output(a.pairs.io.output.as_deref())?;
    for_each_line(
        pair_chunks(&a.pairs)?,
        a.pairs.io.workers,
        |_, line| {
            parse_pair(line, origin).map(|(pair, with_origin)| {
                let v = checker.verdict(&pair);
                (v, (v == Verdict::Keep).then(|| pair.to_tsv(with_origin)))
            })
        },
        |i, res| {
            match res {
                Ok((v, text)) => {
                    filter.report_mut().record(v);
                    if let Some(text) = text {
                        write_line(&mut out, &text)?;
                    }
                }
                Err(reason) => {
                    eprintln!("line {}: dropped: {reason}", i + 1);
                    filter.report_mut().record(Verdict::Malformed);
                }
            }
            Ok(())
        },
    )?;
    out.flush()?;
    summarize("filter-bitext", filter.report());
    write_report(a.pairs.report.as_ref(), filter.report())
}

pub fn filter_mono(a: FilterMonoArgs) -> Result<()> {
    let limits = MonoLimits {
        max_tokens: a.max_tokens,
        max_chars: a.max_chars,
        dedup: !a.no_dedup,
    };
    let checker = MonoFilter::new(limits);
    let mut filter = MonoFilter::new(limits);
    let mut out = open_output(a.io.output.as_deref())?;
    for_each_line(
        Chunks::new(open_input(a.io.input.as_deref())?),
        a.io.workers,
        |_, line| {
            let s = Sentence::tokenize(line);
            let v = checker.verdict(&s);
            if v != Verdict::Keep {
                return (v, None);
            }
            let text = s.render();
            (v, Some((Deduper::fingerprint(&text), text)))
        },
        |_, (v, kept)| {
            match kept {
                // The dedup decision is made here, in input order.
                Some((fp, text)) => {
                    if filter.admit_fingerprint(fp) {
                        write_line(&mut out, &text)?;
                    }
                }
                None => filter.report_mut().record(v),
            }
            Ok(())
        },
    )?;
    out.flush()?;
    summarize("filter-mono", filter.report());
    write_report(a.report.as_ref(), filter.report())
}

pub fn filter_bt(a: FilterBtArgs) -> Result<()> {
    let origin = a.pairs.origin.map_or(Origin::Bt, Origin::from);
    let limits = BtLimits {
        max_src_tokens: a.max_src_tokens,
        max_src_chars: a.max_src_chars,
    };
    let checker = BtFilter::new(limits);
    let mut filter = BtFilter::new(limits);
    let mut out = open_output(a.pairs.io.output.as_deref())?;
    for_each_line(
        pair_chunks(&a.pairs)?,
        a.pairs.io.workers,
        // Only the source is measured, and nothing is tokenized.
        |_, line| {
            split_tsv(line).map(|f| {
                let (tokens, chars) = measure(f.source);
                let v = checker
                    .verdict_measured(f.origin.unwrap_or(origin), tokens, chars)
                    .map_err(|e| e.to_string());
                let keep = matches!(v, Ok(Verdict::Keep));
                (v, keep.then(|| join_fields(&normalize(f.source), &normalize(f.target), f.origin)))
            })
        },
        |i, res| {
            match res {
                Ok((Ok(v), text)) => {
                    filter.report_mut().record(v);
                    if let Some(text) = text {
                        write_line(&mut out, &text)?;
                    }
                }
                // Wrong origin is a configuration error, not a droppable line.
                Ok((Err(e), _)) => return Err(at_line(i + 1, e)),
                Err(reason) => {
                    eprintln!("line {}: dropped: {reason}", i + 1);
                    filter.report_mut().record(Verdict::Malformed);
                }
            }
            Ok(())
        },
    )?;
    out.flush()?;
    summarize("filter-bt", filter.report());
    write_report(a.pairs.report.as_ref(), filter.report())
}

pub fn noise(a: NoiseArgs) -> Result<()> {
    let spec = NoiseSpec {
        dropout_p: a.dropout,
        blank_p: a.blank,
        permute_k: a.permute_k,
        ops: NoiseOps {
            dropout: a.ops.contains(&Op::Dropout),
            blank: a.ops.contains(&Op::Blank),
            permute: a.ops.contains(&Op::Permute),
        },
        blank_token: a.blank_token.clone(),
    };
    if Token::new(a.blank_token.as_str()).is_err() {
        return Err(Usage(format!("--blank-token {:?} is not a single token", a.blank_token)).into());
    }
    let side: Side = a.side.into();
    let noiser = CorpusNoiser::new(spec.clone(), a.sentence_prob, a.seed, side)?;
    let format = a.format;
    let mut stats = NoiseStats::default();
    let mut out = open_output(a.io.output.as_deref())?;
    for_each_line(
        Chunks::new(open_input(a.io.input.as_deref())?),
        a.io.workers,
        |i, line| -> std::result::Result<(String, bool), String> {
            match format {
                Format::Text => {
                    let s = Sentence::tokenize(line);
                    match noiser.noise_line(i, &s).map_err(|e| e.to_string())? {
                        Some(n) => Ok((n.render(), true)),
                        None => Ok((s.render(), false)),
                    }
                }
                Format::Tsv => {
                    // The other side is passed through without tokenizing it.
                    let f = split_tsv(line)?;
                    let (own, other) = match side {
                        Side::Source => (f.source, f.target),
                        Side::Target => (f.target, f.source),
                    };
                    let s = Sentence::tokenize(own);
                    let (text, noised) = match noiser.noise_line(i, &s).map_err(|e| e.to_string())? {
                        Some(n) => (n.render(), true),
                        None => (s.render(), false),
                    };
                    let other = normalize(other);
                    Ok(match side {
                        Side::Source => (join_fields(&text, &other, f.origin), noised),
                        Side::Target => (join_fields(&other, &text, f.origin), noised),
                    })
                }
            }
        },
        |i, res| {
            let (text, noised) = res.map_err(|e| at_line(i + 1, e))?;
            stats.pairs += 1;
            stats.noised += noised as u64;
            write_line(&mut out, &text)
        },
    )?;
    out.flush()?;
    eprintln!("noise: noised {} of {} lines", stats.noised, stats.pairs);
    write_report(
        a.report.as_ref(),
        &json!({
            "seed": a.seed,
            "sentence_prob": a.sentence_prob,
            "spec": spec,
            "pairs": stats.pairs,
            "noised": stats.noised,
            "noised_fraction": stats.noised_fraction(),
        }),
    )
}

/// Header row of keys, then one row of values per input line.
fn read_metadata(path: &std::path::Path) -> Result<Vec<BTreeMap<String, String>>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read metadata file {}", path.display()))?;
    let mut rows = text.lines();
    let Some(header) = rows.next() else {
        bail!("metadata file {} is empty", path.display());
    };
    let keys: Vec<&str> = header.split('\t').collect();
    rows.enumerate()
        .map(|(i, row)| {
            let values: Vec<&str> = row.split('\t').collect();
            if values.len() != keys.len() {
                bail!(
                    "metadata file line {}: {} fields, header has {}",
                    i + 2,
                    values.len(),
                    keys.len()
                );
            }
            Ok(keys
                .iter()
                .zip(values)
                .map(|(k, v)| ((*k).to_owned(), v.trim().to_owned()))
                .collect())
        })
        .collect()
}

pub fn tag(a: TagArgs) -> Result<()> {
    let token = Token::new(a.token.as_str())
        .map_err(|_| Usage(format!("--token {:?} is not a single token", a.token)))?;
    let spec = match a.mode {
        TagModeArg::Constant => TagSpec::constant(token),
        TagModeArg::PerMetadata => TagSpec::per_metadata(token, a.metadata_key.clone()),
    };
    let metadata = match (&a.metadata_file, a.mode) {
        (Some(p), TagModeArg::PerMetadata) => Some(read_metadata(p)?),
        _ => None,
    };
    let origin = Origin::from(a.origin);
    let (format, tag_bitext) = (a.format, a.tag_bitext);
    let mut out = open_output(a.io.output.as_deref())?;
    for_each_line(
        Chunks::new(open_input(a.io.input.as_deref())?),
        a.io.workers,
        |i, line| -> std::result::Result<String, String> {
            let meta = match &metadata {
                None => None,
                Some(rows) => Some(
                    rows.get(i as usize)
                        .ok_or_else(|| "no metadata row for this line".to_owned())?,
                ),
            };
            match format {
                Format::Text => apply_tag(&Sentence::tokenize(line), &spec, meta)
                    .map(|s| s.render())
                    .map_err(|e| e.to_string()),
                Format::Tsv => {
                    let f = split_tsv(line)?;
                    let target = normalize(f.target);
                    // Bitext is left alone unless asked for.
                    if f.origin.unwrap_or(origin) == Origin::Bitext && !tag_bitext {
                        return Ok(join_fields(&normalize(f.source), &target, f.origin));
                    }
                    let source = apply_tag(&Sentence::tokenize(f.source), &spec, meta)
                        .map_err(|e| e.to_string())?;
                    Ok(join_fields(&source.render(), &target, f.origin))
                }
            }
        },
        |i, res| write_line(&mut out, &res.map_err(|e| at_line(i + 1, e))?),
    )?;
    out.flush()?;
    Ok(())
}

pub fn validate(a: ValidateArgs) -> Result<()> {
    let mut specs = Vec::new();
    for r in &a.reserved {
        let t = Token::new(r.as_str())
            .map_err(|_| Usage(format!("reserved token {r:?} is not a single token")))?;
        specs.push(TagSpec::constant(t));
    }
    let format = a.format;
    let mut violations = Vec::new();
    let mut lines = 0u64;
    for_each_line(
        Chunks::new(open_input(a.input.as_deref())?),
        a.workers,
        |_, line| -> std::result::Result<Vec<(&'static str, usize, String)>, String> {
            let sides: Vec<(&'static str, Sentence)> = match format {
                Format::Text => vec![("text", Sentence::tokenize(line))],
                Format::Tsv => {
                    let p = parse_tsv_pair(line, Origin::Bitext)?;
                    vec![("source", p.source), ("target", p.target)]
                }
            };
            Ok(sides
                .iter()
                .flat_map(|(col, s)| {
                    s.tokens()
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| specs.iter().any(|sp| sp.is_reserved(t)))
                        .map(move |(pos, t)| (*col, pos, t.to_string()))
                })
                .collect())
        },
        |i, res| {
            lines += 1;
            for (column, position, token) in res.map_err(|e| at_line(i + 1, e))? {
                eprintln!("line {}: reserved token {token} in {column} at position {position}", i + 1);
                violations.push(json!({
                    "line": i + 1,
                    "column": column,
                    "position": position,
                    "token": token,
                }));
            }
            Ok(())
        },
    )?;
    write_report(
        a.report.as_ref(),
        &json!({ "lines": lines, "violations": violations }),
    )?;
    if !violations.is_empty() {
        bail!("{} reserved-token occurrence(s) found", violations.len());
    }
    eprintln!("validate: {lines} lines, no reserved tokens");
    Ok(())
}
