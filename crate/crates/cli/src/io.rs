use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

const BUF: usize = 1 << 20;
const CHUNK: usize = 1 << 14;

pub fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    match path {
        None => Ok(Box::new(BufReader::with_capacity(BUF, io::stdin()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufReader::with_capacity(BUF, io::stdin()))),
        Some(p) => {
            let f = File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
            Ok(Box::new(BufReader::with_capacity(BUF, f)))
        }
    }
}

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::with_capacity(BUF, io::stdout()))),
        Some(p) => {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            Ok(Box::new(BufWriter::with_capacity(BUF, f)))
        }
    }
}

pub fn write_report<T: Serialize>(path: Option<&PathBuf>, report: &T) -> Result<()> {
    if let Some(p) = path {
        let mut text = serde_json::to_string_pretty(report)?;
        text.push('\n');
        std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

/// Error text for input line `line` (1-based).
pub fn at_line(line: u64, msg: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("line {line}: {msg}")
}

/// Reads lines in fixed-size chunks, stripping `\n` and `\r\n`. With a
/// second reader, each line is `first TAB second` (tabs inside either side
/// become spaces).
pub struct Chunks {
    reader: Box<dyn BufRead>,
    second: Option<Box<dyn BufRead>>,
    next_line: u64,
    done: bool,
}

fn read_one(reader: &mut dyn BufRead, line: &mut String) -> io::Result<bool> {
    line.clear();
    if reader.read_line(line)? == 0 {
        return Ok(false);
    }
    if line.ends_with('\n') {
        line.pop();
        if line.ends_with('\r') {
            line.pop();
        }
    }
    Ok(true)
}

impl Chunks {
    pub fn new(reader: Box<dyn BufRead>) -> Self {
        Chunks {
            reader,
            second: None,
            next_line: 0,
            done: false,
        }
    }

    pub fn aligned(first: Box<dyn BufRead>, second: Box<dyn BufRead>) -> Self {
        Chunks {
            second: Some(second),
            ..Chunks::new(first)
        }
    }

    /// The next chunk and the 0-based index of its first line; `None` at EOF.
    pub fn next_chunk(&mut self) -> Result<Option<(u64, Vec<String>)>> {
        if self.done {
            return Ok(None);
        }
        let start = self.next_line;
        let mut chunk = Vec::with_capacity(CHUNK);
        while chunk.len() < CHUNK {
            let lineno = self.next_line + 1;
            let mut line = String::new();
            let more = read_one(&mut self.reader, &mut line).map_err(|e| at_line(lineno, e))?;
            if let Some(second) = self.second.as_mut() {
                let mut other = String::new();
                let other_more = read_one(second, &mut other).map_err(|e| at_line(lineno, e))?;
                if more != other_more {
                    return Err(at_line(lineno, "source and target files have different line counts"));
                }
                if more {
                    line = format!("{}\t{}", line.replace('\t', " "), other.replace('\t', " "));
                }
            }
            if !more {
                self.done = true;
                break;
            }
            chunk.push(line);
            self.next_line += 1;
        }
        Ok(if chunk.is_empty() { None } else { Some((start, chunk)) })
    }
}

/// Maps chunks on a private pool. Results come back in input order, so the
/// output is the same for any worker count.
pub struct Workers {
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    pub fn new(n: u16) -> Result<Self> {
        let pool = if n > 1 {
            Some(rayon::ThreadPoolBuilder::new().num_threads(n as usize).build()?)
        } else {
            None
        };
        Ok(Workers { pool })
    }

    pub fn map<T, F>(&self, start: u64, lines: &[String], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, &str) -> T + Sync,
    {
        match &self.pool {
            None => lines
                .iter()
                .enumerate()
                .map(|(i, l)| f(start + i as u64, l))
                .collect(),
            Some(pool) => pool.install(|| {
                lines
                    .par_iter()
                    .enumerate()
                    .map(|(i, l)| f(start + i as u64, l))
                    .collect()
            }),
        }
    }
}

/// Runs `map` over every input line (0-based index) and hands the results to
/// `sink` in order.
pub fn for_each_line<T, F, S>(mut chunks: Chunks, workers: u16, map: F, mut sink: S) -> Result<()>
where
    T: Send,
    F: Fn(u64, &str) -> T + Sync,
    S: FnMut(u64, T) -> Result<()>,
{
    let workers = Workers::new(workers)?;
    while let Some((start, lines)) = chunks.next_chunk()? {
        for (i, out) in workers.map(start, &lines, &map).into_iter().enumerate() {
            sink(start + i as u64, out)?;
        }
    }
    Ok(())
}

/// Reads a whole file as lines.
pub fn read_lines(path: Option<&Path>) -> Result<Vec<String>> {
    let mut chunks = Chunks::new(open_input(path)?);
    let mut out = Vec::new();
    while let Some((_, mut lines)) = chunks.next_chunk()? {
        out.append(&mut lines);
    }
    Ok(out)
}
