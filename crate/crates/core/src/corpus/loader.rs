use std::fs;
use std::path::Path;

use super::{BitextShard, MonoShard};
use crate::error::{Error, Result};
use crate::lang::{Direction, LanguageId};

pub const DEFAULT_REJECT_THRESHOLD: f64 = 0.01;

#[derive(Clone, Copy, Debug)]
pub struct BitextOptions {
    /// Fraction of malformed lines tolerated before the load aborts.
    pub reject_threshold: f64,
    /// Keep only the first `n` pairs.
    pub max_pairs: Option<usize>,
}

impl Default for BitextOptions {
    fn default() -> Self {
        BitextOptions {
            reject_threshold: DEFAULT_REJECT_THRESHOLD,
            max_pairs: None,
        }
    }
}

/// Splits a file into lines, checking UTF-8 per line so errors carry a line number.
fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = std::str::from_utf8(raw).map_err(|_| Error::InvalidUtf8 {
            path: path.to_owned(),
            line: i + 1,
        })?;
        lines.push(line.trim_end_matches('\r').to_owned());
    }
    if bytes.ends_with(b"\n") {
        lines.pop();
    }
    Ok(lines)
}

pub fn load_mono(path: &Path, lang: LanguageId) -> Result<MonoShard> {
    let sentences: Vec<String> = read_lines(path)?
        .into_iter()
        .map(|l| l.trim().to_owned())
        .filter(|l| !l.is_empty())
        .collect();
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus {
            path: path.to_owned(),
        });
    }
    Ok(MonoShard {
        lang,
        sentences,
        source_path: path.display().to_string(),
    })
}

pub fn load_bitext(
    path: &Path,
    src: LanguageId,
    tgt: LanguageId,
    opts: BitextOptions,
) -> Result<BitextShard> {
    let direction = Direction::new(src, tgt)?;
    let mut pairs = Vec::new();
    let mut total = 0usize;
    let mut rejected = 0usize;
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let mut cols = line.split('\t');
        let (Some(s), Some(t), None) = (cols.next(), cols.next(), cols.next()) else {
            log::warn!("{}:{}: expected two tab-separated columns", path.display(), i + 1);
            rejected += 1;
            continue;
        };
        let (s, t) = (s.trim(), t.trim());
        if s.is_empty() || t.is_empty() {
            log::warn!("{}:{}: empty side", path.display(), i + 1);
            rejected += 1;
            continue;
        }
        pairs.push((s.to_owned(), t.to_owned()));
    }
    if total > 0 && rejected as f64 > opts.reject_threshold * total as f64 {
        return Err(Error::TooManyMalformed {
            path: path.to_owned(),
            rejected,
            total,
            threshold: opts.reject_threshold,
        });
    }
    if let Some(n) = opts.max_pairs {
        pairs.truncate(n);
    }
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus {
            path: path.to_owned(),
        });
    }
    if rejected > 0 {
        log::info!("{}: skipped {rejected} malformed of {total} lines", path.display());
    }
    Ok(BitextShard {
        direction,
        pairs,
        source_path: path.display().to_string(),
        rejected,
    })
}
