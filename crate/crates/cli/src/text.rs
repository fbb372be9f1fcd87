//! Line-oriented text formats: `key = value` files, dataset manifests,
//! frame index lists and per-epoch metrics.

use std::collections::BTreeSet;
use std::path::{Component, Path};
use std::str::FromStr;

use fdmask::synth::EpochMetrics;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: usize, msg: impl Into<String>) -> Self {
        ParseError { line, msg: msg.into() }
    }
}

/// One `key = value` assignment with its 1-based line number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment<'a> {
    pub line: usize,
    pub key: &'a str,
    pub value: &'a str,
}

/// Splits a `key = value` file. Blank lines and lines starting with `#`
/// are skipped; repeated keys are an error.
pub fn key_values(text: &str) -> Result<Vec<Assignment<'_>>, ParseError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| ParseError::new(line, "expected key = value"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ParseError::new(line, "empty key"));
        }
        if value.is_empty() {
            return Err(ParseError::new(line, format!("empty value for {key}")));
        }
        if !seen.insert(key) {
            return Err(ParseError::new(line, format!("duplicate key {key}")));
        }
        out.push(Assignment { line, key, value });
    }
    Ok(out)
}

pub fn parse_value<T: FromStr>(a: &Assignment<'_>) -> Result<T, ParseError> {
    a.value
        .parse()
        .map_err(|_| ParseError::new(a.line, format!("invalid value {:?} for {}", a.value, a.key)))
}

pub fn parse_bool(a: &Assignment<'_>) -> Result<bool, ParseError> {
    match a.value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ParseError::new(
            a.line,
            format!("{} must be true or false, got {:?}", a.key, a.value),
        )),
    }
}

/// A finite, non-negative real.
pub fn parse_rate(a: &Assignment<'_>) -> Result<f64, ParseError> {
    let v: f64 = parse_value(a)?;
    if !v.is_finite() || v < 0.0 {
        return Err(ParseError::new(
            a.line,
            format!("{} must be finite and non-negative, got {v}", a.key),
        ));
    }
    Ok(v)
}

pub fn parse_positive(a: &Assignment<'_>) -> Result<usize, ParseError> {
    let v: usize = parse_value(a)?;
    if v == 0 {
        return Err(ParseError::new(a.line, format!("{} must be positive", a.key)));
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the directory holding the manifest.
    pub path: String,
    pub label: usize,
}

/// `path<TAB>label` per line. Paths must be relative and stay inside the
/// dataset directory.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut fields = raw.split('\t');
        let (Some(path), Some(label), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(ParseError::new(line, "expected path<TAB>label"));
        };
        if path.is_empty() {
            return Err(ParseError::new(line, "empty path"));
        }
        let safe = Path::new(path).components().all(|c| matches!(c, Component::Normal(_)));
        if !safe {
            return Err(ParseError::new(
                line,
                format!("path {path:?} leaves the dataset directory"),
            ));
        }
        let label = label
            .parse()
            .map_err(|_| ParseError::new(line, format!("invalid label {label:?}")))?;
        out.push(ManifestEntry {
            path: path.to_string(),
            label,
        });
    }
    Ok(out)
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    entries.iter().map(|e| format!("{}\t{}\n", e.path, e.label)).collect()
}

/// One non-negative integer per line.
pub fn parse_index_list(text: &str) -> Result<Vec<usize>, ParseError> {
    text.lines()
        .enumerate()
        .map(|(i, raw)| {
            raw.parse()
                .map_err(|_| ParseError::new(i + 1, format!("invalid frame index {raw:?}")))
        })
        .collect()
}

pub fn format_index_list(indices: &[usize]) -> String {
    indices.iter().map(|i| format!("{i}\n")).collect()
}

pub fn format_metrics(m: &EpochMetrics) -> String {
    format!("epoch={} ce={} lmask={} acc={}", m.epoch, m.ce, m.lmask, m.acc)
}

/// Parses lines written by [`format_metrics`].
pub fn parse_metrics(text: &str) -> Result<Vec<EpochMetrics>, ParseError> {
    text.lines()
        .enumerate()
        .map(|(i, raw)| {
            let line = i + 1;
            let mut fields = raw.split(' ');
            let mut next = |name: &str| -> Result<&str, ParseError> {
                fields
                    .next()
                    .and_then(|f| f.strip_prefix(name))
                    .and_then(|f| f.strip_prefix('='))
                    .ok_or_else(|| ParseError::new(line, format!("expected {name}=<value>")))
            };
            let bad = |what: &str| ParseError::new(line, format!("invalid {what}"));
            let epoch = next("epoch")?.parse().map_err(|_| bad("epoch"))?;
            let ce = next("ce")?.parse().map_err(|_| bad("ce"))?;
            let lmask = next("lmask")?.parse().map_err(|_| bad("lmask"))?;
            let acc = next("acc")?.parse().map_err(|_| bad("acc"))?;
            if fields.next().is_some() {
                return Err(ParseError::new(line, "trailing fields"));
            }
            Ok(EpochMetrics { epoch, ce, lmask, acc })
        })
        .collect()
}
