//! Shared helpers for the plain-text file formats.
//!
//! Reals are written with Rust's shortest round-trip representation, so
//! `parse_real(&fmt_real(x)) == x` bit for bit (NaN aside).

use crate::{Error, Result};

pub fn fmt_real(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_reals(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_real(x)).collect::<Vec<_>>().join(" ")
}

/// `1:0.5,3:2` notation; zero entries are omitted, the empty string is the
/// zero vector.
pub fn fmt_sparse(xs: &[f64]) -> String {
    xs.iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, &v)| format!("{}:{}", i + 1, fmt_real(v)))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_sparse(s: &str, dim: usize, line: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dim];
    if s.is_empty() {
        return Ok(out);
    }
    for item in s.split(',') {
        let (fid, val) = item
            .split_once(':')
            .ok_or_else(|| Error::model(line, format!("bad sparse entry `{item}`")))?;
        let fid: usize = fid
            .parse()
            .map_err(|_| Error::model(line, format!("bad feature id `{fid}`")))?;
        if fid == 0 || fid > dim {
            return Err(Error::model(line, format!("feature id {fid} outside 1..={dim}")));
        }
        out[fid - 1] = parse_model_real(val, line)?;
    }
    Ok(out)
}

pub fn parse_model_real(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::model(line, format!("bad real `{s}`")))
}

/// Looks up `key=value` among whitespace-separated tokens.
pub fn field<'a>(tokens: &[&'a str], key: &str, line: usize) -> Result<&'a str> {
    tokens
        .iter()
        .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| Error::model(line, format!("missing `{key}=`")))
}

pub fn field_real(tokens: &[&str], key: &str, line: usize) -> Result<f64> {
    parse_model_real(field(tokens, key, line)?, line)
}

pub fn field_usize(tokens: &[&str], key: &str, line: usize) -> Result<usize> {
    let raw = field(tokens, key, line)?;
    raw.parse()
        .map_err(|_| Error::model(line, format!("bad integer `{raw}` for `{key}`")))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
pub fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_reals(tokens: &[&str], line: usize) -> Result<Vec<f64>> {
    tokens.iter().map(|t| parse_model_real(t, line)).collect()
}
