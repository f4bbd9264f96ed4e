//! Query-grouped ranking data.
//!
//! Two line formats are supported:
//!
//! ```text
//! <label> qid:<qid> <fid>:<value> ... [# comment]    (grouped)
//! <label> <fid>:<value> ... [# comment]              (flat)
//! ```
//!
//! Feature ids are 1-based and strictly ascending within a line. Vectors are
//! densified to the largest feature id seen anywhere in the file, missing
//! ids becoming `0.0`. In grouped files all lines of one query must be
//! contiguous; a qid that reappears later is rejected instead of re-sorted.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::textfmt::fmt_real;
use crate::{Error, Result};

/// Group size of the question re-ranking data (one question, ten candidates).
pub const DEFAULT_GROUP_SIZE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub label: u32,
    pub qid: u64,
    pub features: Vec<f64>,
    pub comment: Option<String>,
}

/// A record of the flat format: a candidate that has no query id yet.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatRecord {
    pub label: u32,
    pub features: Vec<f64>,
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub qid: u64,
    pub candidates: Vec<Candidate>,
}

impl QueryGroup {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.candidates.iter().map(|c| c.label).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    groups: Vec<QueryGroup>,
    dim: usize,
}

impl Dataset {
    /// Builds a dataset, checking every structural invariant: at least one
    /// group, no empty group, unique qids, matching candidate qids and a
    /// shared feature dimensionality.
    pub fn new(groups: Vec<QueryGroup>) -> Result<Self> {
        let first = groups
            .first()
            .and_then(|g| g.candidates.first())
            .ok_or(Error::EmptyDataset)?;
        let dim = first.features.len();
        let mut seen = HashSet::new();
        for g in &groups {
            if g.candidates.is_empty() {
                return Err(Error::invalid(format!("query {} has no candidates", g.qid)));
            }
            if !seen.insert(g.qid) {
                return Err(Error::invalid(format!("duplicate qid {}", g.qid)));
            }
            for c in &g.candidates {
                if c.qid != g.qid {
                    return Err(Error::invalid(format!(
                        "candidate with qid {} inside group {}",
                        c.qid, g.qid
                    )));
                }
                if c.features.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: c.features.len(),
                    });
                }
            }
        }
        Ok(Dataset { groups, dim })
    }

    pub fn groups(&self) -> &[QueryGroup] {
        &self.groups
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.groups.iter().map(QueryGroup::len).sum()
    }

    pub fn max_label(&self) -> u32 {
        self.candidates().map(|c| c.label).max().unwrap_or(0)
    }

    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.groups.iter().flat_map(|g| g.candidates.iter())
    }

    /// Drops the query ids, yielding records in file order.
    pub fn flatten(&self) -> Vec<FlatRecord> {
        self.candidates()
            .map(|c| FlatRecord {
                label: c.label,
                features: c.features.clone(),
                comment: c.comment.clone(),
            })
            .collect()
    }

    /// Copy of the dataset with every feature vector mapped through `f`.
    pub fn map_features(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Dataset> {
        let groups = self
            .groups
            .iter()
            .map(|g| QueryGroup {
                qid: g.qid,
                candidates: g
                    .candidates
                    .iter()
                    .map(|c| Candidate {
                        features: f(&c.features),
                        ..c.clone()
                    })
                    .collect(),
            })
            .collect();
        Dataset::new(groups)
    }
}

struct ParsedLine {
    label: u32,
    qid: Option<u64>,
    features: Vec<(usize, f64)>,
    comment: Option<String>,
}

fn parse_line(raw: &str, line: usize, expect_qid: bool) -> Result<Option<ParsedLine>> {
    let (body, comment) = match raw.find('#') {
        Some(pos) => {
            let c = raw[pos + 1..].trim();
            (&raw[..pos], (!c.is_empty()).then(|| c.to_string()))
        }
        None => (raw, None),
    };
    let mut tokens = body.split_whitespace();
    let Some(label_tok) = tokens.next() else {
        // blank or comment-only line
        return Ok(None);
    };
    if label_tok.starts_with('-') {
        return Err(Error::parse(line, format!("negative label `{label_tok}`")));
    }
    let label: u32 = label_tok
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid label `{label_tok}`")))?;

    let mut qid = None;
    let mut features: Vec<(usize, f64)> = Vec::new();
    for (pos, tok) in tokens.enumerate() {
        if let Some(q) = tok.strip_prefix("qid:") {
            if !expect_qid {
                return Err(Error::parse(line, "unexpected qid token in flat format"));
            }
            if pos != 0 {
                return Err(Error::parse(line, "qid token must follow the label"));
            }
            let q: u64 = q
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid qid `{q}`")))?;
            if q == 0 {
                return Err(Error::parse(line, "qid must be positive"));
            }
            qid = Some(q);
            continue;
        }
        let (fid, val) = tok
            .split_once(':')
            .ok_or_else(|| Error::parse(line, format!("expected <fid>:<value>, found `{tok}`")))?;
        let fid: usize = fid
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid feature id `{fid}`")))?;
        if fid == 0 {
            return Err(Error::parse(line, "feature ids start at 1"));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid feature value `{val}`")))?;
        if !val.is_finite() {
            return Err(Error::parse(line, format!("non-finite feature value `{val}`")));
        }
        if let Some(&(prev, _)) = features.last() {
            if fid <= prev {
                return Err(Error::parse(
                    line,
                    format!("feature ids not strictly ascending ({prev} then {fid})"),
                ));
            }
        }
        features.push((fid, val));
    }
    if expect_qid && qid.is_none() {
        return Err(Error::parse(line, "missing qid token"));
    }
    if features.is_empty() {
        return Err(Error::parse(line, "no features"));
    }
    Ok(Some(ParsedLine {
        label,
        qid,
        features,
        comment,
    }))
}

fn densify(sparse: &[(usize, f64)], dim: usize) -> Vec<f64> {
    let mut dense = vec![0.0; dim];
    for &(fid, v) in sparse {
        dense[fid - 1] = v;
    }
    dense
}

fn max_fid(lines: &[(usize, ParsedLine)]) -> usize {
    lines
        .iter()
        .filter_map(|(_, p)| p.features.last().map(|&(f, _)| f))
        .max()
        .unwrap_or(0)
}

/// Parses grouped ranking data from a string.
pub fn parse_ranking_str(text: &str) -> Result<Dataset> {
    let mut parsed = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if let Some(p) = parse_line(raw, i + 1, true)? {
            parsed.push((i + 1, p));
        }
    }
    if parsed.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = max_fid(&parsed);

    let mut groups: Vec<QueryGroup> = Vec::new();
    let mut closed: HashSet<u64> = HashSet::new();
    for (line, p) in parsed {
        let qid = p.qid.expect("grouped lines carry a qid");
        let candidate = Candidate {
            label: p.label,
            qid,
            features: densify(&p.features, dim),
            comment: p.comment,
        };
        match groups.last_mut() {
            Some(g) if g.qid == qid => g.candidates.push(candidate),
            current => {
                if let Some(g) = current {
                    closed.insert(g.qid);
                }
                if closed.contains(&qid) {
                    return Err(Error::parse(
                        line,
                        format!("qid {qid} reappears after other queries (input not grouped)"),
                    ));
                }
                groups.push(QueryGroup {
                    qid,
                    candidates: vec![candidate],
                });
            }
        }
    }
    Dataset::new(groups)
}

pub fn parse_ranking_file(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_ranking_str(&fs::read_to_string(path)?)
}

/// Parses flat (qid-less) records from a string.
pub fn parse_flat_str(text: &str) -> Result<Vec<FlatRecord>> {
    let mut parsed = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if let Some(p) = parse_line(raw, i + 1, false)? {
            parsed.push((i + 1, p));
        }
    }
    if parsed.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = max_fid(&parsed);
    Ok(parsed
        .into_iter()
        .map(|(_, p)| FlatRecord {
            label: p.label,
            features: densify(&p.features, dim),
            comment: p.comment,
        })
        .collect())
}

pub fn parse_flat_file(path: impl AsRef<Path>) -> Result<Vec<FlatRecord>> {
    parse_flat_str(&fs::read_to_string(path)?)
}

/// Assigns `qid = 1 + index / group_size` and groups consecutive blocks.
pub fn attach_query_ids(records: &[FlatRecord], group_size: usize) -> Result<Dataset> {
    if group_size == 0 {
        return Err(Error::invalid("group size must be positive"));
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if records.len() % group_size != 0 {
        return Err(Error::invalid(format!(
            "{} records are not divisible into groups of {group_size}",
            records.len()
        )));
    }
    let groups = records
        .chunks(group_size)
        .enumerate()
        .map(|(i, block)| {
            let qid = i as u64 + 1;
            QueryGroup {
                qid,
                candidates: block
                    .iter()
                    .map(|r| Candidate {
                        label: r.label,
                        qid,
                        features: r.features.clone(),
                        comment: r.comment.clone(),
                    })
                    .collect(),
            }
        })
        .collect();
    Dataset::new(groups)
}

/// Splits off the last `n_tail` groups (the held-out sub-test).
pub fn split_tail(ds: &Dataset, n_tail: usize) -> Result<(Dataset, Dataset)> {
    let q = ds.num_groups();
    if n_tail == 0 || n_tail >= q {
        return Err(Error::invalid(format!(
            "tail size {n_tail} must be in 1..{q} for a dataset of {q} queries"
        )));
    }
    let (head, tail) = ds.groups.split_at(q - n_tail);
    Ok((
        Dataset {
            groups: head.to_vec(),
            dim: ds.dim,
        },
        Dataset {
            groups: tail.to_vec(),
            dim: ds.dim,
        },
    ))
}

fn push_features(out: &mut String, features: &[f64]) {
    let dim = features.len();
    for (i, &v) in features.iter().enumerate() {
        // the last id is always written so the dimensionality survives a re-read
        if v != 0.0 || i + 1 == dim {
            out.push(' ');
            out.push_str(&format!("{}:{}", i + 1, fmt_real(v)));
        }
    }
}

fn push_comment(out: &mut String, comment: &Option<String>) {
    if let Some(c) = comment {
        out.push_str(" # ");
        out.push_str(c);
    }
}

pub fn format_candidate(c: &Candidate) -> String {
    let mut line = format!("{} qid:{}", c.label, c.qid);
    push_features(&mut line, &c.features);
    push_comment(&mut line, &c.comment);
    line
}

pub fn write_ranking_string(ds: &Dataset) -> Result<String> {
    if ds.num_candidates() == 0 || ds.dim == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut out = String::new();
    for c in ds.candidates() {
        out.push_str(&format_candidate(c));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_ranking_file(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_ranking_string(ds)?)?;
    Ok(())
}

pub fn write_flat_string(records: &[FlatRecord]) -> Result<String> {
    if records.is_empty() || records[0].features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut out = String::new();
    for r in records {
        out.push_str(&r.label.to_string());
        push_features(&mut out, &r.features);
        push_comment(&mut out, &r.comment);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_flat_file(records: &[FlatRecord], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_flat_string(records)?)?;
    Ok(())
}

/// Per-feature z-scoring fitted on a training set. Constant features keep
/// a unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Standardizer {
        let n = ds.num_candidates() as f64;
        let d = ds.dim();
        let mut mean = vec![0.0; d];
        for c in ds.candidates() {
            for (m, &x) in mean.iter_mut().zip(&c.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for c in ds.candidates() {
            for ((v, &x), &m) in var.iter_mut().zip(&c.features).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&x, &m), &s)| (x - m) / s)
            .collect()
    }
}
