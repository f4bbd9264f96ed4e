//! Evaluation measures over ranked query groups: AP/MAP, MRR, P@k, ERR@k
//! and AvgRec.
//!
//! A candidate is relevant when its label is greater than zero. Every
//! per-query measure depends only on the label sequence in rank order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::dataset::{Dataset, QueryGroup};
use crate::textfmt::{content_lines, fmt_real};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedEntry {
    /// Position of the candidate inside its query group.
    pub index: usize,
    pub score: f64,
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub qid: u64,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    /// Builds a list whose rank order is exactly `labels`; scores descend
    /// from `n` to 1. Handy for evaluating a fixed label sequence.
    pub fn from_labels(qid: u64, labels: &[u32]) -> RankedList {
        let n = labels.len();
        RankedList {
            qid,
            entries: labels
                .iter()
                .enumerate()
                .map(|(i, &label)| RankedEntry {
                    index: i,
                    score: (n - i) as f64,
                    label,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_relevant(&self) -> usize {
        self.entries.iter().filter(|e| e.label > 0).count()
    }

    pub fn order(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }

    fn relevance(&self) -> impl Iterator<Item = bool> + '_ {
        self.entries.iter().map(|e| e.label > 0)
    }
}

/// Descending sort by score; equal scores keep ascending candidate index.
pub fn rank_by_score(group: &QueryGroup, scores: &[f64]) -> Result<RankedList> {
    if scores.len() != group.len() {
        return Err(Error::DimensionMismatch {
            expected: group.len(),
            got: scores.len(),
        });
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {bad} for query {}", group.qid)));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort, so ties stay in index order
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(RankedList {
        qid: group.qid,
        entries: order
            .into_iter()
            .map(|i| RankedEntry {
                index: i,
                score: scores[i],
                label: group.candidates[i].label,
            })
            .collect(),
    })
}

/// Mean of Precision@r over the ranks r holding a relevant item, divided by
/// the number of relevant items. Zero when nothing is relevant.
pub fn average_precision(rl: &RankedList) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, rel) in rl.relevance().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

pub fn mean_average_precision(rls: &[RankedList]) -> Result<f64> {
    if rls.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(rls.iter().map(average_precision).sum::<f64>() / rls.len() as f64)
}

pub fn reciprocal_rank(rl: &RankedList) -> f64 {
    rl.relevance()
        .position(|rel| rel)
        .map_or(0.0, |r| 1.0 / (r + 1) as f64)
}

/// Relevant items in the top `min(k, n)` divided by `k`.
pub fn precision_at_k(rl: &RankedList, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = rl.relevance().take(k).filter(|&rel| rel).count();
    hits as f64 / k as f64
}

fn stop_probability(label: u32, g_max: u32) -> f64 {
    (2f64.powi(label as i32) - 1.0) / 2f64.powi(g_max as i32)
}

/// Per-rank stopping probabilities `R_r * prod_{i<r} (1 - R_i)` of the
/// cascade model over the first `k` ranks.
pub fn cascade_stop_masses(rl: &RankedList, k: usize, g_max: u32) -> Result<Vec<f64>> {
    if let Some(e) = rl.entries.iter().find(|e| e.label > g_max) {
        return Err(Error::invalid(format!(
            "label {} exceeds maximum grade {g_max}",
            e.label
        )));
    }
    let mut not_stopped = 1.0;
    Ok(rl
        .entries
        .iter()
        .take(k)
        .map(|e| {
            let r = stop_probability(e.label, g_max);
            let mass = not_stopped * r;
            not_stopped *= 1.0 - r;
            mass
        })
        .collect())
}

/// Expected reciprocal rank with gain `(2^g - 1) / 2^g_max`.
pub fn err_at_k(rl: &RankedList, k: usize, g_max: u32) -> Result<f64> {
    Ok(cascade_stop_masses(rl, k, g_max)?
        .iter()
        .enumerate()
        .map(|(r, m)| m / (r + 1) as f64)
        .sum())
}

/// Mean of Recall@r over every cutoff r = 1..n.
pub fn avg_rec(rl: &RankedList) -> f64 {
    let total = rl.num_relevant();
    if total == 0 || rl.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for rel in rl.relevance() {
        hits += rel as usize;
        sum += hits as f64 / total as f64;
    }
    sum / rl.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Map,
    Mrr,
    P1,
    P5,
    Err10,
    AvgRec,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Map,
        Metric::Mrr,
        Metric::P1,
        Metric::P5,
        Metric::Err10,
        Metric::AvgRec,
    ];

    /// Per-query value whose mean over queries gives this metric.
    pub fn per_query(self, rl: &RankedList, g_max: u32) -> Result<f64> {
        Ok(match self {
            Metric::Map => average_precision(rl),
            Metric::Mrr => reciprocal_rank(rl),
            Metric::P1 => precision_at_k(rl, 1),
            Metric::P5 => precision_at_k(rl, 5),
            Metric::Err10 => err_at_k(rl, 10, g_max)?,
            Metric::AvgRec => avg_rec(rl),
        })
    }

    /// Report key, e.g. `MAP` or `P@5`.
    pub fn key(self) -> &'static str {
        match self {
            Metric::Map => "MAP",
            Metric::Mrr => "MRR",
            Metric::P1 => "P@1",
            Metric::P5 => "P@5",
            Metric::Err10 => "ERR@10",
            Metric::AvgRec => "AvgRec",
        }
    }

    /// Mean of this metric over `rls`.
    pub fn mean(self, rls: &[RankedList], g_max: u32) -> Result<f64> {
        if rls.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut sum = 0.0;
        for rl in rls {
            sum += self.per_query(rl, g_max)?;
        }
        Ok(sum / rls.len() as f64)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "map" | "ap" => Ok(Metric::Map),
            "mrr" | "rr" => Ok(Metric::Mrr),
            "p@1" => Ok(Metric::P1),
            "p@5" => Ok(Metric::P5),
            "err@10" | "err" => Ok(Metric::Err10),
            "avgrec" => Ok(Metric::AvgRec),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// One value per [`Metric`]; per query these are AP, RR, P@1, P@5, ERR@10
/// and AvgRec, in aggregate their means.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSet {
    pub map: f64,
    pub mrr: f64,
    pub p1: f64,
    pub p5: f64,
    pub err10: f64,
    pub avg_rec: f64,
}

impl MetricSet {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Map => self.map,
            Metric::Mrr => self.mrr,
            Metric::P1 => self.p1,
            Metric::P5 => self.p5,
            Metric::Err10 => self.err10,
            Metric::AvgRec => self.avg_rec,
        }
    }

    fn set(&mut self, m: Metric, v: f64) {
        match m {
            Metric::Map => self.map = v,
            Metric::Mrr => self.mrr = v,
            Metric::P1 => self.p1 = v,
            Metric::P5 => self.p5 = v,
            Metric::Err10 => self.err10 = v,
            Metric::AvgRec => self.avg_rec = v,
        }
    }

    fn for_query(rl: &RankedList, g_max: u32) -> Result<MetricSet> {
        let mut m = MetricSet::default();
        for metric in Metric::ALL {
            m.set(metric, metric.per_query(rl, g_max)?);
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub qid: u64,
    pub values: MetricSet,
    pub has_relevant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    /// In dataset order.
    pub per_query: Vec<QueryMetrics>,
    pub aggregate: MetricSet,
    pub num_queries: usize,
    /// Queries without any relevant candidate; they count with AP = 0.
    pub no_relevant_queries: usize,
}

impl EvaluationReport {
    pub fn get(&self, m: Metric) -> f64 {
        self.aggregate.get(m)
    }

    /// `KEY=value` lines, fractions in [0, 1].
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for m in Metric::ALL {
            let _ = writeln!(out, "{}={}", m.key(), fmt_real(self.get(m)));
        }
        out
    }

    /// Human-readable table with both fractions and percentages.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:>8} {:>9}", "metric", "value", "x100");
        for m in Metric::ALL {
            let v = self.get(m);
            let _ = writeln!(out, "{:<8} {:>8.4} {:>9.3}", m.key(), v, v * 100.0);
        }
        let _ = writeln!(out, "queries  {}", self.num_queries);
        if self.no_relevant_queries > 0 {
            let _ = writeln!(
                out,
                "warning: {} queries have no relevant candidate (AP counted as 0)",
                self.no_relevant_queries
            );
        }
        out
    }
}

/// Evaluates already-ranked lists; aggregates are means in list order.
pub fn evaluate_ranked(rls: &[RankedList], g_max: u32) -> Result<EvaluationReport> {
    if rls.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut per_query = Vec::with_capacity(rls.len());
    let mut sums = MetricSet::default();
    for rl in rls {
        let values = MetricSet::for_query(rl, g_max)?;
        for m in Metric::ALL {
            sums.set(m, sums.get(m) + values.get(m));
        }
        per_query.push(QueryMetrics {
            qid: rl.qid,
            values,
            has_relevant: rl.num_relevant() > 0,
        });
    }
    let q = rls.len() as f64;
    let mut aggregate = MetricSet::default();
    for m in Metric::ALL {
        aggregate.set(m, sums.get(m) / q);
    }
    Ok(EvaluationReport {
        no_relevant_queries: per_query.iter().filter(|p| !p.has_relevant).count(),
        num_queries: rls.len(),
        per_query,
        aggregate,
    })
}

/// Ranks every group of `ds` by its score vector.
pub fn rank_all(ds: &Dataset, scores: &[Vec<f64>]) -> Result<Vec<RankedList>> {
    if scores.len() != ds.num_groups() {
        return Err(Error::invalid(format!(
            "{} score vectors for {} queries",
            scores.len(),
            ds.num_groups()
        )));
    }
    ds.groups()
        .iter()
        .zip(scores)
        .map(|(g, s)| rank_by_score(g, s))
        .collect()
}

/// Scores every group and evaluates with `g_max` = the dataset's top label.
pub fn evaluate_run(ds: &Dataset, scores: &[Vec<f64>]) -> Result<EvaluationReport> {
    evaluate_ranked(&rank_all(ds, scores)?, ds.max_label())
}

/// `<qid> <candidate-index> <rank> <score>` lines, ranks 1-based.
pub fn write_run_string(rls: &[RankedList]) -> String {
    let mut out = String::new();
    for rl in rls {
        for (r, e) in rl.entries.iter().enumerate() {
            let _ = writeln!(out, "{} {} {} {}", rl.qid, e.index, r + 1, fmt_real(e.score));
        }
    }
    out
}

pub fn write_run_file(rls: &[RankedList], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_run_string(rls))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLine {
    pub qid: u64,
    pub index: usize,
    pub rank: usize,
    pub score: f64,
}

pub fn parse_run_str(text: &str) -> Result<Vec<RunLine>> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 4 {
            return Err(Error::parse(line, "expected `<qid> <index> <rank> <score>`"));
        }
        let bad = |what: &str, tok: &str| Error::parse(line, format!("invalid {what} `{tok}`"));
        out.push(RunLine {
            qid: t[0].parse().map_err(|_| bad("qid", t[0]))?,
            index: t[1].parse().map_err(|_| bad("candidate index", t[1]))?,
            rank: t[2].parse().map_err(|_| bad("rank", t[2]))?,
            score: t[3].parse().map_err(|_| bad("score", t[3]))?,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

pub fn parse_run_file(path: impl AsRef<Path>) -> Result<Vec<RunLine>> {
    parse_run_str(&fs::read_to_string(path)?)
}

/// Rebuilds ranked lists from a run, ordering by the rank column and taking
/// labels from `ds`. The run must cover every candidate of every query in
/// dataset order.
pub fn ranked_from_run(ds: &Dataset, run: &[RunLine]) -> Result<Vec<RankedList>> {
    let mut out = Vec::with_capacity(ds.num_groups());
    let mut pos = 0;
    for g in ds.groups() {
        let n = g.len();
        let block = run.get(pos..pos + n).ok_or_else(|| {
            Error::invalid(format!("run file ends before query {}", g.qid))
        })?;
        pos += n;
        let mut slots: Vec<Option<RankedEntry>> = vec![None; n];
        let mut seen = vec![false; n];
        for r in block {
            if r.qid != g.qid {
                return Err(Error::invalid(format!(
                    "run has qid {} where dataset has {}",
                    r.qid, g.qid
                )));
            }
            if r.index >= n || seen[r.index] {
                return Err(Error::invalid(format!(
                    "query {}: bad or repeated candidate index {}",
                    g.qid, r.index
                )));
            }
            if r.rank == 0 || r.rank > n || slots[r.rank - 1].is_some() {
                return Err(Error::invalid(format!(
                    "query {}: bad or repeated rank {}",
                    g.qid, r.rank
                )));
            }
            seen[r.index] = true;
            slots[r.rank - 1] = Some(RankedEntry {
                index: r.index,
                score: r.score,
                label: g.candidates[r.index].label,
            });
        }
        out.push(RankedList {
            qid: g.qid,
            entries: slots.into_iter().map(|s| s.expect("ranks form a permutation")).collect(),
        });
    }
    if pos != run.len() {
        return Err(Error::invalid("run file has lines beyond the dataset"));
    }
    Ok(out)
}
