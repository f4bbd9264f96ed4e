//! RankBoost and AdaRank.
//!
//! RankBoost keeps a distribution over training pairs and adds one
//! threshold stump per round, minimising the exponential pair loss
//! `sum_p exp(-(f(x_u) - f(x_v)))`. AdaRank keeps a distribution over
//! queries and adds one raw feature per round, weighting it by how well the
//! feature ranks the currently hard queries under an IR measure.
//!
//! Both compute the combination weight as `1/2 ln((1 + r) / (1 - r))`, with
//! `r` clamped to `1 - 1e-10` so a perfectly discriminating weak ranker
//! still gets a finite weight.

use crate::dataset::{split_tail, Dataset, QueryGroup};
use crate::metrics::{rank_by_score, Metric, RankedList};
use crate::model::Scorer;
use crate::pairwise::dataset_pairs;
use crate::textfmt::{content_lines, field, field_real, field_usize, fmt_real};
use crate::{Error, Result};

pub const R_CLAMP_EPS: f64 = 1e-10;

/// `1/2 ln((1 + r) / (1 - r))` with `r` clamped to `[-1 + eps, 1 - eps]`.
pub fn combination_weight(r: f64) -> f64 {
    let r = r.clamp(-1.0 + R_CLAMP_EPS, 1.0 - R_CLAMP_EPS);
    0.5 * ((1.0 + r) / (1.0 - r)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeakRanker {
    /// `h(x) = 1` iff `dir * x[fid] > dir * thr`, else 0.
    Stump { fid: usize, thr: f64, dir: i8 },
    /// `h(x) = x[fid]`.
    Feature { fid: usize },
}

impl WeakRanker {
    pub fn fid(&self) -> usize {
        match *self {
            WeakRanker::Stump { fid, .. } | WeakRanker::Feature { fid } => fid,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            WeakRanker::Stump { fid, thr, dir } => {
                let d = dir as f64;
                if d * x[fid - 1] > d * thr {
                    1.0
                } else {
                    0.0
                }
            }
            WeakRanker::Feature { fid } => x[fid - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoostKind {
    RankBoost,
    AdaRank,
}

impl BoostKind {
    pub fn name(self) -> &'static str {
        match self {
            BoostKind::RankBoost => "rankboost",
            BoostKind::AdaRank => "adarank",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostTerm {
    pub alpha: f64,
    pub ranker: WeakRanker,
}

/// `f(x) = sum_t alpha_t * h_t(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostEnsemble {
    pub kind: BoostKind,
    pub dim: usize,
    pub terms: Vec<BoostTerm>,
}

impl Scorer for BoostEnsemble {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.alpha * t.ranker.eval(x)).sum()
    }
}

impl BoostEnsemble {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "boost {} dim={} terms={}\n",
            self.kind.name(),
            self.dim,
            self.terms.len()
        );
        for t in &self.terms {
            match t.ranker {
                WeakRanker::Stump { fid, thr, dir } => out.push_str(&format!(
                    "alpha={} fid={} thr={} dir={}\n",
                    fmt_real(t.alpha),
                    fid,
                    fmt_real(thr),
                    if dir > 0 { "+1" } else { "-1" }
                )),
                WeakRanker::Feature { fid } => {
                    out.push_str(&format!("alpha={} fid={}\n", fmt_real(t.alpha), fid))
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<BoostEnsemble> {
        let mut lines = content_lines(text);
        let (hl, header) = lines.next().ok_or_else(|| Error::model(1, "empty model file"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.first() != Some(&"boost") || h.len() < 2 {
            return Err(Error::model(hl, "expected `boost <kind> ...` header"));
        }
        let kind = match h[1] {
            "rankboost" => BoostKind::RankBoost,
            "adarank" => BoostKind::AdaRank,
            other => return Err(Error::model(hl, format!("unknown boost kind `{other}`"))),
        };
        let dim = field_usize(&h, "dim", hl)?;
        let n_terms = field_usize(&h, "terms", hl)?;
        let mut terms = Vec::with_capacity(n_terms);
        for (l, body) in lines {
            let t: Vec<&str> = body.split_whitespace().collect();
            let alpha = field_real(&t, "alpha", l)?;
            let fid = field_usize(&t, "fid", l)?;
            if fid == 0 || fid > dim {
                return Err(Error::model(l, format!("fid {fid} outside 1..={dim}")));
            }
            let ranker = if t.iter().any(|s| s.starts_with("thr=")) {
                let dir = match field(&t, "dir", l)? {
                    "+1" | "1" => 1,
                    "-1" => -1,
                    other => return Err(Error::model(l, format!("bad direction `{other}`"))),
                };
                WeakRanker::Stump {
                    fid,
                    thr: field_real(&t, "thr", l)?,
                    dir,
                }
            } else {
                WeakRanker::Feature { fid }
            };
            terms.push(BoostTerm { alpha, ranker });
        }
        if terms.len() != n_terms {
            return Err(Error::model(hl, format!("header says {n_terms} terms, found {}", terms.len())));
        }
        Ok(BoostEnsemble { kind, dim, terms })
    }
}

/// Where RankBoost measures its round-selection metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Holdout {
    /// Measure on the training queries themselves.
    Training,
    /// Hold out this fraction of trailing queries (at least one) when the
    /// dataset has five or more queries; otherwise use the training data.
    TailFraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankBoostConfig {
    pub iterations: usize,
    pub metric: Metric,
    pub holdout: Holdout,
}

impl Default for RankBoostConfig {
    fn default() -> Self {
        RankBoostConfig {
            iterations: 300,
            metric: Metric::Err10,
            holdout: Holdout::TailFraction(0.2),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RankBoostFit {
    /// Terms up to and including the best validation round.
    pub ensemble: BoostEnsemble,
    /// All rounds, before truncation.
    pub full: BoostEnsemble,
    /// Training exponential loss before round 1 and after every round.
    pub loss_trace: Vec<f64>,
    /// Validation metric after every round.
    pub metric_trace: Vec<f64>,
    /// Unclamped `r` of the stump chosen in every round.
    pub r_trace: Vec<f64>,
    pub best_round: usize,
}

/// A stump candidate together with its (signed, direction-adjusted) `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpChoice {
    pub fid: usize,
    pub thr: f64,
    pub dir: i8,
    pub r: f64,
}

/// Rows of one feature sorted ascending, with split thresholds at the
/// midpoints between consecutive distinct values.
struct FeatureIndex {
    order: Vec<usize>,
    /// `(position in order after which to cut, threshold)`
    cuts: Vec<(usize, f64)>,
}

fn build_feature_index(rows: &[&[f64]], f: usize) -> FeatureIndex {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]));
    let mut cuts = Vec::new();
    for i in 0..order.len().saturating_sub(1) {
        let lo = rows[order[i]][f];
        let hi = rows[order[i + 1]][f];
        if lo < hi {
            let mut thr = lo + (hi - lo) / 2.0;
            if thr >= hi {
                thr = lo;
            }
            cuts.push((i, thr));
        }
    }
    FeatureIndex { order, cuts }
}

/// Best stump for the per-row potentials `pi`, maximising
/// `r = sum_i pi_i h(x_i)` over features, thresholds and both directions.
/// Ties go to the lowest feature id, then the lowest threshold, then `+1`.
fn best_stump(index: &[FeatureIndex], pi: &[f64]) -> Option<StumpChoice> {
    let total: f64 = pi.iter().sum();
    let mut best: Option<StumpChoice> = None;
    for (f, fi) in index.iter().enumerate() {
        let mut below = 0.0;
        let mut next = 0;
        for &(cut, thr) in &fi.cuts {
            while next <= cut {
                below += pi[fi.order[next]];
                next += 1;
            }
            let above = total - below;
            // `x < thr` is the complement of `x > thr` at a midpoint
            let (r, dir) = if above >= below { (above, 1) } else { (below, -1) };
            if best.is_none_or(|b| r > b.r) {
                best = Some(StumpChoice {
                    fid: f + 1,
                    thr,
                    dir,
                    r,
                });
            }
        }
    }
    best
}

fn resolve_holdout(ds: &Dataset, holdout: Holdout) -> Result<(Dataset, Option<Dataset>)> {
    match holdout {
        Holdout::Training => Ok((ds.clone(), None)),
        Holdout::TailFraction(frac) => {
            if !(0.0..1.0).contains(&frac) {
                return Err(Error::invalid(format!("holdout fraction {frac} outside [0, 1)")));
            }
            let q = ds.num_groups();
            if q < 5 || frac == 0.0 {
                return Ok((ds.clone(), None));
            }
            let n_tail = ((q as f64 * frac).round() as usize).clamp(1, q - 1);
            let (train, valid) = split_tail(ds, n_tail)?;
            Ok((train, Some(valid)))
        }
    }
}

fn mean_metric(groups: &[QueryGroup], scores: &[Vec<f64>], metric: Metric, g_max: u32) -> Result<f64> {
    let rls: Vec<RankedList> = groups
        .iter()
        .zip(scores)
        .map(|(g, s)| rank_by_score(g, s))
        .collect::<Result<_>>()?;
    metric.mean(&rls, g_max)
}

pub fn train_rankboost(ds: &Dataset, cfg: &RankBoostConfig) -> Result<RankBoostFit> {
    if cfg.iterations < 1 {
        return Err(Error::invalid("iterations must be at least 1"));
    }
    let (train, valid) = resolve_holdout(ds, cfg.holdout)?;
    let pairs = dataset_pairs(&train);
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    let g_max = ds.max_label();

    // flatten training candidates into rows
    let mut offsets = Vec::with_capacity(train.num_groups());
    let mut rows: Vec<&[f64]> = Vec::with_capacity(train.num_candidates());
    for g in train.groups() {
        offsets.push(rows.len());
        rows.extend(g.candidates.iter().map(|c| c.features.as_slice()));
    }
    let ends: Vec<(usize, usize)> = pairs
        .iter()
        .map(|p| (offsets[p.group] + p.sample.u, offsets[p.group] + p.sample.v))
        .collect();
    let index: Vec<FeatureIndex> = (0..ds.dim()).map(|f| build_feature_index(&rows, f)).collect();

    let eval_set = valid.as_ref().unwrap_or(&train);
    let mut eval_scores: Vec<Vec<f64>> = eval_set.groups().iter().map(|g| vec![0.0; g.len()]).collect();

    let n = ends.len() as f64;
    let mut dist = vec![1.0 / n; ends.len()];
    let mut f_rows = vec![0.0; rows.len()];
    let mut terms = Vec::with_capacity(cfg.iterations);
    let mut loss_trace = vec![n];
    let mut metric_trace = Vec::with_capacity(cfg.iterations);
    let mut r_trace = Vec::with_capacity(cfg.iterations);
    let mut best_round = 0;
    let mut best_metric = f64::NEG_INFINITY;
    let mut pi = vec![0.0; rows.len()];

    for round in 1..=cfg.iterations {
        pi.iter_mut().for_each(|x| *x = 0.0);
        for (&(a, b), &d) in ends.iter().zip(&dist) {
            pi[a] += d;
            pi[b] -= d;
        }
        let choice = best_stump(&index, &pi)
            .ok_or_else(|| Error::invalid("every feature is constant; no stump can split"))?;
        let alpha = combination_weight(choice.r);
        let ranker = WeakRanker::Stump {
            fid: choice.fid,
            thr: choice.thr,
            dir: choice.dir,
        };
        terms.push(BoostTerm { alpha, ranker });
        r_trace.push(choice.r);

        let h: Vec<f64> = rows.iter().map(|x| ranker.eval(x)).collect();
        for (fi, hi) in f_rows.iter_mut().zip(&h) {
            *fi += alpha * hi;
        }
        let mut z = 0.0;
        for (d, &(a, b)) in dist.iter_mut().zip(&ends) {
            *d *= (-alpha * (h[a] - h[b])).exp();
            z += *d;
        }
        dist.iter_mut().for_each(|d| *d /= z);
        loss_trace.push(ends.iter().map(|&(a, b)| (-(f_rows[a] - f_rows[b])).exp()).sum());

        for (g, s) in eval_set.groups().iter().zip(eval_scores.iter_mut()) {
            for (c, si) in g.candidates.iter().zip(s.iter_mut()) {
                *si += alpha * ranker.eval(&c.features);
            }
        }
        let m = mean_metric(eval_set.groups(), &eval_scores, cfg.metric, g_max)?;
        metric_trace.push(m);
        if m > best_metric {
            best_metric = m;
            best_round = round;
        }
    }

    let full = BoostEnsemble {
        kind: BoostKind::RankBoost,
        dim: ds.dim(),
        terms,
    };
    Ok(RankBoostFit {
        ensemble: BoostEnsemble {
            terms: full.terms[..best_round].to_vec(),
            ..full.clone()
        },
        full,
        loss_trace,
        metric_trace,
        r_trace,
        best_round,
    })
}

/// Exhaustive reference for the stump search of one round: evaluates `r`
/// for every feature, threshold and direction directly from the pairs.
pub fn brute_force_stump(
    ds: &Dataset,
    weights: &[f64],
) -> Option<StumpChoice> {
    let pairs = dataset_pairs(ds);
    let mut best: Option<StumpChoice> = None;
    for f in 0..ds.dim() {
        let mut values: Vec<f64> = ds.candidates().map(|c| c.features[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let mut thr = w[0] + (w[1] - w[0]) / 2.0;
            if thr >= w[1] {
                thr = w[0];
            }
            for dir in [1i8, -1] {
                let h = WeakRanker::Stump { fid: f + 1, thr, dir };
                let r: f64 = pairs
                    .iter()
                    .zip(weights)
                    .map(|(p, &d)| {
                        let c = &ds.groups()[p.group].candidates;
                        d * (h.eval(&c[p.sample.u].features) - h.eval(&c[p.sample.v].features))
                    })
                    .sum();
                if best.is_none_or(|b| r > b.r) {
                    best = Some(StumpChoice { fid: f + 1, thr, dir, r });
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaRankConfig {
    pub rounds: usize,
    pub tolerance: f64,
    pub max_consecutive: usize,
    pub metric: Metric,
}

impl Default for AdaRankConfig {
    fn default() -> Self {
        AdaRankConfig {
            rounds: 500,
            tolerance: 0.002,
            max_consecutive: 5,
            metric: Metric::Map,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    RoundLimit,
    /// Training metric improved by less than the tolerance.
    Tolerance,
    /// The same feature kept being selected without changing the metric.
    RepeatedFeature,
}

#[derive(Debug, Clone)]
pub struct AdaRankFit {
    pub ensemble: BoostEnsemble,
    /// Rounds executed, including a final rolled-back round.
    pub rounds_run: usize,
    pub stop: StopReason,
    /// Feature chosen in each executed round.
    pub selected: Vec<usize>,
    /// Weighted score `sum_q P(q) E(q, k)` of the chosen feature per round.
    pub selected_scores: Vec<f64>,
    /// Mean training metric of the ensemble after each executed round.
    pub metric_trace: Vec<f64>,
    /// Query distribution at the start and after each kept round.
    pub distributions: Vec<Vec<f64>>,
}

/// Per-query measure of ranking every query by each single feature:
/// `table[q][k]` for feature id `k + 1`.
pub fn feature_query_table(ds: &Dataset, metric: Metric) -> Result<Vec<Vec<f64>>> {
    let g_max = ds.max_label();
    ds.groups()
        .iter()
        .map(|g| {
            (0..ds.dim())
                .map(|k| {
                    let scores: Vec<f64> = g.candidates.iter().map(|c| c.features[k]).collect();
                    metric.per_query(&rank_by_score(g, &scores)?, g_max)
                })
                .collect()
        })
        .collect()
}

pub fn train_adarank(ds: &Dataset, cfg: &AdaRankConfig) -> Result<AdaRankFit> {
    if cfg.rounds < 1 {
        return Err(Error::invalid("rounds must be at least 1"));
    }
    let g_max = ds.max_label();
    let q = ds.num_groups();
    let table = feature_query_table(ds, cfg.metric)?;

    let mut dist = vec![1.0 / q as f64; q];
    let mut scores: Vec<Vec<f64>> = ds.groups().iter().map(|g| vec![0.0; g.len()]).collect();
    let mut terms: Vec<BoostTerm> = Vec::new();
    let mut prev_metric = 0.0;
    let mut last_fid = 0;
    let mut consecutive = 0;
    let mut stop = StopReason::RoundLimit;
    let mut fit = AdaRankFit {
        ensemble: BoostEnsemble {
            kind: BoostKind::AdaRank,
            dim: ds.dim(),
            terms: Vec::new(),
        },
        rounds_run: 0,
        stop,
        selected: Vec::new(),
        selected_scores: Vec::new(),
        metric_trace: Vec::new(),
        distributions: vec![dist.clone()],
    };

    for round in 1..=cfg.rounds {
        fit.rounds_run = round;
        let mut best_k = 0;
        let mut best_score = f64::NEG_INFINITY;
        for k in 0..ds.dim() {
            let s: f64 = dist.iter().zip(&table).map(|(p, row)| p * row[k]).sum();
            if s > best_score {
                best_score = s;
                best_k = k;
            }
        }
        let fid = best_k + 1;
        let alpha = combination_weight(best_score);
        fit.selected.push(fid);
        fit.selected_scores.push(best_score);

        let mut next_scores = scores.clone();
        for (g, s) in ds.groups().iter().zip(next_scores.iter_mut()) {
            for (c, si) in g.candidates.iter().zip(s.iter_mut()) {
                *si += alpha * c.features[best_k];
            }
        }
        let per_query: Vec<f64> = ds
            .groups()
            .iter()
            .zip(&next_scores)
            .map(|(g, s)| cfg.metric.per_query(&rank_by_score(g, s)?, g_max))
            .collect::<Result<_>>()?;
        let metric = per_query.iter().sum::<f64>() / q as f64;
        fit.metric_trace.push(metric);
        let improvement = metric - prev_metric;

        if round > 1 && improvement < cfg.tolerance {
            // the round did not pay for itself; drop it
            stop = StopReason::Tolerance;
            break;
        }
        if fid == last_fid && improvement.abs() <= 1e-12 {
            consecutive += 1;
        } else {
            consecutive = 1;
        }
        last_fid = fid;

        terms.push(BoostTerm {
            alpha,
            ranker: WeakRanker::Feature { fid },
        });
        scores = next_scores;
        prev_metric = metric;

        let mut z = 0.0;
        for (p, e) in dist.iter_mut().zip(&per_query) {
            *p = (-e).exp();
            z += *p;
        }
        dist.iter_mut().for_each(|p| *p /= z);
        fit.distributions.push(dist.clone());

        if round == 1 && improvement < cfg.tolerance {
            stop = StopReason::Tolerance;
            break;
        }
        if consecutive >= cfg.max_consecutive {
            stop = StopReason::RepeatedFeature;
            break;
        }
    }
    fit.stop = stop;
    fit.ensemble.terms = terms;
    Ok(fit)
}
