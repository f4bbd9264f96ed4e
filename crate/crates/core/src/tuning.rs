//! Model selection: kernel sweep at fixed C, a coarse scan over C, the
//! stepwise fine C search, and the five-ranker comparison.
//!
//! Grid points are evaluated concurrently and reduced afterwards in grid
//! order, so results never depend on scheduling.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dataset::{attach_query_ids, split_tail, Dataset, FlatRecord};
use crate::metrics::{evaluate_run, Metric, MetricSet};
use crate::model::{train, RankerConfig, RankerKind, Scorer};
use crate::ranksvm::{Kernel, SvmOptions};
use crate::textfmt::fmt_real;
use crate::{Error, Result};

pub const COARSE_GRID: [f64; 5] = [3.0, 30.0, 300.0, 3000.0, 30000.0];

#[derive(Debug, Clone, PartialEq)]
pub struct TuningConfig {
    pub kernels: Vec<Kernel>,
    /// C used for the kernel sweep and as the fine search's starting point.
    pub initial_c: f64,
    pub coarse_grid: Vec<f64>,
    pub fine_low: f64,
    pub fine_high: f64,
    pub step: f64,
    pub metric: Metric,
    /// Keep the reference score fixed at the initial C's value instead of
    /// raising it on every improvement.
    pub literal: bool,
    pub svm: SvmOptions,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            kernels: vec![
                Kernel::linear(),
                Kernel::rbf(0.0),
                Kernel::sigmoid(0.0, 0.0),
            ],
            initial_c: 3.0,
            coarse_grid: COARSE_GRID.to_vec(),
            fine_low: 5.0,
            fine_high: 40.0,
            step: 5.0,
            metric: Metric::Map,
            literal: false,
            svm: SvmOptions::default(),
        }
    }
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("step must be positive"));
        }
        if !(self.fine_low <= self.fine_high) {
            return Err(Error::invalid("fine range needs low <= high"));
        }
        if self.kernels.is_empty() || self.coarse_grid.is_empty() {
            return Err(Error::invalid("kernel list and coarse grid must be non-empty"));
        }
        if !(self.initial_c > 0.0 && self.fine_low > 0.0) {
            return Err(Error::invalid("C values must be positive"));
        }
        Ok(())
    }

    /// `initial_c` followed by `low, low + step, ..., <= high`, without a
    /// repeat of `initial_c`.
    pub fn fine_grid(&self) -> Vec<f64> {
        let mut grid = vec![self.initial_c];
        let n = ((self.fine_high - self.fine_low) / self.step + 1e-9).floor() as usize;
        for k in 0..=n {
            let c = self.fine_low + k as f64 * self.step;
            if (c - self.initial_c).abs() > 1e-12 * c.abs().max(1.0) {
                grid.push(c);
            }
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub setting: String,
    /// The C of this row; NaN for rows not indexed by C.
    pub c: f64,
    pub outcome: std::result::Result<MetricSet, String>,
}

impl GridRow {
    pub fn metrics(&self) -> Option<&MetricSet> {
        self.outcome.as_ref().ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub title: String,
    pub rows: Vec<GridRow>,
    pub metric: Metric,
    /// Index of the best successful row; ties go to the earliest row.
    pub best: Option<usize>,
}

impl SweepResult {
    fn new(title: &str, rows: Vec<GridRow>, metric: Metric) -> SweepResult {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in rows.iter().enumerate() {
            if let Some(m) = r.metrics() {
                let v = m.get(metric);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
        }
        SweepResult {
            title: title.to_string(),
            rows,
            metric,
            best: best.map(|b| b.0),
        }
    }

    pub fn best_row(&self) -> Option<&GridRow> {
        self.best.map(|i| &self.rows[i])
    }

    /// Fixed-width table of MAP, MRR, P@1 and P@5 (x100) per row.
    pub fn to_table(&self) -> String {
        let mut out = format!("# {}\n", self.title);
        let _ = writeln!(out, "{:<28} {:>8} {:>8} {:>8} {:>8}", "setting", "MAP", "MRR", "P@1", "P@5");
        for (i, r) in self.rows.iter().enumerate() {
            let mark = if Some(i) == self.best { " *" } else { "" };
            match &r.outcome {
                Ok(m) => {
                    let _ = writeln!(
                        out,
                        "{:<28} {:>8.2} {:>8.2} {:>8.2} {:>8.2}{mark}",
                        r.setting,
                        m.map * 100.0,
                        m.mrr * 100.0,
                        m.p1 * 100.0,
                        m.p5 * 100.0
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, "{:<28} failed: {e}", r.setting);
                }
            }
        }
        if let Some(b) = self.best_row() {
            let _ = writeln!(out, "best {} by {}", b.setting, self.metric);
        }
        out
    }

    /// `c,map,mrr,p1,p5` rows; failed points carry NaN.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,map,mrr,p1,p5\n");
        for r in &self.rows {
            let m = r.metrics().copied().unwrap_or(MetricSet {
                map: f64::NAN,
                mrr: f64::NAN,
                p1: f64::NAN,
                p5: f64::NAN,
                err10: f64::NAN,
                avg_rec: f64::NAN,
            });
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_real(r.c),
                fmt_real(m.map),
                fmt_real(m.mrr),
                fmt_real(m.p1),
                fmt_real(m.p5)
            );
        }
        out
    }
}

/// Evaluates `eval` at every C concurrently; rows come back in grid order.
pub fn evaluate_grid<F>(grid: &[f64], eval: F) -> Vec<GridRow>
where
    F: Fn(f64) -> Result<MetricSet> + Sync,
{
    grid.par_iter()
        .map(|&c| GridRow {
            setting: format!("C={}", fmt_real(c)),
            c,
            outcome: eval(c).map_err(|e| e.to_string()),
        })
        .collect()
}

/// Trains a Ranking SVM with `kernel` at C and returns its aggregate
/// metrics on `eval`.
pub fn svm_metrics(train_ds: &Dataset, eval_ds: &Dataset, kernel: &Kernel, opts: &SvmOptions, c: f64) -> Result<MetricSet> {
    let cfg = RankerConfig::RankSvm {
        kernel: kernel.resolve_defaults(train_ds.dim()),
        options: SvmOptions { c, ..opts.clone() },
    };
    let model = train(train_ds, &cfg)?.model;
    Ok(evaluate_run(eval_ds, &model.score_dataset(eval_ds)?)?.aggregate)
}

pub fn kernel_sweep(train_ds: &Dataset, eval_ds: &Dataset, cfg: &TuningConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let rows = cfg
        .kernels
        .par_iter()
        .map(|k| {
            let k = k.resolve_defaults(train_ds.dim());
            GridRow {
                setting: k.describe(),
                c: cfg.initial_c,
                outcome: svm_metrics(train_ds, eval_ds, &k, &cfg.svm, cfg.initial_c)
                    .map_err(|e| format!("kernel {}: {e}", k.describe())),
            }
        })
        .collect();
    Ok(SweepResult::new(
        &format!("kernel sweep at C={}", fmt_real(cfg.initial_c)),
        rows,
        cfg.metric,
    ))
}

/// Scans `cfg.coarse_grid` with a caller-supplied evaluator.
pub fn coarse_scan_with<F>(cfg: &TuningConfig, eval: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<MetricSet> + Sync,
{
    cfg.validate()?;
    Ok(SweepResult::new("coarse C scan", evaluate_grid(&cfg.coarse_grid, eval), cfg.metric))
}

pub fn coarse_c_scan(train_ds: &Dataset, eval_ds: &Dataset, kernel: &Kernel, cfg: &TuningConfig) -> Result<SweepResult> {
    coarse_scan_with(cfg, |c| svm_metrics(train_ds, eval_ds, kernel, &cfg.svm, c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineSearch {
    pub best_c: f64,
    /// One row per grid point in ascending C.
    pub trace: SweepResult,
}

/// Stepwise search: the reference score starts at the initial C's value and
/// each grid C whose score beats it becomes the current best. Unless
/// `cfg.literal` is set the reference is raised on every improvement, which
/// makes the result the grid argmax with ties to the earliest C.
pub fn fine_search_with<F>(cfg: &TuningConfig, eval: F) -> Result<FineSearch>
where
    F: Fn(f64) -> Result<MetricSet> + Sync,
{
    cfg.validate()?;
    let grid = cfg.fine_grid();
    let rows = evaluate_grid(&grid, eval);
    let score = |r: &GridRow| r.metrics().map_or(f64::NEG_INFINITY, |m| m.get(cfg.metric));

    let mut best_c = cfg.initial_c;
    let mut reference = score(&rows[0]);
    for r in &rows[1..] {
        let s = score(r);
        if reference < s {
            best_c = r.c;
            if !cfg.literal {
                reference = s;
            }
        }
    }

    let mut sorted = rows;
    sorted.sort_by(|a, b| a.c.total_cmp(&b.c));
    let mut trace = SweepResult::new("fine C search", sorted, cfg.metric);
    // the marked row follows the search result, which differs from the
    // table argmax only in literal mode
    trace.best = trace.rows.iter().position(|r| r.c == best_c);
    Ok(FineSearch { best_c, trace })
}

pub fn fine_c_search(train_ds: &Dataset, eval_ds: &Dataset, kernel: &Kernel, cfg: &TuningConfig) -> Result<FineSearch> {
    fine_search_with(cfg, |c| svm_metrics(train_ds, eval_ds, kernel, &cfg.svm, c))
}

/// Trains each configured ranker on `train_ds` and evaluates on `eval_ds`.
pub fn compare_methods(train_ds: &Dataset, eval_ds: &Dataset, configs: &[RankerConfig], metric: Metric) -> SweepResult {
    let rows = configs
        .par_iter()
        .map(|cfg| {
            let outcome = train(train_ds, cfg)
                .and_then(|t| t.model.score_dataset(eval_ds))
                .and_then(|s| evaluate_run(eval_ds, &s))
                .map(|r| r.aggregate)
                .map_err(|e| e.to_string());
            GridRow {
                setting: cfg.kind().name().to_string(),
                c: f64::NAN,
                outcome,
            }
        })
        .collect();
    SweepResult::new("method comparison", rows, metric)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub group_size: usize,
    pub tail: usize,
    pub seed: u64,
    pub desk_scale: bool,
    pub tuning: TuningConfig,
    /// Kernel for the C scans; the kernel-sweep winner when unset.
    pub scan_kernel: Option<Kernel>,
    pub compare_methods: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            group_size: crate::dataset::DEFAULT_GROUP_SIZE,
            tail: 50,
            seed: crate::rng::DEFAULT_SEED,
            desk_scale: true,
            tuning: TuningConfig::default(),
            scan_kernel: None,
            compare_methods: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolReport {
    pub train: Dataset,
    pub subtest: Dataset,
    pub methods: Option<SweepResult>,
    pub kernels: SweepResult,
    pub scan_kernel: Kernel,
    pub coarse: SweepResult,
    pub fine: FineSearch,
}

impl ProtocolReport {
    /// All tables, one after another.
    pub fn to_text(&self) -> String {
        format!(
            "{}{}\n{}\n{}best C={} kernel={}\n",
            self.methods.as_ref().map_or(String::new(), |m| m.to_table() + "\n"),
            self.kernels.to_table(),
            self.coarse.to_table(),
            self.fine.trace.to_table(),
            fmt_real(self.fine.best_c),
            self.scan_kernel.describe()
        )
    }
}

/// Groups flat records, holds out the tail, compares the five rankers,
/// sweeps kernels, then scans C coarsely and finely.
pub fn run_protocol(records: &[FlatRecord], cfg: &ProtocolConfig) -> Result<ProtocolReport> {
    run_tuning(&attach_query_ids(records, cfg.group_size)?, cfg)
}

/// The protocol from an already grouped dataset.
pub fn run_tuning(ds: &Dataset, cfg: &ProtocolConfig) -> Result<ProtocolReport> {
    let (train_ds, subtest) = split_tail(ds, cfg.tail)?;
    let tuning = TuningConfig {
        svm: SvmOptions { seed: cfg.seed, ..cfg.tuning.svm.clone() },
        ..cfg.tuning.clone()
    };
    let configs: Vec<RankerConfig> = RankerKind::ALL
        .iter()
        .map(|&k| match RankerConfig::defaults(k, ds.dim(), cfg.seed, cfg.desk_scale) {
            RankerConfig::RankSvm { kernel, .. } => RankerConfig::RankSvm {
                kernel,
                options: SvmOptions { c: tuning.initial_c, ..tuning.svm.clone() },
            },
            other => other,
        })
        .collect();
    let methods = cfg
        .compare_methods
        .then(|| compare_methods(&train_ds, &subtest, &configs, tuning.metric));
    let kernels = kernel_sweep(&train_ds, &subtest, &tuning)?;
    let scan_kernel = match &cfg.scan_kernel {
        Some(k) => k.resolve_defaults(ds.dim()),
        None => {
            let i = kernels
                .best
                .ok_or_else(|| Error::invalid("every kernel failed in the sweep"))?;
            tuning.kernels[i].resolve_defaults(ds.dim())
        }
    };
    let coarse = coarse_c_scan(&train_ds, &subtest, &scan_kernel, &tuning)?;
    let fine = fine_c_search(&train_ds, &subtest, &scan_kernel, &tuning)?;
    Ok(ProtocolReport {
        train: train_ds,
        subtest,
        methods,
        kernels,
        scan_kernel,
        coarse,
        fine,
    })
}
