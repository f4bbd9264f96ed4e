//! The `qrank` command line.
//!
//! Exit statuses: 0 success, 1 usage error, 2 data or validation error,
//! 3 training did not converge (only with `--fail-on-no-convergence`).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use qrank::boosting::Holdout;
use qrank::dataset::{
    attach_query_ids, parse_flat_file, parse_ranking_file, split_tail, write_flat_file,
    write_ranking_file, DEFAULT_GROUP_SIZE,
};
use qrank::metrics::{evaluate_ranked, parse_run_file, rank_all, ranked_from_run, write_run_file};
use qrank::model::{train, Scorer};
use qrank::ranksvm::{Kernel, KernelKind};
use qrank::rng::DEFAULT_SEED;
use qrank::synthgen::{generate, GenSpec, Scenario};
use qrank::textfmt::fmt_real;
use qrank::tuning::{run_tuning, ProtocolConfig, TuningConfig, COARSE_GRID};
use qrank::{Metric, Model, RankerConfig, RankerKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "qrank", version, about = "Learning-to-rank toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Group a flat labelled file into queries (or flatten with --to-flat).
    Convert(ConvertArgs),
    /// Move the last N queries of a ranking file into a held-out file.
    Split(SplitArgs),
    /// Train a ranker and write its model file.
    Train(TrainArgs),
    /// Score a ranking file with a model and write a run file.
    Predict(PredictArgs),
    /// Evaluate a run file against a ranking file.
    Eval(EvalArgs),
    /// Kernel sweep, coarse C scan and fine C search on a held-out tail.
    Tune(TuneArgs),
    /// Generate a synthetic ranking dataset.
    Gen(GenArgs),
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GROUP_SIZE)]
    group_size: usize,
    /// Write the flat format from a ranking file instead.
    #[arg(long)]
    to_flat: bool,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    tail: usize,
    /// Head output; defaults to `<in>.head`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tail output; defaults to `<in>.tail`.
    #[arg(long)]
    tail_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "ranksvm")]
    ranker: String,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    coef0: Option<f64>,
    /// Relative duality gap for the SVM solvers.
    #[arg(long)]
    tol: Option<f64>,
    /// Epoch cap for the SVM solvers.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    bags: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    desk_scale: bool,
    #[arg(long)]
    fail_on_no_convergence: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    run: PathBuf,
    /// Write `KEY=value` lines here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print only this metric's value after the table.
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Fine-search trace CSV.
    #[arg(long)]
    out: PathBuf,
    /// All tables as text.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Coarse-scan CSV.
    #[arg(long)]
    coarse_out: Option<PathBuf>,
    /// Read a flat file and group it first.
    #[arg(long)]
    flat: bool,
    #[arg(long, default_value_t = DEFAULT_GROUP_SIZE)]
    group_size: usize,
    #[arg(long, default_value_t = 50)]
    tail: usize,
    /// Initial C; also the C of the kernel sweep and method comparison.
    #[arg(long, default_value_t = 3.0)]
    c: f64,
    #[arg(long, default_value_t = 5.0)]
    low: f64,
    #[arg(long, default_value_t = 40.0)]
    high: f64,
    #[arg(long, default_value_t = 5.0)]
    step: f64,
    /// Comma-separated coarse grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Comma-separated kernels for the sweep.
    #[arg(long, value_delimiter = ',', default_value = "linear,rbf,sigmoid")]
    kernels: Vec<String>,
    /// Kernel for the C scans; the sweep winner by default.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    coef0: Option<f64>,
    #[arg(long, default_value = "map")]
    metric: String,
    /// Keep the reference score at the initial C's value during the fine search.
    #[arg(long)]
    literal: bool,
    /// Also train and compare all five rankers.
    #[arg(long)]
    compare_methods: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    desk_scale: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth sidecar; defaults to `<out>.truth`.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 267)]
    queries: usize,
    #[arg(long, default_value_t = DEFAULT_GROUP_SIZE)]
    group_size: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value = "linear-utility")]
    scenario: String,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    graded: bool,
    /// Write the flat (query-less) format.
    #[arg(long)]
    flat: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl From<qrank::Error> for Failure {
    fn from(e: qrank::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(format!("i/o error: {e}"))
    }
}

type Outcome = Result<i32, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_flag<T: std::str::FromStr<Err = qrank::Error>>(name: &str, v: &str) -> Result<T, Failure> {
    v.parse().map_err(|e: qrank::Error| usage(format!("--{name}: {e}")))
}

/// Effective-configuration block: every resolved setting, one per line.
struct ConfigBlock(Vec<(String, String)>);

impl ConfigBlock {
    fn new(verb: &str) -> ConfigBlock {
        ConfigBlock(vec![("command".into(), verb.into())])
    }

    fn add(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    fn path(&mut self, key: &str, p: &Path) -> &mut Self {
        self.add(key, p.display())
    }

    fn real(&mut self, key: &str, v: f64) -> &mut Self {
        self.add(key, fmt_real(v))
    }

    fn print(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "[effective config]")?;
        for (k, v) in &self.0 {
            writeln!(out, "{k} = {v}")?;
        }
        writeln!(out)
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn convert(a: &ConvertArgs, out: &mut dyn Write) -> Outcome {
    let mut cfg = ConfigBlock::new("convert");
    cfg.path("in", &a.input).path("out", &a.out);
    if a.to_flat {
        cfg.add("direction", "ranking->flat");
    } else {
        cfg.add("direction", "flat->ranking").add("group_size", a.group_size);
    }
    cfg.print(out)?;
    if a.to_flat {
        let ds = parse_ranking_file(&a.input)?;
        write_flat_file(&ds.flatten(), &a.out)?;
        writeln!(out, "wrote {} records", ds.num_candidates())?;
    } else {
        let ds = attach_query_ids(&parse_flat_file(&a.input)?, a.group_size)?;
        write_ranking_file(&ds, &a.out)?;
        writeln!(out, "wrote {} queries, {} candidates", ds.num_groups(), ds.num_candidates())?;
    }
    Ok(EXIT_OK)
}

fn split(a: &SplitArgs, out: &mut dyn Write) -> Outcome {
    let head_path = a.out.clone().unwrap_or_else(|| with_suffix(&a.input, ".head"));
    let tail_path = a.tail_out.clone().unwrap_or_else(|| with_suffix(&a.input, ".tail"));
    ConfigBlock::new("split")
        .path("in", &a.input)
        .add("tail", a.tail)
        .path("out", &head_path)
        .path("tail_out", &tail_path)
        .print(out)?;
    let ds = parse_ranking_file(&a.input)?;
    let (head, tail) = split_tail(&ds, a.tail)?;
    write_ranking_file(&head, &head_path)?;
    write_ranking_file(&tail, &tail_path)?;
    writeln!(out, "head {} queries, tail {} queries", head.num_groups(), tail.num_groups())?;
    Ok(EXIT_OK)
}

/// Resolves the train flags into a ranker configuration, rejecting flags
/// that do not apply to the chosen ranker.
fn ranker_config(a: &TrainArgs, dim: usize) -> Result<RankerConfig, Failure> {
    let kind: RankerKind = parse_flag("ranker", &a.ranker)?;
    let reject = |present: bool, flag: &str| -> Result<(), Failure> {
        if present {
            Err(usage(format!("--{flag} does not apply to ranker {kind}")))
        } else {
            Ok(())
        }
    };
    let svm_only = [
        (a.kernel.is_some(), "kernel"),
        (a.c.is_some(), "c"),
        (a.gamma.is_some(), "gamma"),
        (a.coef0.is_some(), "coef0"),
        (a.tol.is_some(), "tol"),
        (a.max_iters.is_some(), "max-iters"),
        (a.standardize, "standardize"),
    ];
    if kind != RankerKind::RankSvm {
        for (p, f) in svm_only {
            reject(p, f)?;
        }
    }
    if !matches!(kind, RankerKind::RankNet | RankerKind::RandomForest) {
        reject(a.lr.is_some(), "lr")?;
    }
    reject(a.epochs.is_some() && kind != RankerKind::RankNet, "epochs")?;
    reject(a.iterations.is_some() && kind != RankerKind::RankBoost, "iterations")?;
    reject(a.rounds.is_some() && kind != RankerKind::AdaRank, "rounds")?;
    reject(
        a.metric.is_some() && !matches!(kind, RankerKind::RankBoost | RankerKind::AdaRank),
        "metric",
    )?;
    reject(
        (a.bags.is_some() || a.trees.is_some()) && kind != RankerKind::RandomForest,
        "bags/--trees",
    )?;

    let metric: Option<Metric> = a.metric.as_deref().map(|m| parse_flag("metric", m)).transpose()?;
    let mut cfg = RankerConfig::defaults(kind, dim, a.seed, a.desk_scale);
    match &mut cfg {
        RankerConfig::RankSvm { kernel, options } => {
            let kk: KernelKind = parse_flag("kernel", a.kernel.as_deref().unwrap_or("linear"))?;
            if kk == KernelKind::Linear && (a.gamma.is_some() || a.coef0.is_some()) {
                return Err(usage("--gamma/--coef0 need a non-linear kernel"));
            }
            if kk == KernelKind::Rbf && a.coef0.is_some() {
                return Err(usage("--coef0 applies to the sigmoid kernel only"));
            }
            *kernel = Kernel {
                gamma: a.gamma.unwrap_or(0.0),
                coef0: a.coef0.unwrap_or(0.0),
                ..Kernel::new(kk)
            }
            .resolve_defaults(dim);
            if let Some(c) = a.c {
                options.c = c;
            }
            if let Some(t) = a.tol {
                options.tol = t;
            }
            if let Some(m) = a.max_iters {
                options.max_iters = m;
            }
            options.standardize = a.standardize;
        }
        RankerConfig::RankBoost(c) => {
            if let Some(n) = a.iterations {
                c.iterations = n;
            }
            if let Some(m) = metric {
                c.metric = m;
            }
        }
        RankerConfig::AdaRank(c) => {
            if let Some(n) = a.rounds {
                c.rounds = n;
            }
            if let Some(m) = metric {
                c.metric = m;
            }
        }
        RankerConfig::RankNet(c) => {
            if let Some(n) = a.epochs {
                c.epochs = n;
            }
            if let Some(lr) = a.lr {
                c.lr = lr;
            }
        }
        RankerConfig::RandomForest(c) => {
            if let Some(n) = a.bags {
                c.bags = n;
            }
            if let Some(n) = a.trees {
                c.trees_per_bag = n;
            }
            if let Some(lr) = a.lr {
                c.lr = lr;
            }
        }
    }
    Ok(cfg)
}

fn describe_ranker(cfg: &RankerConfig, block: &mut ConfigBlock) {
    block.add("ranker", cfg.kind());
    match cfg {
        RankerConfig::RankSvm { kernel, options } => {
            block
                .add("kernel", kernel.kind.name())
                .real("gamma", kernel.gamma)
                .real("coef0", kernel.coef0)
                .real("c", options.c)
                .real("tol", options.tol)
                .add("max_iters", options.max_iters)
                .add("standardize", options.standardize)
                .add("max_pairs", options.max_pairs)
                .add("seed", options.seed);
        }
        RankerConfig::RankBoost(c) => {
            let holdout = match c.holdout {
                Holdout::Training => "training".to_string(),
                Holdout::TailFraction(f) => format!("tail-fraction {}", fmt_real(f)),
            };
            block
                .add("iterations", c.iterations)
                .add("metric", c.metric)
                .add("holdout", holdout);
        }
        RankerConfig::AdaRank(c) => {
            block
                .add("rounds", c.rounds)
                .real("tolerance", c.tolerance)
                .add("max_consecutive", c.max_consecutive)
                .add("metric", c.metric);
        }
        RankerConfig::RankNet(c) => {
            block
                .add("epochs", c.epochs)
                .real("lr", c.lr)
                .add("layers", c.layers)
                .add("hidden", c.hidden)
                .add("seed", c.seed);
        }
        RankerConfig::RandomForest(c) => {
            block
                .add("bags", c.bags)
                .add("trees", c.trees_per_bag)
                .real("lr", c.lr)
                .real("feat_rate", c.feat_rate)
                .real("sub_rate", c.sub_rate)
                .add("min_leaf", c.min_leaf)
                .add("max_leaves", c.max_leaves)
                .add("seed", c.seed);
        }
    }
}

fn train_cmd(a: &TrainArgs, out: &mut dyn Write) -> Outcome {
    // flag validation precedes any file access so usage errors stay usage errors
    ranker_config(a, 1)?;
    let ds = parse_ranking_file(&a.input)?;
    let cfg = ranker_config(a, ds.dim())?;
    let mut block = ConfigBlock::new("train");
    block.path("in", &a.input).path("model", &a.model);
    describe_ranker(&cfg, &mut block);
    block.add("fail_on_no_convergence", a.fail_on_no_convergence);
    block.print(out)?;

    let trained = train(&ds, &cfg)?;
    trained.model.write(&a.model)?;
    writeln!(
        out,
        "trained {} on {} queries; converged = {}",
        cfg.kind(),
        ds.num_groups(),
        trained.converged
    )?;
    if !trained.converged {
        if a.fail_on_no_convergence {
            return Ok(EXIT_NO_CONVERGENCE);
        }
        writeln!(out, "warning: optimiser stopped before reaching its tolerance")?;
    }
    Ok(EXIT_OK)
}

fn predict(a: &PredictArgs, out: &mut dyn Write) -> Outcome {
    ConfigBlock::new("predict")
        .path("in", &a.input)
        .path("model", &a.model)
        .path("run", &a.run)
        .print(out)?;
    let ds = parse_ranking_file(&a.input)?;
    let model = Model::read(&a.model)?;
    let ranked = rank_all(&ds, &model.score_dataset(&ds)?)?;
    write_run_file(&ranked, &a.run)?;
    writeln!(out, "ranked {} queries", ranked.len())?;
    Ok(EXIT_OK)
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Outcome {
    let metric: Option<Metric> = a.metric.as_deref().map(|m| parse_flag("metric", m)).transpose()?;
    let mut block = ConfigBlock::new("eval");
    block.path("in", &a.input).path("run", &a.run);
    if let Some(p) = &a.out {
        block.path("out", p);
    }
    block.print(out)?;
    let ds = parse_ranking_file(&a.input)?;
    let run = parse_run_file(&a.run)?;
    let report = evaluate_ranked(&ranked_from_run(&ds, &run)?, ds.max_label())?;
    write!(out, "{}", report.to_table())?;
    if let Some(m) = metric {
        writeln!(out, "{}={}", m.key(), fmt_real(report.get(m)))?;
    }
    if let Some(p) = &a.out {
        fs::write(p, report.to_key_values())?;
    }
    Ok(EXIT_OK)
}

fn kernel_from(name: &str, gamma: Option<f64>, coef0: Option<f64>, dim: usize) -> Result<Kernel, Failure> {
    let kind: KernelKind = parse_flag("kernel", name)?;
    Ok(Kernel {
        gamma: gamma.unwrap_or(0.0),
        coef0: coef0.unwrap_or(0.0),
        ..Kernel::new(kind)
    }
    .resolve_defaults(dim))
}

fn tune(a: &TuneArgs, out: &mut dyn Write) -> Outcome {
    let metric: Metric = parse_flag("metric", &a.metric)?;
    for k in a.kernels.iter().chain(a.kernel.iter()) {
        parse_flag::<KernelKind>("kernel", k)?;
    }
    let ds = if a.flat {
        attach_query_ids(&parse_flat_file(&a.input)?, a.group_size)?
    } else {
        parse_ranking_file(&a.input)?
    };
    let dim = ds.dim();
    let kernels = a
        .kernels
        .iter()
        .map(|k| kernel_from(k, a.gamma, a.coef0, dim))
        .collect::<Result<Vec<_>, _>>()?;
    let scan_kernel = a
        .kernel
        .as_deref()
        .map(|k| kernel_from(k, a.gamma, a.coef0, dim))
        .transpose()?;
    let tuning = TuningConfig {
        kernels,
        initial_c: a.c,
        coarse_grid: a.grid.clone().unwrap_or_else(|| COARSE_GRID.to_vec()),
        fine_low: a.low,
        fine_high: a.high,
        step: a.step,
        metric,
        literal: a.literal,
        ..TuningConfig::default()
    };
    let cfg = ProtocolConfig {
        group_size: a.group_size,
        tail: a.tail,
        seed: a.seed,
        desk_scale: a.desk_scale,
        tuning,
        scan_kernel,
        compare_methods: a.compare_methods,
    };

    let mut block = ConfigBlock::new("tune");
    block.path("in", &a.input).add("flat", a.flat);
    if a.flat {
        block.add("group_size", a.group_size);
    }
    let t = &cfg.tuning;
    block
        .add("tail", a.tail)
        .add("kernels", t.kernels.iter().map(Kernel::describe).collect::<Vec<_>>().join(" "))
        .add("scan_kernel", cfg.scan_kernel.map_or("sweep winner".into(), |k| k.describe()))
        .real("initial_c", t.initial_c)
        .add("coarse_grid", t.coarse_grid.iter().map(|&c| fmt_real(c)).collect::<Vec<_>>().join(","))
        .real("low", t.fine_low)
        .real("high", t.fine_high)
        .real("step", t.step)
        .add("metric", t.metric)
        .add("literal", t.literal)
        .add("compare_methods", cfg.compare_methods)
        .add("desk_scale", cfg.desk_scale)
        .real("svm_tol", t.svm.tol)
        .add("svm_max_iters", t.svm.max_iters)
        .add("seed", cfg.seed)
        .path("out", &a.out);
    if let Some(p) = &a.report {
        block.path("report", p);
    }
    if let Some(p) = &a.coarse_out {
        block.path("coarse_out", p);
    }
    block.print(out)?;

    let report = run_tuning(&ds, &cfg)?;
    let text = report.to_text();
    write!(out, "{text}")?;
    fs::write(&a.out, report.fine.trace.to_csv())?;
    if let Some(p) = &a.coarse_out {
        fs::write(p, report.coarse.to_csv())?;
    }
    if let Some(p) = &a.report {
        fs::write(p, text)?;
    }
    Ok(EXIT_OK)
}

fn gen(a: &GenArgs, out: &mut dyn Write) -> Outcome {
    let scenario: Scenario = parse_flag("scenario", &a.scenario)?;
    let truth = a.truth.clone().unwrap_or_else(|| with_suffix(&a.out, ".truth"));
    ConfigBlock::new("gen")
        .path("out", &a.out)
        .path("truth", &truth)
        .add("queries", a.queries)
        .add("group_size", a.group_size)
        .add("dim", a.dim)
        .add("scenario", scenario)
        .real("noise", a.noise)
        .add("graded", a.graded)
        .add("flat", a.flat)
        .add("seed", a.seed)
        .print(out)?;
    let spec = GenSpec {
        queries: a.queries,
        group_size: a.group_size,
        dim: a.dim,
        scenario,
        noise: a.noise,
        graded: a.graded,
        seed: a.seed,
    };
    let (ds, gt) = generate(&spec)?;
    if a.flat {
        write_flat_file(&ds.flatten(), &a.out)?;
    } else {
        write_ranking_file(&ds, &a.out)?;
    }
    gt.write(&truth)?;
    writeln!(out, "generated {} queries, {} candidates", ds.num_groups(), ds.num_candidates())?;
    Ok(EXIT_OK)
}

/// Runs one command. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let outcome = match &cli.command {
        Command::Convert(a) => convert(a, out),
        Command::Split(a) => split(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Tune(a) => tune(a, out),
        Command::Gen(a) => gen(a, out),
    };
    match outcome {
        Ok(code) => {
            if code == EXIT_NO_CONVERGENCE {
                let _ = writeln!(err, "error: training did not converge");
            }
            code
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DATA
        }
    }
}
