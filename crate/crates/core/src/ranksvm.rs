//! Pairwise Ranking SVM.
//!
//! Both solvers minimise
//!
//! ```text
//! 1/2 ||w||^2 + C_eff * sum_p max(0, 1 - w . (x_u - x_v)),    C_eff = c / P
//! ```
//!
//! over all `P` within-query pairs, i.e. the hinge term is a mean over pairs
//! scaled by `c`. There is no bias: it cancels in every pair difference.
//!
//! [`train_linear`] runs dual coordinate descent in weight space.
//! [`train_kernel`] runs the same dual in function space over a Gram matrix
//! of the candidates that take part in a pair, which is what lets RBF and
//! sigmoid kernels in. With a linear kernel the two solve one problem by
//! different routes, which the tests exploit.
//!
//! Each epoch ends in a checkpoint: the primal objective and duality gap
//! are computed, the best primal iterate so far is kept as the incumbent and
//! its objective is appended to the trace. Training stops once the relative
//! duality gap drops to `tol`; otherwise the incumbent is returned with
//! `converged = false`.

use rand::seq::SliceRandom;

use crate::dataset::{Dataset, Standardizer};
use crate::model::{Model, Scorer};
use crate::pairwise::dataset_pairs;
use crate::rng::{self, DEFAULT_SEED};
use crate::textfmt::{
    content_lines, field, field_real, field_usize, fmt_real, fmt_reals, fmt_sparse, parse_reals,
    parse_sparse,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Rbf,
    Sigmoid,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
            KernelKind::Sigmoid => "sigmoid",
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            "sigmoid" | "tanh" => Ok(KernelKind::Sigmoid),
            other => Err(Error::invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

/// `gamma = 0` stands for "not set" and resolves to `1/d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
    pub coef0: f64,
}

impl Kernel {
    pub fn new(kind: KernelKind) -> Kernel {
        Kernel {
            kind,
            gamma: 0.0,
            coef0: 0.0,
        }
    }

    pub fn linear() -> Kernel {
        Kernel::new(KernelKind::Linear)
    }

    pub fn rbf(gamma: f64) -> Kernel {
        Kernel {
            gamma,
            ..Kernel::new(KernelKind::Rbf)
        }
    }

    pub fn sigmoid(gamma: f64, coef0: f64) -> Kernel {
        Kernel {
            kind: KernelKind::Sigmoid,
            gamma,
            coef0,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.kind == KernelKind::Linear
    }

    pub fn resolve_defaults(mut self, dim: usize) -> Kernel {
        if self.is_linear() {
            self.gamma = 0.0;
            self.coef0 = 0.0;
        } else if self.gamma <= 0.0 {
            self.gamma = 1.0 / dim.max(1) as f64;
        }
        self
    }

    /// Unchecked evaluation.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => dot(a, b),
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Sigmoid => (self.gamma * dot(a, b) + self.coef0).tanh(),
        }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            KernelKind::Linear => "linear".to_string(),
            KernelKind::Rbf => format!("rbf(gamma={})", fmt_real(self.gamma)),
            KernelKind::Sigmoid => format!(
                "sigmoid(gamma={},coef0={})",
                fmt_real(self.gamma),
                fmt_real(self.coef0)
            ),
        }
    }
}

pub fn kernel_eval(k: &Kernel, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("kernel input".into()));
    }
    Ok(k.eval(a, b))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmOptions {
    pub c: f64,
    /// Relative duality gap at which training stops.
    pub tol: f64,
    /// Maximum number of epochs (full passes over the pairs).
    pub max_iters: usize,
    pub seed: u64,
    pub standardize: bool,
    /// Upper bound on both the pair count and the number of candidates in
    /// the Gram matrix of the kernel solver.
    pub max_pairs: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions {
            c: 3.0,
            tol: 1e-3,
            max_iters: 1000,
            seed: DEFAULT_SEED,
            standardize: false,
            max_pairs: 6000,
        }
    }
}

impl SvmOptions {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("c must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// `max(0, 1 - margin)` per training pair for the returned model.
    pub slacks: Vec<f64>,
    /// Epochs run.
    pub iterations: usize,
    /// Incumbent objective at the start and after every epoch.
    pub objective_trace: Vec<f64>,
    pub objective: f64,
    pub duality_gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub c: f64,
}

impl Scorer for LinearModel {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        dot(&self.w, x)
    }
}

impl LinearModel {
    pub fn to_text(&self) -> String {
        format!(
            "ranksvm linear c={} dim={}\nw {}\n",
            fmt_real(self.c),
            self.w.len(),
            fmt_reals(&self.w)
        )
    }
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub model: LinearModel,
    pub state: TrainState,
}

struct PairData {
    /// Per pair, the `(group, u, v)` indices.
    index: Vec<(usize, usize, usize)>,
}

fn collect_pairs(ds: &Dataset) -> Result<PairData> {
    let pairs = dataset_pairs(ds);
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    Ok(PairData {
        index: pairs
            .iter()
            .map(|p| (p.group, p.sample.u, p.sample.v))
            .collect(),
    })
}

fn prepared(ds: &Dataset, standardize: bool) -> Result<(Dataset, Option<Standardizer>)> {
    if standardize {
        let s = Standardizer::fit(ds);
        Ok((ds.map_features(|x| s.apply(x))?, Some(s)))
    } else {
        Ok((ds.clone(), None))
    }
}

fn relative_gap(primal: f64, gap: f64) -> f64 {
    gap.abs() / primal.abs().max(f64::MIN_POSITIVE)
}

/// Linear Ranking SVM by dual coordinate descent on the pair differences.
pub fn train_linear(ds: &Dataset, opts: &SvmOptions) -> Result<LinearFit> {
    opts.validate()?;
    let pairs = collect_pairs(ds)?;
    let (data, scaler) = prepared(ds, opts.standardize)?;
    let d = data.dim();
    let n_pairs = pairs.index.len();
    let bound = opts.c / n_pairs as f64;

    let diffs: Vec<Vec<f64>> = pairs
        .index
        .iter()
        .map(|&(g, u, v)| {
            let c = &data.groups()[g].candidates;
            c[u].features
                .iter()
                .zip(&c[v].features)
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();
    let qdiag: Vec<f64> = diffs.iter().map(|x| dot(x, x)).collect();

    let primal = |w: &[f64]| -> f64 {
        let hinge: f64 = diffs.iter().map(|x| (1.0 - dot(w, x)).max(0.0)).sum();
        0.5 * dot(w, w) + bound * hinge
    };

    let mut alpha = vec![0.0; n_pairs];
    let mut w = vec![0.0; d];
    let mut best_w = w.clone();
    let mut best_obj = primal(&w);
    let mut trace = vec![best_obj];
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    let mut rng = rng::stream_rng(opts.seed, &[0x5356_4d4c]);
    let mut order: Vec<usize> = (0..n_pairs).collect();

    for _ in 0..opts.max_iters {
        iterations += 1;
        order.shuffle(&mut rng);
        for &p in &order {
            let x = &diffs[p];
            if qdiag[p] <= 0.0 {
                // identical feature vectors: the pair only ever pays the full hinge
                alpha[p] = bound;
                continue;
            }
            let grad = dot(&w, x) - 1.0;
            let new = (alpha[p] - grad / qdiag[p]).clamp(0.0, bound);
            let delta = new - alpha[p];
            if delta != 0.0 {
                alpha[p] = new;
                w.iter_mut().zip(x).for_each(|(wi, xi)| *wi += delta * xi);
            }
        }
        let obj = primal(&w);
        let dual = alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w);
        gap = obj - dual;
        if obj < best_obj {
            best_obj = obj;
            best_w.clone_from(&w);
        }
        trace.push(best_obj);
        if relative_gap(obj, gap) <= opts.tol {
            converged = true;
            break;
        }
    }

    let slacks = diffs
        .iter()
        .map(|x| (1.0 - dot(&best_w, x)).max(0.0))
        .collect();
    // folding the scaling into w changes scores by a constant only
    let w = match &scaler {
        Some(s) => best_w.iter().zip(&s.scale).map(|(w, s)| w / s).collect(),
        None => best_w,
    };
    Ok(LinearFit {
        model: LinearModel { w, c: opts.c },
        state: TrainState {
            slacks,
            iterations,
            objective_trace: trace,
            objective: best_obj,
            duality_gap: gap,
            converged,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportPair {
    pub alpha: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// `f(x) = sum_p alpha_p * (k(x, u_p) - k(x, v_p))`, evaluated on the
/// standardised `x` when the model carries a scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    pub kernel: Kernel,
    pub c: f64,
    pub dim: usize,
    pub scaler: Option<Standardizer>,
    pub support: Vec<SupportPair>,
}

impl Scorer for KernelModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let scaled;
        let x = match &self.scaler {
            Some(s) => {
                scaled = s.apply(x);
                &scaled[..]
            }
            None => x,
        };
        self.support
            .iter()
            .map(|sp| sp.alpha * (self.kernel.eval(x, &sp.u) - self.kernel.eval(x, &sp.v)))
            .sum()
    }
}

impl KernelModel {
    pub fn to_text(&self) -> String {
        let k = &self.kernel;
        let mut out = format!(
            "ranksvm {} c={} dim={} gamma={} coef0={}\n",
            k.kind.name(),
            fmt_real(self.c),
            self.dim,
            fmt_real(k.gamma),
            fmt_real(k.coef0)
        );
        if let Some(s) = &self.scaler {
            out.push_str(&format!("shift {}\nscale {}\n", fmt_reals(&s.mean), fmt_reals(&s.scale)));
        }
        for sp in &self.support {
            out.push_str(&format!(
                "alpha={} u={} v={}\n",
                fmt_real(sp.alpha),
                fmt_sparse(&sp.u),
                fmt_sparse(&sp.v)
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct KernelFit {
    pub model: KernelModel,
    pub state: TrainState,
    /// Dual variables of every training pair, in pair order.
    pub alphas: Vec<f64>,
}

/// Kernelised Ranking SVM by dual coordinate descent in function space.
pub fn train_kernel(ds: &Dataset, kernel: &Kernel, opts: &SvmOptions) -> Result<KernelFit> {
    opts.validate()?;
    let kernel = kernel.resolve_defaults(ds.dim());
    let pairs = collect_pairs(ds)?;
    let n_pairs = pairs.index.len();
    if n_pairs > opts.max_pairs {
        return Err(Error::MatrixBudget {
            pairs: n_pairs,
            budget: opts.max_pairs,
        });
    }
    let (data, scaler) = prepared(ds, opts.standardize)?;

    // compact ids for the candidates that appear in some pair
    let mut slot = vec![Vec::<Option<usize>>::new(); data.num_groups()];
    for (g, grp) in data.groups().iter().enumerate() {
        slot[g] = vec![None; grp.len()];
    }
    let mut points: Vec<&[f64]> = Vec::new();
    let mut ends = Vec::with_capacity(n_pairs);
    for &(g, u, v) in &pairs.index {
        let mut id = |i: usize| {
            *slot[g][i].get_or_insert_with(|| {
                points.push(&data.groups()[g].candidates[i].features);
                points.len() - 1
            })
        };
        let a = id(u);
        let b = id(v);
        ends.push((a, b));
    }
    let m = points.len();
    if m > opts.max_pairs {
        return Err(Error::MatrixBudget {
            pairs: m,
            budget: opts.max_pairs,
        });
    }

    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let k = kernel.eval(points[i], points[j]);
            gram[i * m + j] = k;
            gram[j * m + i] = k;
        }
    }
    let kij = |i: usize, j: usize| gram[i * m + j];
    let qdiag: Vec<f64> = ends
        .iter()
        .map(|&(a, b)| kij(a, a) - 2.0 * kij(a, b) + kij(b, b))
        .collect();

    let bound = opts.c / n_pairs as f64;
    // f evaluated on every pair endpoint
    let mut f = vec![0.0; m];
    let mut alpha = vec![0.0; n_pairs];

    let objectives = |alpha: &[f64], f: &[f64]| -> (f64, f64) {
        let mut reg = 0.0;
        let mut hinge = 0.0;
        let mut sum_alpha = 0.0;
        for (p, &(a, b)) in ends.iter().enumerate() {
            let margin = f[a] - f[b];
            reg += alpha[p] * margin;
            hinge += (1.0 - margin).max(0.0);
            sum_alpha += alpha[p];
        }
        let reg = 0.5 * reg;
        (reg + bound * hinge, sum_alpha - reg)
    };

    let (mut best_obj, _) = objectives(&alpha, &f);
    let mut best_alpha = alpha.clone();
    let mut best_f = f.clone();
    let mut trace = vec![best_obj];
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    let mut rng = rng::stream_rng(opts.seed, &[0x4b45_524e]);
    let mut order: Vec<usize> = (0..n_pairs).collect();

    for _ in 0..opts.max_iters {
        iterations += 1;
        order.shuffle(&mut rng);
        for &p in &order {
            let (a, b) = ends[p];
            let grad = f[a] - f[b] - 1.0;
            let q = qdiag[p];
            let old = alpha[p];
            let new = if q > 1e-12 {
                (old - grad / q).clamp(0.0, bound)
            } else {
                // flat or concave along this coordinate: best box end wins
                let gain = |t: f64| 0.5 * q * (t - old) * (t - old) + grad * (t - old);
                if gain(bound) < gain(0.0) {
                    bound
                } else {
                    0.0
                }
            };
            let delta = new - old;
            if delta != 0.0 {
                alpha[p] = new;
                let (ra, rb) = (&gram[a * m..(a + 1) * m], &gram[b * m..(b + 1) * m]);
                for ((fi, ka), kb) in f.iter_mut().zip(ra).zip(rb) {
                    *fi += delta * (ka - kb);
                }
            }
        }
        let (obj, dual) = objectives(&alpha, &f);
        gap = obj - dual;
        if obj < best_obj {
            best_obj = obj;
            best_alpha.clone_from(&alpha);
            best_f.clone_from(&f);
        }
        trace.push(best_obj);
        if relative_gap(obj, gap) <= opts.tol {
            converged = true;
            break;
        }
    }

    let slacks = ends
        .iter()
        .map(|&(a, b)| (1.0 - (best_f[a] - best_f[b])).max(0.0))
        .collect();
    let support = ends
        .iter()
        .zip(&best_alpha)
        .filter(|(_, &al)| al > 0.0)
        .map(|(&(a, b), &al)| SupportPair {
            alpha: al,
            u: points[a].to_vec(),
            v: points[b].to_vec(),
        })
        .collect();
    Ok(KernelFit {
        model: KernelModel {
            kernel,
            c: opts.c,
            dim: ds.dim(),
            scaler,
            support,
        },
        state: TrainState {
            slacks,
            iterations,
            objective_trace: trace,
            objective: best_obj,
            duality_gap: gap,
            converged,
        },
        alphas: best_alpha,
    })
}

/// Parses either flavour of `ranksvm` model file.
pub(crate) fn parse_svm_model(text: &str) -> Result<Model> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| Error::model(1, "empty model file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.first() != Some(&"ranksvm") || h.len() < 2 {
        return Err(Error::model(hline, "expected `ranksvm <kernel> ...` header"));
    }
    let kind: KernelKind = h[1]
        .parse()
        .map_err(|e: Error| Error::model(hline, e.to_string()))?;
    let c = field_real(&h, "c", hline)?;
    let dim = field_usize(&h, "dim", hline)?;

    if kind == KernelKind::Linear {
        let (wline, body) = lines
            .next()
            .ok_or_else(|| Error::model(hline, "missing `w` line"))?;
        let t: Vec<&str> = body.split_whitespace().collect();
        if t.first() != Some(&"w") {
            return Err(Error::model(wline, "expected `w` line"));
        }
        let w = parse_reals(&t[1..], wline)?;
        if w.len() != dim {
            return Err(Error::model(wline, format!("{} weights for dim={dim}", w.len())));
        }
        if let Some((l, _)) = lines.next() {
            return Err(Error::model(l, "unexpected content after weights"));
        }
        return Ok(Model::Linear(LinearModel { w, c }));
    }

    let kernel = Kernel {
        kind,
        gamma: field_real(&h, "gamma", hline)?,
        coef0: field_real(&h, "coef0", hline)?,
    };
    let mut scaler: Option<Standardizer> = None;
    let mut pending_shift: Option<Vec<f64>> = None;
    let mut support = Vec::new();
    for (l, body) in lines {
        let t: Vec<&str> = body.split_whitespace().collect();
        match t[0] {
            "shift" => pending_shift = Some(parse_reals(&t[1..], l)?),
            "scale" => {
                let mean = pending_shift
                    .take()
                    .ok_or_else(|| Error::model(l, "`scale` without preceding `shift`"))?;
                let scale = parse_reals(&t[1..], l)?;
                if mean.len() != dim || scale.len() != dim {
                    return Err(Error::model(l, "scaler length differs from dim"));
                }
                scaler = Some(Standardizer { mean, scale });
            }
            _ => support.push(SupportPair {
                alpha: field_real(&t, "alpha", l)?,
                u: parse_sparse(field(&t, "u", l)?, dim, l)?,
                v: parse_sparse(field(&t, "v", l)?, dim, l)?,
            }),
        }
    }
    Ok(Model::Kernel(KernelModel {
        kernel,
        c,
        dim,
        scaler,
        support,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Candidate, QueryGroup};
    use crate::pairwise::{dataset_pairwise_accuracy, generate_pairs, pairwise_accuracy};

    fn ds_from(groups: Vec<Vec<(u32, Vec<f64>)>>) -> Dataset {
        Dataset::new(
            groups
                .into_iter()
                .enumerate()
                .map(|(i, g)| QueryGroup {
                    qid: i as u64 + 1,
                    candidates: g
                        .into_iter()
                        .map(|(label, features)| Candidate {
                            label,
                            qid: i as u64 + 1,
                            features,
                            comment: None,
                        })
                        .collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_eval(&Kernel::linear(), &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(kernel_eval(&Kernel::rbf(0.5), &[3.0, -1.0], &[3.0, -1.0]).unwrap(), 1.0);
        let k = kernel_eval(&Kernel::rbf(1.0), &[0.0], &[1.0]).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        let s = kernel_eval(&Kernel::sigmoid(0.5, 0.1), &[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert!((s - (0.5f64 * 4.0 + 0.1).tanh()).abs() < 1e-15);
        assert!(kernel_eval(&Kernel::linear(), &[1.0], &[1.0, 2.0]).is_err());
        assert!(kernel_eval(&Kernel::linear(), &[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn default_gamma_is_inverse_dim() {
        assert_eq!(Kernel::new(KernelKind::Rbf).resolve_defaults(4).gamma, 0.25);
        assert_eq!(Kernel::rbf(2.0).resolve_defaults(4).gamma, 2.0);
    }

    #[test]
    fn linear_scoring() {
        let m = LinearModel {
            w: vec![1.0, -1.0],
            c: 1.0,
        };
        assert_eq!(m.score(&[3.0, 1.0]).unwrap(), 2.0);
        assert_eq!(m.score(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(m.score(&[1.0]).is_err());
    }

    fn monotone_1d() -> Dataset {
        ds_from(vec![
            vec![(2, vec![3.0]), (0, vec![-1.0]), (1, vec![0.5])],
            vec![(0, vec![0.1]), (1, vec![2.0])],
        ])
    }

    #[test]
    fn one_dimensional_monotone_data_gets_positive_weight() {
        let ds = monotone_1d();
        let fit = train_linear(&ds, &SvmOptions::default()).unwrap();
        assert!(fit.model.w[0] > 0.0);
        let scores = fit.model.score_dataset(&ds).unwrap();
        assert_eq!(dataset_pairwise_accuracy(&ds, &scores).unwrap(), 1.0);
        // brute-force: every pair constraint is satisfied in orientation
        for (g, s) in ds.groups().iter().zip(&scores) {
            for p in generate_pairs(g) {
                assert!(s[p.u] > s[p.v]);
            }
        }
    }

    #[test]
    fn no_pairs_is_an_error() {
        let ds = ds_from(vec![vec![(1, vec![1.0]), (1, vec![2.0])]]);
        assert!(matches!(train_linear(&ds, &SvmOptions::default()), Err(Error::NoPairs)));
        assert!(matches!(
            train_kernel(&ds, &Kernel::rbf(1.0), &SvmOptions::default()),
            Err(Error::NoPairs)
        ));
    }

    #[test]
    fn rejects_bad_c() {
        let opts = SvmOptions {
            c: 0.0,
            ..SvmOptions::default()
        };
        assert!(train_linear(&monotone_1d(), &opts).is_err());
    }

    #[test]
    fn objective_trace_is_non_increasing_and_slacks_consistent() {
        let ds = ds_from(vec![
            vec![(1, vec![1.0, 0.2]), (0, vec![0.8, 0.9]), (0, vec![-0.3, 0.1])],
            vec![(1, vec![0.1, 1.0]), (0, vec![0.5, -0.4]), (1, vec![-0.2, 0.3])],
        ]);
        let fit = train_linear(&ds, &SvmOptions { c: 10.0, tol: 1e-8, ..SvmOptions::default() }).unwrap();
        let t = &fit.state.objective_trace;
        for w in t.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9));
        }
        assert_eq!(*t.last().unwrap(), fit.state.objective);
        assert!(fit.state.converged);
        let w = &fit.model.w;
        let mut k = 0;
        for g in ds.groups() {
            for p in generate_pairs(g) {
                let c = &g.candidates;
                let margin = dot(w, &c[p.u].features) - dot(w, &c[p.v].features);
                assert!((fit.state.slacks[k] - (1.0 - margin).max(0.0)).abs() < 1e-12);
                k += 1;
            }
        }
    }

    #[test]
    fn iteration_cap_returns_flagged_incumbent() {
        let ds = ds_from(vec![vec![(1, vec![1.0, 0.2]), (0, vec![0.8, 0.9]), (0, vec![1.3, 0.1])]]);
        let opts = SvmOptions {
            c: 1000.0,
            tol: 1e-15,
            max_iters: 2,
            ..SvmOptions::default()
        };
        let fit = train_linear(&ds, &opts).unwrap();
        assert!(!fit.state.converged);
        assert_eq!(fit.state.iterations, 2);
        assert_eq!(fit.state.objective_trace.len(), 3);
    }

    #[test]
    fn tiny_c_gives_vanishing_scores() {
        let ds = monotone_1d();
        let opts = SvmOptions {
            c: 1e-12,
            ..SvmOptions::default()
        };
        let fit = train_kernel(&ds, &Kernel::rbf(1.0), &opts).unwrap();
        let n_pairs = fit.alphas.len() as f64;
        assert!(fit.alphas.iter().all(|&a| a <= 1e-12 / n_pairs));
        for c in ds.candidates() {
            assert!(fit.model.score(&c.features).unwrap().abs() < 1e-11);
        }
    }

    #[test]
    fn kernel_score_matches_hand_expansion() {
        let ds = ds_from(vec![
            vec![(1, vec![1.0, 0.0]), (0, vec![0.0, 1.0]), (0, vec![0.5, 0.5])],
            vec![(1, vec![-1.0, 0.3]), (0, vec![0.2, -0.7])],
        ]);
        let k = Kernel::rbf(0.7);
        let fit = train_kernel(&ds, &k, &SvmOptions { c: 5.0, ..SvmOptions::default() }).unwrap();
        let x = &ds.groups()[0].candidates[0].features;
        let mut expect = 0.0;
        for sp in &fit.model.support {
            let kxu = (-0.7 * ((x[0] - sp.u[0]).powi(2) + (x[1] - sp.u[1]).powi(2))).exp();
            let kxv = (-0.7 * ((x[0] - sp.v[0]).powi(2) + (x[1] - sp.v[1]).powi(2))).exp();
            expect += sp.alpha * (kxu - kxv);
        }
        assert!((fit.model.score(x).unwrap() - expect).abs() < 1e-12);
        assert!(!fit.model.support.is_empty());
    }

    #[test]
    fn primal_and_dual_routes_agree_on_weights() {
        let ds = ds_from(vec![
            vec![(1, vec![1.0, 0.2]), (0, vec![0.8, 0.9]), (0, vec![-0.3, 0.1])],
            vec![(1, vec![0.1, 1.0]), (0, vec![0.5, -0.4]), (1, vec![-0.2, 0.3])],
        ]);
        let opts = SvmOptions {
            c: 4.0,
            tol: 1e-13,
            max_iters: 100_000,
            ..SvmOptions::default()
        };
        let lin = train_linear(&ds, &opts).unwrap();
        let ker = train_kernel(&ds, &Kernel::linear(), &opts).unwrap();
        // recover w from the dual expansion
        let mut w = [0.0; 2];
        for sp in &ker.model.support {
            for j in 0..2 {
                w[j] += sp.alpha * (sp.u[j] - sp.v[j]);
            }
        }
        for j in 0..2 {
            assert!((w[j] - lin.model.w[j]).abs() < 1e-6, "{w:?} vs {:?}", lin.model.w);
        }
        assert!((lin.state.objective - ker.state.objective).abs() < 1e-9);
    }

    #[test]
    fn standardized_linear_model_ranks_like_its_training_space() {
        let ds = ds_from(vec![
            vec![(1, vec![100.0, 0.002]), (0, vec![80.0, 0.009]), (0, vec![-30.0, 0.001])],
            vec![(1, vec![10.0, 0.01]), (0, vec![50.0, -0.004])],
        ]);
        let opts = SvmOptions {
            standardize: true,
            ..SvmOptions::default()
        };
        let fit = train_linear(&ds, &opts).unwrap();
        let s = Standardizer::fit(&ds);
        let w_std: Vec<f64> = fit.model.w.iter().zip(&s.scale).map(|(w, s)| w * s).collect();
        for c in ds.candidates() {
            let raw = fit.model.score(&c.features).unwrap();
            let std = dot(&w_std, &s.apply(&c.features));
            let offset = dot(&w_std, &s.mean.iter().zip(&s.scale).map(|(m, s)| m / s).collect::<Vec<_>>());
            assert!((raw - (std + offset)).abs() < 1e-9);
        }
    }

    #[test]
    fn model_files_round_trip() {
        let ds = monotone_1d();
        let lin = Model::Linear(train_linear(&ds, &SvmOptions::default()).unwrap().model);
        let text = lin.to_text();
        assert!(text.starts_with("ranksvm linear c=3 dim=1\nw "));
        assert_eq!(Model::from_text(&text).unwrap(), lin);

        for opts in [SvmOptions::default(), SvmOptions { standardize: true, ..SvmOptions::default() }] {
            let ker = Model::Kernel(train_kernel(&ds, &Kernel::sigmoid(0.3, -0.2), &opts).unwrap().model);
            let text = ker.to_text();
            let back = Model::from_text(&text).unwrap();
            assert_eq!(back, ker);
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn malformed_model_files() {
        assert!(Model::from_text("ranksvm linear c=3 dim=2\nw 1\n").is_err());
        assert!(Model::from_text("ranksvm cubic c=3 dim=2\n").is_err());
        assert!(Model::from_text("ranksvm rbf c=3 dim=2 gamma=1 coef0=0\nalpha=1 u=3:1 v=\n").is_err());
        assert!(Model::from_text("").is_err());
    }

    #[test]
    fn pair_accuracy_of_single_group() {
        let ds = monotone_1d();
        let fit = train_linear(&ds, &SvmOptions::default()).unwrap();
        let g = &ds.groups()[0];
        let s = fit.model.score_group(g).unwrap();
        assert_eq!(pairwise_accuracy(&s, &generate_pairs(g)).unwrap(), 1.0);
    }
}
