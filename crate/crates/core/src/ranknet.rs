//! RankNet: a one-hidden-layer logistic network trained on pairwise
//! cross-entropy with per-pair gradient steps.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::Dataset;
use crate::model::Scorer;
use crate::pairwise::dataset_pairs;
use crate::rng::{self, DEFAULT_SEED};
use crate::textfmt::{content_lines, field_usize, fmt_real, fmt_reals, parse_reals};
use crate::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 10;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Cross-entropy of the modeled pair probability `sigmoid(delta)` against
/// target `p_bar`, where `delta = f(x_u) - f(x_v)`.
pub fn cross_entropy(delta: f64, p_bar: f64) -> f64 {
    softplus(-delta) + (1.0 - p_bar) * delta
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralNet {
    pub dim: usize,
    pub hidden: usize,
    /// Row-major `hidden x dim`.
    pub hidden_w: Vec<f64>,
    pub hidden_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

impl NeuralNet {
    pub fn zeros(dim: usize, hidden: usize) -> NeuralNet {
        NeuralNet {
            dim,
            hidden,
            hidden_w: vec![0.0; hidden * dim],
            hidden_b: vec![0.0; hidden],
            out_w: vec![0.0; hidden],
            out_b: 0.0,
        }
    }

    /// Hidden weights uniform in `±1/sqrt(dim)`, output weights uniform in
    /// `±1/sqrt(hidden)`, biases zero.
    pub fn random(dim: usize, hidden: usize, rng: &mut impl Rng) -> NeuralNet {
        let mut net = NeuralNet::zeros(dim, hidden);
        let a = 1.0 / (dim as f64).sqrt();
        for w in &mut net.hidden_w {
            *w = rng.random_range(-a..=a);
        }
        let b = 1.0 / (hidden as f64).sqrt();
        for w in &mut net.out_w {
            *w = rng.random_range(-b..=b);
        }
        net
    }

    pub fn num_params(&self) -> usize {
        self.hidden_w.len() + self.hidden_b.len() + self.out_w.len() + 1
    }

    /// Parameters flattened as hidden_w, hidden_b, out_w, out_b.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        p.extend_from_slice(&self.hidden_w);
        p.extend_from_slice(&self.hidden_b);
        p.extend_from_slice(&self.out_w);
        p.push(self.out_b);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.num_params());
        let (w1, rest) = p.split_at(self.hidden_w.len());
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.hidden);
        self.hidden_w.copy_from_slice(w1);
        self.hidden_b.copy_from_slice(b1);
        self.out_w.copy_from_slice(w2);
        self.out_b = b2[0];
    }

    fn activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.hidden_w[j * self.dim..(j + 1) * self.dim];
                let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.hidden_b[j];
                sigmoid(z)
            })
            .collect()
    }

    fn output(&self, h: &[f64]) -> f64 {
        self.out_w.iter().zip(h).map(|(w, a)| w * a).sum::<f64>() + self.out_b
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.score(x)
    }

    /// Adds `scale * df(x)/dparams` into `grad` (flat layout) and returns f(x).
    fn accumulate_grad(&self, x: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let h = self.activations(x);
        let (gw1, rest) = grad.split_at_mut(self.hidden_w.len());
        let (gb1, rest) = rest.split_at_mut(self.hidden);
        let (gw2, gb2) = rest.split_at_mut(self.hidden);
        for j in 0..self.hidden {
            gw2[j] += scale * h[j];
            let back = scale * self.out_w[j] * h[j] * (1.0 - h[j]);
            gb1[j] += back;
            for (g, v) in gw1[j * self.dim..(j + 1) * self.dim].iter_mut().zip(x) {
                *g += back * v;
            }
        }
        gb2[0] += scale;
        self.output(&h)
    }

    pub fn to_text(&self) -> String {
        format!(
            "ranknet dim={} hidden={}\nhidden_w {}\nhidden_b {}\nout_w {}\nout_b {}\n",
            self.dim,
            self.hidden,
            fmt_reals(&self.hidden_w),
            fmt_reals(&self.hidden_b),
            fmt_reals(&self.out_w),
            fmt_real(self.out_b)
        )
    }

    pub fn from_text(text: &str) -> Result<NeuralNet> {
        let lines: Vec<(usize, &str)> = content_lines(text).collect();
        let (hl, header) = *lines.first().ok_or_else(|| Error::model(1, "empty model file"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.first() != Some(&"ranknet") {
            return Err(Error::model(hl, "expected `ranknet ...` header"));
        }
        let dim = field_usize(&h, "dim", hl)?;
        let hidden = field_usize(&h, "hidden", hl)?;
        let mut net = NeuralNet::zeros(dim, hidden);
        let expected = [
            ("hidden_w", hidden * dim),
            ("hidden_b", hidden),
            ("out_w", hidden),
            ("out_b", 1),
        ];
        if lines.len() != expected.len() + 1 {
            return Err(Error::model(hl, "expected four parameter lines"));
        }
        for (&(l, body), (key, n)) in lines[1..].iter().zip(expected) {
            let rest = body
                .strip_prefix(key)
                .filter(|r| r.is_empty() || r.starts_with(' '))
                .ok_or_else(|| Error::model(l, format!("expected `{key}` line")))?;
            let vals = parse_reals(&rest.split_whitespace().collect::<Vec<_>>(), l)?;
            if vals.len() != n {
                return Err(Error::model(l, format!("`{key}` needs {n} values, got {}", vals.len())));
            }
            match key {
                "hidden_w" => net.hidden_w = vals,
                "hidden_b" => net.hidden_b = vals,
                "out_w" => net.out_w = vals,
                _ => net.out_b = vals[0],
            }
        }
        Ok(net)
    }
}

impl Scorer for NeuralNet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.output(&self.activations(x))
    }
}

pub fn pair_loss(net: &NeuralNet, xu: &[f64], xv: &[f64], p_bar: f64) -> Result<f64> {
    Ok(cross_entropy(net.score(xu)? - net.score(xv)?, p_bar))
}

/// Loss and its gradient with respect to `net.params()`.
pub fn pair_gradient(net: &NeuralNet, xu: &[f64], xv: &[f64], p_bar: f64) -> Result<(f64, Vec<f64>)> {
    let su = net.score(xu)?;
    let sv = net.score(xv)?;
    let delta = su - sv;
    let dl = sigmoid(delta) - p_bar;
    let mut grad = vec![0.0; net.num_params()];
    net.accumulate_grad(xu, dl, &mut grad);
    net.accumulate_grad(xv, -dl, &mut grad);
    Ok((cross_entropy(delta, p_bar), grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankNetConfig {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    /// Hidden-layer count; only 1 is supported.
    pub layers: usize,
    pub seed: u64,
}

impl Default for RankNetConfig {
    fn default() -> Self {
        RankNetConfig {
            epochs: 100,
            lr: 5e-5,
            hidden: DEFAULT_HIDDEN,
            layers: 1,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RankNetFit {
    pub net: NeuralNet,
    pub initial: NeuralNet,
    /// Mean pair loss over all training pairs at the end of each epoch.
    pub loss_trace: Vec<f64>,
}

fn mean_loss(net: &NeuralNet, x: &[Vec<&[f64]>], pairs: &[(usize, usize, usize)]) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|&(g, u, v)| cross_entropy(net.score_unchecked(x[g][u]) - net.score_unchecked(x[g][v]), 1.0))
        .sum();
    total / pairs.len() as f64
}

pub fn train_ranknet(ds: &Dataset, cfg: &RankNetConfig) -> Result<RankNetFit> {
    if cfg.layers != 1 {
        return Err(Error::invalid("only one hidden layer is supported"));
    }
    if cfg.hidden == 0 {
        return Err(Error::invalid("hidden layer needs at least one unit"));
    }
    if !(cfg.lr.is_finite() && cfg.lr >= 0.0) {
        return Err(Error::invalid("learning rate must be finite and non-negative"));
    }
    let pairs: Vec<(usize, usize, usize)> = dataset_pairs(ds)
        .into_iter()
        .map(|p| (p.group, p.sample.u, p.sample.v))
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    let x: Vec<Vec<&[f64]>> = ds
        .groups()
        .iter()
        .map(|g| g.candidates.iter().map(|c| c.features.as_slice()).collect())
        .collect();

    let mut net = NeuralNet::random(ds.dim(), cfg.hidden, &mut rng::stream_rng(cfg.seed, &[0]));
    let initial = net.clone();
    let mut order_rng = rng::stream_rng(cfg.seed, &[1]);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut params = net.params();
    let mut grad = vec![0.0; params.len()];
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        for &i in &order {
            let (g, u, v) = pairs[i];
            grad.iter_mut().for_each(|v| *v = 0.0);
            let delta = net.score_unchecked(x[g][u]) - net.score_unchecked(x[g][v]);
            let dl = sigmoid(delta) - 1.0;
            net.accumulate_grad(x[g][u], dl, &mut grad);
            net.accumulate_grad(x[g][v], -dl, &mut grad);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.lr * g;
            }
            net.set_params(&params);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("network weights after epoch {}", epoch + 1)));
        }
        loss_trace.push(mean_loss(&net, &x, &pairs));
    }
    Ok(RankNetFit {
        net,
        initial,
        loss_trace,
    })
}
