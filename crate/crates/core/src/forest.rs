//! Bagged MART: every bag is a gradient-boosted sequence of squared-error
//! regression trees fit pointwise to relevance labels; the forest score is
//! the mean of the bag scores.
//!
//! Trees grow best-first: the leaf whose best split removes the most squared
//! error is split next, until `max_leaves` is reached or no split leaves at
//! least `min_leaf` rows on each side. Splits go left when
//! `x[fid] <= thr`.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::model::Scorer;
use crate::rng::{self, DEFAULT_SEED};
use crate::textfmt::{content_lines, field_real, field_usize, fmt_real};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    /// Children are node indices.
    Split { fid: usize, thr: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// Nodes stored in pre-order; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> RegressionTree {
        RegressionTree {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { fid, thr, left, right } => {
                    i = if x[fid - 1] <= thr { left } else { right };
                }
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    fn write(&self, out: &mut String) {
        for n in &self.nodes {
            match *n {
                TreeNode::Split { fid, thr, .. } => {
                    out.push_str(&format!("node fid={} thr={}\n", fid, fmt_real(thr)))
                }
                TreeNode::Leaf { value } => out.push_str(&format!("leaf v={}\n", fmt_real(value))),
            }
        }
    }
}

/// Re-lays a tree built in arbitrary order into pre-order.
fn to_preorder(nodes: &[TreeNode]) -> Vec<TreeNode> {
    fn visit(nodes: &[TreeNode], i: usize, out: &mut Vec<TreeNode>) -> usize {
        let at = out.len();
        match nodes[i] {
            TreeNode::Leaf { .. } => out.push(nodes[i]),
            TreeNode::Split { fid, thr, left, right } => {
                out.push(TreeNode::Leaf { value: 0.0 });
                let l = visit(nodes, left, out);
                let r = visit(nodes, right, out);
                out[at] = TreeNode::Split { fid, thr, left: l, right: r };
            }
        }
        at
    }
    let mut out = Vec::with_capacity(nodes.len());
    visit(nodes, 0, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub bags: usize,
    pub trees_per_bag: usize,
    pub lr: f64,
    pub feat_rate: f64,
    pub sub_rate: f64,
    pub min_leaf: usize,
    pub max_leaves: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    /// 300 bags of 100 trees, lr 0.1, feature rate 0.3, no row sub-sampling.
    fn default() -> Self {
        ForestConfig {
            bags: 300,
            trees_per_bag: 100,
            lr: 0.1,
            feat_rate: 0.3,
            sub_rate: 1.0,
            min_leaf: 1,
            max_leaves: 10,
            seed: DEFAULT_SEED,
        }
    }
}

impl ForestConfig {
    /// Same settings with 5 bags of 20 trees.
    pub fn desk_scale() -> Self {
        ForestConfig {
            bags: 5,
            trees_per_bag: 20,
            ..ForestConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| r > 0.0 && r <= 1.0;
        if !rate_ok(self.feat_rate) || !rate_ok(self.sub_rate) {
            return Err(Error::invalid("sampling rates must lie in (0, 1]"));
        }
        if self.bags == 0 || self.trees_per_bag == 0 {
            return Err(Error::invalid("bags and trees per bag must be positive"));
        }
        if self.min_leaf == 0 || self.max_leaves == 0 {
            return Err(Error::invalid("min leaf support and max leaves must be positive"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Score = mean over bags of `sum_t lr * tree(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub bags: Vec<Vec<RegressionTree>>,
    pub lr: f64,
    pub dim: usize,
}

impl Scorer for ForestModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let total: f64 = self.bags.iter().map(|b| self.bag_score(b, x)).sum();
        total / self.bags.len() as f64
    }
}

impl ForestModel {
    pub fn bag_score(&self, bag: &[RegressionTree], x: &[f64]) -> f64 {
        bag.iter().map(|t| self.lr * t.predict(x)).sum()
    }

    pub fn to_text(&self) -> String {
        let trees = self.bags.first().map_or(0, Vec::len);
        let mut out = format!(
            "forest bags={} trees={} lr={} dim={}\n",
            self.bags.len(),
            trees,
            fmt_real(self.lr),
            self.dim
        );
        for (b, bag) in self.bags.iter().enumerate() {
            for (t, tree) in bag.iter().enumerate() {
                out.push_str(&format!("tree {b}/{t}\n"));
                tree.write(&mut out);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<ForestModel> {
        let lines: Vec<(usize, &str)> = content_lines(text).collect();
        let (hl, header) = *lines.first().ok_or_else(|| Error::model(1, "empty model file"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.first() != Some(&"forest") {
            return Err(Error::model(hl, "expected `forest ...` header"));
        }
        let n_bags = field_usize(&h, "bags", hl)?;
        let n_trees = field_usize(&h, "trees", hl)?;
        let lr = field_real(&h, "lr", hl)?;
        let dim = field_usize(&h, "dim", hl)?;

        let mut bags: Vec<Vec<RegressionTree>> = vec![Vec::new(); n_bags];
        let mut pos = 1;
        while pos < lines.len() {
            let (l, body) = lines[pos];
            let tag = body
                .strip_prefix("tree ")
                .ok_or_else(|| Error::model(l, "expected `tree <bag>/<index>`"))?;
            let (b, t) = tag
                .split_once('/')
                .and_then(|(b, t)| Some((b.parse::<usize>().ok()?, t.parse::<usize>().ok()?)))
                .ok_or_else(|| Error::model(l, format!("bad tree tag `{tag}`")))?;
            if b >= n_bags || t != bags[b].len() {
                return Err(Error::model(l, format!("tree {b}/{t} out of sequence")));
            }
            pos += 1;
            let mut nodes = Vec::new();
            parse_subtree(&lines, &mut pos, &mut nodes, dim)?;
            bags[b].push(RegressionTree { nodes });
        }
        if bags.iter().any(|bag| bag.len() != n_trees) {
            return Err(Error::model(hl, "tree count differs from header"));
        }
        Ok(ForestModel { bags, lr, dim })
    }
}

fn parse_subtree(
    lines: &[(usize, &str)],
    pos: &mut usize,
    nodes: &mut Vec<TreeNode>,
    dim: usize,
) -> Result<usize> {
    let (l, body) = *lines
        .get(*pos)
        .ok_or_else(|| Error::model(lines.last().map_or(1, |x| x.0), "truncated tree"))?;
    *pos += 1;
    let t: Vec<&str> = body.split_whitespace().collect();
    let at = nodes.len();
    match t.first() {
        Some(&"leaf") => {
            nodes.push(TreeNode::Leaf {
                value: field_real(&t, "v", l)?,
            });
        }
        Some(&"node") => {
            let fid = field_usize(&t, "fid", l)?;
            if fid == 0 || fid > dim {
                return Err(Error::model(l, format!("fid {fid} outside 1..={dim}")));
            }
            let thr = field_real(&t, "thr", l)?;
            nodes.push(TreeNode::Leaf { value: 0.0 });
            let left = parse_subtree(lines, pos, nodes, dim)?;
            let right = parse_subtree(lines, pos, nodes, dim)?;
            nodes[at] = TreeNode::Split { fid, thr, left, right };
        }
        _ => return Err(Error::model(l, "expected `node` or `leaf`")),
    }
    Ok(at)
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    gain: f64,
    fid: usize,
    thr: f64,
}

fn sse(targets: &[f64], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let mean = rows.iter().map(|&r| targets[r]).sum::<f64>() / rows.len() as f64;
    rows.iter().map(|&r| (targets[r] - mean).powi(2)).sum()
}

/// Exhaustive variance-reduction scan over `features` (0-based, ascending).
/// Ties keep the lowest feature, then the lowest threshold.
fn best_split(
    x: &[&[f64]],
    targets: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| targets[r]).sum();
    let base = total * total / n as f64;
    let mut best: Option<SplitCandidate> = None;
    let mut sorted = rows.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left = 0.0;
        for i in 0..n - 1 {
            left += targets[sorted[i]];
            let n_left = i + 1;
            if n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let lo = x[sorted[i]][f];
            let hi = x[sorted[i + 1]][f];
            if lo >= hi {
                continue;
            }
            let right = total - left;
            let gain = left * left / n_left as f64 + right * right / (n - n_left) as f64 - base;
            if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
                let mut thr = lo + (hi - lo) / 2.0;
                if thr >= hi {
                    thr = lo;
                }
                best = Some(SplitCandidate { gain, fid: f, thr });
            }
        }
    }
    best
}

/// A fitted tree plus the training rows that ended in each leaf.
#[derive(Debug, Clone)]
pub struct TreeFit {
    pub tree: RegressionTree,
    pub leaf_supports: Vec<usize>,
    /// Squared error of the tree on its training targets.
    pub sse: f64,
    /// Squared error of the single-leaf (mean) tree on the same targets.
    pub root_sse: f64,
}

/// Fits one squared-error regression tree on `rows` of `x`.
pub fn fit_tree(
    x: &[&[f64]],
    targets: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
    max_leaves: usize,
) -> TreeFit {
    struct Open {
        node: usize,
        rows: Vec<usize>,
        split: Option<SplitCandidate>,
    }
    let mean = |rs: &[usize]| rs.iter().map(|&r| targets[r]).sum::<f64>() / rs.len() as f64;

    let mut nodes = vec![TreeNode::Leaf { value: mean(rows) }];
    let mut open = vec![Open {
        node: 0,
        rows: rows.to_vec(),
        split: best_split(x, targets, rows, features, min_leaf),
    }];
    while open.len() < max_leaves {
        // earliest-created leaf wins gain ties
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.split.map(|s| (i, s.gain)))
            .fold(None, |acc: Option<(usize, f64)>, (i, g)| match acc {
                Some((_, bg)) if bg >= g => acc,
                _ => Some((i, g)),
            });
        let Some((i, _)) = pick else { break };
        let leaf = open.remove(i);
        let s = leaf.split.expect("picked leaves have a split");
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            leaf.rows.iter().partition(|&&r| x[r][s.fid] <= s.thr);
        let l = nodes.len();
        nodes.push(TreeNode::Leaf { value: mean(&l_rows) });
        nodes.push(TreeNode::Leaf { value: mean(&r_rows) });
        nodes[leaf.node] = TreeNode::Split {
            fid: s.fid + 1,
            thr: s.thr,
            left: l,
            right: l + 1,
        };
        for (node, rs) in [(l, l_rows), (l + 1, r_rows)] {
            let split = best_split(x, targets, &rs, features, min_leaf);
            open.insert(i.min(open.len()), Open { node, rows: rs, split });
        }
    }
    // leaf supports in pre-order
    open.sort_by_key(|o| o.node);
    let tree = RegressionTree {
        nodes: to_preorder(&nodes),
    };
    let mut by_node: Vec<(usize, usize)> = open.iter().map(|o| (o.node, o.rows.len())).collect();
    let order = preorder_leaf_ids(&nodes);
    by_node.sort_by_key(|(n, _)| order.iter().position(|o| o == n));
    let leaf_sse: f64 = open.iter().map(|o| sse(targets, &o.rows)).sum();
    TreeFit {
        leaf_supports: by_node.into_iter().map(|(_, c)| c).collect(),
        sse: leaf_sse,
        root_sse: sse(targets, rows),
        tree,
    }
}

fn preorder_leaf_ids(nodes: &[TreeNode]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        match nodes[i] {
            TreeNode::Leaf { .. } => out.push(i),
            TreeNode::Split { left, right, .. } => {
                stack.push(right);
                stack.push(left);
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct BagFit {
    pub trees: Vec<TreeFit>,
    /// Residual sum of squares on the bag's rows before the first tree and
    /// after every tree.
    pub rss_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForestFit {
    pub model: ForestModel,
    pub bags: Vec<BagFit>,
}

fn fit_bag(x: &[&[f64]], labels: &[f64], d: usize, cfg: &ForestConfig, bag: usize) -> BagFit {
    let n = x.len();
    let mut rng = rng::stream_rng(cfg.seed, &[bag as u64]);
    let mut rows: Vec<usize> = (0..n).collect();
    let take = ((cfg.sub_rate * n as f64).round() as usize).clamp(1, n);
    if take < n {
        rows.shuffle(&mut rng);
        rows.truncate(take);
        rows.sort_unstable();
    }
    let n_feat = ((cfg.feat_rate * d as f64).ceil() as usize).clamp(1, d);

    let mut pred = vec![0.0; n];
    let rss = |pred: &[f64]| -> f64 { rows.iter().map(|&r| (labels[r] - pred[r]).powi(2)).sum() };
    let mut rss_trace = vec![rss(&pred)];
    let mut trees = Vec::with_capacity(cfg.trees_per_bag);
    for t in 0..cfg.trees_per_bag {
        let mut frng = rng::stream_rng(cfg.seed, &[bag as u64, t as u64 + 1]);
        let mut features: Vec<usize> = (0..d).collect();
        if n_feat < d {
            features.shuffle(&mut frng);
            features.truncate(n_feat);
            features.sort_unstable();
        }
        let residual: Vec<f64> = labels.iter().zip(&pred).map(|(y, p)| y - p).collect();
        let fit = fit_tree(x, &residual, &rows, &features, cfg.min_leaf, cfg.max_leaves);
        for &r in &rows {
            pred[r] += cfg.lr * fit.tree.predict(x[r]);
        }
        rss_trace.push(rss(&pred));
        trees.push(fit);
    }
    BagFit { trees, rss_trace }
}

pub fn train_forest(ds: &Dataset, cfg: &ForestConfig) -> Result<ForestFit> {
    cfg.validate()?;
    if ds.num_candidates() == 0 {
        return Err(Error::EmptyDataset);
    }
    let x: Vec<&[f64]> = ds.candidates().map(|c| c.features.as_slice()).collect();
    let labels: Vec<f64> = ds.candidates().map(|c| c.label as f64).collect();
    let d = ds.dim();

    // bags are independent; collect keeps bag order
    let bags: Vec<BagFit> = (0..cfg.bags)
        .into_par_iter()
        .map(|b| fit_bag(&x, &labels, d, cfg, b))
        .collect();
    let model = ForestModel {
        bags: bags
            .iter()
            .map(|b| b.trees.iter().map(|t| t.tree.clone()).collect())
            .collect(),
        lr: cfg.lr,
        dim: d,
    };
    Ok(ForestFit { model, bags })
}
