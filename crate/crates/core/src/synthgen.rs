//! Deterministic synthetic ranking data with a known labeling rule.
//!
//! Every draw comes from [`crate::rng::stream_rng`], so a `GenSpec` and seed pin
//! the dataset bit for bit on every platform.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Candidate, Dataset, QueryGroup, DEFAULT_GROUP_SIZE};
use crate::rng::{self, DEFAULT_SEED};
use crate::textfmt::{fmt_real, fmt_reals};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Relevant iff the hidden linear utility is among the top 3 of the group.
    LinearUtility,
    /// Relevant iff features 1 and 2 share a sign.
    XorNonlinear,
    /// Labels follow one planted feature.
    SingleFeature,
    /// Relevant iff features 1 and 2 are both positive.
    Conjunction,
    /// Labels independent of the features.
    Noise,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::LinearUtility,
        Scenario::XorNonlinear,
        Scenario::SingleFeature,
        Scenario::Conjunction,
        Scenario::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::LinearUtility => "linear-utility",
            Scenario::XorNonlinear => "xor-nonlinear",
            Scenario::SingleFeature => "single-feature",
            Scenario::Conjunction => "conjunction",
            Scenario::Noise => "noise",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario `{s}`")))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub queries: usize,
    pub group_size: usize,
    pub dim: usize,
    pub scenario: Scenario,
    /// Fraction of labels flipped after generation, in `[0, 1)`.
    pub noise: f64,
    /// Grades 0..=2 instead of binary labels (ranked scenarios only).
    pub graded: bool,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            queries: 50,
            group_size: DEFAULT_GROUP_SIZE,
            dim: 64,
            scenario: Scenario::LinearUtility,
            noise: 0.0,
            graded: false,
            seed: DEFAULT_SEED,
        }
    }
}

impl GenSpec {
    fn validate(&self) -> Result<()> {
        if self.queries == 0 {
            return Err(Error::invalid("need at least one query"));
        }
        if self.group_size < 2 {
            return Err(Error::invalid("group size must be at least 2"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if matches!(self.scenario, Scenario::XorNonlinear | Scenario::Conjunction) && self.dim < 2 {
            return Err(Error::invalid(format!("{} needs at least 2 features", self.scenario)));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::invalid("noise rate must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// The labeling rule behind a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelRule {
    Linear { w: Vec<f64> },
    /// 1-based feature ids.
    Xor { a: usize, b: usize },
    Single { fid: usize },
    Conjunction { a: usize, b: usize },
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub spec: GenSpec,
    pub rule: LabelRule,
    /// `(group, candidate)` positions whose label was flipped.
    pub flipped: Vec<(usize, usize)>,
}

impl GroundTruth {
    /// Score that orders every noise-free group perfectly.
    pub fn oracle_score(&self, x: &[f64]) -> f64 {
        let indicator = |b: bool| if b { 1.0 } else { 0.0 };
        match &self.rule {
            LabelRule::Linear { w } => w.iter().zip(x).map(|(a, b)| a * b).sum(),
            LabelRule::Xor { a, b } => indicator(x[a - 1] * x[b - 1] > 0.0),
            LabelRule::Single { fid } => x[fid - 1],
            LabelRule::Conjunction { a, b } => indicator(x[a - 1] > 0.0 && x[b - 1] > 0.0),
            LabelRule::Random => 0.0,
        }
    }

    pub fn oracle_scores(&self, ds: &Dataset) -> Vec<Vec<f64>> {
        ds.groups()
            .iter()
            .map(|g| g.candidates.iter().map(|c| self.oracle_score(&c.features)).collect())
            .collect()
    }

    /// Sidecar text: one `key=value` header line, then the rule parameters.
    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let mut out = format!(
            "scenario={} queries={} group_size={} dim={} noise={} graded={} seed={}\n",
            s.scenario,
            s.queries,
            s.group_size,
            s.dim,
            fmt_real(s.noise),
            s.graded,
            s.seed
        );
        match &self.rule {
            LabelRule::Linear { w } => out.push_str(&format!("w {}\n", fmt_reals(w))),
            LabelRule::Xor { a, b } => out.push_str(&format!("xor fid={a} fid={b}\n")),
            LabelRule::Single { fid } => out.push_str(&format!("planted fid={fid}\n")),
            LabelRule::Conjunction { a, b } => out.push_str(&format!("and fid={a} fid={b}\n")),
            LabelRule::Random => out.push_str("random\n"),
        }
        out.push_str(&format!("flipped={}\n", self.flipped.len()));
        for (g, c) in &self.flipped {
            out.push_str(&format!("flip group={g} index={c}\n"));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn uniform_features(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Labels for the top `min(3, n-1)` positions of `key` (descending, ties by
/// index); the best gets grade 2 in graded mode.
fn rank_labels(key: &[f64], graded: bool) -> Vec<u32> {
    let n = key.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().take(3.min(n - 1)).enumerate() {
        labels[i] = if graded && rank == 0 { 2 } else { 1 };
    }
    labels
}

/// A shuffled 0/1 pattern with at least one of each value.
fn binary_pattern(rng: &mut ChaCha8Rng, n: usize) -> Vec<u32> {
    let ones = rng.random_range(1..n);
    let mut p: Vec<u32> = (0..n).map(|i| u32::from(i < ones)).collect();
    p.shuffle(rng);
    p
}

fn magnitude(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.05..=1.0)
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

pub fn generate(spec: &GenSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let (n, d) = (spec.group_size, spec.dim);
    let mut rule_rng = rng::stream_rng(spec.seed, &[0]);
    let rule = match spec.scenario {
        Scenario::LinearUtility => LabelRule::Linear {
            w: uniform_features(&mut rule_rng, d),
        },
        Scenario::SingleFeature => LabelRule::Single {
            fid: rule_rng.random_range(1..=d),
        },
        Scenario::XorNonlinear => LabelRule::Xor { a: 1, b: 2 },
        Scenario::Conjunction => LabelRule::Conjunction { a: 1, b: 2 },
        Scenario::Noise => LabelRule::Random,
    };

    let mut rng = rng::stream_rng(spec.seed, &[1]);
    let mut groups = Vec::with_capacity(spec.queries);
    for q in 0..spec.queries {
        let qid = q as u64 + 1;
        let mut features: Vec<Vec<f64>> = (0..n).map(|_| uniform_features(&mut rng, d)).collect();
        let labels = match &rule {
            LabelRule::Linear { w } => {
                let util: Vec<f64> = features
                    .iter()
                    .map(|x| w.iter().zip(x).map(|(a, b)| a * b).sum())
                    .collect();
                rank_labels(&util, spec.graded)
            }
            LabelRule::Single { fid } => {
                let key: Vec<f64> = features.iter().map(|x| x[fid - 1]).collect();
                rank_labels(&key, spec.graded)
            }
            LabelRule::Xor { a, b } => {
                let labels = binary_pattern(&mut rng, n);
                for (x, &l) in features.iter_mut().zip(&labels) {
                    let s = sign(&mut rng);
                    x[a - 1] = s * magnitude(&mut rng);
                    x[b - 1] = if l == 1 { s } else { -s } * magnitude(&mut rng);
                }
                labels
            }
            LabelRule::Conjunction { a, b } => {
                let labels = binary_pattern(&mut rng, n);
                for (x, &l) in features.iter_mut().zip(&labels) {
                    let (sa, sb) = if l == 1 {
                        (1.0, 1.0)
                    } else {
                        [(1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)][rng.random_range(0..3)]
                    };
                    x[a - 1] = sa * magnitude(&mut rng);
                    x[b - 1] = sb * magnitude(&mut rng);
                }
                labels
            }
            LabelRule::Random => {
                let key: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                rank_labels(&key, spec.graded)
            }
        };
        groups.push(QueryGroup {
            qid,
            candidates: features
                .into_iter()
                .zip(labels)
                .map(|(features, label)| Candidate {
                    label,
                    qid,
                    features,
                    comment: None,
                })
                .collect(),
        });
    }

    let total = spec.queries * n;
    let n_flip = (spec.noise * total as f64).round() as usize;
    let mut flipped = Vec::new();
    if n_flip > 0 {
        let mut noise_rng = rng::stream_rng(spec.seed, &[2]);
        let mut picks = rand::seq::index::sample(&mut noise_rng, total, n_flip).into_vec();
        picks.sort_unstable();
        for p in picks {
            let (g, c) = (p / n, p % n);
            let cand = &mut groups[g].candidates[c];
            cand.label = u32::from(cand.label == 0);
            flipped.push((g, c));
        }
    }

    let ds = Dataset::new(groups)?;
    Ok((
        ds,
        GroundTruth {
            spec: spec.clone(),
            rule,
            flipped,
        },
    ))
}
