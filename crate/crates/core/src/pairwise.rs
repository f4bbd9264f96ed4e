//! Ordered document pairs, the training instances of every pairwise ranker.
//!
//! Pairs never cross queries and are emitted in one orientation only: `u`
//! is always the candidate with the higher label, so the pairwise target is
//! implicitly `+1`.

use crate::dataset::{Dataset, QueryGroup};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseSample {
    pub qid: u64,
    /// Index of the more relevant candidate within its group.
    pub u: usize,
    /// Index of the less relevant candidate within its group.
    pub v: usize,
    /// Distribution mass; 1 on creation.
    pub weight: f64,
}

impl PairwiseSample {
    /// Pairwise label; always +1 after canonicalisation.
    pub const Y: f64 = 1.0;
}

/// One sample per unordered pair with distinct labels, ordered by the
/// lower index first, then the higher index.
pub fn generate_pairs(group: &QueryGroup) -> Vec<PairwiseSample> {
    let c = &group.candidates;
    let mut pairs = Vec::new();
    for a in 0..c.len() {
        for b in a + 1..c.len() {
            let (u, v) = match c[a].label.cmp(&c[b].label) {
                std::cmp::Ordering::Greater => (a, b),
                std::cmp::Ordering::Less => (b, a),
                std::cmp::Ordering::Equal => continue,
            };
            pairs.push(PairwiseSample {
                qid: group.qid,
                u,
                v,
                weight: 1.0,
            });
        }
    }
    pairs
}

/// A pair located inside a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetPair {
    pub group: usize,
    pub sample: PairwiseSample,
}

/// Pairs of every group, in group order.
pub fn dataset_pairs(ds: &Dataset) -> Vec<DatasetPair> {
    ds.groups()
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| {
            generate_pairs(g)
                .into_iter()
                .map(move |sample| DatasetPair { group: gi, sample })
        })
        .collect()
}

/// Fraction of pairs with `score[u] > score[v]`; ties count one half.
pub fn pairwise_accuracy(scores: &[f64], pairs: &[PairwiseSample]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    let mut correct = 0.0;
    for p in pairs {
        let (su, sv) = match (scores.get(p.u), scores.get(p.v)) {
            (Some(&su), Some(&sv)) => (su, sv),
            _ => {
                return Err(Error::invalid(format!(
                    "pair ({}, {}) outside {} scores",
                    p.u,
                    p.v,
                    scores.len()
                )))
            }
        };
        if su > sv {
            correct += 1.0;
        } else if su == sv {
            correct += 0.5;
        }
    }
    Ok(correct / pairs.len() as f64)
}

/// Pairwise accuracy pooled over all pairs of a dataset.
pub fn dataset_pairwise_accuracy(ds: &Dataset, scores: &[Vec<f64>]) -> Result<f64> {
    let mut correct = 0.0;
    let mut total = 0usize;
    for (g, s) in ds.groups().iter().zip(scores) {
        let pairs = generate_pairs(g);
        if !pairs.is_empty() {
            correct += pairwise_accuracy(s, &pairs)? * pairs.len() as f64;
            total += pairs.len();
        }
    }
    if total == 0 {
        return Err(Error::NoPairs);
    }
    Ok(correct / total as f64)
}
