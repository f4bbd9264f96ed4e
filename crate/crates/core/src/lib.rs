//! Learning-to-rank toolkit for community question re-ranking.
//!
//! The crate covers the whole workflow: query-grouped data files, pair
//! generation, five rankers (Ranking SVM, RankBoost, AdaRank, a bagged
//! MART forest and RankNet), IR evaluation metrics, and a two-phase search
//! over the SVM trade-off parameter. A deterministic synthetic generator
//! stands in for real feature files in tests.

pub mod boosting;
pub mod dataset;
mod error;
pub mod forest;
pub mod metrics;
pub mod model;
pub mod pairwise;
pub mod ranknet;
pub mod ranksvm;
pub mod rng;
pub mod synthgen;
pub mod textfmt;
pub mod tuning;

pub use dataset::{Candidate, Dataset, FlatRecord, QueryGroup};
pub use error::{Error, Result};
pub use metrics::{EvaluationReport, Metric, RankedList};
pub use model::{Model, RankerConfig, RankerKind};
pub use pairwise::PairwiseSample;
