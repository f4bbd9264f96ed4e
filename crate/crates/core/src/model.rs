//! The trained-model union, ranker configuration, and dispatch for training
//! and model files.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::boosting::{self, AdaRankConfig, BoostEnsemble, RankBoostConfig};
use crate::dataset::{Dataset, QueryGroup};
use crate::forest::{self, ForestConfig, ForestModel};
use crate::ranknet::{self, NeuralNet, RankNetConfig};
use crate::ranksvm::{self, Kernel, KernelModel, LinearModel, SvmOptions};
use crate::{Error, Result};

/// Anything that maps a feature vector to a ranking score.
pub trait Scorer {
    fn dim(&self) -> usize;

    /// Scores without checking the dimensionality of `x`.
    fn score_unchecked(&self, x: &[f64]) -> f64;

    fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.score_unchecked(x))
    }

    fn score_group(&self, g: &QueryGroup) -> Result<Vec<f64>> {
        g.candidates.iter().map(|c| self.score(&c.features)).collect()
    }

    fn score_dataset(&self, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
        ds.groups().iter().map(|g| self.score_group(g)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Kernel(KernelModel),
    Boost(BoostEnsemble),
    Forest(ForestModel),
    RankNet(NeuralNet),
}

impl Scorer for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.dim(),
            Model::Kernel(m) => m.dim(),
            Model::Boost(m) => m.dim(),
            Model::Forest(m) => m.dim(),
            Model::RankNet(m) => m.dim(),
        }
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Model::Linear(m) => m.score_unchecked(x),
            Model::Kernel(m) => m.score_unchecked(x),
            Model::Boost(m) => m.score_unchecked(x),
            Model::Forest(m) => m.score_unchecked(x),
            Model::RankNet(m) => m.score_unchecked(x),
        }
    }
}

impl Model {
    pub fn to_text(&self) -> String {
        match self {
            Model::Linear(m) => m.to_text(),
            Model::Kernel(m) => m.to_text(),
            Model::Boost(m) => m.to_text(),
            Model::Forest(m) => m.to_text(),
            Model::RankNet(m) => m.to_text(),
        }
    }

    /// Parses any model file, dispatching on the first header token.
    pub fn from_text(text: &str) -> Result<Model> {
        let header = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .ok_or_else(|| Error::model(1, "empty model file"))?;
        match header.split_whitespace().next() {
            Some("ranksvm") => ranksvm::parse_svm_model(text),
            Some("boost") => BoostEnsemble::from_text(text).map(Model::Boost),
            Some("forest") => ForestModel::from_text(text).map(Model::Forest),
            Some("ranknet") => NeuralNet::from_text(text).map(Model::RankNet),
            Some(other) => Err(Error::model(1, format!("unknown model type `{other}`"))),
            None => Err(Error::model(1, "empty model file")),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Model> {
        Model::from_text(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankerKind {
    RankSvm,
    RankBoost,
    RankNet,
    AdaRank,
    RandomForest,
}

impl RankerKind {
    pub const ALL: [RankerKind; 5] = [
        RankerKind::RankSvm,
        RankerKind::RankBoost,
        RankerKind::RankNet,
        RankerKind::AdaRank,
        RankerKind::RandomForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RankerKind::RankSvm => "ranksvm",
            RankerKind::RankBoost => "rankboost",
            RankerKind::RankNet => "ranknet",
            RankerKind::AdaRank => "adarank",
            RankerKind::RandomForest => "rforest",
        }
    }
}

impl FromStr for RankerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RankerKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown ranker `{s}`")))
    }
}

impl fmt::Display for RankerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Training configuration for one ranker.
#[derive(Debug, Clone, PartialEq)]
pub enum RankerConfig {
    RankSvm { kernel: Kernel, options: SvmOptions },
    RankBoost(RankBoostConfig),
    RankNet(RankNetConfig),
    AdaRank(AdaRankConfig),
    RandomForest(ForestConfig),
}

impl RankerConfig {
    /// The method-comparison settings of each ranker: linear SVM at C = 3,
    /// RankBoost 300 rounds, RankNet 100 epochs at lr 5e-5, AdaRank 500
    /// rounds, and 300 bags of 100 MART trees. `desk_scale` swaps in small
    /// forest and boosting budgets.
    pub fn defaults(kind: RankerKind, dim: usize, seed: u64, desk_scale: bool) -> RankerConfig {
        match kind {
            RankerKind::RankSvm => RankerConfig::RankSvm {
                kernel: Kernel::linear(),
                options: SvmOptions {
                    seed,
                    ..SvmOptions::default()
                },
            },
            RankerKind::RankBoost => {
                let mut cfg = RankBoostConfig::default();
                if desk_scale {
                    cfg.iterations = 50;
                }
                RankerConfig::RankBoost(cfg)
            }
            RankerKind::RankNet => RankerConfig::RankNet(RankNetConfig {
                seed,
                ..RankNetConfig::default()
            }),
            RankerKind::AdaRank => {
                let mut cfg = AdaRankConfig::default();
                if desk_scale {
                    cfg.rounds = 100;
                }
                RankerConfig::AdaRank(cfg)
            }
            RankerKind::RandomForest => {
                let base = if desk_scale {
                    ForestConfig::desk_scale()
                } else {
                    ForestConfig::default()
                };
                RankerConfig::RandomForest(ForestConfig { seed, ..base })
            }
        }
        .with_dim(dim)
    }

    fn with_dim(self, dim: usize) -> RankerConfig {
        match self {
            RankerConfig::RankSvm { kernel, options } => RankerConfig::RankSvm {
                kernel: kernel.resolve_defaults(dim),
                options,
            },
            other => other,
        }
    }

    pub fn kind(&self) -> RankerKind {
        match self {
            RankerConfig::RankSvm { .. } => RankerKind::RankSvm,
            RankerConfig::RankBoost(_) => RankerKind::RankBoost,
            RankerConfig::RankNet(_) => RankerKind::RankNet,
            RankerConfig::AdaRank(_) => RankerKind::AdaRank,
            RankerConfig::RandomForest(_) => RankerKind::RandomForest,
        }
    }
}

/// A trained model plus whether its optimiser reported convergence.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub converged: bool,
}

pub fn train(ds: &Dataset, cfg: &RankerConfig) -> Result<Trained> {
    Ok(match cfg {
        RankerConfig::RankSvm { kernel, options } => {
            if kernel.is_linear() {
                let fit = ranksvm::train_linear(ds, options)?;
                Trained {
                    converged: fit.state.converged,
                    model: Model::Linear(fit.model),
                }
            } else {
                let fit = ranksvm::train_kernel(ds, kernel, options)?;
                Trained {
                    converged: fit.state.converged,
                    model: Model::Kernel(fit.model),
                }
            }
        }
        RankerConfig::RankBoost(c) => Trained {
            model: Model::Boost(boosting::train_rankboost(ds, c)?.ensemble),
            converged: true,
        },
        RankerConfig::AdaRank(c) => Trained {
            model: Model::Boost(boosting::train_adarank(ds, c)?.ensemble),
            converged: true,
        },
        RankerConfig::RankNet(c) => Trained {
            model: Model::RankNet(ranknet::train_ranknet(ds, c)?.net),
            converged: true,
        },
        RankerConfig::RandomForest(c) => Trained {
            model: Model::Forest(forest::train_forest(ds, c)?.model),
            converged: true,
        },
    })
}
