//! Random forests: a Gini classifier for hire probabilities and an MSE
//! regressor for salaries.
//!
//! Trees are grown on bootstrap resamples with per-split feature
//! subsampling. Each tree draws from its own seed derived from
//! `ForestParams::seed` and the tree index, so fitting runs in parallel and
//! still yields the same forest on every run.

mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tree::DecisionTree;
use tree::{fit_tree, Criterion, GrowParams};

use crate::rng::{indexed_seed, rng_from_seed};

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("cannot fit a forest on an empty dataset")]
    EmptyDataset,
    #[error("{rows} feature rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("row has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("classification labels must be 0 or 1")]
    BadLabel,
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesPerSplit {
    /// ceil(sqrt(d)) for classification, ceil(d/3) for regression.
    Auto,
    All,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split. Serialised
    /// as the string "none" so that it survives formats without nulls.
    #[serde(with = "depth_serde")]
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    /// Supplied by the caller at run time; not part of the serialised form.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: Some(12),
            min_samples_leaf: 5,
            features_per_split: FeaturesPerSplit::Auto,
            bootstrap: true,
            seed: 0,
        }
    }
}

mod depth_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Depth {
        Limit(usize),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(d) => Depth::Limit(*d),
            None => Depth::Word("none".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        match Depth::deserialize(d)? {
            Depth::Limit(n) => Ok(Some(n)),
            Depth::Word(w) if w == "none" => Ok(None),
            Depth::Word(w) => Err(serde::de::Error::custom(format!(
                "max_depth must be an integer or \"none\", got \"{w}\""
            ))),
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        let bad = |m: &str| Err(ForestError::InvalidParams(m.to_owned()));
        if self.n_trees == 0 {
            return bad("n_trees must be >= 1");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be >= 1");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be >= 1");
        }
        if self.features_per_split == FeaturesPerSplit::Fixed(0) {
            return bad("features_per_split must be >= 1");
        }
        Ok(())
    }

    fn resolve_features(&self, d: usize, criterion: Criterion) -> usize {
        let m = match self.features_per_split {
            FeaturesPerSplit::All => d,
            FeaturesPerSplit::Fixed(m) => m,
            FeaturesPerSplit::Auto => match criterion {
                Criterion::Gini => (d as f64).sqrt().ceil() as usize,
                Criterion::Mse => d.div_ceil(3),
            },
        };
        m.clamp(1, d)
    }
}

fn check_inputs(rows: &[Vec<f64>], targets: &[f64]) -> Result<usize, ForestError> {
    if rows.is_empty() {
        return Err(ForestError::EmptyDataset);
    }
    if rows.len() != targets.len() {
        return Err(ForestError::LengthMismatch {
            rows: rows.len(),
            targets: targets.len(),
        });
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(ForestError::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    for r in rows {
        if r.len() != d {
            return Err(ForestError::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(ForestError::NonFinite);
        }
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(ForestError::NonFinite);
    }
    Ok(d)
}

fn fit_trees(
    rows: &[Vec<f64>],
    targets: &[f64],
    params: &ForestParams,
    criterion: Criterion,
) -> Result<Vec<DecisionTree>, ForestError> {
    params.validate()?;
    let d = check_inputs(rows, targets)?;
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        features_per_split: params.resolve_features(d, criterion),
    };
    Ok((0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(indexed_seed(params.seed, t as u64));
            fit_tree(rows, targets, criterion, grow, params.bootstrap, &mut rng)
        })
        .collect())
}

fn mean_prediction(trees: &[DecisionTree], row: &[f64]) -> f64 {
    trees.iter().map(|t| t.predict(row)).sum::<f64>() / trees.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestClassifier {
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

impl ForestClassifier {
    /// Fits on binary `labels` (each 0 or 1). A single-class training set is
    /// fine and yields all-leaf trees.
    pub fn fit(rows: &[Vec<f64>], labels: &[f64], params: &ForestParams) -> Result<Self, ForestError> {
        if labels.iter().any(|&l| l != 0.0 && l != 1.0) {
            return Err(ForestError::BadLabel);
        }
        let trees = fit_trees(rows, labels, params, Criterion::Gini)?;
        Ok(Self {
            params: params.clone(),
            n_features: rows[0].len(),
            trees,
        })
    }

    /// Mean positive-class fraction of the leaves `row` lands in.
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64, ForestError> {
        self.check(row)?;
        Ok(self.predict_unchecked(row))
    }

    #[inline]
    pub fn predict_unchecked(&self, row: &[f64]) -> f64 {
        mean_prediction(&self.trees, row)
    }

    fn check(&self, row: &[f64]) -> Result<(), ForestError> {
        if row.len() != self.n_features {
            return Err(ForestError::DimensionMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        Ok(())
    }

    /// Structural check for deserialized models.
    pub fn is_well_formed(&self) -> bool {
        !self.trees.is_empty() && self.trees.iter().all(|t| t.validate_shape())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestRegressor {
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

impl ForestRegressor {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], params: &ForestParams) -> Result<Self, ForestError> {
        let trees = fit_trees(rows, targets, params, Criterion::Mse)?;
        Ok(Self {
            params: params.clone(),
            n_features: rows[0].len(),
            trees,
        })
    }

    pub fn predict_value(&self, row: &[f64]) -> Result<f64, ForestError> {
        if row.len() != self.n_features {
            return Err(ForestError::DimensionMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        Ok(mean_prediction(&self.trees, row))
    }

    pub fn is_well_formed(&self) -> bool {
        !self.trees.is_empty() && self.trees.iter().all(|t| t.validate_shape())
    }
}
