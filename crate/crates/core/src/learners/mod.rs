//! Tree ensembles grown from scratch: random forest, SAMME AdaBoost and
//! Newton-boosted softmax trees.

mod adaboost;
mod boost;
mod forest;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adaboost::fit_adaboost;
pub use boost::{
    cross_entropy, fit_gradient_boost, fit_gradient_boost_traced, softmax, softmax_grad_hess,
};
pub use forest::{fit_random_forest, tree_rng};
pub use tree::{
    argmax, fit_newton_tree, fit_tree, leaf_weight, split_gain, sqrt_features, DecisionTree, Node,
    TreeParams,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training set is empty")]
    Empty,
    #[error("features, labels and weights differ in length")]
    LengthMismatch,
    #[error("row {row} has {found} features, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite feature value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("label {label} at row {row} is outside 0..{n_classes}")]
    InvalidLabel {
        row: usize,
        label: usize,
        n_classes: usize,
    },
    #[error("sample weights must be finite, non-negative and not all zero")]
    BadWeights,
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported model format version {0}")]
    Version(u32),
}

/// Feature rows with class labels in `0..n_classes` and per-row weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    n_classes: usize,
    weights: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>, n_classes: usize) -> Result<Self, LearnError> {
        if x.is_empty() {
            return Err(LearnError::Empty);
        }
        if x.len() != y.len() {
            return Err(LearnError::LengthMismatch);
        }
        let dim = x[0].len();
        for (row, r) in x.iter().enumerate() {
            if r.len() != dim {
                return Err(LearnError::DimensionMismatch {
                    row,
                    expected: dim,
                    found: r.len(),
                });
            }
            if let Some(column) = r.iter().position(|v| !v.is_finite()) {
                return Err(LearnError::NonFinite { row, column });
            }
        }
        if let Some(row) = y.iter().position(|&l| l >= n_classes) {
            return Err(LearnError::InvalidLabel {
                row,
                label: y[row],
                n_classes,
            });
        }
        let weights = vec![1.0; x.len()];
        Ok(Self {
            x,
            y,
            n_classes,
            weights,
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self, LearnError> {
        if weights.len() != self.x.len() {
            return Err(LearnError::LengthMismatch);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || !weights.iter().any(|w| *w > 0.0) {
            return Err(LearnError::BadWeights);
        }
        self.weights = weights;
        Ok(self)
    }

    /// Scales weights so every present class carries the same total.
    pub fn with_balanced_classes(mut self) -> Self {
        let mut totals = vec![0.0; self.n_classes];
        for (&y, &w) in self.y.iter().zip(&self.weights) {
            totals[y] += w;
        }
        let present = totals.iter().filter(|t| **t > 0.0).count() as f64;
        let grand: f64 = totals.iter().sum();
        for (&y, w) in self.y.iter().zip(self.weights.iter_mut()) {
            *w *= grand / (present * totals[y]);
        }
        self
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.x[0].len()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn positive(name: &str, v: usize) -> Result<(), LearnError> {
    if v == 0 {
        return Err(LearnError::InvalidParameter(format!("{name} must be at least 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub feature_subsample: bool,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        Self {
            n_trees: 500,
            max_depth: 12,
            min_leaf: 2,
            bootstrap: true,
            feature_subsample: true,
        }
    }
}

impl RandomForestParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        positive("n_trees", self.n_trees)?;
        positive("min_leaf", self.min_leaf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaBoostParams {
    pub n_rounds: usize,
    pub stump_depth: usize,
    pub learning_rate: f64,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            stump_depth: 2,
            learning_rate: 0.5,
        }
    }
}

impl AdaBoostParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        positive("n_rounds", self.n_rounds)?;
        positive("stump_depth", self.stump_depth)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LearnError::InvalidParameter("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientBoostParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_leaf: usize,
}

impl Default for GradientBoostParams {
    fn default() -> Self {
        Self {
            n_rounds: 300,
            max_depth: 4,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_leaf: 1,
        }
    }
}

impl GradientBoostParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        positive("n_rounds", self.n_rounds)?;
        positive("min_leaf", self.min_leaf)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LearnError::InvalidParameter("learning_rate must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0) {
            return Err(LearnError::InvalidParameter("lambda and gamma must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    Adaboost,
    GradientBoost,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::RandomForest, ModelKind::Adaboost, ModelKind::GradientBoost];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "random_forest",
            ModelKind::Adaboost => "adaboost",
            ModelKind::GradientBoost => "gradient_boost",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown model kind `{s}`; expected random_forest, adaboost or gradient_boost"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparams {
    RandomForest(RandomForestParams),
    Adaboost(AdaBoostParams),
    GradientBoost(GradientBoostParams),
}

impl Hyperparams {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparams::RandomForest(_) => ModelKind::RandomForest,
            Hyperparams::Adaboost(_) => ModelKind::Adaboost,
            Hyperparams::GradientBoost(_) => ModelKind::GradientBoost,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTree {
    pub tree: DecisionTree,
    pub weight: f64,
    /// Score stream a boosting tree adds to; `None` for class-voting trees.
    pub class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub format_version: u32,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub n_classes: usize,
    pub n_features: usize,
    pub trees: Vec<WeightedTree>,
}

impl EnsembleModel {
    pub fn kind(&self) -> ModelKind {
        self.hyperparams.kind()
    }

    fn check_dim(&self, row: usize, x: &[f64]) -> Result<(), LearnError> {
        if x.len() != self.n_features {
            return Err(LearnError::DimensionMismatch {
                row,
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn proba_row(&self, x: &[f64]) -> Vec<f64> {
        let k = self.n_classes;
        match self.kind() {
            ModelKind::RandomForest => {
                let mut p = vec![0.0; k];
                for t in &self.trees {
                    for (acc, v) in p.iter_mut().zip(t.tree.leaf_value(x)) {
                        *acc += v;
                    }
                }
                let n = self.trees.len() as f64;
                p.iter_mut().for_each(|v| *v /= n);
                p
            }
            ModelKind::Adaboost => {
                let mut votes = vec![0.0; k];
                for t in &self.trees {
                    votes[t.tree.predict_class(x)] += t.weight;
                }
                let total: f64 = votes.iter().sum();
                if total > 0.0 {
                    votes.iter_mut().for_each(|v| *v /= total);
                    votes
                } else {
                    vec![1.0 / k as f64; k]
                }
            }
            ModelKind::GradientBoost => {
                let mut scores = vec![0.0; k];
                for t in &self.trees {
                    if let Some(c) = t.class {
                        scores[c] += t.weight * t.tree.leaf_value(x)[0];
                    }
                }
                softmax(&scores)
            }
        }
    }

    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, LearnError> {
        x.iter()
            .enumerate()
            .map(|(i, row)| {
                self.check_dim(i, row)?;
                Ok(self.proba_row(row))
            })
            .collect()
    }

    /// Argmax of [`predict_proba`](Self::predict_proba), lowest class on ties.
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>, LearnError> {
        Ok(self.predict_proba(x)?.iter().map(|p| argmax(p)).collect())
    }

    pub fn to_json(&self) -> Result<String, LearnError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, LearnError> {
        let m: Self = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnError::Version(m.format_version));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LearnError> {
        if let Some(dir) = path.as_ref().parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LearnError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Fits the ensemble named by `hyperparams`.
pub fn fit(data: &Dataset, hyperparams: &Hyperparams, seed: u64) -> Result<EnsembleModel, LearnError> {
    match hyperparams {
        Hyperparams::RandomForest(p) => fit_random_forest(data, p, seed),
        Hyperparams::Adaboost(p) => fit_adaboost(data, p, seed),
        Hyperparams::GradientBoost(p) => fit_gradient_boost(data, p, seed),
    }
}

/// Three Gaussian blobs in `dim` dimensions, `per_class` points each, for
/// sanity checks of the learners.
pub fn gaussian_blobs(per_class: usize, dim: usize, spread: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).expect("finite spread");
    let mut x = Vec::with_capacity(3 * per_class);
    let mut y = Vec::with_capacity(3 * per_class);
    for class in 0..3 {
        let centre: Vec<f64> = (0..dim)
            .map(|d| if d % 3 == class { 4.0 } else { 0.0 })
            .collect();
        for _ in 0..per_class {
            x.push(centre.iter().map(|c| c + noise.sample(&mut rng)).collect());
            y.push(class);
        }
    }
    (x, y)
}
