//! Gradient-boosted decision trees with a softmax multiclass objective,
//! trained from scratch by exact greedy split search.
//!
//! Per boosting round, one regression tree is grown per class on the
//! second-order statistics of the softmax log-loss (g = p − 1 for the true class,
//! h = p·(1 − p)); leaf weights are `−G/(H+λ)`, stored pre-scaled by the
//! learning rate so prediction is a plain sum of leaf values over trees.
//! Every internal node records its split gain and cover (training rows that
//! reached it) — those back the importance and TreeSHAP computations.

mod io;
mod train;

pub use io::{load_model, model_from_string, model_to_string, save_model};
pub use train::{find_best_split, train_gbt, GbtTrainLog, SplitCandidate};

use crate::dataio::VigilanceState;
use crate::error::{Error, Result};
use crate::features::{remap_to_schema, FeatureMatrix, FeatureSchema, FeatureVector};

/// Boosting hyperparameters. Defaults follow the optimized configuration:
/// learning rate 0.1, 500 rounds, 0.8 row/column subsampling, γ = 0, λ = 1,
/// seed 42; depth 6 and min_child_weight 1 fill the unstated knobs with the
/// de-facto defaults of reference boosting systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtConfig {
    pub eta: f64,
    pub n_rounds: usize,
    pub max_depth: usize,
    /// Row fraction drawn per (round, class) tree.
    pub subsample: f64,
    /// Feature fraction drawn per tree.
    pub colsample: f64,
    /// Minimum loss reduction to accept a split (γ).
    pub min_split_loss: f64,
    /// Leaf L2 regularization (λ).
    pub l2: f64,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
    pub seed: u64,
    pub n_classes: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            n_rounds: 500,
            max_depth: 6,
            subsample: 0.8,
            colsample: 0.8,
            min_split_loss: 0.0,
            l2: 1.0,
            min_child_weight: 1.0,
            seed: 42,
            n_classes: 3,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Config(format!("eta must be in (0, 1], got {}", self.eta)));
        }
        for (name, v) in [("subsample", self.subsample), ("colsample", self.colsample)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1], got {v}")));
            }
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::Config(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if !(self.min_split_loss >= 0.0) {
            return Err(Error::Config(format!(
                "min_split_loss must be >= 0, got {}",
                self.min_split_loss
            )));
        }
        if !(self.min_child_weight >= 0.0) {
            return Err(Error::Config(format!(
                "min_child_weight must be >= 0, got {}",
                self.min_child_weight
            )));
        }
        if self.n_classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.n_classes
            )));
        }
        Ok(())
    }
}

/// One node of a regression tree. `default_left` is reserved for
/// missing-value routing; inputs with missing values are rejected upstream,
/// so it is always written as `left` in this version.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
        default_left: bool,
        /// Loss reduction realized by this split.
        gain: f64,
        /// Training rows that reached this node.
        cover: f64,
    },
    Leaf {
        /// Margin contribution, already scaled by the learning rate.
        weight: f64,
        cover: f64,
    },
}

impl TreeNode {
    /// Leaf value for a dense feature row (`x[feature] < threshold` → left).
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight, .. } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn cover(&self) -> f64 {
        match self {
            TreeNode::Leaf { cover, .. } | TreeNode::Split { cover, .. } => *cover,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.n_nodes() + right.n_nodes(),
        }
    }

    /// Visits every split node as `(feature, gain)`.
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, f64)) {
        if let TreeNode::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            f(*feature, *gain);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }

    /// Cover-weighted mean of leaf values: the tree's output expectation
    /// under the training distribution.
    pub fn expectation(&self) -> f64 {
        match self {
            TreeNode::Leaf { weight, .. } => *weight,
            TreeNode::Split { left, right, cover, .. } => {
                if *cover <= 0.0 {
                    return 0.0;
                }
                (left.cover() * left.expectation() + right.cover() * right.expectation()) / cover
            }
        }
    }
}

/// One tree of the ensemble, tagged with its boosting round and class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTree {
    pub round: usize,
    pub class: usize,
    pub root: TreeNode,
}

/// A trained boosted ensemble: `n_rounds × n_classes` trees plus the schema
/// and label mapping they were trained against.
#[derive(Debug, Clone)]
pub struct GbtModel {
    pub config: GbtConfig,
    /// Initial per-class margin (0 = uniform prior).
    pub base_score: Vec<f64>,
    pub schema: FeatureSchema,
    pub trees: Vec<ClassTree>,
}

impl GbtModel {
    /// Assembles a model from parts (used by loading and by tests that build
    /// hand-crafted ensembles).
    pub fn from_parts(
        config: GbtConfig,
        base_score: Vec<f64>,
        schema: FeatureSchema,
        trees: Vec<ClassTree>,
    ) -> Result<Self> {
        if base_score.len() != config.n_classes {
            return Err(Error::Input(format!(
                "base_score has {} entries for {} classes",
                base_score.len(),
                config.n_classes
            )));
        }
        for t in &trees {
            if t.class >= config.n_classes {
                return Err(Error::Input(format!(
                    "tree for class {} but model has {} classes",
                    t.class, config.n_classes
                )));
            }
        }
        Ok(Self {
            config,
            base_score,
            schema,
            trees,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    /// The canonical label↔code mapping recorded in serialized models.
    pub fn label_map(&self) -> Vec<(String, usize)> {
        VigilanceState::ALL
            .iter()
            .map(|s| (s.as_str().to_string(), s.code()))
            .collect()
    }

    /// Column mapping from this model's schema into `input`'s column order.
    pub fn resolve_columns(&self, input: &FeatureSchema) -> Result<Vec<usize>> {
        if input == &self.schema {
            return Ok((0..self.schema.len()).collect());
        }
        self.schema
            .names()
            .iter()
            .map(|name| {
                input.position(name).ok_or_else(|| Error::SchemaMismatch {
                    expected: self.schema.id().into(),
                    found: input.id().into(),
                })
            })
            .collect()
    }

    /// Per-class margins for one input (base score plus tree outputs).
    pub fn predict_margin(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        let row = remap_to_schema(x, &self.schema)?;
        Ok(self.margin_for_row(row.values()))
    }

    /// Margins for a row already in this model's column order.
    pub fn margin_for_row(&self, row: &[f64]) -> Vec<f64> {
        let mut margins = self.base_score.clone();
        for t in &self.trees {
            margins[t.class] += t.root.predict(row);
        }
        margins
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        Ok(softmax(&self.predict_margin(x)?))
    }

    pub fn predict_label(&self, x: &FeatureVector) -> Result<VigilanceState> {
        let probs = self.predict_proba(x)?;
        VigilanceState::from_code(argmax(&probs))
    }

    /// Batch margins for a feature matrix (columns remapped by name once).
    pub fn predict_margin_matrix(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        let mapping = self.resolve_columns(x.schema())?;
        let identity = mapping.iter().enumerate().all(|(i, &j)| i == j);
        let mut out = Vec::with_capacity(x.n_rows());
        let mut scratch = vec![0.0; mapping.len()];
        for row in x.rows() {
            let margins = if identity {
                self.margin_for_row(row)
            } else {
                for (dst, &src) in scratch.iter_mut().zip(&mapping) {
                    *dst = row[src];
                }
                self.margin_for_row(&scratch)
            };
            out.push(margins);
        }
        Ok(out)
    }

    pub fn predict_proba_matrix(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .predict_margin_matrix(x)?
            .into_iter()
            .map(|m| softmax(&m))
            .collect())
    }

    pub fn predict_label_matrix(&self, x: &FeatureMatrix) -> Result<Vec<VigilanceState>> {
        self.predict_proba_matrix(x)?
            .into_iter()
            .map(|p| VigilanceState::from_code(argmax(&p)))
            .collect()
    }

    /// One-line description printed when the model is saved.
    pub fn summary(&self) -> String {
        let max_depth = self
            .trees
            .iter()
            .map(|t| t.root.depth())
            .max()
            .unwrap_or(0);
        let labels = self
            .label_map()
            .iter()
            .map(|(name, code)| format!("{name}={code}"))
            .collect::<Vec<_>>()
            .join(" ");
        format!(
            "gbt model: {} trees ({} rounds x {} classes), depth <= {max_depth}, {} features ({}), labels {labels}",
            self.trees.len(),
            self.config.n_rounds,
            self.config.n_classes,
            self.schema.len(),
            self.schema.id(),
        )
    }
}

/// Numerically stable softmax (max subtraction); sums to 1 within 1e-12.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Per-class gradient/hessian of the softmax log-loss at `probs` for a row
/// whose true class is `true_class`: `g = p − 1[k=true]`, `h = p(1−p)`.
pub fn grad_hess_softmax(probs: &[f64], true_class: usize) -> Vec<(f64, f64)> {
    probs
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let g = if k == true_class { p - 1.0 } else { p };
            (g, p * (1.0 - p))
        })
        .collect()
}

/// Index of the maximum value; ties break toward the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
