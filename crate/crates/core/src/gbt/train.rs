//! Training: exact greedy split search and the boosting loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::{derive_seed, VigilanceState};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

use super::{grad_hess_softmax, softmax, ClassTree, GbtConfig, GbtModel, TreeNode};

/// The best admissible split of one sorted feature column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Loss reduction, already net of γ.
    pub gain: f64,
    pub left_grad: f64,
    pub left_hess: f64,
    pub right_grad: f64,
    pub right_hess: f64,
}

/// Scans the midpoints between consecutive distinct values of a sorted
/// `(value, grad, hess)` column and returns the candidate maximizing
///
/// `gain = ½ [G_L²/(H_L+λ) + G_R²/(H_R+λ) − (G_L+G_R)²/(H_L+H_R+λ)] − γ`
///
/// subject to `gain > 0` and both children meeting `min_child_weight`.
/// Ties keep the lowest threshold; callers scanning features in ascending
/// index order with a strict improvement test get the lowest feature index.
pub fn find_best_split(
    column: &[(f64, f64, f64)],
    feature: usize,
    config: &GbtConfig,
) -> Option<SplitCandidate> {
    if column.len() < 2 {
        return None;
    }
    let (mut total_grad, mut total_hess) = (0.0, 0.0);
    for &(_, g, h) in column {
        total_grad += g;
        total_hess += h;
    }
    let lambda = config.l2;
    let parent_score = total_grad * total_grad / (total_hess + lambda);

    let mut best: Option<SplitCandidate> = None;
    let (mut left_grad, mut left_hess) = (0.0, 0.0);
    for i in 1..column.len() {
        let (prev, g, h) = column[i - 1];
        left_grad += g;
        left_hess += h;
        let value = column[i].0;
        if value <= prev {
            continue; // no boundary between equal values
        }
        let right_grad = total_grad - left_grad;
        let right_hess = total_hess - left_hess;
        if left_hess < config.min_child_weight || right_hess < config.min_child_weight {
            continue;
        }
        let gain = 0.5
            * (left_grad * left_grad / (left_hess + lambda)
                + right_grad * right_grad / (right_hess + lambda)
                - parent_score)
            - config.min_split_loss;
        if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
            best = Some(SplitCandidate {
                feature,
                threshold: (prev + value) / 2.0,
                gain,
                left_grad,
                left_hess,
                right_grad,
                right_hess,
            });
        }
    }
    best
}

/// Per-round training diagnostics.
#[derive(Debug, Clone)]
pub struct GbtTrainLog {
    /// Mean softmax log-loss on the training set: one entry before each
    /// round plus the final value (`n_rounds + 1` entries).
    pub round_losses: Vec<f64>,
    /// Final per-row, per-class margins, exactly as accumulated in training.
    pub final_margins: Vec<Vec<f64>>,
}

/// Trains the boosted ensemble. Deterministic for a fixed `(x, y, config)`:
/// row subsampling draws from a PRNG stream derived per (round, class) and
/// column subsampling per tree.
pub fn train_gbt(
    x: &FeatureMatrix,
    y: &[VigilanceState],
    config: &GbtConfig,
) -> Result<(GbtModel, GbtTrainLog)> {
    config.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::InsufficientData("no training rows".into()));
    }
    if y.len() != n {
        return Err(Error::Input(format!(
            "{} labels for {n} rows",
            y.len()
        )));
    }
    let k_classes = config.n_classes;
    let labels: Vec<usize> = y.iter().map(|s| s.code()).collect();
    if let Some(&bad) = labels.iter().find(|&&c| c >= k_classes) {
        return Err(Error::Input(format!(
            "label code {bad} out of range for {k_classes} classes"
        )));
    }
    for k in 0..k_classes {
        if !labels.contains(&k) {
            log::warn!(
                "class {k} ({}) has no training rows; its trees will only push away",
                VigilanceState::from_code(k).map_or_else(|_| k.to_string(), |s| s.to_string())
            );
        }
    }

    let d = x.n_features();
    let n_rows_sampled = ((config.subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols_sampled = ((config.colsample * d as f64).round() as usize).clamp(1, d);

    let base_score = vec![0.0; k_classes];
    let mut margins = vec![base_score.clone(); n];
    let mut trees = Vec::with_capacity(config.n_rounds * k_classes);
    let mut round_losses = Vec::with_capacity(config.n_rounds + 1);

    let mut grads = vec![0.0; n];
    let mut hessians = vec![0.0; n];

    for round in 0..config.n_rounds {
        let probs: Vec<Vec<f64>> = margins.iter().map(|m| softmax(m)).collect();
        round_losses.push(mean_log_loss(&probs, &labels));

        for class in 0..k_classes {
            for i in 0..n {
                let gh = grad_hess_softmax(&probs[i], labels[i]);
                grads[i] = gh[class].0;
                hessians[i] = gh[class].1;
            }

            let rows = if n_rows_sampled < n {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    config.seed,
                    0x5211 + round as u64,
                    class as u64,
                ));
                sample_without_replacement(n, n_rows_sampled, &mut rng)
            } else {
                (0..n).collect()
            };
            let cols = if n_cols_sampled < d {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    config.seed,
                    0xC011 + round as u64,
                    class as u64,
                ));
                sample_without_replacement(d, n_cols_sampled, &mut rng)
            } else {
                (0..d).collect()
            };

            let root = grow_node(x, &grads, &hessians, &rows, &cols, config, 0);
            for (i, margins_i) in margins.iter_mut().enumerate() {
                margins_i[class] += root.predict(x.row(i));
            }
            trees.push(ClassTree { round, class, root });
        }
    }
    let probs: Vec<Vec<f64>> = margins.iter().map(|m| softmax(m)).collect();
    round_losses.push(mean_log_loss(&probs, &labels));

    let model = GbtModel::from_parts(*config, base_score, x.schema().clone(), trees)?;
    Ok((
        model,
        GbtTrainLog {
            round_losses,
            final_margins: margins,
        },
    ))
}

fn mean_log_loss(probs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| -p[y].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / labels.len() as f64
}

/// First `m` entries of a partial Fisher–Yates pass, sorted for deterministic
/// downstream iteration.
fn sample_without_replacement(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::Rng;
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        indices.swap(i, j);
    }
    indices.truncate(m);
    indices.sort_unstable();
    indices
}

fn grow_node(
    x: &FeatureMatrix,
    grads: &[f64],
    hessians: &[f64],
    rows: &[usize],
    cols: &[usize],
    config: &GbtConfig,
    depth: usize,
) -> TreeNode {
    let grad_sum: f64 = rows.iter().map(|&i| grads[i]).sum();
    let hess_sum: f64 = rows.iter().map(|&i| hessians[i]).sum();
    let leaf = |cover: f64| TreeNode::Leaf {
        weight: -config.eta * grad_sum / (hess_sum + config.l2),
        cover,
    };
    let cover = rows.len() as f64;
    if depth >= config.max_depth || rows.len() < 2 {
        return leaf(cover);
    }

    let mut best: Option<SplitCandidate> = None;
    let mut column: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
    for &feature in cols {
        column.clear();
        column.extend(
            rows.iter()
                .map(|&i| (x.row(i)[feature], grads[i], hessians[i])),
        );
        column.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        if let Some(candidate) = find_best_split(&column, feature, config) {
            // Strict improvement keeps the lowest feature index on gain ties
            // (cols are scanned in ascending order).
            if best.is_none_or(|b| candidate.gain > b.gain) {
                best = Some(candidate);
            }
        }
    }

    let Some(split) = best else {
        return leaf(cover);
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&i| x.row(i)[split.feature] < split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow_node(x, grads, hessians, &left_rows, cols, config, depth + 1)),
        right: Box::new(grow_node(x, grads, hessians, &right_rows, cols, config, depth + 1)),
        default_left: true,
        gain: split.gain,
        cover,
    }
}
