//! Model explanation for boosted ensembles: split-gain feature importance
//! and per-prediction TreeSHAP attributions.
//!
//! Attributions are exact Shapley values of the per-class margin (log-odds)
//! under the path-dependent estimand: when a feature is out of the coalition,
//! the tree routes both ways weighted by the training cover recorded in each
//! node. Exactness is only available pre-softmax, so φ is reported in margin
//! space per class.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dataio::VigilanceState;
use crate::error::{Error, Result};
use crate::features::{remap_to_schema, FeatureMatrix, FeatureVector};
use crate::gbt::{GbtModel, TreeNode};

/// Ensemble-wide split-gain totals per feature.
#[derive(Debug, Clone)]
pub struct GainImportance {
    /// Feature names in schema order.
    pub features: Vec<String>,
    /// Summed gain of every split on the feature.
    pub total_gain: Vec<f64>,
    /// `total_gain` normalized to sum to 1; all zeros when no split exists.
    pub share: Vec<f64>,
    /// True when the model contains no splits at all.
    pub degenerate: bool,
}

/// Sums the recorded gain of every internal node per feature and normalizes
/// to shares. A model with no splits yields all-zero shares, flagged.
pub fn gain_importance(model: &GbtModel) -> GainImportance {
    let d = model.schema.len();
    let mut total_gain = vec![0.0; d];
    for tree in &model.trees {
        tree.root.for_each_split(&mut |feature, gain| {
            total_gain[feature] += gain;
        });
    }
    let total: f64 = total_gain.iter().sum();
    let degenerate = total <= 0.0;
    let share = if degenerate {
        vec![0.0; d]
    } else {
        total_gain.iter().map(|g| g / total).collect()
    };
    GainImportance {
        features: model.schema.names().to_vec(),
        total_gain,
        share,
        degenerate,
    }
}

/// Writes the importance CSV contract: `feature,total_gain,share`.
pub fn save_importance_csv(importance: &GainImportance, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "feature,total_gain,share")?;
    for ((name, gain), share) in importance
        .features
        .iter()
        .zip(&importance.total_gain)
        .zip(&importance.share)
    {
        writeln!(w, "{name},{gain},{share}")?;
    }
    w.flush()?;
    Ok(())
}

/// Exact Shapley attributions for one input.
#[derive(Debug, Clone)]
pub struct ShapValues {
    /// Per-class expected margin (base score plus each tree's cover-weighted
    /// leaf mean).
    pub base: Vec<f64>,
    /// `phi[class][feature]` margin contributions;
    /// `base[k] + Σ_j phi[k][j]` equals the predicted margin for class `k`.
    pub phi: Vec<Vec<f64>>,
}

/// Computes per-class TreeSHAP values for one input.
pub fn tree_shap(model: &GbtModel, x: &FeatureVector) -> Result<ShapValues> {
    let row = remap_to_schema(x, &model.schema)?;
    tree_shap_row(model, row.values())
}

/// [`tree_shap`] for a row already in the model's column order.
pub fn tree_shap_row(model: &GbtModel, row: &[f64]) -> Result<ShapValues> {
    let k_classes = model.n_classes();
    let d = model.schema.len();
    let mut base = model.base_score.clone();
    let mut phi = vec![vec![0.0; d]; k_classes];
    for tree in &model.trees {
        validate_covers(&tree.root)?;
        base[tree.class] += tree.root.expectation();
        shap_recurse(
            &tree.root,
            row,
            &mut phi[tree.class],
            Vec::with_capacity(8),
            1.0,
            1.0,
            None,
        );
    }
    Ok(ShapValues { base, phi })
}

fn validate_covers(node: &TreeNode) -> Result<()> {
    if let TreeNode::Split { left, right, cover, .. } = node {
        if !(*cover > 0.0) || !(left.cover() + right.cover() > 0.0) {
            return Err(Error::Capability(
                "model lacks positive cover counts; re-train or re-save with this version"
                    .into(),
            ));
        }
        validate_covers(left)?;
        validate_covers(right)?;
    }
    Ok(())
}

/// One step of the feature path threaded through the recursion.
#[derive(Debug, Clone, Copy)]
struct PathElement {
    /// None marks the root element.
    feature: Option<usize>,
    /// Fraction of cover flowing through when the feature is excluded.
    zero_fraction: f64,
    /// 1 when this element lies on the input's own path, else 0.
    one_fraction: f64,
    /// Permutation weight of subsets with this many "one" entries.
    pweight: f64,
}

fn extend_path(
    path: &mut Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if path.is_empty() { 1.0 } else { 0.0 },
    });
    let depth = path.len() - 1;
    for i in (0..depth).rev() {
        path[i + 1].pweight +=
            one_fraction * path[i].pweight * (i + 1) as f64 / (depth + 1) as f64;
        path[i].pweight =
            zero_fraction * path[i].pweight * (depth - i) as f64 / (depth + 1) as f64;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut next = path[depth].pweight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next * (depth + 1) as f64 / ((i + 1) as f64 * one_fraction);
            next = tmp - path[i].pweight * zero_fraction * (depth - i) as f64 / (depth + 1) as f64;
        } else {
            path[i].pweight =
                path[i].pweight * (depth + 1) as f64 / (zero_fraction * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut next = path[depth].pweight;
    let mut total = 0.0;
    if one_fraction != 0.0 {
        for i in (0..depth).rev() {
            let tmp = next / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next = path[i].pweight - tmp * zero_fraction * (depth - i) as f64;
        }
    } else {
        for i in (0..depth).rev() {
            total += path[i].pweight / (zero_fraction * (depth - i) as f64);
        }
    }
    total * (depth + 1) as f64
}

fn shap_recurse(
    node: &TreeNode,
    row: &[f64],
    phi: &mut [f64],
    mut path: Vec<PathElement>,
    parent_zero: f64,
    parent_one: f64,
    parent_feature: Option<usize>,
) {
    extend_path(&mut path, parent_zero, parent_one, parent_feature);
    match node {
        TreeNode::Leaf { weight, .. } => {
            for i in 1..path.len() {
                let w = unwound_path_sum(&path, i);
                let el = &path[i];
                if let Some(feature) = el.feature {
                    phi[feature] += w * (el.one_fraction - el.zero_fraction) * weight;
                }
            }
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            cover,
            ..
        } => {
            let go_left = row[*feature] < *threshold;
            let (hot, cold) = if go_left {
                (left, right)
            } else {
                (right, left)
            };
            let hot_zero = hot.cover() / cover;
            let cold_zero = cold.cover() / cover;

            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(i) = (1..path.len()).find(|&i| path[i].feature == Some(*feature)) {
                incoming_zero = path[i].zero_fraction;
                incoming_one = path[i].one_fraction;
                unwind_path(&mut path, i);
            }

            shap_recurse(
                hot,
                row,
                phi,
                path.clone(),
                hot_zero * incoming_zero,
                incoming_one,
                Some(*feature),
            );
            shap_recurse(
                cold,
                row,
                phi,
                path,
                cold_zero * incoming_zero,
                0.0,
                Some(*feature),
            );
        }
    }
}

/// One long-form row of the beeswarm table.
#[derive(Debug, Clone)]
pub struct ShapTableRow {
    pub row: usize,
    pub feature: String,
    pub feature_value: f64,
    pub class: VigilanceState,
    pub phi: f64,
}

/// Plot-ready SHAP summary: long-form rows plus a mean-|φ| feature ranking.
#[derive(Debug, Clone)]
pub struct ShapSummary {
    pub rows: Vec<ShapTableRow>,
    /// `(feature, mean |φ| over rows and classes)`, descending.
    pub ranking: Vec<(String, f64)>,
}

/// Computes SHAP values for every row of `x` and assembles the beeswarm
/// table: one entry per (row, feature, class), plus the mean-|φ| ranking.
pub fn shap_summary(model: &GbtModel, x: &FeatureMatrix) -> Result<ShapSummary> {
    if x.n_rows() == 0 {
        return Err(Error::InsufficientData("no rows to explain".into()));
    }
    let mapping = model.resolve_columns(x.schema())?;
    let d = model.schema.len();
    let names = model.schema.names();
    let mut rows = Vec::with_capacity(x.n_rows() * d * model.n_classes());
    let mut abs_sum = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    for (row_id, row) in x.rows().iter().enumerate() {
        for (dst, &src) in scratch.iter_mut().zip(&mapping) {
            *dst = row[src];
        }
        let shap = tree_shap_row(model, &scratch)?;
        for (class_idx, phi_class) in shap.phi.iter().enumerate() {
            let class = VigilanceState::from_code(class_idx)?;
            for (j, &phi) in phi_class.iter().enumerate() {
                abs_sum[j] += phi.abs();
                rows.push(ShapTableRow {
                    row: row_id,
                    feature: names[j].clone(),
                    feature_value: scratch[j],
                    class,
                    phi,
                });
            }
        }
    }
    let denom = (x.n_rows() * model.n_classes()) as f64;
    let mut ranking: Vec<(String, f64)> = names
        .iter()
        .cloned()
        .zip(abs_sum.iter().map(|s| s / denom))
        .collect();
    ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite ranking"));
    Ok(ShapSummary { rows, ranking })
}

/// Writes the SHAP long-form CSV contract:
/// `row,feature,feature_value,class,phi`.
pub fn save_shap_csv(summary: &ShapSummary, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "row,feature,feature_value,class,phi")?;
    for r in &summary.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.row, r.feature, r.feature_value, r.class, r.phi
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the mean-|φ| ranking CSV: `feature,mean_abs_phi,rank`.
pub fn save_shap_ranking_csv(summary: &ShapSummary, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "feature,mean_abs_phi,rank")?;
    for (rank, (feature, mean_abs)) in summary.ranking.iter().enumerate() {
        writeln!(w, "{feature},{mean_abs},{}", rank + 1)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSchema;
    use crate::gbt::{ClassTree, GbtConfig, GbtModel};
    use approx::assert_relative_eq;

    fn schema(d: usize) -> FeatureSchema {
        FeatureSchema::custom((0..d).map(|i| format!("f{i}")).collect()).unwrap()
    }

    fn leaf(weight: f64, cover: f64) -> TreeNode {
        TreeNode::Leaf { weight, cover }
    }

    fn split(
        feature: usize,
        threshold: f64,
        gain: f64,
        left: TreeNode,
        right: TreeNode,
    ) -> TreeNode {
        let cover = left.cover() + right.cover();
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
            default_left: true,
            gain,
            cover,
        }
    }

    fn model_with_trees(d: usize, trees: Vec<ClassTree>) -> GbtModel {
        GbtModel::from_parts(GbtConfig::default(), vec![0.0; 3], schema(d), trees).unwrap()
    }

    #[test]
    fn single_split_gets_full_share() {
        let tree = split(2, 0.5, 7.0, leaf(-1.0, 5.0), leaf(1.0, 5.0));
        let model = model_with_trees(4, vec![ClassTree { round: 0, class: 0, root: tree }]);
        let imp = gain_importance(&model);
        assert_eq!(imp.share, vec![0.0, 0.0, 1.0, 0.0]);
        assert!(!imp.degenerate);
    }

    #[test]
    fn zero_round_model_is_degenerate() {
        let model = model_with_trees(4, vec![]);
        let imp = gain_importance(&model);
        assert!(imp.degenerate);
        assert_eq!(imp.share, vec![0.0; 4]);
    }

    #[test]
    fn gain_shares_are_proportional() {
        let t0 = split(0, 0.5, 3.0, leaf(-1.0, 2.0), leaf(1.0, 2.0));
        let t1 = split(1, 0.5, 1.0, leaf(-0.5, 2.0), leaf(0.5, 2.0));
        let model = model_with_trees(
            2,
            vec![
                ClassTree { round: 0, class: 0, root: t0 },
                ClassTree { round: 0, class: 1, root: t1 },
            ],
        );
        let imp = gain_importance(&model);
        assert_relative_eq!(imp.share[0], 0.75, epsilon = 1e-12);
        assert_relative_eq!(imp.share[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn zero_round_shap_is_all_base() {
        let model = model_with_trees(3, vec![]);
        let x = FeatureVector::new(vec![0.0; 3], schema(3)).unwrap();
        let shap = tree_shap(&model, &x).unwrap();
        assert_eq!(shap.base, vec![0.0; 3]);
        assert!(shap.phi.iter().all(|p| p.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn depth_one_tree_matches_hand_shapley() {
        // Split on f1 at 0.5, covers 30/70, leaves -2 / 4.
        let tree = split(1, 0.5, 1.0, leaf(-2.0, 30.0), leaf(4.0, 70.0));
        let model = model_with_trees(3, vec![ClassTree { round: 0, class: 0, root: tree }]);
        let x = FeatureVector::new(vec![9.0, 0.2, -3.0], schema(3)).unwrap();
        let shap = tree_shap(&model, &x).unwrap();

        // Expectation = 0.3·(−2) + 0.7·4 = 2.2; the input goes left (−2).
        // Only f1 participates: φ = v(x) − E = −4.2.
        assert_relative_eq!(shap.base[0], 2.2, epsilon = 1e-12);
        assert_relative_eq!(shap.phi[0][1], -4.2, epsilon = 1e-12);
        assert_eq!(shap.phi[0][0], 0.0);
        assert_eq!(shap.phi[0][2], 0.0);
        // Local accuracy.
        let margin = model.predict_margin(&x).unwrap()[0];
        assert_relative_eq!(shap.base[0] + shap.phi[0].iter().sum::<f64>(), margin, epsilon = 1e-9);
    }

    #[test]
    fn features_absent_from_trees_have_zero_phi() {
        let tree = split(
            0,
            0.5,
            1.0,
            split(2, 1.5, 0.5, leaf(-1.0, 10.0), leaf(0.0, 10.0)),
            leaf(1.0, 20.0),
        );
        let model = model_with_trees(5, vec![ClassTree { round: 0, class: 1, root: tree }]);
        let x = FeatureVector::new(vec![0.1, 99.0, 2.0, -1.0, 7.0], schema(5)).unwrap();
        let shap = tree_shap(&model, &x).unwrap();
        assert_eq!(shap.phi[1][1], 0.0);
        assert_eq!(shap.phi[1][3], 0.0);
        assert_eq!(shap.phi[1][4], 0.0);
    }

    #[test]
    fn missing_covers_raise_capability_error() {
        let tree = split(0, 0.5, 1.0, leaf(-1.0, 0.0), leaf(1.0, 0.0));
        let model = model_with_trees(2, vec![ClassTree { round: 0, class: 0, root: tree }]);
        let x = FeatureVector::new(vec![0.0, 0.0], schema(2)).unwrap();
        assert!(matches!(tree_shap(&model, &x), Err(Error::Capability(_))));
    }

    #[test]
    fn summary_has_one_entry_per_feature_class_pair() {
        let tree = split(0, 0.5, 1.0, leaf(-1.0, 5.0), leaf(1.0, 5.0));
        let model = model_with_trees(4, vec![ClassTree { round: 0, class: 0, root: tree }]);
        let x = FeatureMatrix::new(schema(4), vec![vec![0.0, 1.0, 2.0, 3.0]]).unwrap();
        let summary = shap_summary(&model, &x).unwrap();
        assert_eq!(summary.rows.len(), 4 * 3);
        // Ranking is a permutation of the features.
        let mut names: Vec<&str> = summary.ranking.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        assert_eq!(names, vec!["f0", "f1", "f2", "f3"]);
        assert_eq!(summary.ranking[0].0, "f0");
    }
}
