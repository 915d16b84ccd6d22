//! Evaluation: confusion matrix, macro-averaged classification metrics,
//! probability calibration (reliability bins + multiclass Brier score), and
//! cross-validated grid search.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{train_logistic, train_mlp, LogisticConfig, MlpConfig};
use crate::dataio::{derive_seed, VigilanceState};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Standardizer};
use crate::gbt::{argmax, train_gbt, GbtConfig};

/// K×K contingency counts; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    /// Builds from an explicit counts matrix (must be square).
    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|row| row.len() != k) {
            return Err(Error::Input("confusion matrix must be square".into()));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn get(&self, true_class: usize, pred_class: usize) -> usize {
        self.counts[true_class][pred_class]
    }

    /// Label names in row/column order.
    pub fn labels(&self) -> Vec<&'static str> {
        VigilanceState::ALL
            .iter()
            .take(self.k())
            .map(|s| s.as_str())
            .collect()
    }
}

/// Counts prediction outcomes over the three vigilance states.
pub fn confusion(
    y_true: &[VigilanceState],
    y_pred: &[VigilanceState],
) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Input(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let k = VigilanceState::ALL.len();
    let mut counts = vec![vec![0usize; k]; k];
    for (t, p) in y_true.iter().zip(y_pred) {
        counts[t.code()][p.code()] += 1;
    }
    ConfusionMatrix::from_counts(counts)
}

/// Precision/recall/F1 for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy plus per-class and macro-averaged precision/recall/F1.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    // 0/0 → 0 by declared convention (affects macro averages).
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Derives the metrics report from a confusion matrix. Macro scores are the
/// unweighted mean of per-class values; 0/0 ratios resolve to 0.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let k = cm.k();
    let total = cm.total();
    let diagonal: usize = (0..k).map(|i| cm.get(i, i)).sum();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let col: usize = (0..k).map(|r| cm.get(r, c)).sum();
            let row: usize = (0..k).map(|p| cm.get(c, p)).sum();
            let precision = ratio(cm.get(c, c), col);
            let recall = ratio(cm.get(c, c), row);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(f).sum::<f64>() / k as f64
    };
    MetricsReport {
        accuracy: ratio(diagonal, total),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_class,
    }
}

fn validate_simplex(prob_rows: &[Vec<f64>], k: usize) -> Result<()> {
    for (i, row) in prob_rows.iter().enumerate() {
        if row.len() != k {
            return Err(Error::Input(format!(
                "probability row {i} has {} entries, expected {k}",
                row.len()
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < -1e-9) {
            return Err(Error::Input(format!(
                "probability row {i} is off the simplex (sum {sum})"
            )));
        }
    }
    Ok(())
}

/// Multiclass Brier score: mean over samples of `Σ_k (p_k − 1[k=true])²`.
pub fn brier(prob_rows: &[Vec<f64>], y_true: &[VigilanceState]) -> Result<f64> {
    if prob_rows.len() != y_true.len() {
        return Err(Error::Input(format!(
            "{} probability rows vs {} labels",
            prob_rows.len(),
            y_true.len()
        )));
    }
    if prob_rows.is_empty() {
        return Err(Error::InsufficientData("no samples to score".into()));
    }
    validate_simplex(prob_rows, VigilanceState::ALL.len())?;
    let total: f64 = prob_rows
        .iter()
        .zip(y_true)
        .map(|(row, t)| {
            row.iter()
                .enumerate()
                .map(|(k, &p)| {
                    let target = if k == t.code() { 1.0 } else { 0.0 };
                    (p - target) * (p - target)
                })
                .sum::<f64>()
        })
        .sum();
    Ok(total / prob_rows.len() as f64)
}

/// One equal-width confidence bin of the reliability diagram.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_confidence: f64,
    /// Fraction of the bin's samples whose argmax matched the truth.
    pub accuracy: f64,
}

/// Reliability bins plus the headline calibration numbers.
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub bins: Vec<CalibrationBin>,
    /// Max |mean confidence − accuracy| over nonempty bins.
    pub max_deviation: f64,
    pub brier: f64,
}

/// Bins samples by top-class confidence (`conf = max_k p_k`) into `n_bins`
/// equal-width bins (`conf = 1` lands in the last bin) and reports per-bin
/// empirical accuracy, the maximum diagonal deviation, and the Brier score.
pub fn reliability(
    prob_rows: &[Vec<f64>],
    y_true: &[VigilanceState],
    n_bins: usize,
) -> Result<CalibrationReport> {
    if n_bins == 0 {
        return Err(Error::Config("need at least one bin".into()));
    }
    let brier_score = brier(prob_rows, y_true)?;
    let mut counts = vec![0usize; n_bins];
    let mut conf_sums = vec![0.0; n_bins];
    let mut correct = vec![0usize; n_bins];
    for (row, t) in prob_rows.iter().zip(y_true) {
        let pred = argmax(row);
        let conf = row[pred];
        let bin = ((conf * n_bins as f64).floor() as usize).min(n_bins - 1);
        counts[bin] += 1;
        conf_sums[bin] += conf;
        if pred == t.code() {
            correct[bin] += 1;
        }
    }
    let width = 1.0 / n_bins as f64;
    let mut max_deviation = 0.0f64;
    let bins: Vec<CalibrationBin> = (0..n_bins)
        .map(|b| {
            let count = counts[b];
            let mean_confidence = if count > 0 {
                conf_sums[b] / count as f64
            } else {
                0.0
            };
            let accuracy = ratio(correct[b], count);
            if count > 0 {
                max_deviation = max_deviation.max((mean_confidence - accuracy).abs());
            }
            CalibrationBin {
                lo: b as f64 * width,
                hi: (b + 1) as f64 * width,
                count,
                mean_confidence,
                accuracy,
            }
        })
        .collect();
    Ok(CalibrationReport {
        bins,
        max_deviation,
        brier: brier_score,
    })
}

/// Renders the aligned text table of a metrics report.
pub fn metrics_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("accuracy        {:.4}\n", report.accuracy));
    out.push_str("class   precision  recall     f1\n");
    for (state, m) in VigilanceState::ALL.iter().zip(&report.per_class) {
        out.push_str(&format!(
            "{:<7} {:<10.4} {:<10.4} {:.4}\n",
            state.as_str(),
            m.precision,
            m.recall,
            m.f1
        ));
    }
    out.push_str(&format!(
        "macro   {:<10.4} {:<10.4} {:.4}\n",
        report.macro_precision, report.macro_recall, report.macro_f1
    ));
    out
}

/// Writes the metrics CSV: per-class rows plus a macro row and accuracy.
pub fn save_metrics_csv(report: &MetricsReport, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "class,precision,recall,f1,accuracy")?;
    for (state, m) in VigilanceState::ALL.iter().zip(&report.per_class) {
        writeln!(w, "{},{},{},{},", state.as_str(), m.precision, m.recall, m.f1)?;
    }
    writeln!(
        w,
        "macro,{},{},{},{}",
        report.macro_precision, report.macro_recall, report.macro_f1, report.accuracy
    )?;
    w.flush()?;
    Ok(())
}

/// Writes the reliability-bin CSV contract:
/// `bin_lo,bin_hi,count,mean_conf,accuracy`.
pub fn save_reliability_csv(report: &CalibrationReport, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "bin_lo,bin_hi,count,mean_conf,accuracy")?;
    for b in &report.bins {
        writeln!(
            w,
            "{},{},{},{},{}",
            b.lo, b.hi, b.count, b.mean_confidence, b.accuracy
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Model family trained inside cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Gbt,
    Logistic,
    Mlp,
}

impl ModelFamily {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "gbt" => Ok(ModelFamily::Gbt),
            "logistic" => Ok(ModelFamily::Logistic),
            "mlp" => Ok(ModelFamily::Mlp),
            other => Err(Error::Config(format!(
                "unknown model family `{other}` (expected gbt/logistic/mlp)"
            ))),
        }
    }
}

/// Named hyperparameter lists expanded into a full Cartesian grid.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub params: Vec<(String, Vec<f64>)>,
    pub folds: usize,
    pub seed: u64,
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "cross-validation needs >= 2 folds, got {}",
                self.folds
            )));
        }
        if self.params.iter().any(|(_, values)| values.is_empty()) {
            return Err(Error::Config("empty value list in grid".into()));
        }
        Ok(())
    }

    /// Expands the Cartesian product in declaration order (last key varies
    /// fastest). An empty parameter list yields one default configuration.
    pub fn expand(&self) -> Vec<Vec<(String, f64)>> {
        let mut combos: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for (name, values) in &self.params {
            let mut next = Vec::with_capacity(combos.len() * values.len());
            for combo in &combos {
                for &v in values {
                    let mut c = combo.clone();
                    c.push((name.clone(), v));
                    next.push(c);
                }
            }
            combos = next;
        }
        combos
    }
}

/// One ranked grid-search row.
#[derive(Debug, Clone)]
pub struct CvResult {
    /// 1-based rank after sorting.
    pub rank: usize,
    /// Position in grid expansion order (ties resolve by this).
    pub config_index: usize,
    pub params: Vec<(String, f64)>,
    pub mean_macro_f1: f64,
    pub std_macro_f1: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub fold_macro_f1: Vec<f64>,
    pub fold_accuracy: Vec<f64>,
}

/// Stratified k-fold assignment: per class, indices are shuffled by the
/// seeded PRNG and dealt round-robin. Errors when any class has fewer
/// members than folds.
pub fn stratified_folds(
    y: &[VigilanceState],
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let mut assignment = vec![Vec::new(); folds];
    for state in VigilanceState::ALL {
        let mut idx: Vec<usize> = y
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == state)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < folds {
            return Err(Error::Stratification(format!(
                "class {} has {} samples, fewer than {folds} folds",
                state,
                idx.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, state.code() as u64, 2));
        idx.shuffle(&mut rng);
        for (i, sample) in idx.into_iter().enumerate() {
            assignment[i % folds].push(sample);
        }
    }
    for fold in assignment.iter_mut() {
        fold.sort_unstable();
    }
    Ok(assignment)
}

fn apply_gbt_params(params: &[(String, f64)], seed: u64) -> Result<GbtConfig> {
    let mut config = GbtConfig {
        seed,
        ..GbtConfig::default()
    };
    for (key, value) in params {
        match key.as_str() {
            "eta" => config.eta = *value,
            "rounds" => config.n_rounds = *value as usize,
            "max_depth" => config.max_depth = *value as usize,
            "subsample" => config.subsample = *value,
            "colsample" => config.colsample = *value,
            "gamma" => config.min_split_loss = *value,
            "lambda" => config.l2 = *value,
            "min_child_weight" => config.min_child_weight = *value,
            "seed" => config.seed = *value as u64,
            other => {
                return Err(Error::Config(format!(
                    "unknown gbt hyperparameter `{other}`"
                )))
            }
        }
    }
    Ok(config)
}

fn apply_logistic_params(params: &[(String, f64)]) -> Result<LogisticConfig> {
    let mut config = LogisticConfig::default();
    for (key, value) in params {
        match key.as_str() {
            "l2" => config.l2 = *value,
            "lr" => config.lr = *value,
            "max_iter" => config.max_iter = *value as usize,
            "tol" => config.tol = *value,
            other => {
                return Err(Error::Config(format!(
                    "unknown logistic hyperparameter `{other}`"
                )))
            }
        }
    }
    Ok(config)
}

fn apply_mlp_params(params: &[(String, f64)], seed: u64) -> Result<MlpConfig> {
    let mut config = MlpConfig {
        seed,
        ..MlpConfig::default()
    };
    for (key, value) in params {
        match key.as_str() {
            "lr" => config.lr = *value,
            "epochs" => config.epochs = *value as usize,
            "batch" => config.batch_size = *value as usize,
            "dropout" => config.dropout = *value,
            "patience" => config.patience = *value as usize,
            "hidden1" => config.hidden[0] = *value as usize,
            "hidden2" => {
                if config.hidden.len() < 2 {
                    config.hidden.push(*value as usize);
                } else {
                    config.hidden[1] = *value as usize;
                }
            }
            "seed" => config.seed = *value as u64,
            other => {
                return Err(Error::Config(format!(
                    "unknown mlp hyperparameter `{other}`"
                )))
            }
        }
    }
    Ok(config)
}

fn fold_score(
    x: &FeatureMatrix,
    y: &[VigilanceState],
    train_idx: &[usize],
    test_idx: &[usize],
    family: ModelFamily,
    params: &[(String, f64)],
    seed: u64,
    fold: usize,
) -> Result<(f64, f64)> {
    let x_train = x.select(train_idx);
    let y_train: Vec<VigilanceState> = train_idx.iter().map(|&i| y[i]).collect();
    let x_test = x.select(test_idx);
    let y_test: Vec<VigilanceState> = test_idx.iter().map(|&i| y[i]).collect();

    let preds: Vec<VigilanceState> = match family {
        ModelFamily::Gbt => {
            let config = apply_gbt_params(params, seed)?;
            let (model, _) = train_gbt(&x_train, &y_train, &config)?;
            model.predict_label_matrix(&x_test)?
        }
        ModelFamily::Logistic => {
            let config = apply_logistic_params(params)?;
            let std = Standardizer::fit(&x_train)?;
            let model = train_logistic(&std.apply_matrix(&x_train)?, &y_train, &config)?
                .with_standardizer(std);
            model.predict_label_matrix(&x_test)?
        }
        ModelFamily::Mlp => {
            let config = apply_mlp_params(params, seed)?;
            let std = Standardizer::fit(&x_train)?;
            let x_std = std.apply_matrix(&x_train)?;
            // Carve an inner validation set out of the fold's training part
            // for early stopping.
            let split = crate::dataio::stratified_split_labels(
                &y_train,
                crate::dataio::SplitFractions::two_way(0.8, 0.2),
                derive_seed(seed, fold as u64, 3),
            )?;
            let (inner_train, inner_val) = if split.test.is_empty() {
                ((0..x_std.n_rows()).collect::<Vec<_>>(), split.train)
            } else {
                (split.train, split.test)
            };
            let (model, _) = train_mlp(&x_std, &y_train, &inner_train, &inner_val, &config)?;
            let model = model.with_standardizer(std);
            model.predict_label_matrix(&x_test)?
        }
    };
    let report = metrics(&confusion(&y_test, &preds)?);
    Ok((report.macro_f1, report.accuracy))
}

/// Grid search with stratified k-fold cross-validation. Every grid point is
/// trained on each fold's complement and scored on the held-out fold;
/// results are ranked by mean macro-F1, ties by mean accuracy, then by grid
/// order. Deterministic per seed (folds aggregate in index order).
pub fn cross_validate(
    x: &FeatureMatrix,
    y: &[VigilanceState],
    grid: &GridSpec,
    family: ModelFamily,
) -> Result<Vec<CvResult>> {
    grid.validate()?;
    if y.len() != x.n_rows() {
        return Err(Error::Input(format!(
            "{} labels for {} rows",
            y.len(),
            x.n_rows()
        )));
    }
    let folds = stratified_folds(y, grid.folds, grid.seed)?;
    let combos = grid.expand();

    let mut results = Vec::with_capacity(combos.len());
    for (config_index, params) in combos.iter().enumerate() {
        let mut fold_macro_f1 = Vec::with_capacity(grid.folds);
        let mut fold_accuracy = Vec::with_capacity(grid.folds);
        for (fold, test_idx) in folds.iter().enumerate() {
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != fold)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            let (macro_f1, accuracy) =
                fold_score(x, y, &train_idx, test_idx, family, params, grid.seed, fold)?;
            fold_macro_f1.push(macro_f1);
            fold_accuracy.push(accuracy);
        }
        let (mean_macro_f1, std_macro_f1) = mean_std(&fold_macro_f1);
        let (mean_accuracy, std_accuracy) = mean_std(&fold_accuracy);
        results.push(CvResult {
            rank: 0,
            config_index,
            params: params.clone(),
            mean_macro_f1,
            std_macro_f1,
            mean_accuracy,
            std_accuracy,
            fold_macro_f1,
            fold_accuracy,
        });
    }

    results.sort_by(|a, b| {
        b.mean_macro_f1
            .partial_cmp(&a.mean_macro_f1)
            .expect("finite scores")
            .then(
                b.mean_accuracy
                    .partial_cmp(&a.mean_accuracy)
                    .expect("finite scores"),
            )
            .then(a.config_index.cmp(&b.config_index))
    });
    for (i, r) in results.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(results)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Writes ranked CV results: `rank,params,mean_macro_f1,std_macro_f1,...`.
pub fn save_cv_csv(results: &[CvResult], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "rank,params,mean_macro_f1,std_macro_f1,mean_accuracy,std_accuracy"
    )?;
    for r in results {
        let params = r
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        writeln!(
            w,
            "{},{params},{},{},{},{}",
            r.rank, r.mean_macro_f1, r.std_macro_f1, r.mean_accuracy, r.std_accuracy
        )?;
    }
    w.flush()?;
    Ok(())
}
