//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them). Criteria 9 and 11 share one
//! end-to-end pipeline run.

mod common;

use std::sync::OnceLock;
use std::time::Instant;

use common::{random_row, random_small_model, sine_epoch, uniform_noise_epoch, EPOCH_LEN, FS};
use vigil_core::baselines::{mlp_loss_and_grads, train_logistic, LogisticConfig, MlpModel};
use vigil_core::dataio::{synth_dataset, Epoch, SplitFractions, SynthConfig, VigilanceState};
use vigil_core::eval::{brier, confusion, metrics, ConfusionMatrix, MetricsReport};
use vigil_core::explain::tree_shap_row;
use vigil_core::features::{
    extract_matrix, hjorth, mmd, ExtractConfig, FeatureMatrix, FeatureSchema, Standardizer,
};
use vigil_core::gbt::{model_to_string, train_gbt, GbtConfig, TreeNode};

fn pass(criterion: usize, detail: &str) {
    println!("PASS criterion {criterion}: {detail}");
}

#[test]
fn criterion_01_parseval_white_noise() {
    let start = Instant::now();
    let config = vigil_core::spectral::WelchConfig::default();
    let mut max_dev: f64 = 0.0;
    for seed in 0..100u64 {
        let epoch = uniform_noise_epoch(seed, EPOCH_LEN);
        let psd = vigil_core::spectral::welch_psd(&epoch, &config).unwrap();
        let variance = common::sample_variance(epoch.samples());
        let dev = (psd.total_power() - variance).abs() / variance;
        assert!(dev < 0.02, "seed {seed}: deviation {dev:.5} >= 0.02");
        max_dev = max_dev.max(dev);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    pass(1, &format!("max deviation {max_dev:.5} over 100 seeds in {elapsed:?}"));
}

#[test]
fn criterion_02_spectral_ground_truth() {
    use vigil_core::spectral::{band_power, peak_frequency, welch_psd, BandDef, WelchConfig};
    let config = WelchConfig::default();

    let two_hz = sine_epoch(2.0, 1.0, EPOCH_LEN);
    let psd = welch_psd(&two_hz, &config).unwrap();
    let delta = band_power(&psd, &BandDef::delta()).unwrap();
    let total = band_power(&psd, &BandDef::total_range()).unwrap();
    let fraction = delta / total;
    assert!(fraction >= 0.95, "relative delta power {fraction:.4} < 0.95");

    let seven_hz = sine_epoch(7.0, 1.0, EPOCH_LEN);
    let psd7 = welch_psd(&seven_hz, &config).unwrap();
    let peak = peak_frequency(&psd7, &BandDef::theta()).unwrap();
    assert!(
        (peak.freq_hz - 7.0).abs() <= 0.5,
        "theta peak {} not within 0.5 Hz of 7",
        peak.freq_hz
    );
    pass(2, &format!("delta fraction {fraction:.4}, theta peak {} Hz", peak.freq_hz));
}

#[test]
fn criterion_03_hjorth_analytic() {
    let mut details = Vec::new();
    for f in [2.0, 7.0, 20.0] {
        let epoch = sine_epoch(f, 1.0, EPOCH_LEN);
        let h = hjorth(&epoch).unwrap();
        let expected = 2.0 * (std::f64::consts::PI * f / FS).sin();
        let mobility_err = (h.mobility - expected).abs() / expected;
        let complexity_err = (h.complexity - 1.0).abs();
        assert!(mobility_err < 0.01, "f={f}: mobility error {mobility_err}");
        assert!(complexity_err < 0.02, "f={f}: complexity error {complexity_err}");
        details.push(format!("{f} Hz ({mobility_err:.2e}/{complexity_err:.2e})"));
    }
    pass(3, &format!("mobility/complexity errors: {}", details.join(", ")));
}

#[test]
fn criterion_04_mmd_closed_forms() {
    let constant = Epoch::new(0, vec![4.5; EPOCH_LEN], None).unwrap();
    let v = mmd(&constant, 100).unwrap();
    assert_eq!(v, 0.0, "constant epoch MMD {v} != 0");

    let ramp = Epoch::new(0, (0..EPOCH_LEN).map(|n| n as f64).collect(), None).unwrap();
    let got = mmd(&ramp, 100).unwrap();
    let expected = 50.0 * 99.0 * 2.0_f64.sqrt();
    let rel = (got - expected).abs() / expected;
    assert!(rel < 1e-9, "ramp MMD relative error {rel}");
    pass(4, &format!("constant = 0, ramp rel err {rel:.2e}"));
}

/// Independent exhaustive split search used to audit every trained node.
fn brute_best_split(
    x: &FeatureMatrix,
    grads: &[f64],
    hessians: &[f64],
    rows: &[usize],
    config: &GbtConfig,
) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    for feature in 0..x.n_features() {
        let mut values: Vec<(f64, f64, f64)> = rows
            .iter()
            .map(|&i| (x.row(i)[feature], grads[i], hessians[i]))
            .collect();
        values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total_g: f64 = values.iter().map(|v| v.1).sum();
        let total_h: f64 = values.iter().map(|v| v.2).sum();
        for i in 1..values.len() {
            if values[i].0 <= values[i - 1].0 {
                continue;
            }
            let threshold = (values[i - 1].0 + values[i].0) / 2.0;
            let gl: f64 = values[..i].iter().map(|v| v.1).sum();
            let hl: f64 = values[..i].iter().map(|v| v.2).sum();
            let (gr, hr) = (total_g - gl, total_h - hl);
            if hl < config.min_child_weight || hr < config.min_child_weight {
                continue;
            }
            let gain = 0.5
                * (gl * gl / (hl + config.l2) + gr * gr / (hr + config.l2)
                    - total_g * total_g / (total_h + config.l2))
                - config.min_split_loss;
            if gain > 0.0 && best.map_or(true, |(g, _, _)| gain > g) {
                best = Some((gain, feature, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn audit_node(
    x: &FeatureMatrix,
    grads: &[f64],
    hessians: &[f64],
    rows: &[usize],
    config: &GbtConfig,
    node: &TreeNode,
    depth: usize,
) -> usize {
    let brute = brute_best_split(x, grads, hessians, rows, config);
    match node {
        TreeNode::Leaf { .. } => {
            assert!(
                depth >= config.max_depth || rows.len() < 2 || brute.is_none(),
                "trainer made a leaf where brute force finds a split {brute:?}"
            );
            0
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            let (bf, bt) = brute.expect("trainer split where brute force finds none");
            assert_eq!(*feature, bf, "feature mismatch at depth {depth}");
            assert_eq!(*threshold, bt, "threshold mismatch at depth {depth}");
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&i| x.row(i)[*feature] < *threshold);
            1 + audit_node(x, grads, hessians, &left_rows, config, left, depth + 1)
                + audit_node(x, grads, hessians, &right_rows, config, right, depth + 1)
        }
    }
}

#[test]
fn criterion_05_split_oracle_equivalence() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut audited_splits = 0usize;
    for dataset_idx in 0..200u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xD00D + dataset_idx);
        let n = rng.random_range(5..=50);
        let d = rng.random_range(1..=5);
        // Coarse values provoke duplicate feature values and gain ties.
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| (rng.random_range(0..12) as f64) * 0.5).collect())
            .collect();
        let y: Vec<VigilanceState> = (0..n)
            .map(|_| VigilanceState::from_code(rng.random_range(0..3)).unwrap())
            .collect();
        let schema = FeatureSchema::custom((0..d).map(|i| format!("f{i}")).collect()).unwrap();
        let x = FeatureMatrix::new(schema, rows).unwrap();
        let config = GbtConfig {
            n_rounds: 1,
            max_depth: 3,
            subsample: 1.0,
            colsample: 1.0,
            min_child_weight: [0.0, 0.5, 1.0][(dataset_idx % 3) as usize],
            l2: [0.1, 1.0, 5.0][(dataset_idx % 3) as usize],
            min_split_loss: [0.0, 0.05][(dataset_idx % 2) as usize],
            ..GbtConfig::default()
        };
        let (model, _) = train_gbt(&x, &y, &config).unwrap();

        // Round 0: margins are zero, so probabilities are uniform.
        let uniform = vec![1.0 / 3.0; 3];
        for tree in &model.trees {
            let grads: Vec<f64> = y
                .iter()
                .map(|s| uniform[tree.class] - if s.code() == tree.class { 1.0 } else { 0.0 })
                .collect();
            let hessians: Vec<f64> = vec![uniform[tree.class] * (1.0 - uniform[tree.class]); n];
            let rows: Vec<usize> = (0..n).collect();
            audited_splits +=
                audit_node(&x, &grads, &hessians, &rows, &config, &tree.root, 0);
        }
    }
    assert!(audited_splits > 200, "only {audited_splits} splits audited");
    pass(5, &format!("{audited_splits} splits audited across 200 datasets"));
}

fn synthetic_features(n_per_class: usize, seed: u64) -> (FeatureMatrix, Vec<VigilanceState>) {
    let config = SynthConfig {
        n_per_class,
        ..SynthConfig::default()
    };
    let ds = synth_dataset(&config, seed).unwrap();
    let (x, labels) = extract_matrix(&ds, &FeatureSchema::compact(), &ExtractConfig::default())
        .unwrap();
    let y: Vec<VigilanceState> = labels.into_iter().map(|l| l.unwrap()).collect();
    (x, y)
}

#[test]
fn criterion_06_gbt_monotone_loss() {
    let (x, y) = synthetic_features(30, 7);
    let config = GbtConfig {
        n_rounds: 50,
        subsample: 1.0,
        colsample: 1.0,
        ..GbtConfig::default()
    };
    let (_, log) = train_gbt(&x, &y, &config).unwrap();
    assert_eq!(log.round_losses.len(), 51);
    for (i, w) in log.round_losses.windows(2).enumerate() {
        assert!(
            w[1] <= w[0] + 1e-12,
            "loss increased at round {i}: {} -> {}",
            w[0],
            w[1]
        );
    }
    pass(
        6,
        &format!(
            "training loss {:.4} -> {:.4} over 50 rounds, non-increasing",
            log.round_losses[0],
            log.round_losses.last().unwrap()
        ),
    );
}

#[test]
fn criterion_07_mlp_gradient_check() {
    use vigil_core::baselines::DenseLayer;
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x917);
    let dims = [9usize, 8, 6, 3];
    let layers: Vec<DenseLayer> = dims
        .windows(2)
        .map(|p| {
            let (in_dim, out_dim) = (p[0], p[1]);
            let limit = (6.0 / in_dim as f64).sqrt();
            DenseLayer {
                w: (0..in_dim * out_dim)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect(),
                b: (0..out_dim).map(|_| rng.random_range(-0.1..0.1)).collect(),
                in_dim,
                out_dim,
            }
        })
        .collect();
    let schema = FeatureSchema::compact();
    let model = MlpModel::from_parts(layers, 0.0, schema, None).unwrap();

    let rows: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..9).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let labels = vec![0usize, 2, 1, 1, 0];
    let (_, grads) = mlp_loss_and_grads(&model, &rows, &labels);

    let mut max_rel: f64 = 0.0;
    for l in 0..model.layers.len() {
        let n_w = model.layers[l].w.len();
        for i in 0..n_w {
            let scale = model.layers[l].w[i].abs().max(1.0);
            let h = 1e-5 * scale;
            let mut plus = model.clone();
            plus.layers[l].w[i] += h;
            let mut minus = model.clone();
            minus.layers[l].w[i] -= h;
            let fd = (mlp_loss_and_grads(&plus, &rows, &labels).0
                - mlp_loss_and_grads(&minus, &rows, &labels).0)
                / (2.0 * h);
            let g = grads[l].w[i];
            max_rel = max_rel.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-8));
        }
        for i in 0..model.layers[l].b.len() {
            let h = 1e-5;
            let mut plus = model.clone();
            plus.layers[l].b[i] += h;
            let mut minus = model.clone();
            minus.layers[l].b[i] -= h;
            let fd = (mlp_loss_and_grads(&plus, &rows, &labels).0
                - mlp_loss_and_grads(&minus, &rows, &labels).0)
                / (2.0 * h);
            let g = grads[l].b[i];
            max_rel = max_rel.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-8));
        }
    }
    assert!(max_rel < 1e-4, "max relative gradient error {max_rel}");
    pass(7, &format!("max relative gradient error {max_rel:.2e}"));
}

#[test]
fn criterion_08_treeshap_exactness() {
    // 50 random small ensembles against exhaustive enumeration.
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let d = 2 + (seed as usize % 7);
        let n_trees = 1 + (seed as usize % 5);
        let model = random_small_model(seed * 7 + 1, d, n_trees, 3);
        let row = random_row(seed, d);
        let fast = tree_shap_row(&model, &row).unwrap();
        let brute = common::brute_force_shap(&model, &row);
        for k in 0..3 {
            for j in 0..d {
                worst = worst.max((fast.phi[k][j] - brute[k][j]).abs());
            }
        }
    }
    assert!(worst < 1e-9, "max |φ − brute force| = {worst:e}");

    // Local accuracy on 1000 random inputs of a trained model.
    let (x, y) = synthetic_features(20, 3);
    let config = GbtConfig {
        n_rounds: 12,
        max_depth: 4,
        ..GbtConfig::default()
    };
    let (model, _) = train_gbt(&x, &y, &config).unwrap();
    let mut max_gap: f64 = 0.0;
    for i in 0..1000u64 {
        let mut row = random_row(i, 9);
        // Spread the random unit draws over feature-realistic magnitudes.
        for (j, v) in row.iter_mut().enumerate() {
            *v = *v * 3000.0 - 500.0 + j as f64;
        }
        let shap = tree_shap_row(&model, &row).unwrap();
        let margins = model.margin_for_row(&row);
        for k in 0..3 {
            let gap = (shap.base[k] + shap.phi[k].iter().sum::<f64>() - margins[k]).abs();
            max_gap = max_gap.max(gap);
        }
    }
    assert!(max_gap < 1e-6, "local accuracy gap {max_gap:e}");
    pass(
        8,
        &format!("brute-force gap {worst:.2e}; local accuracy gap {max_gap:.2e} over 1000 rows"),
    );
}

struct BenchmarkRun {
    model_text: String,
    gbt_report: MetricsReport,
    logistic_accuracy: f64,
    runtime_s: f64,
}

fn run_benchmark() -> BenchmarkRun {
    let start = Instant::now();
    let (x, y) = synthetic_features(200, 42);
    let split = stratified_split_on(&y, 42);
    let x_train = x.select(&split.0);
    let y_train: Vec<VigilanceState> = split.0.iter().map(|&i| y[i]).collect();
    let x_test = x.select(&split.1);
    let y_test: Vec<VigilanceState> = split.1.iter().map(|&i| y[i]).collect();

    let (model, _) = train_gbt(&x_train, &y_train, &GbtConfig::default()).unwrap();
    let preds = model.predict_label_matrix(&x_test).unwrap();
    let gbt_report = metrics(&confusion(&y_test, &preds).unwrap());

    let std = Standardizer::fit(&x_train).unwrap();
    let logistic = train_logistic(
        &std.apply_matrix(&x_train).unwrap(),
        &y_train,
        &LogisticConfig::default(),
    )
    .unwrap()
    .with_standardizer(std);
    let log_preds = logistic.predict_label_matrix(&x_test).unwrap();
    let logistic_accuracy = metrics(&confusion(&y_test, &log_preds).unwrap()).accuracy;

    BenchmarkRun {
        model_text: model_to_string(&model),
        gbt_report,
        logistic_accuracy,
        runtime_s: start.elapsed().as_secs_f64(),
    }
}

fn stratified_split_on(y: &[VigilanceState], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let split = vigil_core::dataio::stratified_split_labels(
        y,
        SplitFractions::two_way(0.8, 0.2),
        seed,
    )
    .unwrap();
    (split.train, split.test)
}

fn benchmark() -> &'static BenchmarkRun {
    static RUN: OnceLock<BenchmarkRun> = OnceLock::new();
    RUN.get_or_init(run_benchmark)
}

#[test]
fn criterion_09_end_to_end_benchmark() {
    let run = benchmark();
    assert!(
        run.gbt_report.accuracy >= 0.90,
        "gbt accuracy {:.4} < 0.90",
        run.gbt_report.accuracy
    );
    assert!(
        run.gbt_report.macro_f1 >= 0.88,
        "gbt macro-F1 {:.4} < 0.88",
        run.gbt_report.macro_f1
    );
    assert!(
        run.gbt_report.accuracy >= run.logistic_accuracy,
        "gbt {:.4} below logistic baseline {:.4}",
        run.gbt_report.accuracy,
        run.logistic_accuracy
    );
    assert!(run.runtime_s < 180.0, "run took {:.1} s", run.runtime_s);
    pass(
        9,
        &format!(
            "gbt accuracy {:.4}, macro-F1 {:.4}, logistic {:.4}, {:.1} s",
            run.gbt_report.accuracy, run.gbt_report.macro_f1, run.logistic_accuracy, run.runtime_s
        ),
    );
}

#[test]
fn criterion_10_metrics_arithmetic() {
    // Worked case 1: 10 samples, mixed errors.
    let cm = ConfusionMatrix::from_counts(vec![
        vec![2, 1, 1],
        vec![1, 2, 0],
        vec![0, 1, 2],
    ])
    .unwrap();
    let report = metrics(&cm);
    assert!((report.accuracy - 0.6).abs() < 1e-12);
    assert!((report.macro_precision - 11.0 / 18.0).abs() < 1e-12);
    assert!((report.macro_recall - 11.0 / 18.0).abs() < 1e-12);
    assert!((report.macro_f1 - 38.0 / 63.0).abs() < 1e-12);

    // Worked case 2: one class never predicted.
    let cm2 = ConfusionMatrix::from_counts(vec![
        vec![1, 1, 0],
        vec![0, 1, 0],
        vec![0, 1, 0],
    ])
    .unwrap();
    let report2 = metrics(&cm2);
    assert!((report2.accuracy - 0.5).abs() < 1e-12);
    assert!((report2.macro_precision - (1.0 + 1.0 / 3.0 + 0.0) / 3.0).abs() < 1e-12);
    assert!((report2.macro_recall - 0.5).abs() < 1e-12);
    let f1_wake = 2.0 * (1.0 * 0.5) / 1.5;
    let f1_sws = 2.0 * ((1.0 / 3.0) * 1.0) / (1.0 / 3.0 + 1.0);
    assert!((report2.macro_f1 - (f1_wake + f1_sws) / 3.0).abs() < 1e-12);

    // Brier worked cases.
    let probs = vec![vec![0.5, 0.25, 0.25], vec![0.2, 0.5, 0.3]];
    let y = vec![VigilanceState::Wake, VigilanceState::Rem];
    let b = brier(&probs, &y).unwrap();
    assert!((b - 0.5775).abs() < 1e-12);
    let uniform = vec![vec![1.0 / 3.0; 3]; 3];
    let yu = vec![VigilanceState::Wake, VigilanceState::Sws, VigilanceState::Rem];
    assert!((brier(&uniform, &yu).unwrap() - 2.0 / 3.0).abs() < 1e-12);

    pass(10, "hand-worked confusion matrices and Brier cases at 1e-12");
}

#[test]
fn criterion_11_determinism() {
    let first = benchmark();
    let second = run_benchmark();
    assert_eq!(
        first.model_text.as_bytes(),
        second.model_text.as_bytes(),
        "serialized models differ between identical runs"
    );
    assert_eq!(first.gbt_report.accuracy, second.gbt_report.accuracy);
    assert_eq!(first.gbt_report.macro_f1, second.gbt_report.macro_f1);
    assert_eq!(first.logistic_accuracy, second.logistic_accuracy);
    pass(
        11,
        &format!(
            "byte-identical model ({} bytes) and identical metrics across runs",
            first.model_text.len()
        ),
    );
}
