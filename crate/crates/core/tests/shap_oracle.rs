//! TreeSHAP exactness against exhaustive Shapley enumeration, plus local
//! accuracy and the symmetry property on duplicated columns.

mod common;

use common::{brute_force_base, brute_force_shap, random_row, random_small_model};
use vigil_core::dataio::VigilanceState;
use vigil_core::explain::{tree_shap, tree_shap_row};
use vigil_core::features::{FeatureMatrix, FeatureSchema, FeatureVector};
use vigil_core::gbt::{train_gbt, ClassTree, GbtConfig, GbtModel, TreeNode};

#[test]
fn random_ensembles_match_brute_force() {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let d = 2 + (seed as usize % 7); // up to 8 features
        let model = random_small_model(seed, d, 1 + (seed as usize % 5), 3);
        for row_seed in 0..3u64 {
            let row = random_row(seed * 100 + row_seed, d);
            let fast = tree_shap_row(&model, &row).unwrap();
            let brute = brute_force_shap(&model, &row);
            for k in 0..3 {
                for j in 0..d {
                    worst = worst.max((fast.phi[k][j] - brute[k][j]).abs());
                }
            }
            // Base values agree with the empty-coalition expectations.
            let base = brute_force_base(&model);
            for k in 0..3 {
                worst = worst.max((fast.base[k] - base[k]).abs());
            }
        }
    }
    assert!(worst < 1e-9, "max |φ - brute force| = {worst}");
}

#[test]
fn local_accuracy_on_random_ensembles() {
    for seed in 0..10u64 {
        let d = 3 + (seed as usize % 5);
        let model = random_small_model(seed + 500, d, 4, 3);
        for row_seed in 0..5u64 {
            let row = random_row(seed * 31 + row_seed, d);
            let shap = tree_shap_row(&model, &row).unwrap();
            let margins = model.margin_for_row(&row);
            for k in 0..3 {
                let reconstructed = shap.base[k] + shap.phi[k].iter().sum::<f64>();
                assert!(
                    (reconstructed - margins[k]).abs() < 1e-6,
                    "seed {seed} class {k}: {reconstructed} vs {}",
                    margins[k]
                );
            }
        }
    }
}

#[test]
fn local_accuracy_on_trained_model() {
    let schema = FeatureSchema::custom((0..5).map(|i| format!("f{i}")).collect()).unwrap();
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|i| {
            let c = (i % 3) as f64;
            vec![
                c * 3.0 + (i % 4) as f64 * 0.2,
                (i % 7) as f64 * 0.5 - c,
                ((i * i) % 13) as f64 * 0.1,
                -c + (i % 2) as f64,
                0.01 * i as f64,
            ]
        })
        .collect();
    let x = FeatureMatrix::new(schema, rows).unwrap();
    let y: Vec<VigilanceState> = (0..60)
        .map(|i| VigilanceState::from_code(i % 3).unwrap())
        .collect();
    let config = GbtConfig {
        n_rounds: 10,
        max_depth: 4,
        subsample: 0.9,
        colsample: 0.8,
        min_child_weight: 0.0,
        ..GbtConfig::default()
    };
    let (model, _) = train_gbt(&x, &y, &config).unwrap();

    for i in 0..x.n_rows() {
        let shap = tree_shap(&model, &x.row_vector(i)).unwrap();
        let margins = model.predict_margin(&x.row_vector(i)).unwrap();
        for k in 0..3 {
            let reconstructed = shap.base[k] + shap.phi[k].iter().sum::<f64>();
            assert!(
                (reconstructed - margins[k]).abs() < 1e-6,
                "row {i} class {k}"
            );
        }
    }
}

#[test]
fn single_split_tree_matches_brute_force() {
    let schema = FeatureSchema::custom((0..4).map(|i| format!("f{i}")).collect()).unwrap();
    let tree = TreeNode::Split {
        feature: 2,
        threshold: 0.4,
        left: Box::new(TreeNode::Leaf { weight: -1.5, cover: 20.0 }),
        right: Box::new(TreeNode::Leaf { weight: 2.5, cover: 60.0 }),
        default_left: true,
        gain: 1.0,
        cover: 80.0,
    };
    let model = GbtModel::from_parts(
        GbtConfig::default(),
        vec![0.0; 3],
        schema.clone(),
        vec![ClassTree { round: 0, class: 1, root: tree }],
    )
    .unwrap();
    let x = FeatureVector::new(vec![0.9, 0.1, 0.2, 0.7], schema).unwrap();
    let shap = tree_shap(&model, &x).unwrap();
    let brute = brute_force_shap(&model, x.values());
    for j in 0..4 {
        assert!((shap.phi[1][j] - brute[1][j]).abs() < 1e-12);
        if j != 2 {
            assert_eq!(shap.phi[1][j], 0.0);
        }
    }
    // Going left: φ = leaf − expectation = −1.5 − (20·(−1.5)+60·2.5)/80 = −3.0.
    assert!((shap.phi[1][2] - (-3.0)).abs() < 1e-12);
}

#[test]
fn duplicated_column_symmetry() {
    // Two identical columns; a single-split stump trained on either copy
    // must attribute the same value to whichever copy it used.
    let schema = FeatureSchema::custom(vec!["a".into(), "b".into()]).unwrap();
    let stump = |feature: usize| TreeNode::Split {
        feature,
        threshold: 0.5,
        left: Box::new(TreeNode::Leaf { weight: -1.0, cover: 10.0 }),
        right: Box::new(TreeNode::Leaf { weight: 1.0, cover: 10.0 }),
        default_left: true,
        gain: 1.0,
        cover: 20.0,
    };
    let model_a = GbtModel::from_parts(
        GbtConfig::default(),
        vec![0.0; 3],
        schema.clone(),
        vec![ClassTree { round: 0, class: 0, root: stump(0) }],
    )
    .unwrap();
    let model_b = GbtModel::from_parts(
        GbtConfig::default(),
        vec![0.0; 3],
        schema,
        vec![ClassTree { round: 0, class: 0, root: stump(1) }],
    )
    .unwrap();

    let row = [0.2, 0.2]; // identical duplicated values
    let shap_a = tree_shap_row(&model_a, &row).unwrap();
    let shap_b = tree_shap_row(&model_b, &row).unwrap();
    assert!((shap_a.phi[0][0] - shap_b.phi[0][1]).abs() < 1e-12);

    let brute_a = brute_force_shap(&model_a, &row);
    let brute_b = brute_force_shap(&model_b, &row);
    assert!((shap_a.phi[0][0] - brute_a[0][0]).abs() < 1e-12);
    assert!((shap_b.phi[0][1] - brute_b[0][1]).abs() < 1e-12);
}
