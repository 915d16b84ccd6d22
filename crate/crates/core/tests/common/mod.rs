//! Shared helpers for integration tests: deterministic signal generators,
//! a full-length DFT periodogram, and a brute-force Shapley oracle.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vigil_core::dataio::Epoch;
use vigil_core::gbt::{ClassTree, GbtConfig, GbtModel, TreeNode};

pub const FS: f64 = 500.0;
pub const EPOCH_LEN: usize = 5000;

/// Unit-variance Gaussian white noise (Box–Muller over a seeded ChaCha stream).
pub fn gaussian_noise_epoch(seed: u64, n: usize) -> Epoch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect();
    Epoch::new(0, samples, None).unwrap()
}

/// Unit-variance uniform white noise on [-√3, √3].
pub fn uniform_noise_epoch(seed: u64, n: usize) -> Epoch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = 3.0_f64.sqrt();
    let samples = (0..n).map(|_| rng.random_range(-a..a)).collect();
    Epoch::new(0, samples, None).unwrap()
}

pub fn sine_epoch(freq_hz: f64, amplitude: f64, n: usize) -> Epoch {
    let samples = (0..n)
        .map(|i| amplitude * (std::f64::consts::TAU * freq_hz * i as f64 / FS).sin())
        .collect();
    Epoch::new(0, samples, None).unwrap()
}

pub fn sample_variance(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Single full-length DFT periodogram (rectangular window, one-sided density
/// scaling). The independent frequency-domain oracle.
pub fn dft_periodogram(samples: &[f64], fs: f64) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let n_bins = n / 2 + 1;
    let mut freqs = Vec::with_capacity(n_bins);
    let mut density = Vec::with_capacity(n_bins);
    for k in 0..n_bins {
        let mut re = 0.0;
        let mut im = 0.0;
        let w = -std::f64::consts::TAU * k as f64 / n as f64;
        for (i, &x) in samples.iter().enumerate() {
            let angle = w * i as f64;
            re += x * angle.cos();
            im += x * angle.sin();
        }
        let one_sided = if k == 0 || (n % 2 == 0 && k == n_bins - 1) {
            1.0
        } else {
            2.0
        };
        freqs.push(k as f64 * fs / n as f64);
        density.push((re * re + im * im) / (fs * n as f64) * one_sided);
    }
    (freqs, density)
}

/// Recorded cover ratios define the conditional expectation when a feature is
/// absent from the coalition; present features follow the input's branch.
fn subset_value(node: &TreeNode, row: &[f64], subset: u64) -> f64 {
    match node {
        TreeNode::Leaf { weight, .. } => *weight,
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            cover,
            ..
        } => {
            if subset & (1 << feature) != 0 {
                if row[*feature] < *threshold {
                    subset_value(left, row, subset)
                } else {
                    subset_value(right, row, subset)
                }
            } else {
                (left.cover() * subset_value(left, row, subset)
                    + right.cover() * subset_value(right, row, subset))
                    / cover
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Exhaustive Shapley enumeration over feature subsets (≤ ~16 features).
pub fn brute_force_shap(model: &GbtModel, row: &[f64]) -> Vec<Vec<f64>> {
    let d = model.schema.len();
    let k_classes = model.n_classes();
    let mut phi = vec![vec![0.0; d]; k_classes];
    for tree in &model.trees {
        for j in 0..d {
            let others: Vec<usize> = (0..d).filter(|&f| f != j).collect();
            let mut contribution = 0.0;
            for mask in 0u64..(1 << others.len()) {
                let mut subset = 0u64;
                let mut size = 0usize;
                for (bit, &f) in others.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        subset |= 1 << f;
                        size += 1;
                    }
                }
                let weight = factorial(size) * factorial(d - size - 1) / factorial(d);
                let without = subset_value(&tree.root, row, subset);
                let with = subset_value(&tree.root, row, subset | (1 << j));
                contribution += weight * (with - without);
            }
            phi[tree.class][j] += contribution;
        }
    }
    phi
}

/// Expected margin per class: base score plus each tree's cover-weighted
/// leaf mean (the empty-coalition value).
pub fn brute_force_base(model: &GbtModel) -> Vec<f64> {
    let mut base = model.base_score.clone();
    for tree in &model.trees {
        base[tree.class] += subset_value(&tree.root, &vec![0.0; model.schema.len()], 0);
    }
    base
}

fn random_tree(rng: &mut ChaCha8Rng, d: usize, depth_left: usize, cover: f64) -> TreeNode {
    if depth_left == 0 || cover < 2.0 || rng.random_range(0.0..1.0) < 0.25 {
        return TreeNode::Leaf {
            weight: rng.random_range(-2.0..2.0),
            cover,
        };
    }
    let left_cover = rng.random_range(1..cover as u64) as f64;
    let right_cover = cover - left_cover;
    TreeNode::Split {
        feature: rng.random_range(0..d),
        threshold: rng.random_range(0.05..0.95),
        left: Box::new(random_tree(rng, d, depth_left - 1, left_cover)),
        right: Box::new(random_tree(rng, d, depth_left - 1, right_cover)),
        default_left: true,
        gain: rng.random_range(0.0..1.0),
        cover,
    }
}

/// A random small ensemble with consistent covers, for oracle comparisons.
pub fn random_small_model(seed: u64, d: usize, n_trees: usize, max_depth: usize) -> GbtModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = vigil_core::features::FeatureSchema::custom(
        (0..d).map(|i| format!("f{i}")).collect(),
    )
    .unwrap();
    let trees: Vec<ClassTree> = (0..n_trees)
        .map(|t| {
            let class = rng.random_range(0..3);
            let cover = rng.random_range(16..64) as f64;
            ClassTree {
                round: t,
                class,
                root: random_tree(&mut rng, d, max_depth, cover),
            }
        })
        .collect();
    GbtModel::from_parts(
        GbtConfig {
            n_rounds: n_trees,
            ..GbtConfig::default()
        },
        vec![0.0; 3],
        schema,
        trees,
    )
    .unwrap()
}

pub fn random_row(seed: u64, d: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..d).map(|_| rng.random_range(0.0..1.0)).collect()
}
