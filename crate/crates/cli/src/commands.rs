//! Implementations of the pipeline subcommands.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use vigil_core::baselines::{
    load_linear_model, load_mlp_model, save_linear_model, save_mlp_model, save_train_log_csv,
    train_logistic, train_mlp, LogisticConfig, MlpConfig,
};
use vigil_core::dataio::{
    load_dataset_csv, parse_synth_config, save_dataset_csv, stratified_split_labels,
    synth_dataset, SplitFractions, SynthConfig, VigilanceState,
};
use vigil_core::eval::{
    confusion, cross_validate, metrics, metrics_table, reliability, save_cv_csv,
    save_metrics_csv, save_reliability_csv, GridSpec, ModelFamily,
};
use vigil_core::explain::{
    gain_importance, save_importance_csv, save_shap_csv, save_shap_ranking_csv, shap_summary,
};
use vigil_core::features::{
    extract_features_qc, load_feature_csv, save_feature_csv, ExtractConfig, FeatureMatrix,
    FeatureSchema, Standardizer,
};
use vigil_core::gbt::{load_model, save_model, train_gbt, GbtConfig};
use vigil_core::spectral::{welch_psd_samples, WelchConfig, WindowKind};

use crate::util::{require_input, write_atomic, write_manifest};
use crate::{CvArgs, EvaluateArgs, ExplainArgs, FeaturesArgs, PredictArgs, SynthArgs, TrainArgs};

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            require_input(path)?;
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_synth_config(&text)?
        }
        None => SynthConfig::default(),
    };
    if let Some(n) = args.per_class {
        config.n_per_class = n;
    }
    if let Some(sigma) = args.noise_sigma {
        config.noise_sigma_uv = sigma;
    }

    let dataset = synth_dataset(&config, args.seed)?;
    write_atomic(&args.out, |tmp| Ok(save_dataset_csv(&dataset, tmp)?))?;
    write_manifest(
        &args.out,
        "synth",
        Some(args.seed),
        serde_json::json!({
            "n_per_class": config.n_per_class,
            "fs_hz": config.fs_hz,
            "epoch_seconds": config.epoch_seconds,
            "noise_sigma_uv": config.noise_sigma_uv,
            "wake": [config.wake.center_hz, config.wake.amplitude_uv, config.wake.burst_duty],
            "sws": [config.sws.center_hz, config.sws.amplitude_uv, config.sws.burst_duty],
            "rem": [config.rem.center_hz, config.rem.amplitude_uv, config.rem.burst_duty],
        }),
    )?;
    println!(
        "wrote {} epochs ({} per class) to {}",
        dataset.len(),
        config.n_per_class,
        args.out.display()
    );
    Ok(())
}

fn parse_window(name: &str) -> Result<WindowKind> {
    match name {
        "hann" => Ok(WindowKind::Hann),
        "rectangular" => Ok(WindowKind::Rectangular),
        other => bail!(vigil_core::Error::Config(format!(
            "unknown window `{other}` (expected hann/rectangular)"
        ))),
    }
}

fn parse_schema(name: &str, epoch_len: usize) -> Result<FeatureSchema> {
    match name {
        "compact" => Ok(FeatureSchema::compact()),
        "extended" => Ok(FeatureSchema::extended()),
        "raw_plus_compact" => Ok(FeatureSchema::raw_plus_compact(epoch_len)),
        other => bail!(vigil_core::Error::Config(format!(
            "unknown schema `{other}` (expected compact/extended/raw_plus_compact)"
        ))),
    }
}

pub fn features(args: FeaturesArgs, threads: usize) -> Result<()> {
    require_input(&args.input)?;
    let dataset = load_dataset_csv(&args.input)?;
    if dataset.is_empty() {
        bail!(vigil_core::Error::InsufficientData(format!(
            "{} holds no epochs",
            args.input.display()
        )));
    }
    let schema = parse_schema(&args.schema, dataset.epoch_len())?;
    let extract = ExtractConfig {
        fs_hz: args.fs,
        welch: WelchConfig {
            segment_len: args.segment_len,
            overlap: args.overlap,
            window: parse_window(&args.window)?,
        },
        mmd_window_len: args.mmd_window,
    };

    // Per-epoch extraction is pure, so a thread pool changes nothing but
    // wall time; indexed collection keeps row order identical.
    let extracted: vigil_core::Result<Vec<_>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .context("building thread pool")?;
        pool.install(|| {
            dataset
                .epochs()
                .par_iter()
                .map(|e| extract_features_qc(e, &schema, &extract).map(|(v, qc)| (v, e.label(), qc)))
                .collect()
        })
    } else {
        dataset
            .epochs()
            .iter()
            .map(|e| extract_features_qc(e, &schema, &extract).map(|(v, qc)| (v, e.label(), qc)))
            .collect()
    };
    let extracted = extracted?;

    let mut rows = Vec::with_capacity(extracted.len());
    let mut labels = Vec::with_capacity(extracted.len());
    let mut qc_count = 0usize;
    for (vector, label, qc) in extracted {
        qc_count += qc.len();
        rows.push(vector.values().to_vec());
        labels.push(label);
    }
    if qc_count > 0 {
        log::warn!("{qc_count} QC flags raised during extraction");
    }
    let matrix = FeatureMatrix::new(schema.clone(), rows)?;
    write_atomic(&args.out, |tmp| {
        Ok(save_feature_csv(&matrix, &labels, tmp)?)
    })?;

    if let Some(dir) = &args.psd_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
        for epoch in dataset.epochs() {
            let psd = welch_psd_samples(epoch.samples(), extract.fs_hz, &extract.welch)?;
            let path = dir.join(format!("epoch_{:05}.csv", epoch.index()));
            let mut w = BufWriter::new(File::create(&path)?);
            psd.write_csv(&mut w)?;
            w.flush().map_err(vigil_core::Error::from)?;
        }
    }

    write_manifest(
        &args.out,
        "features",
        None,
        serde_json::json!({
            "input": args.input.display().to_string(),
            "schema": schema.id(),
            "n_features": schema.len(),
            "n_epochs": matrix.n_rows(),
            "fs_hz": extract.fs_hz,
            "welch": {
                "segment_len": extract.welch.segment_len,
                "overlap": extract.welch.overlap,
                "window": extract.welch.window.as_str(),
            },
            "mmd_window_len": extract.mmd_window_len,
            "qc_flags": qc_count,
        }),
    )?;
    println!(
        "wrote {} x {} feature rows ({} schema) to {}",
        matrix.n_rows(),
        schema.len(),
        schema.id(),
        args.out.display()
    );
    Ok(())
}

fn labeled_rows(
    labels: &[Option<VigilanceState>],
    path: &Path,
) -> Result<Vec<VigilanceState>> {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| {
                anyhow::Error::from(vigil_core::Error::Stratification(format!(
                    "{}: row {} is unlabeled",
                    path.display(),
                    i + 2
                )))
            })
        })
        .collect()
}

pub fn train(args: TrainArgs) -> Result<()> {
    require_input(&args.features)?;
    let (x, raw_labels) = load_feature_csv(&args.features)?;
    let y = labeled_rows(&raw_labels, &args.features)?;

    let settings: serde_json::Value;
    match args.model.as_str() {
        "gbt" => {
            let mut config = GbtConfig {
                seed: args.seed,
                ..GbtConfig::default()
            };
            if let Some(v) = args.eta {
                config.eta = v;
            }
            if let Some(v) = args.rounds {
                config.n_rounds = v;
            }
            if let Some(v) = args.max_depth {
                config.max_depth = v;
            }
            if let Some(v) = args.subsample {
                config.subsample = v;
            }
            if let Some(v) = args.colsample {
                config.colsample = v;
            }
            if let Some(v) = args.gamma {
                config.min_split_loss = v;
            }
            if let Some(v) = args.lambda {
                config.l2 = v;
            }
            if let Some(v) = args.min_child_weight {
                config.min_child_weight = v;
            }
            let (model, _) = train_gbt(&x, &y, &config)?;
            write_atomic(&args.out, |tmp| Ok(save_model(&model, tmp)?))?;
            println!("{}", model.summary());
            settings = serde_json::json!({
                "model": "gbt",
                "eta": config.eta,
                "rounds": config.n_rounds,
                "max_depth": config.max_depth,
                "subsample": config.subsample,
                "colsample": config.colsample,
                "gamma": config.min_split_loss,
                "lambda": config.l2,
                "min_child_weight": config.min_child_weight,
                "schema": x.schema().id(),
            });
        }
        "logistic" => {
            let mut config = LogisticConfig::default();
            if let Some(v) = args.l2 {
                config.l2 = v;
            }
            if let Some(v) = args.lr {
                config.lr = v;
            }
            if let Some(v) = args.max_iter {
                config.max_iter = v;
            }
            if let Some(v) = args.tol {
                config.tol = v;
            }
            let std = Standardizer::fit(&x)?;
            let model = train_logistic(&std.apply_matrix(&x)?, &y, &config)?
                .with_standardizer(std);
            write_atomic(&args.out, |tmp| Ok(save_linear_model(&model, tmp)?))?;
            println!("{}", model.summary());
            settings = serde_json::json!({
                "model": "logistic",
                "l2": config.l2,
                "lr": config.lr,
                "max_iter": config.max_iter,
                "tol": config.tol,
                "schema": x.schema().id(),
            });
        }
        "mlp" => {
            let mut config = MlpConfig {
                seed: args.seed,
                ..MlpConfig::default()
            };
            if let Some(v) = args.lr {
                config.lr = v;
            }
            if let Some(v) = args.epochs {
                config.epochs = v;
            }
            if let Some(v) = args.batch {
                config.batch_size = v;
            }
            if let Some(v) = args.dropout {
                config.dropout = v;
            }
            if let Some(v) = args.patience {
                config.patience = v;
            }
            if let Some(hidden) = &args.hidden {
                config.hidden = hidden
                    .split(',')
                    .map(|t| {
                        t.trim().parse::<usize>().map_err(|_| {
                            anyhow::Error::from(vigil_core::Error::Config(format!(
                                "bad hidden layer size `{t}`"
                            )))
                        })
                    })
                    .collect::<Result<_>>()?;
            }
            if !(args.val_fraction > 0.0 && args.val_fraction < 1.0) {
                bail!(vigil_core::Error::Config(format!(
                    "val_fraction must be in (0, 1), got {}",
                    args.val_fraction
                )));
            }
            let split = stratified_split_labels(
                &y,
                SplitFractions::two_way(1.0 - args.val_fraction, args.val_fraction),
                args.seed,
            )?;
            let std = Standardizer::fit(&x.select(&split.train))?;
            let x_std = std.apply_matrix(&x)?;
            let (model, log) = train_mlp(&x_std, &y, &split.train, &split.test, &config)?;
            let model = model.with_standardizer(std);
            write_atomic(&args.out, |tmp| Ok(save_mlp_model(&model, tmp)?))?;
            let log_path = args
                .train_log
                .clone()
                .unwrap_or_else(|| append_ext(&args.out, ".log.csv"));
            save_train_log_csv(&log, &log_path)?;
            println!("{}", model.summary());
            println!(
                "trained {} epochs (best {}), log at {}",
                log.train_loss.len(),
                log.best_epoch,
                log_path.display()
            );
            settings = serde_json::json!({
                "model": "mlp",
                "hidden": config.hidden,
                "lr": config.lr,
                "epochs": config.epochs,
                "batch": config.batch_size,
                "dropout": config.dropout,
                "patience": config.patience,
                "val_fraction": args.val_fraction,
                "schema": x.schema().id(),
            });
        }
        other => bail!(vigil_core::Error::Config(format!(
            "unknown model family `{other}` (expected gbt/logistic/mlp)"
        ))),
    }
    write_manifest(&args.out, "train", Some(args.seed), settings)?;
    Ok(())
}

fn append_ext(path: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(suffix);
    name.into()
}

/// Sniffs the model family from the file's magic line.
fn model_family_of(path: &Path) -> Result<&'static str> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let first = reader
        .lines()
        .next()
        .transpose()?
        .unwrap_or_default();
    let magic = first.split_whitespace().next().unwrap_or_default();
    match magic {
        "vigil-gbt" => Ok("gbt"),
        "vigil-linear" => Ok("logistic"),
        "vigil-mlp" => Ok("mlp"),
        other => bail!(vigil_core::Error::Format(format!(
            "{}: not a vigil model file (starts with `{other}`)",
            path.display()
        ))),
    }
}

pub fn predict(args: PredictArgs) -> Result<()> {
    require_input(&args.model)?;
    require_input(&args.features)?;
    let (x, _) = load_feature_csv(&args.features)?;

    let probs: Vec<Vec<f64>> = match model_family_of(&args.model)? {
        "gbt" => load_model(&args.model)?.predict_proba_matrix(&x)?,
        "logistic" => load_linear_model(&args.model)?.predict_proba_matrix(&x)?,
        _ => load_mlp_model(&args.model)?.predict_proba_matrix(&x)?,
    };

    write_atomic(&args.out, |tmp| {
        let mut w = BufWriter::new(File::create(tmp)?);
        let header: Vec<String> = VigilanceState::ALL
            .iter()
            .map(|s| format!("p_{}", s.as_str()))
            .collect();
        writeln!(w, "label,{}", header.join(","))?;
        for row in &probs {
            let label = VigilanceState::from_code(vigil_core::gbt::argmax(row))?;
            write!(w, "{}", label.as_str())?;
            for p in row {
                write!(w, ",{p}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    })?;
    write_manifest(
        &args.out,
        "predict",
        None,
        serde_json::json!({
            "model": args.model.display().to_string(),
            "features": args.features.display().to_string(),
            "n_rows": probs.len(),
        }),
    )?;
    println!("wrote {} predictions to {}", probs.len(), args.out.display());
    Ok(())
}

fn load_predictions(path: &Path) -> Result<(Vec<VigilanceState>, Vec<Vec<f64>>)> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .unwrap_or_default();
    if !header.starts_with("label,") {
        bail!(vigil_core::Error::Format(format!(
            "{}: expected predictions header `label,p_...`",
            path.display()
        )));
    }
    let k = VigilanceState::ALL.len();
    let mut labels = Vec::new();
    let mut probs = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != k + 1 {
            bail!(vigil_core::Error::Format(format!(
                "{}: row {} has {} columns, expected {}",
                path.display(),
                i + 2,
                fields.len(),
                k + 1
            )));
        }
        labels.push(VigilanceState::parse(fields[0])?);
        let row: Vec<f64> = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    anyhow::Error::from(vigil_core::Error::Parse(format!(
                        "{}: row {}: `{f}` is not a probability",
                        path.display(),
                        i + 2
                    )))
                })
            })
            .collect::<Result<_>>()?;
        probs.push(row);
    }
    Ok((labels, probs))
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    require_input(&args.pred)?;
    require_input(&args.truth)?;
    let (pred_labels, probs) = load_predictions(&args.pred)?;
    let (_, truth_raw) = load_feature_csv(&args.truth)?;
    let truth = labeled_rows(&truth_raw, &args.truth)?;
    if truth.len() != pred_labels.len() {
        bail!(vigil_core::Error::Input(format!(
            "{} predictions vs {} truth rows",
            pred_labels.len(),
            truth.len()
        )));
    }

    let cm = confusion(&truth, &pred_labels)?;
    let report = metrics(&cm);
    let calibration = reliability(&probs, &truth, args.bins)?;

    print!("{}", metrics_table(&report));
    println!(
        "brier           {:.4}\nmax calibration deviation {:.4}",
        calibration.brier, calibration.max_deviation
    );

    write_atomic(&args.out_metrics, |tmp| Ok(save_metrics_csv(&report, tmp)?))?;
    write_atomic(&args.out_reliability, |tmp| {
        Ok(save_reliability_csv(&calibration, tmp)?)
    })?;
    write_manifest(
        &args.out_metrics,
        "evaluate",
        None,
        serde_json::json!({
            "pred": args.pred.display().to_string(),
            "truth": args.truth.display().to_string(),
            "bins": args.bins,
            "accuracy": report.accuracy,
            "macro_f1": report.macro_f1,
            "brier": calibration.brier,
        }),
    )?;
    Ok(())
}

pub fn explain(args: ExplainArgs) -> Result<()> {
    require_input(&args.model)?;
    require_input(&args.features)?;
    let family = model_family_of(&args.model)?;
    if family != "gbt" {
        bail!(vigil_core::Error::Capability(format!(
            "explain requires a gbt model, `{}` is {family}",
            args.model.display()
        )));
    }
    let model = load_model(&args.model)?;
    let (x, _) = load_feature_csv(&args.features)?;
    let x = if args.max_rows > 0 && args.max_rows < x.n_rows() {
        x.select(&(0..args.max_rows).collect::<Vec<_>>())
    } else {
        x
    };

    let importance = gain_importance(&model);
    if importance.degenerate {
        log::warn!("model has no splits; importance shares are all zero");
    }
    let summary = shap_summary(&model, &x)?;

    write_atomic(&args.out_importance, |tmp| {
        Ok(save_importance_csv(&importance, tmp)?)
    })?;
    write_atomic(&args.out_shap, |tmp| Ok(save_shap_csv(&summary, tmp)?))?;
    let ranking_path = args
        .out_ranking
        .clone()
        .unwrap_or_else(|| append_ext(&args.out_shap, ".ranking.csv"));
    write_atomic(&ranking_path, |tmp| {
        Ok(save_shap_ranking_csv(&summary, tmp)?)
    })?;
    write_manifest(
        &args.out_importance,
        "explain",
        None,
        serde_json::json!({
            "model": args.model.display().to_string(),
            "features": args.features.display().to_string(),
            "rows_explained": x.n_rows(),
            "importance_degenerate": importance.degenerate,
        }),
    )?;
    println!(
        "explained {} rows; top feature by mean |phi|: {}",
        x.n_rows(),
        summary.ranking.first().map(|(n, _)| n.as_str()).unwrap_or("-")
    );
    Ok(())
}

fn parse_grid_params(params: &[String]) -> Result<Vec<(String, Vec<f64>)>> {
    params
        .iter()
        .map(|p| {
            let (key, values) = p.split_once('=').ok_or_else(|| {
                anyhow::Error::from(vigil_core::Error::Config(format!(
                    "--param `{p}` is not key=v1,v2"
                )))
            })?;
            let values: Vec<f64> = values
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| {
                        anyhow::Error::from(vigil_core::Error::Parse(format!(
                            "--param {key}: `{v}` is not a number"
                        )))
                    })
                })
                .collect::<Result<_>>()?;
            Ok((key.to_string(), values))
        })
        .collect()
}

pub fn cv(args: CvArgs) -> Result<()> {
    require_input(&args.features)?;
    let (x, raw_labels) = load_feature_csv(&args.features)?;
    let y = labeled_rows(&raw_labels, &args.features)?;
    let family = ModelFamily::parse(&args.model)?;
    let grid = GridSpec {
        params: parse_grid_params(&args.params)?,
        folds: args.folds,
        seed: args.seed,
    };
    let results = cross_validate(&x, &y, &grid, family)?;
    write_atomic(&args.out, |tmp| Ok(save_cv_csv(&results, tmp)?))?;
    write_manifest(
        &args.out,
        "cv",
        Some(args.seed),
        serde_json::json!({
            "features": args.features.display().to_string(),
            "model": args.model,
            "folds": args.folds,
            "grid_points": results.len(),
        }),
    )?;
    if let Some(best) = results.first() {
        let params = best
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        println!(
            "best: {params} (macro-F1 {:.4} ± {:.4}, accuracy {:.4})",
            best.mean_macro_f1, best.std_macro_f1, best.mean_accuracy
        );
    }
    Ok(())
}
