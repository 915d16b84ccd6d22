//! Multinomial logistic regression by full-batch gradient descent.
//!
//! The loss is the mean softmax log-loss plus `l2/2 · ||W||²` (biases
//! unregularized). Zero initialization and a fixed step size make training
//! fully deterministic; descent stops at `max_iter` or when the gradient
//! ∞-norm drops below `tol`.

use std::fs;
use std::path::Path;

use crate::dataio::VigilanceState;
use crate::error::{Error, Result};
use crate::features::{
    remap_to_schema, FeatureMatrix, FeatureSchema, FeatureVector, Standardizer,
};
use crate::gbt::{argmax, softmax};
use crate::textio::TextReader;

const MAGIC: &str = "vigil-linear";
const VERSION: &str = "v1";

/// Gradient-descent settings for the logistic baseline.
#[derive(Debug, Clone, Copy)]
pub struct LogisticConfig {
    /// L2 strength on the weight matrix.
    pub l2: f64,
    pub lr: f64,
    pub max_iter: usize,
    /// Stop when the gradient ∞-norm falls below this.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            lr: 0.1,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

/// A trained multinomial logistic model (K×D weights plus biases).
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub l2: f64,
    pub schema: FeatureSchema,
    /// Standardizer fitted on the training rows; applied before scoring.
    pub standardizer: Option<Standardizer>,
}

impl LinearModel {
    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    /// Attaches the preprocessing fitted on training data so the serialized
    /// model can score raw feature rows.
    pub fn with_standardizer(mut self, standardizer: Standardizer) -> Self {
        self.standardizer = Some(standardizer);
        self
    }

    fn prepare_row(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        let row = remap_to_schema(x, &self.schema)?;
        Ok(match &self.standardizer {
            Some(std) => std.apply(&row)?.values().to_vec(),
            None => row.values().to_vec(),
        })
    }

    pub fn logits(&self, row: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(row).map(|(wi, xi)| wi * xi).sum::<f64>())
            .collect()
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(&self.prepare_row(x)?)))
    }

    pub fn predict_label(&self, x: &FeatureVector) -> Result<VigilanceState> {
        VigilanceState::from_code(argmax(&self.predict_proba(x)?))
    }

    pub fn predict_proba_matrix(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        (0..x.n_rows())
            .map(|i| self.predict_proba(&x.row_vector(i)))
            .collect()
    }

    pub fn predict_label_matrix(&self, x: &FeatureMatrix) -> Result<Vec<VigilanceState>> {
        self.predict_proba_matrix(x)?
            .iter()
            .map(|p| VigilanceState::from_code(argmax(p)))
            .collect()
    }

    pub fn summary(&self) -> String {
        format!(
            "linear model: {} classes x {} features ({}), l2 = {}",
            self.n_classes(),
            self.schema.len(),
            self.schema.id(),
            self.l2
        )
    }
}

/// Mean log-loss plus the L2 penalty, and its gradient.
fn loss_and_grad(
    x: &FeatureMatrix,
    labels: &[usize],
    weights: &[Vec<f64>],
    bias: &[f64],
    l2: f64,
) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let n = x.n_rows() as f64;
    let k_classes = bias.len();
    let d = x.n_features();
    let mut grad_w = vec![vec![0.0; d]; k_classes];
    let mut grad_b = vec![0.0; k_classes];
    let mut loss = 0.0;

    for (row, &label) in x.rows().iter().zip(labels) {
        let logits: Vec<f64> = weights
            .iter()
            .zip(bias)
            .map(|(w, b)| b + w.iter().zip(row).map(|(wi, xi)| wi * xi).sum::<f64>())
            .collect();
        let probs = softmax(&logits);
        loss -= probs[label].max(f64::MIN_POSITIVE).ln();
        for k in 0..k_classes {
            let err = probs[k] - if k == label { 1.0 } else { 0.0 };
            grad_b[k] += err;
            for (g, xi) in grad_w[k].iter_mut().zip(row) {
                *g += err * xi;
            }
        }
    }
    loss /= n;
    let mut penalty = 0.0;
    for (gw_row, w_row) in grad_w.iter_mut().zip(weights) {
        for (g, w) in gw_row.iter_mut().zip(w_row) {
            *g = *g / n + l2 * w;
            penalty += 0.5 * l2 * w * w;
        }
    }
    for g in grad_b.iter_mut() {
        *g /= n;
    }
    (loss + penalty, grad_w, grad_b)
}

/// Trains the multinomial logistic baseline on (already standardized)
/// features.
pub fn train_logistic(
    x: &FeatureMatrix,
    y: &[VigilanceState],
    config: &LogisticConfig,
) -> Result<LinearModel> {
    if x.n_rows() == 0 {
        return Err(Error::InsufficientData("no training rows".into()));
    }
    if y.len() != x.n_rows() {
        return Err(Error::Input(format!(
            "{} labels for {} rows",
            y.len(),
            x.n_rows()
        )));
    }
    if !(config.lr > 0.0) || !(config.l2 >= 0.0) || !(config.tol >= 0.0) {
        return Err(Error::Config(
            "logistic config requires lr > 0, l2 >= 0, tol >= 0".into(),
        ));
    }
    let labels: Vec<usize> = y.iter().map(|s| s.code()).collect();
    let k_classes = VigilanceState::ALL.len();
    let d = x.n_features();
    let mut weights = vec![vec![0.0; d]; k_classes];
    let mut bias = vec![0.0; k_classes];

    for iter in 0..config.max_iter {
        let (loss, grad_w, grad_b) = loss_and_grad(x, &labels, &weights, &bias, config.l2);
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite loss at iteration {iter}; try a smaller lr than {}",
                config.lr
            )));
        }
        let grad_norm = grad_w
            .iter()
            .flat_map(|r| r.iter())
            .chain(grad_b.iter())
            .fold(0.0_f64, |m, g| m.max(g.abs()));
        if grad_norm < config.tol {
            break;
        }
        for (w_row, g_row) in weights.iter_mut().zip(&grad_w) {
            for (w, g) in w_row.iter_mut().zip(g_row) {
                *w -= config.lr * g;
            }
        }
        for (b, g) in bias.iter_mut().zip(&grad_b) {
            *b -= config.lr * g;
        }
    }

    Ok(LinearModel {
        weights,
        bias,
        l2: config.l2,
        schema: x.schema().clone(),
        standardizer: None,
    })
}

/// Serializes a linear model to its text form.
pub fn linear_to_string(model: &LinearModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("{MAGIC} {VERSION}\n"));
    out.push_str(&format!("config l2={}\n", model.l2));
    let labels = VigilanceState::ALL
        .iter()
        .map(|s| format!("{}={}", s.as_str(), s.code()))
        .collect::<Vec<_>>()
        .join(" ");
    out.push_str(&format!("labels {labels}\n"));
    out.push_str(&format!(
        "schema {} {}\n",
        model.schema.id(),
        model.schema.len()
    ));
    for name in model.schema.names() {
        out.push_str(&format!("feature {name}\n"));
    }
    write_standardizer(&mut out, model.standardizer.as_ref());
    out.push_str(&format!("bias {}\n", join_floats(&model.bias)));
    out.push_str(&format!(
        "weights {} {}\n",
        model.weights.len(),
        model.schema.len()
    ));
    for row in &model.weights {
        out.push_str(&format!("row {}\n", join_floats(row)));
    }
    out.push_str("end\n");
    out
}

pub(crate) fn join_floats(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn write_standardizer(out: &mut String, std: Option<&Standardizer>) {
    match std {
        Some(std) => {
            out.push_str("standardizer yes\n");
            out.push_str(&format!("means {}\n", join_floats(std.means())));
            out.push_str(&format!("stds {}\n", join_floats(std.stds())));
        }
        None => out.push_str("standardizer no\n"),
    }
}

pub(crate) fn read_standardizer(
    r: &mut TextReader,
    schema: &FeatureSchema,
) -> Result<Option<Standardizer>> {
    match r.expect("standardizer")? {
        "yes" => {
            let means = parse_float_line(r, "means", schema.len())?;
            let stds = parse_float_line(r, "stds", schema.len())?;
            Ok(Some(Standardizer::from_parts(
                schema.clone(),
                means,
                stds,
            )?))
        }
        "no" => Ok(None),
        other => Err(Error::Parse(format!(
            "standardizer must be yes/no, got `{other}`"
        ))),
    }
}

pub(crate) fn parse_float_line(
    r: &mut TextReader,
    keyword: &str,
    expected: usize,
) -> Result<Vec<f64>> {
    let rest = r.expect(keyword)?;
    let values: Vec<f64> = rest
        .split_whitespace()
        .map(|f| r.parse_f64(f))
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::Parse(format!(
            "{}: `{keyword}` carries {} values, expected {expected}",
            r.describe(),
            values.len()
        )));
    }
    Ok(values)
}

pub(crate) fn check_magic(r: &mut TextReader, magic: &str, version: &str) -> Result<()> {
    let first = r.next_line()?;
    let [m, v] = r.parse_fields(first)?;
    if m != magic {
        return Err(Error::Format(format!(
            "not a {magic} file (starts with `{m}`)"
        )));
    }
    if v != version {
        return Err(Error::Version {
            found: v.to_string(),
            supported: version.to_string(),
        });
    }
    Ok(())
}

pub(crate) fn check_labels(r: &mut TextReader) -> Result<()> {
    let labels_line = r.expect("labels")?;
    for token in labels_line.split_whitespace() {
        let (name, code) = token
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("label entry `{token}` is not name=code")))?;
        let state = VigilanceState::parse(name)?;
        if state.code() != r.parse_usize(code)? {
            return Err(Error::Parse(format!(
                "label map entry `{token}` conflicts with the fixed encoding"
            )));
        }
    }
    Ok(())
}

pub(crate) fn read_schema(r: &mut TextReader) -> Result<FeatureSchema> {
    let schema_line = r.expect("schema")?;
    let [schema_id, schema_len] = r.parse_fields(schema_line)?;
    let schema_len = r.parse_usize(schema_len)?;
    let mut names = Vec::with_capacity(schema_len);
    for _ in 0..schema_len {
        names.push(r.expect("feature")?.to_string());
    }
    let schema = FeatureSchema::from_names(names)?;
    if schema.id() != schema_id {
        return Err(Error::Parse(format!(
            "schema id `{schema_id}` does not match its feature list (`{}`)",
            schema.id()
        )));
    }
    Ok(schema)
}

/// Parses a linear model from its text form.
pub fn linear_from_string(text: &str) -> Result<LinearModel> {
    let mut r = TextReader::new(text);
    check_magic(&mut r, MAGIC, VERSION)?;
    let config_line = r.expect("config")?;
    let [l2_field] = r.parse_fields(config_line)?;
    let l2 = r.parse_f64(l2_field.strip_prefix("l2=").ok_or_else(|| {
        Error::Parse(format!("expected `l2=...`, got `{l2_field}`"))
    })?)?;
    check_labels(&mut r)?;
    let schema = read_schema(&mut r)?;
    let standardizer = read_standardizer(&mut r, &schema)?;
    let bias_line = r.expect("bias")?;
    let bias: Vec<f64> = bias_line
        .split_whitespace()
        .map(|f| r.parse_f64(f))
        .collect::<Result<_>>()?;
    let weights_line = r.expect("weights")?;
    let [k_str, d_str] = r.parse_fields(weights_line)?;
    let k_classes = r.parse_usize(k_str)?;
    let d = r.parse_usize(d_str)?;
    if k_classes != bias.len() || d != schema.len() {
        return Err(Error::Parse(format!(
            "weight shape {k_classes}x{d} disagrees with bias {} / schema {}",
            bias.len(),
            schema.len()
        )));
    }
    let mut weights = Vec::with_capacity(k_classes);
    for k in 0..k_classes {
        r.set_context(format!("weights row {k}"));
        weights.push(parse_float_line(&mut r, "row", d)?);
    }
    r.set_context("trailer");
    r.expect("end")?;
    Ok(LinearModel {
        weights,
        bias,
        l2,
        schema,
        standardizer,
    })
}

pub fn save_linear_model(model: &LinearModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, linear_to_string(model))?;
    log::info!("{}", model.summary());
    Ok(())
}

pub fn load_linear_model(path: impl AsRef<Path>) -> Result<LinearModel> {
    linear_from_string(&fs::read_to_string(path)?)
}
