//! Feed-forward network: ReLU hidden layers (128/64 by default), inverted
//! dropout after each hidden layer, softmax output trained with sparse
//! cross-entropy under Adam, with early stopping on validation loss and
//! best-weights restore.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::{derive_seed, VigilanceState};
use crate::error::{Error, Result};
use crate::features::{
    remap_to_schema, FeatureMatrix, FeatureSchema, FeatureVector, Standardizer,
};
use crate::gbt::{argmax, softmax};
use crate::textio::TextReader;

use super::logistic::{
    check_labels, check_magic, join_floats, parse_float_line, read_schema, read_standardizer,
    write_standardizer,
};

const MAGIC: &str = "vigil-mlp";
const VERSION: &str = "v1";
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Network/optimizer settings. Defaults: 128/64 hidden ReLU units, 30%
/// dropout, Adam at lr 0.001, 100 epochs of batch 32, patience 10.
#[derive(Debug, Clone)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64],
            dropout: 0.3,
            epochs: 100,
            batch_size: 32,
            lr: 0.001,
            patience: 10,
            seed: 42,
        }
    }
}

/// One dense layer, row-major `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl DenseLayer {
    pub fn zeroed(in_dim: usize, out_dim: usize) -> Self {
        Self {
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            out.push(self.b[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>());
        }
    }
}

/// A trained feed-forward classifier.
#[derive(Debug, Clone)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    /// Dropout rate the model was trained with (inference ignores it).
    pub dropout: f64,
    pub schema: FeatureSchema,
    pub standardizer: Option<Standardizer>,
}

impl MlpModel {
    /// Builds a model from explicit layers (deserialization and tests).
    pub fn from_parts(
        layers: Vec<DenseLayer>,
        dropout: f64,
        schema: FeatureSchema,
        standardizer: Option<Standardizer>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if layers[0].in_dim != schema.len() {
            return Err(Error::Input(format!(
                "first layer expects {} inputs, schema provides {}",
                layers[0].in_dim,
                schema.len()
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Input("layer dimensions do not chain".into()));
            }
        }
        Ok(Self {
            layers,
            dropout,
            schema,
            standardizer,
        })
    }

    pub fn with_standardizer(mut self, standardizer: Standardizer) -> Self {
        self.standardizer = Some(standardizer);
        self
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    fn prepare_row(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        let row = remap_to_schema(x, &self.schema)?;
        Ok(match &self.standardizer {
            Some(std) => std.apply(&row)?.values().to_vec(),
            None => row.values().to_vec(),
        })
    }

    /// Output logits for a prepared row; plain forward pass, no dropout.
    pub fn logits(&self, row: &[f64]) -> Vec<f64> {
        let mut a = row.to_vec();
        let mut z = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut z);
            if i + 1 < self.layers.len() {
                for v in z.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut a, &mut z);
        }
        a
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
            "mlp model: dims {:?}, dropout {}, {} features ({})",
            self.dims(),
            self.dropout,
            self.schema.len(),
            self.schema.id()
        )
    }
}

/// Softmax probabilities for one input (free-function form of
/// [`MlpModel::predict_proba`]).
pub fn mlp_predict(model: &MlpModel, x: &FeatureVector) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

/// Per-epoch training history.
#[derive(Debug, Clone)]
pub struct TrainLog {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Epoch (1-based) at which early stopping fired, if it did.
    pub early_stop_epoch: Option<usize>,
    /// Epoch (1-based) whose weights the returned model carries.
    pub best_epoch: usize,
}

/// Writes the TrainLog CSV contract: `epoch,train_loss,val_loss,val_acc`.
pub fn save_train_log_csv(log: &TrainLog, path: impl AsRef<Path>) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "epoch,train_loss,val_loss,val_acc")?;
    for (i, ((tl, vl), va)) in log
        .train_loss
        .iter()
        .zip(&log.val_loss)
        .zip(&log.val_accuracy)
        .enumerate()
    {
        writeln!(w, "{},{tl},{vl},{va}", i + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-layer gradients, mirroring [`DenseLayer`] shapes.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Mean cross-entropy over a batch and its gradients, dropout disabled.
/// Backs the finite-difference gradient checks.
pub fn mlp_loss_and_grads(
    model: &MlpModel,
    rows: &[Vec<f64>],
    labels: &[usize],
) -> (f64, Vec<LayerGrads>) {
    let mut grads: Vec<LayerGrads> = model
        .layers
        .iter()
        .map(|l| LayerGrads {
            w: vec![0.0; l.w.len()],
            b: vec![0.0; l.b.len()],
        })
        .collect();
    let loss = accumulate_batch(model, rows, labels, None, &mut grads);
    (loss, grads)
}

/// Forward+backward over a batch; adds gradients into `grads` and returns the
/// mean loss. `masks` carries per-sample dropout masks for hidden layers
/// (None = no dropout).
fn accumulate_batch(
    model: &MlpModel,
    rows: &[Vec<f64>],
    labels: &[usize],
    masks: Option<&[Vec<Vec<f64>>]>,
    grads: &mut [LayerGrads],
) -> f64 {
    let n_layers = model.layers.len();
    let batch = rows.len() as f64;
    let mut loss = 0.0;

    for (s, (row, &label)) in rows.iter().zip(labels).enumerate() {
        // Forward, keeping post-activation (and post-mask) values per layer.
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        activations.push(row.clone());
        for (l, layer) in model.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.forward(activations.last().unwrap(), &mut z);
            if l + 1 < n_layers {
                for v in z.iter_mut() {
                    *v = v.max(0.0);
                }
                if let Some(masks) = masks {
                    for (v, m) in z.iter_mut().zip(&masks[s][l]) {
                        *v *= m;
                    }
                }
            }
            activations.push(z);
        }
        let probs = softmax(activations.last().unwrap());
        loss -= probs[label].max(f64::MIN_POSITIVE).ln();

        // Backward.
        let mut delta: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(k, &p)| (p - if k == label { 1.0 } else { 0.0 }) / batch)
            .collect();
        for l in (0..n_layers).rev() {
            let layer = &model.layers[l];
            let input = &activations[l];
            for o in 0..layer.out_dim {
                grads[l].b[o] += delta[o];
                let w_row = &mut grads[l].w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, x) in w_row.iter_mut().zip(input) {
                    *g += delta[o] * x;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let w_row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (p, w) in prev.iter_mut().zip(w_row) {
                        *p += w * delta[o];
                    }
                }
                // ReLU (and dropout mask) derivative through layer l-1's output.
                for (j, p) in prev.iter_mut().enumerate() {
                    if activations[l][j] <= 0.0 {
                        *p = 0.0;
                    } else if let Some(masks) = masks {
                        *p *= masks[s][l - 1][j];
                    }
                }
                delta = prev;
            }
        }
    }
    loss / batch
}

struct AdamState {
    m: Vec<LayerGrads>,
    v: Vec<LayerGrads>,
    t: u64,
}

impl AdamState {
    fn new(layers: &[DenseLayer]) -> Self {
        let zeros = |l: &DenseLayer| LayerGrads {
            w: vec![0.0; l.w.len()],
            b: vec![0.0; l.b.len()],
        };
        Self {
            m: layers.iter().map(zeros).collect(),
            v: layers.iter().map(zeros).collect(),
            t: 0,
        }
    }

    fn step(&mut self, layers: &mut [DenseLayer], grads: &[LayerGrads], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for (l, layer) in layers.iter_mut().enumerate() {
            let update = |param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| {
                for i in 0..param.len() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    param[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            };
            update(&mut layer.w, &grads[l].w, &mut self.m[l].w, &mut self.v[l].w);
            update(&mut layer.b, &grads[l].b, &mut self.m[l].b, &mut self.v[l].b);
        }
    }
}

fn he_init(layers_dims: &[usize], seed: u64) -> Vec<DenseLayer> {
    layers_dims
        .windows(2)
        .enumerate()
        .map(|(l, dims)| {
            let (in_dim, out_dim) = (dims[0], dims[1]);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3000 + l as u64, 0));
            let limit = (6.0 / in_dim as f64).sqrt();
            let w = (0..in_dim * out_dim)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            DenseLayer {
                w,
                b: vec![0.0; out_dim],
                in_dim,
                out_dim,
            }
        })
        .collect()
}

fn eval_loss_accuracy(model: &MlpModel, rows: &[Vec<f64>], labels: &[usize]) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (row, &label) in rows.iter().zip(labels) {
        let probs = softmax(&model.logits(row));
        loss -= probs[label].max(f64::MIN_POSITIVE).ln();
        if argmax(&probs) == label {
            correct += 1;
        }
    }
    (loss / rows.len() as f64, correct as f64 / rows.len() as f64)
}

/// Trains the network on the train rows of `x`, early-stopping on the
/// validation rows. Features must already be standardized. Shuffling,
/// initialization, and dropout are all seeded, so training is deterministic.
pub fn train_mlp(
    x: &FeatureMatrix,
    y: &[VigilanceState],
    train_idx: &[usize],
    val_idx: &[usize],
    config: &MlpConfig,
) -> Result<(MlpModel, TrainLog)> {
    if y.len() != x.n_rows() {
        return Err(Error::Input(format!(
            "{} labels for {} rows",
            y.len(),
            x.n_rows()
        )));
    }
    if train_idx.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if val_idx.is_empty() {
        return Err(Error::InsufficientData(
            "early stopping needs a nonempty validation set".into(),
        ));
    }
    if !(0.0..1.0).contains(&config.dropout) {
        return Err(Error::Config(format!(
            "dropout must be in [0, 1), got {}",
            config.dropout
        )));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }

    let k_classes = VigilanceState::ALL.len();
    let mut dims = vec![x.n_features()];
    dims.extend_from_slice(&config.hidden);
    dims.push(k_classes);

    let mut model = MlpModel::from_parts(
        he_init(&dims, config.seed),
        config.dropout,
        x.schema().clone(),
        None,
    )?;
    let mut adam = AdamState::new(&model.layers);

    let train_rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| x.row(i).to_vec()).collect();
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| y[i].code()).collect();
    let val_rows: Vec<Vec<f64>> = val_idx.iter().map(|&i| x.row(i).to_vec()).collect();
    let val_labels: Vec<usize> = val_idx.iter().map(|&i| y[i].code()).collect();

    let mut log = TrainLog {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_accuracy: Vec::new(),
        early_stop_epoch: None,
        best_epoch: 0,
    };
    let mut best_val = f64::INFINITY;
    let mut best_weights = model.layers.clone();
    let mut epochs_without_improvement = 0usize;
    let keep = 1.0 - config.dropout;
    let n_hidden = config.hidden.len();

    for epoch in 1..=config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 4000 + epoch as u64, 0));
        let mut order: Vec<usize> = (0..train_rows.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for batch_idx in order.chunks(config.batch_size) {
            let rows: Vec<Vec<f64>> = batch_idx.iter().map(|&i| train_rows[i].clone()).collect();
            let labels: Vec<usize> = batch_idx.iter().map(|&i| train_labels[i]).collect();
            let masks: Option<Vec<Vec<Vec<f64>>>> = if config.dropout > 0.0 {
                Some(
                    (0..rows.len())
                        .map(|_| {
                            (0..n_hidden)
                                .map(|l| {
                                    (0..config.hidden[l])
                                        .map(|_| {
                                            if rng.random_range(0.0..1.0) < keep {
                                                1.0 / keep
                                            } else {
                                                0.0
                                            }
                                        })
                                        .collect()
                                })
                                .collect()
                        })
                        .collect(),
                )
            } else {
                None
            };

            let mut grads: Vec<LayerGrads> = model
                .layers
                .iter()
                .map(|l| LayerGrads {
                    w: vec![0.0; l.w.len()],
                    b: vec![0.0; l.b.len()],
                })
                .collect();
            let batch_loss =
                accumulate_batch(&model, &rows, &labels, masks.as_deref(), &mut grads);
            if !batch_loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            adam.step(&mut model.layers, &grads, config.lr);
            epoch_loss += batch_loss;
            n_batches += 1;
        }
        log.train_loss.push(epoch_loss / n_batches.max(1) as f64);

        let (val_loss, val_acc) = eval_loss_accuracy(&model, &val_rows, &val_labels);
        log.val_loss.push(val_loss);
        log.val_accuracy.push(val_acc);

        if val_loss < best_val {
            best_val = val_loss;
            best_weights = model.layers.clone();
            log.best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement > config.patience {
                log.early_stop_epoch = Some(epoch);
                break;
            }
        }
    }

    model.layers = best_weights;
    Ok((model, log))
}

fn layers_to_string(out: &mut String, layers: &[DenseLayer]) {
    let dims: Vec<String> = std::iter::once(layers[0].in_dim)
        .chain(layers.iter().map(|l| l.out_dim))
        .map(|d| d.to_string())
        .collect();
    out.push_str(&format!("dims {}\n", dims.join(" ")));
    for (i, layer) in layers.iter().enumerate() {
        out.push_str(&format!("layer {i}\n"));
        out.push_str(&format!("bias {}\n", join_floats(&layer.b)));
        for o in 0..layer.out_dim {
            let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
            out.push_str(&format!("row {}\n", join_floats(row)));
        }
    }
}

/// Serializes an MLP model to its text form.
pub fn mlp_to_string(model: &MlpModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("{MAGIC} {VERSION}\n"));
    out.push_str(&format!("config dropout={}\n", model.dropout));
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
    layers_to_string(&mut out, &model.layers);
    out.push_str("end\n");
    out
}

/// Parses an MLP model from its text form.
pub fn mlp_from_string(text: &str) -> Result<MlpModel> {
    let mut r = TextReader::new(text);
    check_magic(&mut r, MAGIC, VERSION)?;
    let config_line = r.expect("config")?;
    let [dropout_field] = r.parse_fields(config_line)?;
    let dropout = r.parse_f64(dropout_field.strip_prefix("dropout=").ok_or_else(|| {
        Error::Parse(format!("expected `dropout=...`, got `{dropout_field}`"))
    })?)?;
    check_labels(&mut r)?;
    let schema = read_schema(&mut r)?;
    let standardizer = read_standardizer(&mut r, &schema)?;

    let dims_line = r.expect("dims")?;
    let dims: Vec<usize> = dims_line
        .split_whitespace()
        .map(|f| r.parse_usize(f))
        .collect::<Result<_>>()?;
    if dims.len() < 2 {
        return Err(Error::Parse("dims needs at least input and output".into()));
    }
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (l, pair) in dims.windows(2).enumerate() {
        r.set_context(format!("layer {l}"));
        let layer_line = r.expect("layer")?;
        if r.parse_usize(layer_line)? != l {
            return Err(Error::Parse(format!("layer header out of order at {l}")));
        }
        let (in_dim, out_dim) = (pair[0], pair[1]);
        let b = parse_float_line(&mut r, "bias", out_dim)?;
        let mut w = Vec::with_capacity(in_dim * out_dim);
        for o in 0..out_dim {
            r.set_context(format!("layer {l} row {o}"));
            w.extend(parse_float_line(&mut r, "row", in_dim)?);
        }
        layers.push(DenseLayer {
            w,
            b,
            in_dim,
            out_dim,
        });
    }
    r.set_context("trailer");
    r.expect("end")?;
    MlpModel::from_parts(layers, dropout, schema, standardizer)
}

pub fn save_mlp_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, mlp_to_string(model))?;
    log::info!("{}", model.summary());
    Ok(())
}

pub fn load_mlp_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    mlp_from_string(&fs::read_to_string(path)?)
}
