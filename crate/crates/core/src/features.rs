//! Time-domain descriptors (MMD, Hjorth), feature-vector assembly against a
//! fixed schema, and train-set standardization.
//!
//! Three canonical schemas exist:
//! * `compact` — 9 engineered features: five absolute band powers, spectral
//!   entropy, MMD, and the Hjorth mobility/complexity pair.
//! * `extended` — compact plus per-band relative power, peak frequency, and
//!   band entropy (24 features).
//! * `raw_plus_compact` — the raw samples followed by the compact features
//!   (5009 at the 5000-sample default).
//!
//! Tree models consume unstandardized features; standardization applies to
//! the linear and network paths only.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::dataio::{Dataset, Epoch, VigilanceState};
use crate::error::{Error, Result};
use crate::spectral::{
    band_power, peak_frequency, relative_power, spectral_entropy, welch_psd_samples, BandDef,
    Psd, WelchConfig,
};

const COMPACT_NAMES: [&str; 9] = [
    "delta_power",
    "theta_power",
    "alpha_power",
    "beta_power",
    "gamma_power",
    "spectral_entropy",
    "mmd",
    "mobility",
    "complexity",
];

/// Schema variant tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaVariant {
    Compact,
    Extended,
    RawPlusCompact,
    Custom,
}

impl SchemaVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaVariant::Compact => "compact",
            SchemaVariant::Extended => "extended",
            SchemaVariant::RawPlusCompact => "raw_plus_compact",
            SchemaVariant::Custom => "custom",
        }
    }
}

/// An ordered, named feature layout. Cloning is cheap (shared name table).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    variant: SchemaVariant,
    names: Arc<[String]>,
}

impl FeatureSchema {
    /// The 9-feature engineered schema.
    pub fn compact() -> Self {
        Self {
            variant: SchemaVariant::Compact,
            names: COMPACT_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Compact plus per-band relative power, peak frequency, and entropy.
    pub fn extended() -> Self {
        let mut names: Vec<String> = COMPACT_NAMES.iter().map(|s| s.to_string()).collect();
        let bands = ["delta", "theta", "alpha", "beta", "gamma"];
        names.extend(bands.iter().map(|b| format!("{b}_rel_power")));
        names.extend(bands.iter().map(|b| format!("{b}_peak_freq")));
        names.extend(bands.iter().map(|b| format!("{b}_entropy")));
        Self {
            variant: SchemaVariant::Extended,
            names: names.into(),
        }
    }

    /// Raw samples followed by the compact features.
    pub fn raw_plus_compact(epoch_len: usize) -> Self {
        let mut names: Vec<String> = (0..epoch_len).map(|i| format!("raw_{i}")).collect();
        names.extend(COMPACT_NAMES.iter().map(|s| s.to_string()));
        Self {
            variant: SchemaVariant::RawPlusCompact,
            names: names.into(),
        }
    }

    /// An arbitrary ordered selection of known feature names.
    pub fn custom(names: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if n.is_empty() || n.contains(',') || n.contains(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "feature name `{n}` must be non-empty with no commas or whitespace"
                )));
            }
            if !seen.insert(n.clone()) {
                return Err(Error::Config(format!("duplicate feature name `{n}`")));
            }
        }
        if names.is_empty() {
            return Err(Error::Config("schema must name at least one feature".into()));
        }
        Ok(Self {
            variant: SchemaVariant::Custom,
            names: names.into(),
        })
    }

    /// Recovers the canonical variant from a name list (CSV headers, model
    /// files); anything unrecognized is `Custom`.
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let schema = Self::custom(names)?;
        let variant = if schema.names.iter().eq(COMPACT_NAMES.iter()) {
            SchemaVariant::Compact
        } else if schema.names.iter().eq(Self::extended().names.iter()) {
            SchemaVariant::Extended
        } else if schema.names.len() > COMPACT_NAMES.len()
            && Self::raw_plus_compact(schema.names.len() - COMPACT_NAMES.len())
                .names
                .iter()
                .eq(schema.names.iter())
        {
            SchemaVariant::RawPlusCompact
        } else {
            SchemaVariant::Custom
        };
        Ok(Self { variant, ..schema })
    }

    pub fn variant(&self) -> SchemaVariant {
        self.variant
    }

    /// Identifier recorded in serialized artifacts.
    pub fn id(&self) -> &'static str {
        self.variant.as_str()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// One epoch's features, bound to the schema that orders them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    schema: FeatureSchema,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, schema: FeatureSchema) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::Input(format!(
                "feature vector has {} values, schema `{}` expects {}",
                values.len(),
                schema.id(),
                schema.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "feature `{}` is not finite",
                schema.names()[pos]
            )));
        }
        Ok(Self { values, schema })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }
}

/// A row-major feature matrix with a single schema.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    schema: FeatureSchema,
    rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Input(format!(
                    "row {i} has {} values, schema `{}` expects {}",
                    row.len(),
                    schema.id(),
                    schema.len()
                )));
            }
            if let Some(pos) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Input(format!(
                    "row {i}, feature `{}`: not finite",
                    schema.names()[pos]
                )));
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn from_vectors(vectors: Vec<FeatureVector>) -> Result<Self> {
        let schema = match vectors.first() {
            Some(v) => v.schema().clone(),
            None => return Err(Error::Input("no feature vectors".into())),
        };
        let mut rows = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.schema() != &schema {
                return Err(Error::SchemaMismatch {
                    expected: schema.id().into(),
                    found: v.schema().id().into(),
                });
            }
            rows.push(v.values);
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn row_vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            values: self.rows[i].clone(),
            schema: self.schema.clone(),
        }
    }

    /// Keeps only the selected rows (used for train/test splits).
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Extraction knobs; `fs_hz` feeds Welch, `mmd_window_len` the MMD scan.
#[derive(Debug, Clone, Copy)]
pub struct ExtractConfig {
    pub fs_hz: f64,
    pub welch: WelchConfig,
    pub mmd_window_len: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            fs_hz: crate::dataio::DEFAULT_FS_HZ,
            welch: WelchConfig::default(),
            mmd_window_len: 100,
        }
    }
}

/// Per-window max/min geometry backing one MMD term.
#[derive(Debug, Clone, Copy)]
pub struct MmdWindow {
    /// Sample offset of the window maximum (first occurrence on ties).
    pub argmax: usize,
    /// Sample offset of the window minimum (first occurrence on ties).
    pub argmin: usize,
    /// `argmax - argmin` in samples.
    pub index_span: f64,
    /// `max - min` in µV.
    pub amplitude_span: f64,
    /// `sqrt(index_span² + amplitude_span²)`.
    pub distance: f64,
}

/// Maximum-Minimum Distance: sum over consecutive non-overlapping windows of
/// the Euclidean distance between each window's maximum and minimum points in
/// (sample-index, amplitude) space. Dimensionless by convention.
pub fn mmd(epoch: &Epoch, window_len: usize) -> Result<f64> {
    Ok(mmd_windows(epoch.samples(), window_len)?
        .iter()
        .map(|w| w.distance)
        .sum())
}

/// Per-window decomposition of [`mmd`].
pub fn mmd_windows(samples: &[f64], window_len: usize) -> Result<Vec<MmdWindow>> {
    if window_len == 0 || window_len > samples.len() {
        return Err(Error::Config(format!(
            "MMD window of {window_len} samples does not fit an epoch of {}",
            samples.len()
        )));
    }
    if samples.len() % window_len != 0 {
        return Err(Error::Config(format!(
            "MMD window {window_len} must divide the epoch length {}",
            samples.len()
        )));
    }
    Ok(samples
        .chunks_exact(window_len)
        .map(|w| {
            let mut argmax = 0;
            let mut argmin = 0;
            for (i, &v) in w.iter().enumerate() {
                if v > w[argmax] {
                    argmax = i;
                }
                if v < w[argmin] {
                    argmin = i;
                }
            }
            let index_span = argmax as f64 - argmin as f64;
            let amplitude_span = w[argmax] - w[argmin];
            MmdWindow {
                argmax,
                argmin,
                index_span,
                amplitude_span,
                distance: index_span.hypot(amplitude_span),
            }
        })
        .collect())
}

/// Hjorth descriptors of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hjorth {
    /// Signal variance, µV².
    pub activity: f64,
    /// `sqrt(var(Δx) / var(x))`, dimensionless.
    pub mobility: f64,
    /// `mobility(Δx) / mobility(x)`, dimensionless.
    pub complexity: f64,
}

/// First-difference Hjorth parameters. Conventions: a constant signal gives
/// (0, 0, 0); zero first-difference variance with nonzero activity gives
/// mobility 0 and complexity 0.
pub fn hjorth(epoch: &Epoch) -> Result<Hjorth> {
    hjorth_samples(epoch.samples())
}

pub fn hjorth_samples(samples: &[f64]) -> Result<Hjorth> {
    if samples.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "Hjorth parameters need at least 3 samples, got {}",
            samples.len()
        )));
    }
    let var_x = population_variance(samples);
    if var_x <= 0.0 {
        return Ok(Hjorth {
            activity: 0.0,
            mobility: 0.0,
            complexity: 0.0,
        });
    }
    let d1: Vec<f64> = samples.windows(2).map(|w| w[1] - w[0]).collect();
    let var_d1 = population_variance(&d1);
    if var_d1 <= 0.0 {
        return Ok(Hjorth {
            activity: var_x,
            mobility: 0.0,
            complexity: 0.0,
        });
    }
    let d2: Vec<f64> = d1.windows(2).map(|w| w[1] - w[0]).collect();
    let var_d2 = population_variance(&d2);
    let mobility = (var_d1 / var_x).sqrt();
    let complexity = (var_d2 / var_d1).sqrt() / mobility;
    Ok(Hjorth {
        activity: var_x,
        mobility,
        complexity,
    })
}

fn population_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Lazily computed per-epoch quantities shared by the extractor.
struct EpochContext<'a> {
    samples: &'a [f64],
    config: &'a ExtractConfig,
    psd: Option<Psd>,
    hjorth: Option<Hjorth>,
}

impl<'a> EpochContext<'a> {
    fn new(samples: &'a [f64], config: &'a ExtractConfig) -> Self {
        Self {
            samples,
            config,
            psd: None,
            hjorth: None,
        }
    }

    fn psd(&mut self) -> Result<&Psd> {
        if self.psd.is_none() {
            self.psd = Some(welch_psd_samples(
                self.samples,
                self.config.fs_hz,
                &self.config.welch,
            )?);
        }
        Ok(self.psd.as_ref().unwrap())
    }

    fn hjorth(&mut self) -> Result<Hjorth> {
        if self.hjorth.is_none() {
            self.hjorth = Some(hjorth_samples(self.samples)?);
        }
        Ok(self.hjorth.unwrap())
    }

    fn band(name: &str) -> Option<BandDef> {
        match name {
            "delta" => Some(BandDef::delta()),
            "theta" => Some(BandDef::theta()),
            "alpha" => Some(BandDef::alpha()),
            "beta" => Some(BandDef::beta()),
            "gamma" => Some(BandDef::gamma()),
            _ => None,
        }
    }

    /// Computes one named feature; `qc` collects degeneracy flags.
    fn value(&mut self, name: &str, qc: &mut Vec<String>) -> Result<f64> {
        if let Some(idx_text) = name.strip_prefix("raw_") {
            let idx: usize = idx_text
                .parse()
                .map_err(|_| Error::Config(format!("unknown feature `{name}`")))?;
            return self.samples.get(idx).copied().ok_or_else(|| {
                Error::Config(format!(
                    "feature `{name}` out of range for epoch of {} samples",
                    self.samples.len()
                ))
            });
        }
        if let Some(band_name) = name.strip_suffix("_power") {
            if let Some(band) = Self::band(band_name) {
                return band_power(self.psd()?, &band);
            }
        }
        if let Some(band_name) = name.strip_suffix("_rel_power") {
            if let Some(band) = Self::band(band_name) {
                return relative_power(self.psd()?, &band, &BandDef::total_range());
            }
        }
        if let Some(band_name) = name.strip_suffix("_peak_freq") {
            if let Some(band) = Self::band(band_name) {
                let peak = peak_frequency(self.psd()?, &band)?;
                if peak.degenerate {
                    qc.push(format!("{name}: degenerate (no power in band)"));
                }
                return Ok(peak.freq_hz);
            }
        }
        if let Some(band_name) = name.strip_suffix("_entropy") {
            if band_name == "spectral" {
                return spectral_entropy(self.psd()?, &BandDef::total_range());
            }
            if let Some(band) = Self::band(band_name) {
                return spectral_entropy(self.psd()?, &band);
            }
        }
        match name {
            "mmd" => Ok(mmd_windows(self.samples, self.config.mmd_window_len)?
                .iter()
                .map(|w| w.distance)
                .sum()),
            "mobility" => Ok(self.hjorth()?.mobility),
            "complexity" => Ok(self.hjorth()?.complexity),
            other => Err(Error::Config(format!("unknown feature `{other}`"))),
        }
    }
}

/// Computes a feature vector for one epoch in schema order.
pub fn extract_features(
    epoch: &Epoch,
    schema: &FeatureSchema,
    config: &ExtractConfig,
) -> Result<FeatureVector> {
    Ok(extract_features_qc(epoch, schema, config)?.0)
}

/// As [`extract_features`], also returning QC flags (degenerate peak bands
/// and similar conventions that fired for this epoch).
pub fn extract_features_qc(
    epoch: &Epoch,
    schema: &FeatureSchema,
    config: &ExtractConfig,
) -> Result<(FeatureVector, Vec<String>)> {
    let mut ctx = EpochContext::new(epoch.samples(), config);
    let mut qc = Vec::new();
    let mut values = Vec::with_capacity(schema.len());
    for name in schema.names() {
        let v = ctx.value(name, &mut qc).map_err(|e| match e {
            Error::Config(msg) => Error::Config(msg),
            other => Error::Config(format!("feature `{name}`: {other}")),
        })?;
        values.push(v);
    }
    Ok((FeatureVector::new(values, schema.clone())?, qc))
}

/// Extracts the whole dataset into a matrix plus per-epoch labels; QC flags
/// are counted and logged.
pub fn extract_matrix(
    dataset: &Dataset,
    schema: &FeatureSchema,
    config: &ExtractConfig,
) -> Result<(FeatureMatrix, Vec<Option<VigilanceState>>)> {
    let mut rows = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    let mut qc_count = 0usize;
    for epoch in dataset.epochs() {
        let (v, qc) = extract_features_qc(epoch, schema, config)?;
        qc_count += qc.len();
        rows.push(v.values);
        labels.push(epoch.label());
    }
    if qc_count > 0 {
        log::warn!("feature extraction raised {qc_count} QC flags");
    }
    Ok((FeatureMatrix::new(schema.clone(), rows)?, labels))
}

/// Per-feature mean and population standard deviation fitted on training
/// rows. Zero-variance features are flagged and map to 0 when applied.
#[derive(Debug, Clone)]
pub struct Standardizer {
    schema: FeatureSchema,
    means: Vec<f64>,
    stds: Vec<f64>,
    zero_variance: Vec<usize>,
}

impl Standardizer {
    /// Reassembles a fitted standardizer (model deserialization).
    pub fn from_parts(schema: FeatureSchema, means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        if means.len() != schema.len() || stds.len() != schema.len() {
            return Err(Error::Input(format!(
                "standardizer moments ({}, {}) do not match schema of {}",
                means.len(),
                stds.len(),
                schema.len()
            )));
        }
        if stds.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Input("standard deviations must be >= 0".into()));
        }
        let zero_variance = stds
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == 0.0)
            .map(|(j, _)| j)
            .collect();
        Ok(Self {
            schema,
            means,
            stds,
            zero_variance,
        })
    }

    pub fn fit(matrix: &FeatureMatrix) -> Result<Self> {
        let n = matrix.n_rows();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "standardizer needs at least 2 rows, got {n}"
            )));
        }
        let d = matrix.n_features();
        let mut means = vec![0.0; d];
        for row in matrix.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut vars = vec![0.0; d];
        for row in matrix.rows() {
            for ((var, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *var += (v - m) * (v - m);
            }
        }
        let mut zero_variance = Vec::new();
        let stds: Vec<f64> = vars
            .iter()
            .enumerate()
            .map(|(j, &var)| {
                let sd = (var / n as f64).sqrt();
                if sd == 0.0 {
                    zero_variance.push(j);
                }
                sd
            })
            .collect();
        if !zero_variance.is_empty() {
            log::warn!(
                "standardizer: {} zero-variance feature(s): {}",
                zero_variance.len(),
                zero_variance
                    .iter()
                    .map(|&j| matrix.schema().names()[j].as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        Ok(Self {
            schema: matrix.schema().clone(),
            means,
            stds,
            zero_variance,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// Indices of features with zero training variance.
    pub fn zero_variance(&self) -> &[usize] {
        &self.zero_variance
    }

    pub fn apply(&self, row: &FeatureVector) -> Result<FeatureVector> {
        if row.schema() != &self.schema {
            return Err(Error::SchemaMismatch {
                expected: self.schema.id().into(),
                found: row.schema().id().into(),
            });
        }
        let values = self.apply_slice(row.values());
        FeatureVector::new(values, self.schema.clone())
    }

    pub fn apply_matrix(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        if matrix.schema() != &self.schema {
            return Err(Error::SchemaMismatch {
                expected: self.schema.id().into(),
                found: matrix.schema().id().into(),
            });
        }
        let rows = matrix.rows().iter().map(|r| self.apply_slice(r)).collect();
        FeatureMatrix::new(self.schema.clone(), rows)
    }

    fn apply_slice(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| if *s == 0.0 { 0.0 } else { (v - m) / s })
            .collect()
    }
}

/// Writes the feature-matrix CSV: header = schema names + `label`, one row
/// per epoch. Values use shortest round-trip float formatting, so reading
/// recovers them bit-exactly.
pub fn save_feature_csv(
    matrix: &FeatureMatrix,
    labels: &[Option<VigilanceState>],
    path: impl AsRef<Path>,
) -> Result<()> {
    if labels.len() != matrix.n_rows() {
        return Err(Error::Input(format!(
            "{} labels for {} rows",
            labels.len(),
            matrix.n_rows()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{},label", matrix.schema().names().join(","))?;
    for (row, label) in matrix.rows().iter().zip(labels) {
        for v in row {
            write!(w, "{v},")?;
        }
        match label {
            Some(l) => writeln!(w, "{}", l.as_str())?,
            None => writeln!(w)?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a feature-matrix CSV written by [`save_feature_csv`].
pub fn load_feature_csv(
    path: impl AsRef<Path>,
) -> Result<(FeatureMatrix, Vec<Option<VigilanceState>>)> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))??;
    let mut names: Vec<String> = header.split(',').map(str::to_string).collect();
    match names.pop() {
        Some(last) if last == "label" => {}
        _ => {
            return Err(Error::Format(format!(
                "{}: last header column must be `label`",
                path.display()
            )))
        }
    }
    let schema = FeatureSchema::from_names(names)?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let row_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != schema.len() + 1 {
            return Err(Error::Format(format!(
                "row {row_no}: expected {} columns, found {}",
                schema.len() + 1,
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(schema.len());
        for (j, field) in fields[..schema.len()].iter().enumerate() {
            row.push(field.parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "row {row_no}, `{}`: `{field}` is not a number",
                    schema.names()[j]
                ))
            })?);
        }
        let label_text = fields[schema.len()];
        labels.push(if label_text.is_empty() {
            None
        } else {
            Some(VigilanceState::parse(label_text)?)
        });
        rows.push(row);
    }
    Ok((FeatureMatrix::new(schema, rows)?, labels))
}

/// Remaps `row` into `target` order by feature name. Used so models can score
/// inputs whose columns are permuted relative to training.
pub fn remap_to_schema(row: &FeatureVector, target: &FeatureSchema) -> Result<FeatureVector> {
    if row.schema() == target {
        return Ok(row.clone());
    }
    let by_name: HashMap<&str, usize> = row
        .schema()
        .names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut values = Vec::with_capacity(target.len());
    for name in target.names() {
        match by_name.get(name.as_str()) {
            Some(&i) => values.push(row.values()[i]),
            None => {
                return Err(Error::SchemaMismatch {
                    expected: target.id().into(),
                    found: row.schema().id().into(),
                })
            }
        }
    }
    FeatureVector::new(values, target.clone())
}
