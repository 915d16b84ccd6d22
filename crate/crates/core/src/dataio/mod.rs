//! Dataset handling: epoch segmentation, label encoding, stratified splits,
//! and a seeded synthetic EEG generator for desk-scale verification.

mod csv;
mod synth;

pub use csv::{format_amplitude, load_dataset_csv, save_dataset_csv};
pub use synth::{parse_synth_config, synth_dataset, ClassOscillation, SynthConfig};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default sampling rate of the acquisition system, in Hz.
pub const DEFAULT_FS_HZ: f64 = 500.0;
/// Default scoring epoch length, in seconds.
pub const DEFAULT_EPOCH_SECONDS: f64 = 10.0;

/// Vigilance state of an epoch.
///
/// Integer codes are fixed (`Wake=0, SWS=1, REM=2`) and embedded in every
/// serialized artifact; the mapping is deliberately not alphabetical so it
/// stays stable regardless of locale or label spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VigilanceState {
    Wake,
    Sws,
    Rem,
}

impl VigilanceState {
    /// All states, in code order.
    pub const ALL: [VigilanceState; 3] =
        [VigilanceState::Wake, VigilanceState::Sws, VigilanceState::Rem];

    /// Canonical integer code.
    pub fn code(self) -> usize {
        match self {
            VigilanceState::Wake => 0,
            VigilanceState::Sws => 1,
            VigilanceState::Rem => 2,
        }
    }

    pub fn from_code(code: usize) -> Result<Self> {
        match code {
            0 => Ok(VigilanceState::Wake),
            1 => Ok(VigilanceState::Sws),
            2 => Ok(VigilanceState::Rem),
            other => Err(Error::Label(format!("no vigilance state has code {other}"))),
        }
    }

    /// Canonical label text, as written in CSV files.
    pub fn as_str(self) -> &'static str {
        match self {
            VigilanceState::Wake => "Wake",
            VigilanceState::Sws => "SWS",
            VigilanceState::Rem => "REM",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "Wake" => Ok(VigilanceState::Wake),
            "SWS" => Ok(VigilanceState::Sws),
            "REM" => Ok(VigilanceState::Rem),
            other => Err(Error::Label(format!(
                "`{other}` is not one of Wake/SWS/REM"
            ))),
        }
    }
}

impl std::fmt::Display for VigilanceState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A continuous single-channel EEG recording, amplitudes in µV.
#[derive(Debug, Clone)]
pub struct Recording {
    subject_id: String,
    fs_hz: f64,
    samples: Vec<f64>,
}

impl Recording {
    pub fn new(subject_id: impl Into<String>, fs_hz: f64, samples: Vec<f64>) -> Result<Self> {
        if !(fs_hz > 0.0) {
            return Err(Error::Config(format!(
                "sampling rate must be positive, got {fs_hz}"
            )));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Input(format!(
                "sample {pos} is not finite ({})",
                samples[pos]
            )));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            fs_hz,
            samples,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

/// One fixed-length scoring epoch (5000 samples at the 500 Hz / 10 s defaults).
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    index: usize,
    samples: Vec<f64>,
    label: Option<VigilanceState>,
}

impl Epoch {
    pub fn new(index: usize, samples: Vec<f64>, label: Option<VigilanceState>) -> Result<Self> {
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Input(format!(
                "epoch {index}: sample {pos} is not finite"
            )));
        }
        Ok(Self {
            index,
            samples,
            label,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn label(&self) -> Option<VigilanceState> {
        self.label
    }

    pub fn set_label(&mut self, label: Option<VigilanceState>) {
        self.label = label;
    }
}

/// An ordered collection of equal-length epochs.
#[derive(Debug, Clone)]
pub struct Dataset {
    epochs: Vec<Epoch>,
    schema_note: String,
}

impl Dataset {
    pub fn new(epochs: Vec<Epoch>, schema_note: impl Into<String>) -> Result<Self> {
        if let Some(first) = epochs.first() {
            let len = first.samples().len();
            for e in &epochs {
                if e.samples().len() != len {
                    return Err(Error::Format(format!(
                        "epoch {} has {} samples, expected {len}",
                        e.index(),
                        e.samples().len()
                    )));
                }
            }
        }
        Ok(Self {
            epochs,
            schema_note: schema_note.into(),
        })
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Samples per epoch; 0 for an empty dataset.
    pub fn epoch_len(&self) -> usize {
        self.epochs.first().map_or(0, |e| e.samples().len())
    }

    /// Provenance text recorded when the dataset was produced.
    pub fn schema_note(&self) -> &str {
        &self.schema_note
    }

    /// Labels of all epochs; errors if any epoch is unlabeled.
    pub fn labels(&self) -> Result<Vec<VigilanceState>> {
        self.epochs
            .iter()
            .map(|e| {
                e.label().ok_or_else(|| {
                    Error::Stratification(format!("epoch {} is unlabeled", e.index()))
                })
            })
            .collect()
    }
}

/// Proportions for a two- or three-way split. Must be positive and sum to 1.
#[derive(Debug, Clone, Copy)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: Option<f64>,
    pub test: f64,
}

impl SplitFractions {
    pub fn two_way(train: f64, test: f64) -> Self {
        Self {
            train,
            validation: None,
            test,
        }
    }

    pub fn three_way(train: f64, validation: f64, test: f64) -> Self {
        Self {
            train,
            validation: Some(validation),
            test,
        }
    }

    fn validate(&self) -> Result<()> {
        let val = self.validation.unwrap_or(0.0);
        let parts: &[f64] = if self.validation.is_some() {
            &[self.train, val, self.test]
        } else {
            &[self.train, self.test]
        };
        if parts.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Config(format!(
                "split fractions must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Disjoint index sets covering a dataset, produced by a seeded split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Option<Vec<usize>>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Cuts a recording into non-overlapping epochs of `epoch_seconds`.
///
/// Trailing samples that do not fill a complete epoch are discarded (the
/// discard count is logged at debug level).
pub fn segment(recording: &Recording, epoch_seconds: f64) -> Result<Vec<Epoch>> {
    if !(epoch_seconds > 0.0) {
        return Err(Error::Config(format!(
            "epoch length must be positive, got {epoch_seconds}"
        )));
    }
    let epoch_len = (recording.fs_hz() * epoch_seconds).round() as usize;
    if epoch_len == 0 {
        return Err(Error::Config(
            "epoch length rounds to zero samples".into(),
        ));
    }
    let n = recording.samples().len();
    if n < epoch_len {
        return Err(Error::InsufficientData(format!(
            "recording `{}` has {n} samples, one epoch needs {epoch_len}",
            recording.subject_id()
        )));
    }
    let n_epochs = n / epoch_len;
    let dropped = n - n_epochs * epoch_len;
    if dropped > 0 {
        log::debug!(
            "segment: discarded {dropped} trailing samples of recording `{}`",
            recording.subject_id()
        );
    }
    (0..n_epochs)
        .map(|i| {
            Epoch::new(
                i,
                recording.samples()[i * epoch_len..(i + 1) * epoch_len].to_vec(),
                None,
            )
        })
        .collect()
}

/// Stratified split of a fully labeled dataset.
///
/// Within each class, indices are shuffled by a seeded PRNG and cut by the
/// requested fractions, so per-class proportions in every subset match the
/// global proportions to within one sample per class.
pub fn stratified_split(
    dataset: &Dataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<SplitIndices> {
    let labels = dataset.labels()?;
    stratified_split_labels(&labels, fractions, seed)
}

/// Label-level driver for [`stratified_split`]; useful when epochs themselves
/// are not materialized.
pub fn stratified_split_labels(
    labels: &[VigilanceState],
    fractions: SplitFractions,
    seed: u64,
) -> Result<SplitIndices> {
    fractions.validate()?;
    if labels.is_empty() {
        return Err(Error::Stratification("no labeled epochs to split".into()));
    }

    let mut train = Vec::new();
    let mut validation = fractions.validation.map(|_| Vec::new());
    let mut test = Vec::new();

    for state in VigilanceState::ALL {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == state)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, state.code() as u64, 0));
        idx.shuffle(&mut rng);

        let n = idx.len() as f64;
        let cut_train = (fractions.train * n).round() as usize;
        let cut_val = match fractions.validation {
            Some(v) => ((fractions.train + v) * n).round() as usize,
            None => cut_train,
        };
        train.extend_from_slice(&idx[..cut_train.min(idx.len())]);
        if let Some(val) = validation.as_mut() {
            val.extend_from_slice(&idx[cut_train.min(idx.len())..cut_val.min(idx.len())]);
        }
        test.extend_from_slice(&idx[cut_val.min(idx.len())..]);
    }

    train.sort_unstable();
    if let Some(val) = validation.as_mut() {
        val.sort_unstable();
    }
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        validation,
        test,
        seed,
    })
}

/// Splits whole groups (e.g. all epochs of one animal) into subsets.
///
/// `groups[i]` names the group of epoch `i`. Groups are shuffled by the
/// seeded PRNG and assigned greedily so cumulative epoch counts track the
/// fractions. Unlike [`stratified_split`], per-class proportions are NOT
/// guaranteed; this exists for per-subject evaluation protocols.
pub fn split_by_group(
    groups: &[String],
    fractions: SplitFractions,
    seed: u64,
) -> Result<SplitIndices> {
    fractions.validate()?;
    if groups.is_empty() {
        return Err(Error::Stratification("no epochs to split".into()));
    }
    let mut names: Vec<&String> = Vec::new();
    for g in groups {
        if !names.contains(&g) {
            names.push(g);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 1));
    names.shuffle(&mut rng);

    let n = groups.len() as f64;
    let target_train = fractions.train * n;
    let target_val = fractions.validation.unwrap_or(0.0) * n;

    let mut train = Vec::new();
    let mut validation = fractions.validation.map(|_| Vec::new());
    let mut test = Vec::new();
    let mut assigned = 0usize;
    for name in names {
        let members: Vec<usize> = groups
            .iter()
            .enumerate()
            .filter(|(_, g)| *g == name)
            .map(|(i, _)| i)
            .collect();
        let before = assigned as f64;
        assigned += members.len();
        let bucket: &mut Vec<usize> = if before < target_train {
            &mut train
        } else if before < target_train + target_val {
            validation.as_mut().unwrap_or(&mut test)
        } else {
            &mut test
        };
        bucket.extend(members);
    }
    train.sort_unstable();
    if let Some(val) = validation.as_mut() {
        val.sort_unstable();
    }
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        validation,
        test,
        seed,
    })
}

/// Derives an independent stream seed from a base seed and two indices
/// (splitmix64 finalizer, so nearby inputs give unrelated streams).
pub(crate) fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(b.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
