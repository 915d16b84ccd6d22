//! Epoch CSV format: header `label,s0,...,s{N-1}`, one epoch per row.
//!
//! Amplitudes are stored with 6 significant decimal digits (`d.ddddde±k`).
//! Reading a written file and writing it again reproduces the bytes exactly,
//! because any value printed at that precision parses back to a float that
//! prints identically.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Dataset, Epoch, VigilanceState};

/// Serializes one amplitude with 6 significant decimal digits.
pub fn format_amplitude(x: f64) -> String {
    format!("{x:.5e}")
}

/// Rounds `x` to the value its CSV representation parses back to.
pub(crate) fn quantize_amplitude(x: f64) -> f64 {
    format_amplitude(x).parse().expect("formatted float reparses")
}

/// Writes a dataset in the epoch CSV format.
pub fn save_dataset_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn write_dataset(dataset: &Dataset, w: &mut impl Write) -> Result<()> {
    let epoch_len = dataset.epoch_len();
    write!(w, "label")?;
    for i in 0..epoch_len {
        write!(w, ",s{i}")?;
    }
    writeln!(w)?;
    for epoch in dataset.epochs() {
        if let Some(l) = epoch.label() {
            write!(w, "{}", l.as_str())?;
        }
        for s in epoch.samples() {
            write!(w, ",{}", format_amplitude(*s))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Loads a dataset from the epoch CSV format.
///
/// The label column may be empty (unlabeled epoch). Row numbers in error
/// messages are 1-based file lines, header included.
pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();

    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))??;
    let n_cols = header.split(',').count();
    if n_cols < 2 || !header.starts_with("label,") {
        return Err(Error::Format(format!(
            "{}: header must be `label,s0,...`, got `{}`",
            path.display(),
            header.chars().take(40).collect::<String>()
        )));
    }
    let epoch_len = n_cols - 1;

    let mut epochs = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let row = i + 2; // 1-based, after the header
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label_text = fields.next().unwrap_or("");
        let label = if label_text.is_empty() {
            None
        } else {
            Some(VigilanceState::parse(label_text).map_err(|_| {
                Error::Label(format!("row {row}: `{label_text}` is not one of Wake/SWS/REM"))
            })?)
        };
        let mut samples = Vec::with_capacity(epoch_len);
        for field in fields {
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!(
                    "row {row}, sample column {}: `{field}` is not a number",
                    samples.len()
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Input(format!(
                    "row {row}, sample column {}: non-finite value",
                    samples.len()
                )));
            }
            samples.push(v);
        }
        if samples.len() != epoch_len {
            return Err(Error::Format(format!(
                "row {row}: expected {epoch_len} sample columns, found {}",
                samples.len()
            )));
        }
        epochs.push(Epoch::new(epochs.len(), samples, label)?);
    }
    Dataset::new(epochs, format!("loaded from {}", path.display()))
}
