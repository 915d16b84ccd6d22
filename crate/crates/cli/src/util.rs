//! Shared CLI plumbing: exit-code mapping, atomic output writing, manifests.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use vigil_core::Error as CoreError;

/// 2 for usage/I/O problems, 1 for computation errors.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Io(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

/// Fails fast (exit 2) when an input path is missing.
pub fn require_input(path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(anyhow::Error::from(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("input path `{}` does not exist", path.display()),
        )));
    }
    Ok(())
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes a primary output through a temp file and renames on success, so a
/// failed run never leaves a partial artifact at the target path.
pub fn write_atomic(
    path: &Path,
    writer: impl FnOnce(&Path) -> Result<()>,
) -> Result<()> {
    let tmp = temp_path(path);
    match writer(&tmp) {
        Ok(()) => {
            std::fs::rename(&tmp, path)
                .with_context(|| format!("renaming {} into place", tmp.display()))?;
            Ok(())
        }
        Err(err) => {
            let _ = std::fs::remove_file(&tmp);
            Err(err)
        }
    }
}

/// Writes `<output>.manifest.json` describing the run: resolved settings,
/// seed, format versions, and a timestamp (the one field allowed to differ
/// between otherwise identical runs).
pub fn write_manifest(
    primary_output: &Path,
    command: &str,
    seed: Option<u64>,
    settings: serde_json::Value,
) -> Result<()> {
    let manifest = serde_json::json!({
        "tool": "vigil",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "settings": settings,
        "formats": {
            "dataset_csv": "label,s0..sN with 6-significant-digit amplitudes",
            "feature_csv": "schema names + label, round-trip floats",
            "gbt_model": "vigil-gbt v1",
            "linear_model": "vigil-linear v1",
            "mlp_model": "vigil-mlp v1",
        },
        "timestamp_unix": SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    let mut path = primary_output.as_os_str().to_os_string();
    path.push(".manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing manifest next to {}", primary_output.display()))?;
    Ok(())
}
