//! Scene directories: one signal file per frame plus `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DetectorError, Label, LabeledFrame};
use crate::dsp::{read_signal, write_signal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest.
    pub file: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub sample_rate: f64,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_scene(dir: &Path, frames: &[LabeledFrame]) -> Result<PathBuf, DetectorError> {
    fs::create_dir_all(dir).map_err(|e| DetectorError::Dataset(e.to_string()))?;
    let mut entries = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let file = format!("frame_{i:04}.iq");
        write_signal(&dir.join(&file), &f.frame, Some(f.label.as_str()))?;
        entries.push(ManifestEntry { file, label: f.label });
    }
    let manifest = DatasetManifest { sample_rate: frames.first().map_or(0.0, |f| f.frame.sample_rate()), entries };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| DetectorError::Dataset(e.to_string()))?;
    fs::write(&path, json).map_err(|e| DetectorError::Dataset(e.to_string()))?;
    Ok(path)
}

pub fn load_manifest(path: &Path) -> Result<Vec<LabeledFrame>, DetectorError> {
    let text = fs::read_to_string(path).map_err(|e| DetectorError::Dataset(format!("{}: {e}", path.display())))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| DetectorError::Dataset(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest
        .entries
        .iter()
        .map(|e| {
            let (frame, _) = read_signal(&base.join(&e.file))?;
            Ok(LabeledFrame { frame, label: e.label })
        })
        .collect()
}
