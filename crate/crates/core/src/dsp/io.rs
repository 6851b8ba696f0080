//! Signal files: `<stem>.iq` holds interleaved little-endian f32 I/Q pairs,
//! `<stem>.json` the metadata sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DspError, SignalFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    pub sample_rate: f64,
    pub sample_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode_iq(frame: &SignalFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame.len() * 8);
    for s in frame.samples() {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_iq(bytes: &[u8], sample_rate: f64) -> Result<SignalFrame, DspError> {
    if bytes.len() % 8 != 0 {
        return Err(DspError::Format(format!("{} bytes is not a whole number of I/Q pairs", bytes.len())));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    SignalFrame::new(samples, sample_rate)
}

/// Writes `path` (binary) and its `.json` sidecar.
pub fn write_signal(path: &Path, frame: &SignalFrame, label: Option<&str>) -> Result<(), DspError> {
    let meta = SignalMeta { sample_rate: frame.sample_rate(), sample_count: frame.len(), label: label.map(str::to_owned) };
    fs::write(path, encode_iq(frame))?;
    let json = serde_json::to_string_pretty(&meta).map_err(|e| DspError::Format(e.to_string()))?;
    fs::write(sidecar(path), json)?;
    Ok(())
}

pub fn read_signal(path: &Path) -> Result<(SignalFrame, SignalMeta), DspError> {
    let meta_text = fs::read_to_string(sidecar(path))?;
    let meta: SignalMeta = serde_json::from_str(&meta_text).map_err(|e| DspError::Format(e.to_string()))?;
    let frame = decode_iq(&fs::read(path)?, meta.sample_rate)?;
    if frame.len() != meta.sample_count {
        return Err(DspError::Format(format!(
            "sidecar declares {} samples, file holds {}",
            meta.sample_count,
            frame.len()
        )));
    }
    Ok((frame, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cell.iq");
        let frame = SignalFrame::new(vec![Complex64::new(0.5, -1.25), Complex64::new(3.0, 0.0)], 1000.0).unwrap();
        write_signal(&path, &frame, Some("target")).unwrap();
        let (back, meta) = read_signal(&path).unwrap();
        assert_eq!(back, frame);
        assert_eq!(meta.label.as_deref(), Some("target"));
        assert_eq!(fs::read(&path).unwrap().len(), 16);
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.iq");
        let frame = SignalFrame::new(vec![Complex64::new(1.0, 1.0); 4], 10.0).unwrap();
        write_signal(&path, &frame, None).unwrap();
        fs::write(&path, &encode_iq(&frame)[..24]).unwrap();
        assert!(matches!(read_signal(&path), Err(DspError::Format(_))));
        assert!(decode_iq(&[0; 7], 1.0).is_err());
    }
}
