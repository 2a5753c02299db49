//! Waveform files: samples as interleaved little-endian `f64` pairs
//! `(re, im)` and a TOML sidecar at `<data path>.toml` describing them.

use super::{Band, ModulationLayout, Waveform, WaveformError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SAMPLE_FORMAT: &str = "interleaved-f64-le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformHeader {
    pub format: String,
    pub sample_rate: f64,
    pub duration: f64,
    pub num_samples: usize,
    pub band: Band,
    pub layout: ModulationLayout,
}

fn header_path(data: &Path) -> PathBuf {
    let mut p = data.as_os_str().to_owned();
    p.push(".toml");
    PathBuf::from(p)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> WaveformError {
    WaveformError::Io(format!("{}: {e}", path.display()))
}

/// Writes `path` (samples) and `path.toml` (header).
pub fn write_waveform(u: &Waveform, path: &Path) -> Result<(), WaveformError> {
    let mut bytes = Vec::with_capacity(16 * u.len());
    for s in u.samples() {
        bytes.extend_from_slice(&s.re.to_le_bytes());
        bytes.extend_from_slice(&s.im.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    let header = WaveformHeader {
        format: SAMPLE_FORMAT.into(),
        sample_rate: u.sample_rate(),
        duration: u.duration(),
        num_samples: u.len(),
        band: u.band(),
        layout: u.layout().clone(),
    };
    let text = toml::to_string(&header).map_err(|e| io_err(path, e))?;
    let hp = header_path(path);
    std::fs::write(&hp, text).map_err(|e| io_err(&hp, e))
}

pub fn read_waveform(path: &Path) -> Result<Waveform, WaveformError> {
    let hp = header_path(path);
    let text = std::fs::read_to_string(&hp).map_err(|e| io_err(&hp, e))?;
    let header: WaveformHeader = toml::from_str(&text).map_err(|e| io_err(&hp, e))?;
    if header.format != SAMPLE_FORMAT {
        return Err(io_err(&hp, format!("unsupported sample format {:?}", header.format)));
    }
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() != 16 * header.num_samples {
        return Err(io_err(
            path,
            format!("{} bytes on disk, header declares {} samples", bytes.len(), header.num_samples),
        ));
    }
    let samples = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Waveform::new(samples, header.sample_rate, header.band, header.layout)
}
