use super::{Waveform, WaveformError};
use crate::dsp;
use crate::estimators::Dictionary;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Averaged periodogram of a waveform.
///
/// The signal is cut into non-overlapping rectangular segments of
/// `segment_len` samples (the last one zero-padded) and the squared DFT
/// magnitudes are summed. With `psd[k] = Ts^2 * sum_s |X_s[k]|^2 / T` the
/// band integral `sum psd * bin_width` equals the mean power `E / T` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumProfile {
    /// Bin centre frequencies, ascending, Hz.
    pub frequencies: Vec<f64>,
    /// W/Hz.
    pub psd: Vec<f64>,
    pub bin_width: f64,
    pub duration: f64,
}

impl SpectrumProfile {
    pub fn power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.bin_width
    }

    pub fn energy(&self) -> f64 {
        self.power() * self.duration
    }

    /// Power falling in bins whose centre lies in `[lo, hi]`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| p)
            .sum::<f64>()
            * self.bin_width
    }

    pub fn peak(&self) -> f64 {
        self.psd.iter().cloned().fold(0.0, f64::max)
    }

    /// Index of the bin centred at `f`, if any.
    pub fn bin_of(&self, f: f64) -> Option<usize> {
        let tol = 1e-9 * self.bin_width;
        self.frequencies.iter().position(|&x| (x - f).abs() <= tol)
    }
}

/// Per-segment DFT magnitudes reordered into ascending frequency.
pub fn spectrum_profile(u: &Waveform, segment_len: usize) -> Result<SpectrumProfile, WaveformError> {
    if segment_len == 0 {
        return Err(WaveformError::InvalidParameter("segment length must be >= 1".into()));
    }
    let fs = u.sample_rate();
    let ts = 1.0 / fs;
    let mut acc = vec![0.0; segment_len];
    for chunk in u.samples().chunks(segment_len) {
        let mut seg = vec![Complex64::default(); segment_len];
        seg[..chunk.len()].copy_from_slice(chunk);
        dsp::fft(&mut seg);
        for (a, x) in acc.iter_mut().zip(&seg) {
            *a += x.norm_sqr();
        }
    }
    let duration = u.duration();
    let mut bins: Vec<(f64, f64)> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| (dsp::bin_frequency(k, segment_len, fs), ts * ts * a / duration))
        .collect();
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(SpectrumProfile {
        frequencies: bins.iter().map(|b| b.0).collect(),
        psd: bins.iter().map(|b| b.1).collect(),
        bin_width: fs / segment_len as f64,
        duration,
    })
}

/// A support cell the dictionary needs excited: frequency bin `k` sits at
/// `k / (K * dtau)` (signed, DFT order) for a K-point delay grid with step
/// `dtau`; slow-time bin `m` covers `[m, m + 1) / (M * dnu)` seconds for an
/// M-point Doppler grid with step `dnu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SupportBin {
    Frequency(usize),
    SlowTime(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformativenessReport {
    pub occupied_bins: Vec<SupportBin>,
    pub required_bins: Vec<SupportBin>,
    pub gap_list: Vec<SupportBin>,
    pub is_informative: bool,
    pub threshold_db: f64,
}

fn grid_step(grid: &[f64]) -> Option<f64> {
    (grid.len() > 1).then(|| (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64)
}

/// Checks that the waveform puts energy on every frequency and slow-time cell
/// that separates neighbouring dictionary atoms.
///
/// Delay hypotheses on a K-point grid are told apart by the phase slope
/// across K frequency bins spaced `1 / (K dtau)`; Doppler hypotheses on an
/// M-point grid by the phase slope across M slow-time intervals of length
/// `1 / (M dnu)`. A cell is occupied when its level is within `threshold_db`
/// of the strongest cell of the same kind.
pub fn informativeness_check(u: &Waveform, dict: &Dictionary, threshold_db: f64) -> InformativenessReport {
    let fs = u.sample_rate();
    let rel = 10f64.powf(threshold_db / 10.0);
    let mut occupied = Vec::new();
    let mut required = Vec::new();

    let k = dict.delays().len();
    let dtau = grid_step(dict.delays()).unwrap_or(1.0 / fs);
    let seg = ((k as f64 * dtau * fs).round() as usize).max(1);
    let profile = spectrum_profile(u, seg).expect("segment length >= 1");
    let freq_levels: Vec<f64> = (0..k)
        .map(|i| {
            let f = dsp::bin_frequency(i, k, 1.0 / dtau);
            // nearest profile bin; bins outside the sampled band carry nothing
            if f < -fs / 2.0 - 1e-9 * fs || f >= fs / 2.0 + 1e-9 * fs {
                return 0.0;
            }
            let j = profile
                .frequencies
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
                .map(|(j, _)| j)
                .unwrap_or(0);
            profile.psd[j]
        })
        .collect();
    let fmax = freq_levels.iter().cloned().fold(0.0, f64::max);
    for (i, &level) in freq_levels.iter().enumerate() {
        required.push(SupportBin::Frequency(i));
        if fmax > 0.0 && level >= fmax * rel {
            occupied.push(SupportBin::Frequency(i));
        }
    }

    if let Some(dnu) = grid_step(dict.dopplers()) {
        let m = dict.dopplers().len();
        let slot = 1.0 / (m as f64 * dnu);
        let levels: Vec<f64> = (0..m)
            .map(|i| {
                let a = ((i as f64 * slot * fs).round() as usize).min(u.len());
                let b = (((i + 1) as f64 * slot * fs).round() as usize).min(u.len());
                if b <= a {
                    0.0
                } else {
                    u.samples()[a..b].iter().map(|s| s.norm_sqr()).sum::<f64>() / (b - a) as f64
                }
            })
            .collect();
        let smax = levels.iter().cloned().fold(0.0, f64::max);
        for (i, &level) in levels.iter().enumerate() {
            required.push(SupportBin::SlowTime(i));
            if smax > 0.0 && level >= smax * rel {
                occupied.push(SupportBin::SlowTime(i));
            }
        }
    }

    let gap_list: Vec<SupportBin> = required.iter().filter(|b| !occupied.contains(b)).copied().collect();
    InformativenessReport {
        is_informative: gap_list.is_empty(),
        occupied_bins: occupied,
        required_bins: required,
        gap_list,
        threshold_db,
    }
}
