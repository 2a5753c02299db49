//! Sensing estimators (matched filter, OMP, MUSIC) and communication
//! demodulation. Every estimator returns an [`EstimateReport`] carrying the
//! resources it consumed.

mod cost;
mod demod;
mod dictionary;
mod matched_filter;
mod music;
mod omp;

pub use cost::{tally_cost, w_cost, CostError, CostForm, CostLedger, COST_LABELS};
pub use demod::demodulate;
pub use dictionary::Dictionary;
pub use matched_filter::{
    correlator_surface, matched_filter_estimate, matched_filter_estimate_with, CorrelatorSurface, MatchedFilterConfig,
};
pub use music::{music_estimate, music_on_grid, music_pseudospectrum, MusicAnalysis, ResponseGrid, SmoothingWindow};
pub use omp::omp_estimate;

use crate::dsp;
use crate::scene::Target;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("dictionary grid: {0}")]
    Grid(String),
    #[error("selected atoms are numerically dependent (condition number {cond:e})")]
    Rank { cond: f64 },
    #[error("model order {order} must be below the covariance dimension {dim}")]
    Order { order: usize, dim: usize },
    #[error("modulation layout: {0}")]
    Layout(String),
    #[error("sample rate mismatch: received {rx} Hz, waveform {waveform} Hz")]
    SampleRate { rx: f64, waveform: f64 },
    #[error("invalid estimator input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    MatchedFilter,
    Omp,
    Music,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::MatchedFilter => "matched_filter",
            EstimatorKind::Omp => "omp",
            EstimatorKind::Music => "music",
        }
    }
}

/// Qualitative evaluation aspects that have no numeric score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityFlags {
    /// Separates targets closer than the Fourier resolution.
    pub super_resolution: bool,
    /// Needs the number of targets as input.
    pub needs_target_count: bool,
    /// Delay estimates are not confined to the dictionary grid.
    pub off_grid_delay: bool,
    /// Applies to monostatic operation only (transmit waveform known at the receiver).
    pub monostatic_only: bool,
}

impl EstimatorKind {
    pub fn capabilities(&self) -> CapabilityFlags {
        match self {
            EstimatorKind::MatchedFilter => CapabilityFlags {
                super_resolution: false,
                needs_target_count: false,
                off_grid_delay: false,
                monostatic_only: true,
            },
            EstimatorKind::Omp => CapabilityFlags {
                super_resolution: true,
                needs_target_count: true,
                off_grid_delay: false,
                monostatic_only: true,
            },
            EstimatorKind::Music => CapabilityFlags {
                super_resolution: true,
                needs_target_count: true,
                off_grid_delay: false,
                monostatic_only: true,
            },
        }
    }
}

/// Output of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: EstimatorKind,
    pub targets: Vec<Target>,
    /// Noiseless received signal implied by `targets`, same length as the input.
    pub predicted_signal: Vec<Complex64>,
    pub decoded_bits: Vec<u8>,
    /// `||rx - predicted||^2` in sample units.
    pub residual_energy: f64,
    /// Residual energy after each iteration, starting with the input energy.
    pub residual_history: Vec<f64>,
    pub cost: CostLedger,
    pub capabilities: CapabilityFlags,
}

impl EstimateReport {
    pub(crate) fn assemble(
        estimator: EstimatorKind,
        targets: Vec<Target>,
        rx: &[Complex64],
        predicted_signal: Vec<Complex64>,
        residual_history: Vec<f64>,
        cost: CostLedger,
    ) -> Self {
        let residual_energy = rx.iter().zip(&predicted_signal).map(|(a, b)| (a - b).norm_sqr()).sum();
        Self {
            estimator,
            targets,
            predicted_signal,
            decoded_bits: Vec::new(),
            residual_energy,
            residual_history,
            cost,
            capabilities: estimator.capabilities(),
        }
    }
}

/// Sum of single-path responses of `probe` to `targets` over `len` samples.
pub(crate) fn synthesize(probe: &[Complex64], targets: &[Target], fs: f64, len: usize) -> Vec<Complex64> {
    let mut y = vec![Complex64::default(); len];
    for t in targets {
        let e = dsp::path_response(probe, t.delay, t.doppler, fs, len);
        for (acc, v) in y.iter_mut().zip(e) {
            *acc += t.amplitude * v;
        }
    }
    y
}

/// Operation count of [`synthesize`].
pub(crate) fn synthesis_cost(len: usize, targets: usize) -> u64 {
    targets as u64 * (2 * dsp::fft_cost(len) + 3 * len as u64)
}

/// Number of length-`len` DFT bins whose frequency lies inside `[lo, hi]`.
pub(crate) fn bins_in_band(len: usize, fs: f64, lo: f64, hi: f64) -> usize {
    (0..len).filter(|&k| {
        let f = dsp::bin_frequency(k, len, fs);
        f >= lo - 1e-9 * fs && f <= hi + 1e-9 * fs
    }).count()
}
