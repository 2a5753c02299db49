//! Transmit waveforms: single-carrier PSK frames, CP-OFDM grids with pilot
//! layouts and linear chirps, plus the signal-structure criteria that only
//! depend on the waveform (PAPR, spectral support).

mod io;
mod spectrum;

pub use io::{read_waveform, write_waveform, WaveformHeader};
pub use spectrum::{informativeness_check, spectrum_profile, InformativenessReport, SpectrumProfile, SupportBin};

use crate::dsp;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("bit count {bits} is not divisible by {bits_per_symbol} bits per symbol")]
    Length { bits: usize, bits_per_symbol: usize },
    #[error("inconsistent modulation layout: {0}")]
    Layout(String),
    #[error("signal has no nonzero sample")]
    ZeroSignal,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("waveform i/o: {0}")]
    Io(String),
}

/// Frequency interval `[lower, upper]` in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lower && f <= self.upper
    }

    pub fn nyquist(fs: f64) -> Self {
        Self { lower: -fs / 2.0, upper: fs / 2.0 }
    }
}

/// Resource-grid description of a CP-OFDM frame.
///
/// Cells are indexed symbol-major: cell `(m, k)` of symbol `m` and subcarrier
/// `k` lives at `m * num_subcarriers + k`. Pilot cells carry the fixed pilot
/// sequence ([`pilot_sequence`]); the remaining active cells carry data in
/// that same order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmLayout {
    pub num_subcarriers: usize,
    pub num_symbols: usize,
    pub cp_len: usize,
    pub bits_per_symbol: usize,
    pub active: Vec<usize>,
    pub pilot_mask: Vec<bool>,
    pub data_bits: Vec<u8>,
}

impl OfdmLayout {
    /// Builds a layout and checks mask, active set and bit count agree.
    pub fn new(
        num_subcarriers: usize,
        num_symbols: usize,
        bits_per_symbol: usize,
        active: Vec<usize>,
        pilot_mask: Vec<bool>,
        data_bits: Vec<u8>,
    ) -> Result<Self, WaveformError> {
        let layout = Self {
            num_subcarriers,
            num_symbols,
            cp_len: 0,
            bits_per_symbol,
            active,
            pilot_mask,
            data_bits,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// All subcarriers active, no pilots, data filling the whole grid.
    pub fn full_grid(
        num_subcarriers: usize,
        num_symbols: usize,
        bits_per_symbol: usize,
        data_bits: Vec<u8>,
    ) -> Result<Self, WaveformError> {
        Self::new(
            num_subcarriers,
            num_symbols,
            bits_per_symbol,
            (0..num_subcarriers).collect(),
            vec![false; num_subcarriers * num_symbols],
            data_bits,
        )
    }

    pub fn validate(&self) -> Result<(), WaveformError> {
        let bad = |m: String| Err(WaveformError::Layout(m));
        if self.num_subcarriers == 0 || self.num_symbols == 0 {
            return bad("grid must have at least one subcarrier and one symbol".into());
        }
        if !(1..=2).contains(&self.bits_per_symbol) {
            return bad(format!("bits per symbol {} not in {{1, 2}}", self.bits_per_symbol));
        }
        if self.active.is_empty() {
            return bad("no active subcarriers".into());
        }
        let mut seen = vec![false; self.num_subcarriers];
        for &k in &self.active {
            if k >= self.num_subcarriers {
                return bad(format!("active subcarrier {k} out of range"));
            }
            if seen[k] {
                return bad(format!("active subcarrier {k} listed twice"));
            }
            seen[k] = true;
        }
        if self.pilot_mask.len() != self.num_subcarriers * self.num_symbols {
            return bad(format!(
                "pilot mask has {} cells, grid has {}",
                self.pilot_mask.len(),
                self.num_subcarriers * self.num_symbols
            ));
        }
        for (i, &p) in self.pilot_mask.iter().enumerate() {
            if p && !seen[i % self.num_subcarriers] {
                return bad(format!("pilot on inactive subcarrier {}", i % self.num_subcarriers));
            }
        }
        let data_cells = self.data_cells().len();
        if data_cells * self.bits_per_symbol != self.data_bits.len() {
            return bad(format!(
                "{} data cells x {} bits != {} data bits",
                data_cells,
                self.bits_per_symbol,
                self.data_bits.len()
            ));
        }
        if self.data_bits.iter().any(|&b| b > 1) {
            return bad("data bits must be 0 or 1".into());
        }
        Ok(())
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.active.contains(&k)
    }

    /// Cell indices carrying data, in mapping order.
    pub fn data_cells(&self) -> Vec<usize> {
        let mut active = vec![false; self.num_subcarriers];
        for &k in &self.active {
            if k < self.num_subcarriers {
                active[k] = true;
            }
        }
        (0..self.num_subcarriers * self.num_symbols)
            .filter(|&i| active[i % self.num_subcarriers] && !self.pilot_mask[i])
            .collect()
    }

    pub fn pilot_cells(&self) -> Vec<usize> {
        (0..self.pilot_mask.len()).filter(|&i| self.pilot_mask[i]).collect()
    }

    pub fn symbol_len(&self) -> usize {
        self.num_subcarriers + self.cp_len
    }

    /// Transmitted resource grid (symbol-major, zeros on inactive cells).
    pub fn resource_grid(&self) -> Vec<Complex64> {
        let mut grid = vec![Complex64::new(0.0, 0.0); self.num_subcarriers * self.num_symbols];
        let pilots = pilot_sequence(self.pilot_cells().len());
        for (cell, p) in self.pilot_cells().into_iter().zip(pilots) {
            grid[cell] = p;
        }
        let data = map_bits(&self.data_bits, self.bits_per_symbol).expect("validated layout");
        for (cell, d) in self.data_cells().into_iter().zip(data) {
            grid[cell] = d;
        }
        grid
    }

    /// Removes the cyclic prefix of every symbol and returns the per-symbol
    /// DFT (unitary scaling) as a symbol-major grid. Samples past the end of
    /// `samples` are treated as zero.
    pub fn demodulate_grid(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let k = self.num_subcarriers;
        let scale = 1.0 / (k as f64).sqrt();
        let mut grid = Vec::with_capacity(k * self.num_symbols);
        for m in 0..self.num_symbols {
            let start = m * self.symbol_len() + self.cp_len;
            let mut body: Vec<Complex64> = (start..start + k)
                .map(|i| samples.get(i).copied().unwrap_or_default())
                .collect();
            dsp::fft(&mut body);
            grid.extend(body.into_iter().map(|v| v * scale));
        }
        grid
    }
}

/// Modulation metadata carried alongside the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulationLayout {
    /// Samples without modulation structure (imported or synthetic).
    Raw,
    SingleCarrierPsk { bits_per_symbol: usize, oversampling: usize, data_bits: Vec<u8> },
    Ofdm(OfdmLayout),
    Chirp { bandwidth: f64 },
}

impl ModulationLayout {
    pub fn data_bits(&self) -> &[u8] {
        match self {
            ModulationLayout::SingleCarrierPsk { data_bits, .. } => data_bits,
            ModulationLayout::Ofdm(l) => &l.data_bits,
            _ => &[],
        }
    }
}

/// Complex baseband samples with their time/frequency support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    samples: Vec<Complex64>,
    sample_rate: f64,
    band: Band,
    layout: ModulationLayout,
}

impl Waveform {
    pub fn new(
        samples: Vec<Complex64>,
        sample_rate: f64,
        band: Band,
        layout: ModulationLayout,
    ) -> Result<Self, WaveformError> {
        if samples.is_empty() {
            return Err(WaveformError::InvalidParameter("waveform needs at least one sample".into()));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(WaveformError::InvalidParameter("sample rate must be positive".into()));
        }
        let tol = 1e-9 * sample_rate;
        if band.lower > band.upper || band.lower < -sample_rate / 2.0 - tol || band.upper > sample_rate / 2.0 + tol {
            return Err(WaveformError::InvalidParameter(format!(
                "band [{}, {}] outside [-fs/2, fs/2]",
                band.lower, band.upper
            )));
        }
        Ok(Self { samples, sample_rate, band, layout })
    }

    /// Wraps raw samples with a full-Nyquist band.
    pub fn from_samples(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self, WaveformError> {
        Self::new(samples, sample_rate, Band::nyquist(sample_rate), ModulationLayout::Raw)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn layout(&self) -> &ModulationLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `T = len / fs`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Continuous-time energy `Ts * sum |u|^2`.
    pub fn energy(&self) -> f64 {
        dsp::energy(&self.samples) / self.sample_rate
    }

    /// Energy per carried data bit, if the layout carries bits.
    pub fn energy_per_bit(&self) -> Option<f64> {
        let b = self.layout.data_bits().len();
        (b > 0).then(|| self.energy() / b as f64)
    }

    /// Same waveform with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: Complex64) -> Self {
        Self { samples: self.samples.iter().map(|s| s * gain).collect(), ..self.clone() }
    }
}

/// Gray-mapped PSK: BPSK `0 -> +1`, `1 -> -1`; QPSK `(b0, b1) -> ((1-2 b0) + j (1-2 b1)) / sqrt 2`.
pub fn map_bits(bits: &[u8], bits_per_symbol: usize) -> Result<Vec<Complex64>, WaveformError> {
    if !(1..=2).contains(&bits_per_symbol) {
        return Err(WaveformError::InvalidParameter(format!("bits per symbol {bits_per_symbol} not in {{1, 2}}")));
    }
    if bits.len() % bits_per_symbol != 0 {
        return Err(WaveformError::Length { bits: bits.len(), bits_per_symbol });
    }
    let sign = |b: u8| 1.0 - 2.0 * b as f64;
    Ok(bits
        .chunks(bits_per_symbol)
        .map(|c| match c {
            [b] => Complex64::new(sign(*b), 0.0),
            [b0, b1] => Complex64::new(sign(*b0) * FRAC_1_SQRT_2, sign(*b1) * FRAC_1_SQRT_2),
            _ => unreachable!(),
        })
        .collect())
}

/// Hard-decision inverse of [`map_bits`].
pub fn demap_symbols(symbols: &[Complex64], bits_per_symbol: usize) -> Vec<u8> {
    let bit = |x: f64| u8::from(x < 0.0);
    let mut out = Vec::with_capacity(symbols.len() * bits_per_symbol);
    for s in symbols {
        out.push(bit(s.re));
        if bits_per_symbol == 2 {
            out.push(bit(s.im));
        }
    }
    out
}

/// Pilot symbols: QPSK from a PRBS7 (`x^7 + x^6 + 1`) register seeded with
/// all ones, two register outputs per symbol, Gray-mapped as in [`map_bits`].
pub fn pilot_sequence(n: usize) -> Vec<Complex64> {
    let mut state: u8 = 0x7f;
    let mut next_bit = || {
        let b = ((state >> 6) ^ (state >> 5)) & 1;
        state = ((state << 1) | b) & 0x7f;
        b
    };
    let bits: Vec<u8> = (0..2 * n).map(|_| next_bit()).collect();
    map_bits(&bits, 2).expect("even length")
}

/// Single-carrier PSK frame with rectangular pulses: every symbol is held for
/// `oversampling` samples scaled so that each symbol carries unit energy in
/// sample units (`sum |u|^2` over a symbol equals 1).
pub fn generate_psk_frame(
    bits: &[u8],
    bits_per_symbol: usize,
    sample_rate: f64,
    oversampling: usize,
) -> Result<Waveform, WaveformError> {
    if oversampling == 0 {
        return Err(WaveformError::InvalidParameter("oversampling must be >= 1".into()));
    }
    if bits.is_empty() {
        return Err(WaveformError::InvalidParameter("frame needs at least one bit".into()));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(WaveformError::InvalidParameter("bits must be 0 or 1".into()));
    }
    let symbols = map_bits(bits, bits_per_symbol)?;
    let g = 1.0 / (oversampling as f64).sqrt();
    let samples: Vec<Complex64> = symbols
        .iter()
        .flat_map(|s| std::iter::repeat_n(s * g, oversampling))
        .collect();
    let rs = sample_rate / oversampling as f64;
    Waveform::new(
        samples,
        sample_rate,
        Band { lower: -rs / 2.0, upper: rs / 2.0 },
        ModulationLayout::SingleCarrierPsk {
            bits_per_symbol,
            oversampling,
            data_bits: bits.to_vec(),
        },
    )
}

/// CP-OFDM frame: per symbol, the unitary inverse DFT of the resource grid
/// row, preceded by its last `cp_len` samples.
pub fn generate_ofdm(layout: &OfdmLayout, sample_rate: f64, cp_len: usize) -> Result<Waveform, WaveformError> {
    layout.validate()?;
    let k = layout.num_subcarriers;
    if cp_len >= k {
        return Err(WaveformError::Layout(format!("cyclic prefix {cp_len} must be shorter than the symbol ({k})")));
    }
    let mut layout = layout.clone();
    layout.cp_len = cp_len;
    let grid = layout.resource_grid();
    let scale = (k as f64).sqrt();
    let mut samples = Vec::with_capacity(layout.num_symbols * layout.symbol_len());
    for row in grid.chunks(k) {
        let mut body = row.to_vec();
        dsp::ifft(&mut body);
        body.iter_mut().for_each(|v| *v *= scale);
        samples.extend_from_slice(&body[k - cp_len..]);
        samples.extend_from_slice(&body);
    }
    let df = sample_rate / k as f64;
    let freqs: Vec<f64> = layout.active.iter().map(|&i| dsp::bin_frequency(i, k, sample_rate)).collect();
    let lo = freqs.iter().cloned().fold(f64::INFINITY, f64::min) - df / 2.0;
    let hi = freqs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + df / 2.0;
    let band = Band { lower: lo.max(-sample_rate / 2.0), upper: hi.min(sample_rate / 2.0) };
    Waveform::new(samples, sample_rate, band, ModulationLayout::Ofdm(layout))
}

/// Unit-amplitude linear FM sweep from `-B/2` to `+B/2` over `duration`.
pub fn generate_chirp(bandwidth: f64, duration: f64, sample_rate: f64) -> Result<Waveform, WaveformError> {
    if !(bandwidth >= 0.0 && bandwidth <= sample_rate) {
        return Err(WaveformError::InvalidParameter(format!(
            "bandwidth {bandwidth} must lie in [0, sample rate {sample_rate}]"
        )));
    }
    let n = (duration * sample_rate).round() as usize;
    if n == 0 {
        return Err(WaveformError::InvalidParameter("chirp shorter than one sample".into()));
    }
    let t_total = n as f64 / sample_rate;
    let k = bandwidth / t_total;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate;
            Complex64::from_polar(1.0, PI * k * t * t - PI * bandwidth * t)
        })
        .collect();
    Waveform::new(
        samples,
        sample_rate,
        Band { lower: -bandwidth / 2.0, upper: bandwidth / 2.0 },
        ModulationLayout::Chirp { bandwidth },
    )
}

/// Peak-to-average power ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Papr {
    pub ratio: f64,
    pub db: f64,
}

/// `max |u|^2 / mean |u|^2`.
pub fn papr(u: &Waveform) -> Result<Papr, WaveformError> {
    let p: Vec<f64> = u.samples.iter().map(|s| s.norm_sqr()).collect();
    let peak = p.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(WaveformError::ZeroSignal);
    }
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    let ratio = peak / mean;
    Ok(Papr { ratio, db: 10.0 * ratio.log10() })
}
