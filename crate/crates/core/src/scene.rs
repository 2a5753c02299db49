//! Delay-Doppler target scenes, clutter and noise, and the linear
//! time-variant channel that maps a transmit waveform to a received signal.

use crate::conventions::{DELAY_PHASE_SIGN, DOPPLER_PHASE_SIGN};
use crate::dsp;
use crate::seed;
use crate::waveform::Waveform;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("targets {0} and {1} share the same (delay, doppler) pair")]
    DuplicateTarget(usize, usize),
    #[error("invalid clutter model: {0}")]
    InvalidClutter(String),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("doppler {doppler} Hz exceeds half the slow-time rate ({limit} Hz)")]
    Alias { doppler: f64, limit: f64 },
    #[error("delay {delay} s exceeds the unambiguous delay window ({limit} s)")]
    Delay { delay: f64, limit: f64 },
    #[error("scene file: {0}")]
    File(String),
}

/// One point scatterer of the delay-Doppler channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub amplitude: Complex64,
    /// Seconds, `>= 0`.
    pub delay: f64,
    /// Hz, signed.
    pub doppler: f64,
}

impl Target {
    pub fn new(amplitude: Complex64, delay: f64, doppler: f64) -> Result<Self, SceneError> {
        if !(amplitude.re.is_finite() && amplitude.im.is_finite()) {
            return Err(SceneError::InvalidTarget("non-finite amplitude".into()));
        }
        if !delay.is_finite() || delay < 0.0 {
            return Err(SceneError::InvalidTarget(format!("delay {delay} must be finite and >= 0")));
        }
        if !doppler.is_finite() {
            return Err(SceneError::InvalidTarget("non-finite doppler".into()));
        }
        Ok(Self { amplitude, delay, doppler })
    }
}

/// Rectangle in the delay-Doppler plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdRegion {
    pub delay_min: f64,
    pub delay_max: f64,
    pub doppler_min: f64,
    pub doppler_max: f64,
}

impl DdRegion {
    pub fn delay_span(&self) -> f64 {
        self.delay_max - self.delay_min
    }

    pub fn doppler_span(&self) -> f64 {
        self.doppler_max - self.doppler_min
    }
}

/// Homogeneous Poisson clutter field with complex-Gaussian gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterModel {
    /// Expected scatterers per delay-Doppler cell.
    pub density: f64,
    /// Standard deviation of the complex-Gaussian clutter gains.
    pub amplitude_scale: f64,
    pub region: DdRegion,
    /// Cell size as `(delay s, doppler Hz)`.
    pub cell: (f64, f64),
}

impl ClutterModel {
    pub fn new(
        density: f64,
        amplitude_scale: f64,
        region: DdRegion,
        cell: (f64, f64),
    ) -> Result<Self, SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidClutter(m.to_string()));
        if !(density.is_finite() && density >= 0.0) {
            return bad("density must be finite and >= 0");
        }
        if !(amplitude_scale.is_finite() && amplitude_scale >= 0.0) {
            return bad("amplitude scale must be finite and >= 0");
        }
        if !(region.delay_min >= 0.0 && region.delay_max >= region.delay_min) {
            return bad("delay range must satisfy 0 <= min <= max");
        }
        if !(region.doppler_max >= region.doppler_min) || !region.doppler_min.is_finite() {
            return bad("doppler range must satisfy min <= max");
        }
        if !(cell.0 > 0.0 && cell.1 > 0.0) {
            return bad("cell dimensions must be positive");
        }
        Ok(Self { density, amplitude_scale, region, cell })
    }

    /// Region area measured in cells.
    pub fn area_cells(&self) -> f64 {
        self.region.delay_span() / self.cell.0 * self.region.doppler_span() / self.cell.1
    }

    pub fn expected_count(&self) -> f64 {
        self.density * self.area_cells()
    }

    /// Checks that the clutter region fits inside a channel window.
    pub fn check_within(&self, window: &ChannelWindow) -> Result<(), SceneError> {
        if self.region.delay_max > window.max_delay {
            return Err(SceneError::Delay { delay: self.region.delay_max, limit: window.max_delay });
        }
        let lim = window.max_doppler();
        let worst = self.region.doppler_min.abs().max(self.region.doppler_max.abs());
        if worst > lim {
            return Err(SceneError::Alias { doppler: worst, limit: lim });
        }
        Ok(())
    }
}

/// Sparse set of scatterers plus an optional clutter description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScene {
    targets: Vec<Target>,
    clutter: Option<ClutterModel>,
    label: String,
}

impl TargetScene {
    pub fn new(
        targets: Vec<Target>,
        clutter: Option<ClutterModel>,
        label: impl Into<String>,
    ) -> Result<Self, SceneError> {
        for i in 0..targets.len() {
            for j in i + 1..targets.len() {
                if targets[i].delay == targets[j].delay && targets[i].doppler == targets[j].doppler {
                    return Err(SceneError::DuplicateTarget(i, j));
                }
            }
        }
        Ok(Self { targets, clutter, label: label.into() })
    }

    pub fn empty(label: impl Into<String>) -> Self {
        Self { targets: Vec::new(), clutter: None, label: label.into() }
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn clutter(&self) -> Option<&ClutterModel> {
        self.clutter.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Appends the scatterers of `other`, keeping this scene's clutter model.
    pub fn merged(&self, other: &TargetScene) -> Result<TargetScene, SceneError> {
        let mut t = self.targets.clone();
        t.extend_from_slice(&other.targets);
        TargetScene::new(t, self.clutter, self.label.clone())
    }

    /// Reads a scene file (TOML, see the repository README for the schema).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| SceneError::File(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SceneError> {
        let raw: SceneFile = toml::from_str(text).map_err(|e| SceneError::File(e.to_string()))?;
        let targets = raw
            .targets
            .iter()
            .map(|r| Target::new(Complex64::new(r[0], r[1]), r[2], r[3]))
            .collect::<Result<Vec<_>, _>>()?;
        let clutter = match raw.clutter {
            None => None,
            Some(c) => Some(ClutterModel::new(
                c.density,
                c.amplitude_scale,
                DdRegion {
                    delay_min: c.delay[0],
                    delay_max: c.delay[1],
                    doppler_min: c.doppler[0],
                    doppler_max: c.doppler[1],
                },
                (c.cell[0], c.cell[1]),
            )?),
        };
        TargetScene::new(targets, clutter, raw.label.unwrap_or_default())
    }

    pub fn to_toml_string(&self) -> String {
        let raw = SceneFile {
            label: Some(self.label.clone()),
            targets: self
                .targets
                .iter()
                .map(|t| [t.amplitude.re, t.amplitude.im, t.delay, t.doppler])
                .collect(),
            clutter: self.clutter.map(|c| ClutterFile {
                density: c.density,
                amplitude_scale: c.amplitude_scale,
                delay: [c.region.delay_min, c.region.delay_max],
                doppler: [c.region.doppler_min, c.region.doppler_max],
                cell: [c.cell.0, c.cell.1],
            }),
        };
        toml::to_string(&raw).expect("scene serialization")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    label: Option<String>,
    /// Rows of `[re(h), im(h), delay_s, doppler_hz]`.
    #[serde(default)]
    targets: Vec<[f64; 4]>,
    clutter: Option<ClutterFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClutterFile {
    density: f64,
    amplitude_scale: f64,
    delay: [f64; 2],
    doppler: [f64; 2],
    cell: [f64; 2],
}

/// Noise PSD sampled on a uniform grid over `[-fs/2, fs/2)`; sample `i`
/// covers the cell `[-fs/2 + i fs/n, -fs/2 + (i+1) fs/n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    psd: Vec<f64>,
    seed: u64,
}

impl NoiseModel {
    pub fn new(psd: Vec<f64>, seed: u64) -> Result<Self, SceneError> {
        if psd.is_empty() {
            return Err(SceneError::InvalidNoise("PSD needs at least one sample".into()));
        }
        if psd.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(SceneError::InvalidNoise("PSD samples must be finite and >= 0".into()));
        }
        Ok(Self { psd, seed })
    }

    /// Flat PSD of `n0` W/Hz.
    pub fn white(n0: f64, seed: u64) -> Result<Self, SceneError> {
        Self::new(vec![n0], seed)
    }

    /// Noise disabled.
    pub fn none() -> Self {
        Self { psd: vec![0.0], seed: 0 }
    }

    pub fn psd(&self) -> &[f64] {
        &self.psd
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { psd: self.psd.clone(), seed }
    }

    pub fn is_enabled(&self) -> bool {
        self.psd.iter().any(|&p| p > 0.0)
    }

    pub fn is_white(&self) -> bool {
        self.psd.iter().all(|&p| p == self.psd[0])
    }

    /// PSD value at frequency `f` for sample rate `fs`.
    pub fn psd_at(&self, f: f64, fs: f64) -> f64 {
        sample_on_band(&self.psd, f, fs)
    }

    /// Returns a copy with every PSD sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, SceneError> {
        Self::new(self.psd.iter().map(|p| p * factor).collect(), self.seed)
    }

    /// Mean per-sample complex noise variance at sample rate `fs` for a
    /// record of `len` samples.
    pub fn sample_variance(&self, fs: f64, len: usize) -> f64 {
        if self.is_white() {
            return self.psd[0] * fs;
        }
        let s: f64 = (0..len).map(|k| self.psd_at(dsp::bin_frequency(k, len, fs), fs)).sum();
        s * fs / len as f64
    }

    /// Draws `len` noise samples; colored PSDs shape white noise by `sqrt(PSD)`
    /// in the frequency domain.
    pub fn realize(&self, len: usize, fs: f64) -> Vec<Complex64> {
        let mut rng = seed::rng(self.seed);
        if !self.is_enabled() {
            return vec![Complex64::new(0.0, 0.0); len];
        }
        if self.is_white() {
            let var = self.psd[0] * fs;
            return (0..len).map(|_| dsp::complex_normal(&mut rng, var)).collect();
        }
        let mut w: Vec<Complex64> = (0..len).map(|_| dsp::complex_normal(&mut rng, 1.0)).collect();
        dsp::fft(&mut w);
        for (k, v) in w.iter_mut().enumerate() {
            let p = self.psd_at(dsp::bin_frequency(k, len, fs), fs);
            *v *= (p * fs).sqrt();
        }
        dsp::ifft(&mut w);
        w
    }
}

/// Spectral variance of the random impulse response, sampled like the noise PSD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingPrior {
    spectral_variance: Vec<f64>,
}

impl SensingPrior {
    pub fn new(spectral_variance: Vec<f64>) -> Result<Self, SceneError> {
        if spectral_variance.is_empty() || spectral_variance.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SceneError::InvalidNoise(
                "spectral variance must be non-empty, finite and >= 0".into(),
            ));
        }
        Ok(Self { spectral_variance })
    }

    pub fn flat(variance: f64) -> Result<Self, SceneError> {
        Self::new(vec![variance])
    }

    pub fn values(&self) -> &[f64] {
        &self.spectral_variance
    }

    pub fn at(&self, f: f64, fs: f64) -> f64 {
        sample_on_band(&self.spectral_variance, f, fs)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, SceneError> {
        Self::new(self.spectral_variance.iter().map(|v| v * factor).collect())
    }
}

fn sample_on_band(samples: &[f64], f: f64, fs: f64) -> f64 {
    let n = samples.len();
    if n == 1 {
        return samples[0];
    }
    let pos = ((f + fs / 2.0) / fs * n as f64).floor();
    let i = (pos.max(0.0) as usize).min(n - 1);
    samples[i]
}

/// Unambiguous delay window and slow-time rate of a scenario. Dopplers must
/// satisfy `|nu| <= slow_time_rate / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelWindow {
    pub max_delay: f64,
    pub slow_time_rate: f64,
}

impl ChannelWindow {
    pub fn new(max_delay: f64, slow_time_rate: f64) -> Self {
        Self { max_delay, slow_time_rate }
    }

    pub fn max_doppler(&self) -> f64 {
        self.slow_time_rate / 2.0
    }
}

/// Output of the channel: samples plus the facts a receiver may assume known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceivedSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    /// Mean per-sample complex noise variance.
    pub noise_variance: f64,
    pub window: ChannelWindow,
}

impl ReceivedSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        dsp::energy(&self.samples)
    }
}

/// Evaluates the delay-Doppler response of a scene at `(t, f)`.
pub fn eval_dd_response(scene: &TargetScene, t: f64, f: f64) -> Complex64 {
    scene
        .targets
        .iter()
        .map(|p| {
            p.amplitude
                * Complex64::from_polar(1.0, DOPPLER_PHASE_SIGN * 2.0 * PI * t * p.doppler)
                * Complex64::from_polar(1.0, DELAY_PHASE_SIGN * 2.0 * PI * f * p.delay)
        })
        .sum()
}

/// Number of output samples for an input of `input_len` samples: the input
/// plus the whole unambiguous delay window, independent of the scene so that
/// outputs of different scenes superpose sample by sample.
pub fn output_len(input_len: usize, window: &ChannelWindow, fs: f64) -> usize {
    input_len + (window.max_delay * fs - 1e-9).ceil().max(0.0) as usize
}

/// Applies the channel `y = sum_p h_p u(t - tau_p) exp(j 2 pi nu_p t) + n(t)`.
///
/// The output starts at `t = 0` and spans the input plus the delay window
/// (see [`output_len`]). Noise is drawn from `noise` using its own seed.
pub fn apply_channel(
    u: &Waveform,
    scene: &TargetScene,
    noise: &NoiseModel,
    window: &ChannelWindow,
) -> Result<ReceivedSignal, SceneError> {
    let fs = u.sample_rate();
    for t in &scene.targets {
        if t.delay > window.max_delay {
            return Err(SceneError::Delay { delay: t.delay, limit: window.max_delay });
        }
        if t.doppler.abs() > window.max_doppler() {
            return Err(SceneError::Alias { doppler: t.doppler, limit: window.max_doppler() });
        }
    }
    let out_len = output_len(u.len(), window, fs);
    let mut y = vec![Complex64::new(0.0, 0.0); out_len];
    for t in &scene.targets {
        let echo = dsp::path_response(u.samples(), t.delay, t.doppler, fs, out_len);
        for (acc, e) in y.iter_mut().zip(&echo) {
            *acc += t.amplitude * e;
        }
    }
    let noise_variance = if noise.is_enabled() {
        let n = noise.realize(out_len, fs);
        for (acc, e) in y.iter_mut().zip(&n) {
            *acc += e;
        }
        noise.sample_variance(fs, out_len)
    } else {
        0.0
    };
    Ok(ReceivedSignal { samples: y, sample_rate: fs, noise_variance, window: *window })
}

/// Draws a Poisson clutter field: the scatterer count is Poisson with mean
/// `density * area_cells`, positions are uniform in the region and gains are
/// i.i.d. circular complex Gaussian with standard deviation `amplitude_scale`.
pub fn generate_clutter(model: &ClutterModel, seed: u64) -> TargetScene {
    let mut rng = seed::rng(seed);
    let mean = model.expected_count();
    let count = if mean > 0.0 {
        Poisson::new(mean).map(|p| p.sample(&mut rng) as usize).unwrap_or(0)
    } else {
        0
    };
    let r = model.region;
    let var = model.amplitude_scale * model.amplitude_scale;
    let mut targets: Vec<Target> = Vec::with_capacity(count);
    while targets.len() < count {
        let delay = r.delay_min + rng.random::<f64>() * r.delay_span();
        let doppler = r.doppler_min + rng.random::<f64>() * r.doppler_span();
        let amplitude = dsp::complex_normal(&mut rng, var);
        if targets.iter().any(|t| t.delay == delay && t.doppler == doppler) {
            continue;
        }
        targets.push(Target { amplitude, delay, doppler });
    }
    TargetScene { targets, clutter: None, label: "clutter".into() }
}
