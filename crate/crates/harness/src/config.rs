//! Experiment configuration: TOML schema, loading and eager validation.

use crate::error::HarnessError;
use isacbench_core::estimators::{CostForm, Dictionary, COST_LABELS};
use isacbench_core::scene::{output_len, ChannelWindow, TargetScene};
use isacbench_core::syncnet::SyncScenario;
use isacbench_core::unified::PhiKind;
use isacbench_core::waveform::{
    generate_chirp, generate_ofdm, generate_psk_frame, read_waveform, ModulationLayout, OfdmLayout, Waveform,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// A whole experiment: Monte Carlo scenarios, synchronization scenarios and
/// an optional parameter sweep, all sharing `trials` and `master_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, rename = "scenario", skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default, rename = "sync", skip_serializing_if = "Vec::is_empty")]
    pub sync: Vec<SyncSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: String,
    pub waveform: WaveformSpec,
    /// Path to a scene file or an inline scene table. Without a scene the
    /// channel is a single unit line-of-sight path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneRef>,
    /// Defaults to the largest scene delay and a slow-time rate equal to
    /// the sample rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorSpec>,
    pub metrics: Vec<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unified: Option<UnifiedSpec>,
    /// Flat spectral variance of the sensing prior used by the information metrics.
    #[serde(default = "one")]
    pub prior_variance: f64,
    /// Monte Carlo trials inside each numeric Fisher evaluation.
    #[serde(default = "default_crlb_trials")]
    pub crlb_trials: usize,
}

fn one() -> f64 {
    1.0
}

fn default_crlb_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaveformSpec {
    /// Random data bits drawn per trial.
    Psk {
        bits: usize,
        #[serde(default = "one_usize")]
        bits_per_symbol: usize,
        sample_rate: f64,
        #[serde(default = "one_usize")]
        oversampling: usize,
    },
    /// Full-grid CP-OFDM with random data per trial.
    Ofdm {
        subcarriers: usize,
        symbols: usize,
        #[serde(default = "two_usize")]
        bits_per_symbol: usize,
        sample_rate: f64,
        #[serde(default)]
        cp_len: usize,
    },
    Chirp { bandwidth: f64, duration: f64, sample_rate: f64 },
    File { path: PathBuf },
}

fn one_usize() -> usize {
    1
}

fn two_usize() -> usize {
    2
}

impl WaveformSpec {
    /// Data bits this waveform carries per trial.
    pub fn bit_count(&self) -> usize {
        match self {
            WaveformSpec::Psk { bits, .. } => *bits,
            WaveformSpec::Ofdm { subcarriers, symbols, bits_per_symbol, .. } => subcarriers * symbols * bits_per_symbol,
            _ => 0,
        }
    }

    /// Builds the waveform around the given data bits (ignored by
    /// waveforms without data).
    pub fn build(&self, bits: Vec<u8>, base_dir: &Path) -> Result<Waveform, String> {
        let w = match self {
            WaveformSpec::Psk { bits_per_symbol, sample_rate, oversampling, .. } => {
                generate_psk_frame(&bits, *bits_per_symbol, *sample_rate, *oversampling)
            }
            WaveformSpec::Ofdm { subcarriers, symbols, bits_per_symbol, sample_rate, cp_len } => {
                OfdmLayout::full_grid(*subcarriers, *symbols, *bits_per_symbol, bits)
                    .and_then(|l| generate_ofdm(&l, *sample_rate, *cp_len))
            }
            WaveformSpec::Chirp { bandwidth, duration, sample_rate } => {
                generate_chirp(*bandwidth, *duration, *sample_rate)
            }
            WaveformSpec::File { path } => read_waveform(&base_dir.join(path)),
        };
        w.map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneRef {
    File(PathBuf),
    Inline(toml::Table),
}

impl SceneRef {
    pub fn load(&self, base_dir: &Path) -> Result<TargetScene, String> {
        match self {
            SceneRef::File(p) => TargetScene::from_file(base_dir.join(p)).map_err(|e| e.to_string()),
            SceneRef::Inline(t) => {
                let text = toml::to_string(t).map_err(|e| e.to_string())?;
                TargetScene::from_toml_str(&text).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub max_delay: f64,
    pub slow_time_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    #[default]
    None,
    /// One-sided PSD in W/Hz.
    N0 { value: f64 },
    /// Relative to the energy per data bit.
    EbN0 { db: f64 },
    /// Mean sample power of the waveform over the per-sample noise variance.
    Snr { db: f64 },
}

impl NoiseSpec {
    /// Noise PSD for waveform `u`.
    pub fn n0(&self, u: &Waveform) -> Result<f64, String> {
        match *self {
            NoiseSpec::None => Ok(0.0),
            NoiseSpec::N0 { value } => Ok(value),
            NoiseSpec::EbN0 { db } => {
                let eb = u.energy_per_bit().ok_or("eb_n0 noise needs a waveform with data bits")?;
                Ok(eb / 10f64.powf(db / 10.0))
            }
            NoiseSpec::Snr { db } => {
                let p = u.samples().iter().map(|s| s.norm_sqr()).sum::<f64>() / u.len() as f64;
                Ok(p / (10f64.powf(db / 10.0) * u.sample_rate()))
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, NoiseSpec::None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    MatchedFilter {
        #[serde(default = "default_threshold")]
        threshold_db: f64,
        #[serde(default)]
        refine_delay: bool,
        grid: GridSpec,
    },
    Omp { sparsity: usize, grid: GridSpec },
    /// OFDM waveforms only.
    Music { order: usize, grid: GridSpec },
}

fn default_threshold() -> f64 {
    -13.0
}

impl EstimatorSpec {
    pub fn id(&self) -> &'static str {
        match self {
            EstimatorSpec::MatchedFilter { .. } => "matched_filter",
            EstimatorSpec::Omp { .. } => "omp",
            EstimatorSpec::Music { .. } => "music",
        }
    }

    pub fn grid(&self) -> &GridSpec {
        match self {
            EstimatorSpec::MatchedFilter { grid, .. } | EstimatorSpec::Omp { grid, .. } | EstimatorSpec::Music { grid, .. } => {
                grid
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Whole-sample delays and the Doppler bins of the waveform length.
    Sample { n_delay: usize, n_doppler: usize },
    Uniform {
        delay_start: f64,
        delay_step: f64,
        n_delay: usize,
        doppler_start: f64,
        doppler_step: f64,
        n_doppler: usize,
    },
}

impl GridSpec {
    pub fn dictionary(&self, u: &Waveform) -> Result<Dictionary, String> {
        match *self {
            GridSpec::Sample { n_delay, n_doppler } => Dictionary::sample_grid(u.sample_rate(), u.len(), n_delay, n_doppler),
            GridSpec::Uniform { delay_start, delay_step, n_delay, doppler_start, doppler_step, n_doppler } => {
                Dictionary::uniform(delay_start, delay_step, n_delay, doppler_start, doppler_step, n_doppler)
            }
        }
        .map_err(|e| e.to_string())
    }
}

/// Parameters of the unified metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnifiedSpec {
    pub lambda: f64,
    /// Cost weights over flops, time samples, spectral bins, bandwidth and
    /// a-priori inputs; must sum to 1.
    pub weights: Vec<f64>,
    pub c_max: f64,
    #[serde(default = "default_form")]
    pub form: CostForm,
    #[serde(default = "default_phi")]
    pub phi: PhiKind,
    /// Adds the noiseless clutter echo to the predicted signal when `phi`
    /// compares data, i.e. treats clutter as known to the estimator.
    #[serde(default)]
    pub clutter_in_yhat: bool,
}

fn default_form() -> CostForm {
    CostForm::FpeLike
}

fn default_phi() -> PhiKind {
    PhiKind::Parameters
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Papr,
    Energy,
    Ber,
    Ser,
    BerTheory,
    DelaySqError,
    DopplerSqError,
    Detections,
    ResidualEnergy,
    Flops,
    WCost,
    UnifiedEstimator,
    SensingMi,
    CommMi,
    UnifiedSignal,
    CrlbDelay,
    AmbiguityWidth,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Papr => "papr",
            Metric::Energy => "energy",
            Metric::Ber => "ber",
            Metric::Ser => "ser",
            Metric::BerTheory => "ber_theory",
            Metric::DelaySqError => "delay_sq_error",
            Metric::DopplerSqError => "doppler_sq_error",
            Metric::Detections => "detections",
            Metric::ResidualEnergy => "residual_energy",
            Metric::Flops => "flops",
            Metric::WCost => "w_cost",
            Metric::UnifiedEstimator => "unified_estimator",
            Metric::SensingMi => "sensing_mi",
            Metric::CommMi => "comm_mi",
            Metric::UnifiedSignal => "unified_signal",
            Metric::CrlbDelay => "crlb_delay",
            Metric::AmbiguityWidth => "ambiguity_width",
        }
    }

    pub fn units(&self) -> &'static str {
        match self {
            Metric::Papr | Metric::Ber | Metric::Ser | Metric::BerTheory | Metric::WCost => "ratio",
            Metric::Energy => "J",
            Metric::DelaySqError | Metric::CrlbDelay => "s^2",
            Metric::DopplerSqError => "Hz^2",
            Metric::Detections | Metric::Flops => "count",
            Metric::ResidualEnergy => "sample_energy",
            Metric::UnifiedEstimator | Metric::UnifiedSignal => "score",
            Metric::SensingMi | Metric::CommMi => "nats",
            Metric::AmbiguityWidth => "s",
        }
    }

    /// Needs an estimator run.
    pub fn needs_estimator(&self) -> bool {
        matches!(
            self,
            Metric::DelaySqError
                | Metric::DopplerSqError
                | Metric::Detections
                | Metric::ResidualEnergy
                | Metric::Flops
                | Metric::WCost
                | Metric::UnifiedEstimator
        )
    }

    /// Needs data bits in the waveform.
    pub fn needs_data(&self) -> bool {
        matches!(self, Metric::Ber | Metric::Ser | Metric::BerTheory | Metric::CommMi | Metric::UnifiedSignal)
    }

    pub fn needs_noise(&self) -> bool {
        matches!(self, Metric::SensingMi | Metric::CommMi | Metric::UnifiedSignal | Metric::CrlbDelay | Metric::BerTheory)
    }

    pub fn needs_unified(&self) -> bool {
        matches!(self, Metric::WCost | Metric::UnifiedEstimator | Metric::UnifiedSignal)
    }

    /// Computable from a stored trial record without re-simulating.
    pub fn from_record(&self) -> bool {
        self.needs_estimator() || matches!(self, Metric::Ber | Metric::Ser | Metric::BerTheory)
    }
}

/// A synchronization scenario file run once per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncSpec {
    pub id: String,
    pub file: PathBuf,
}

/// Grids expanded over every scenario. Axes that do not apply to a
/// scenario (lambda and c_max without a unified section) are skipped.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eb_n0_db: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c_max: Vec<f64>,
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base, &path.display().to_string())
}

/// Parses and validates configuration text; relative paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path, origin: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        HarnessError::Parse { origin: origin.to_string(), line, column, message: e.message().trim().to_string() }
    })?;
    cfg.base_dir = base_dir.to_path_buf();
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// The configuration as loaded, defaults filled in.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Collects every violation before reporting.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut errs = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errs.push(format!("schema_version = {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.trials < 1 {
            errs.push("trials = 0 must be >= 1".into());
        }
        if self.workers == Some(0) {
            errs.push("workers = 0 must be >= 1".into());
        }
        if self.scenarios.is_empty() && self.sync.is_empty() {
            errs.push("no [[scenario]] or [[sync]] entries".into());
        }
        let mut ids = BTreeSet::new();
        for id in self.scenarios.iter().map(|s| &s.id).chain(self.sync.iter().map(|s| &s.id)) {
            if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == ',') {
                errs.push(format!("id {id:?} must be nonempty without whitespace or commas"));
            }
            if !ids.insert(id.clone()) {
                errs.push(format!("id {id:?} is used twice"));
            }
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            self.check_scenario(&format!("scenario[{i}] ({})", s.id), s, &mut errs);
        }
        for (i, s) in self.sync.iter().enumerate() {
            let path = self.resolve(&s.file);
            if !path.is_file() {
                errs.push(format!("sync[{i}].file: {} does not exist", path.display()));
            } else if let Err(e) = SyncScenario::from_path(&path) {
                errs.push(format!("sync[{i}].file: {e}"));
            }
        }
        if let Some(sw) = &self.sweep {
            for (j, l) in sw.lambda.iter().enumerate() {
                if !(0.0..=1.0).contains(l) {
                    errs.push(format!("sweep.lambda[{j}] = {l} must lie in [0, 1]"));
                }
            }
            for (j, c) in sw.c_max.iter().enumerate() {
                if !(c.is_finite() && *c > 0.0) {
                    errs.push(format!("sweep.c_max[{j}] = {c} must be positive and finite"));
                }
            }
            for (j, d) in sw.eb_n0_db.iter().enumerate() {
                if !d.is_finite() {
                    errs.push(format!("sweep.eb_n0_db[{j}] = {d} must be finite"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Validation(errs))
        }
    }

    fn check_scenario(&self, at: &str, s: &ScenarioSpec, errs: &mut Vec<String>) {
        let mut push = |m: String| errs.push(format!("{at}.{m}"));
        if s.metrics.is_empty() {
            push("metrics: list is empty".into());
        }
        let mut seen = BTreeSet::new();
        for m in &s.metrics {
            if !seen.insert(*m) {
                push(format!("metrics: {} listed twice", m.name()));
            }
        }
        let has_data = s.waveform.bit_count() > 0;
        if let Some(m) = s.metrics.iter().find(|m| m.needs_estimator()) {
            if s.estimator.is_none() {
                push(format!("metrics: {} needs an estimator section", m.name()));
            }
        }
        if let Some(m) = s.metrics.iter().find(|m| m.needs_unified()) {
            if s.unified.is_none() {
                push(format!("metrics: {} needs a unified section", m.name()));
            }
        }
        if let Some(m) = s.metrics.iter().find(|m| m.needs_noise()) {
            if s.noise.is_none() {
                push(format!("metrics: {} needs a noise model", m.name()));
            }
        }
        if let Some(m) = s.metrics.iter().find(|m| m.needs_data()) {
            if !has_data && !matches!(s.waveform, WaveformSpec::File { .. }) {
                push(format!("metrics: {} needs a waveform carrying data bits", m.name()));
            }
        }
        match s.noise {
            NoiseSpec::N0 { value } if !(value.is_finite() && value >= 0.0) => {
                push(format!("noise.value = {value} must be finite and >= 0"))
            }
            NoiseSpec::EbN0 { db } | NoiseSpec::Snr { db } if !db.is_finite() => push(format!("noise.db = {db} must be finite")),
            NoiseSpec::EbN0 { .. } if !has_data && !matches!(s.waveform, WaveformSpec::File { .. }) => {
                push("noise: eb_n0 needs a waveform carrying data bits".into())
            }
            _ => {}
        }
        if !(s.prior_variance.is_finite() && s.prior_variance > 0.0) {
            push(format!("prior_variance = {} must be positive", s.prior_variance));
        }
        if s.crlb_trials < 1 {
            push("crlb_trials = 0 must be >= 1".into());
        }
        if let Some(u) = &s.unified {
            let signal = s.metrics.contains(&Metric::UnifiedSignal);
            if signal && !(u.lambda > 0.0 && u.lambda < 1.0) {
                push(format!("unified.lambda = {} must lie in (0, 1) for unified_signal", u.lambda));
            } else if !(0.0..=1.0).contains(&u.lambda) {
                push(format!("unified.lambda = {} must lie in [0, 1]", u.lambda));
            }
            if u.weights.len() != COST_LABELS.len() {
                push(format!("unified.weights has {} entries, expected {} ({})", u.weights.len(), COST_LABELS.len(), COST_LABELS.join(", ")));
            } else if u.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                push("unified.weights must be finite and >= 0".into());
            } else if (u.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                push(format!("unified.weights sum to {}, expected 1", u.weights.iter().sum::<f64>()));
            }
            if !(u.c_max.is_finite() && u.c_max > 0.0) {
                push(format!("unified.c_max = {} must be positive and finite", u.c_max));
            }
        }
        if let WaveformSpec::File { path } = &s.waveform {
            if !self.resolve(path).is_file() {
                push(format!("waveform.path: {} does not exist", self.resolve(path).display()));
                return;
            }
        }
        if let Some(SceneRef::File(p)) = &s.scene {
            if !self.resolve(p).is_file() {
                push(format!("scene: {} does not exist", self.resolve(p).display()));
                return;
            }
        }
        // build everything once with placeholder bits to surface module errors now
        let u = match s.waveform.build(vec![0; s.waveform.bit_count()], &self.base_dir) {
            Ok(u) => u,
            Err(e) => return push(format!("waveform: {e}")),
        };
        if s.metrics.iter().any(|m| m.needs_data()) && u.layout().data_bits().is_empty() {
            push("waveform: file carries no data bits but data metrics are requested".into());
        }
        if let Err(e) = s.noise.n0(&u) {
            push(format!("noise: {e}"));
        }
        let scene = match s.scene.as_ref().map(|r| r.load(&self.base_dir)).transpose() {
            Ok(sc) => sc,
            Err(e) => return push(format!("scene: {e}")),
        };
        let window = s.window(&u, scene.as_ref());
        if !(window.max_delay.is_finite() && window.max_delay >= 0.0 && window.slow_time_rate > 0.0) {
            push("window: max_delay must be >= 0 and slow_time_rate > 0".into());
        }
        if let Some(sc) = &scene {
            for t in sc.targets() {
                if t.delay > window.max_delay || t.doppler.abs() > window.max_doppler() {
                    push(format!("scene: target at ({} s, {} Hz) lies outside the channel window", t.delay, t.doppler));
                }
            }
            if let Some(c) = sc.clutter() {
                if let Err(e) = c.check_within(&window) {
                    push(format!("scene: {e}"));
                }
            }
            if s.metrics.contains(&Metric::CrlbDelay) && sc.targets().is_empty() {
                push("metrics: crlb_delay needs at least one scene target".into());
            }
        }
        if let Some(est) = &s.estimator {
            match est.grid().dictionary(&u) {
                Ok(d) => {
                    if let Err(e) = d.check_window(&window) {
                        push(format!("estimator.grid: {e}"));
                    }
                    match est {
                        EstimatorSpec::Omp { sparsity, .. } if *sparsity < 1 || *sparsity > d.len() => {
                            push(format!("estimator.sparsity = {sparsity} must lie in [1, {}]", d.len()))
                        }
                        EstimatorSpec::Music { order, .. } if *order < 1 => push("estimator.order must be >= 1".into()),
                        _ => {}
                    }
                }
                Err(e) => push(format!("estimator.grid: {e}")),
            }
            if let EstimatorSpec::Music { .. } = est {
                if !matches!(u.layout(), ModulationLayout::Ofdm(_)) {
                    push("estimator: music needs an ofdm waveform".into());
                }
            }
        }
        let n = output_len(u.len(), &window, u.sample_rate());
        if n == 0 {
            push("waveform: empty".into());
        }
    }
}

impl ScenarioSpec {
    /// The configured window, or the smallest one holding the scene.
    pub fn window(&self, u: &Waveform, scene: Option<&TargetScene>) -> ChannelWindow {
        if let Some(w) = self.window {
            return ChannelWindow::new(w.max_delay, w.slow_time_rate);
        }
        let mut max_delay = 0.0f64;
        if let Some(sc) = scene {
            for t in sc.targets() {
                max_delay = max_delay.max(t.delay);
            }
            if let Some(c) = sc.clutter() {
                max_delay = max_delay.max(c.region.delay_max);
            }
        }
        ChannelWindow::new(max_delay, u.sample_rate())
    }
}
