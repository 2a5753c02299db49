//! Monte Carlo execution of a configuration.
//!
//! Seed splitting: trial `t` uses `trial_seed = derive(master_seed, t, "trial")`
//! and every random component of that trial draws from
//! `derive(trial_seed, 0, label)` with label `bits`, `noise`, `clutter`,
//! `crlb` or `sync`, where `derive` is the SplitMix64/FNV-1a mix of
//! [`isacbench_core::seed::derive`]. Seeds depend on the trial index only, so
//! scenarios of one trial (and all variants of a sweep) share their random
//! numbers, and results do not depend on execution order or worker count.

use crate::config::{EstimatorSpec, ExperimentConfig, Metric, NoiseSpec, ScenarioSpec, UnifiedSpec};
use crate::error::HarnessError;
use crate::report::ResultRow;
use isacbench_core::estimators::{
    demodulate, matched_filter_estimate_with, music_estimate, omp_estimate, tally_cost, CapabilityFlags, CostLedger,
    EstimateReport, EstimatorKind, MatchedFilterConfig,
};
use isacbench_core::metrics::{
    ambiguity, ber_theoretical_bpsk, conditional_mi, crlb_numeric, mutual_information, zero_doppler_width, AmbiguityGrid,
    CommReport, CrlbConfig, SingleTargetDelayModel,
};
use isacbench_core::scene::{apply_channel, generate_clutter, ReceivedSignal, SensingPrior, Target, TargetScene};
use isacbench_core::seed;
use isacbench_core::syncnet::SyncScenario;
use isacbench_core::unified::{estimator_metric, signal_metric, CommScenario, CostSpec, PhiKind, SignalMetricConfig};
use isacbench_core::waveform::{papr, ModulationLayout, Waveform};
use isacbench_core::NoiseModel;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Seed of trial `trial`.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    seed::derive(master, trial as u64, "trial")
}

/// Seed of one random component of a trial.
pub fn component_seed(trial_seed: u64, component: &str) -> u64 {
    seed::derive(trial_seed, 0, component)
}

/// Everything a record-based metric needs from one scenario trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub scenario: String,
    pub estimator: String,
    pub seed: u64,
    pub sample_rate: f64,
    pub duration: f64,
    /// Scene targets, clutter excluded.
    pub truth: Vec<Target>,
    /// Without the predicted signal.
    pub estimate: Option<EstimateReport>,
    pub comm: Option<CommReport>,
    /// Linear; infinite without noise.
    pub eb_over_n0: f64,
    /// Compared entities of the estimator metric.
    pub phi: Vec<f64>,
    pub phi_hat: Vec<f64>,
}

/// Which parts of a configuration to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub scenarios: bool,
    pub sync: bool,
    /// Expand `[sweep]` over the scenarios.
    pub sweep: bool,
    pub workers: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { scenarios: true, sync: true, sweep: true, workers: None }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub records: Vec<TrialRecord>,
}

enum Unit {
    Scenario(Box<Prepared>),
    Sync { id: String, scenario: Box<SyncScenario> },
}

impl Unit {
    fn id(&self) -> &str {
        match self {
            Unit::Scenario(p) => &p.spec.id,
            Unit::Sync { id, .. } => id,
        }
    }
}

struct Prepared {
    spec: ScenarioSpec,
    /// `None` stands for a unit line-of-sight path.
    scene: Option<TargetScene>,
}

fn sweep_value(v: f64) -> String {
    format!("{v}")
}

/// Scenarios after sweep expansion, each variant suffixed with its grid point.
pub fn expand_sweep(cfg: &ExperimentConfig) -> Vec<ScenarioSpec> {
    let Some(sw) = &cfg.sweep else { return cfg.scenarios.clone() };
    let mut out = Vec::new();
    for s in &cfg.scenarios {
        let mut variants = vec![s.clone()];
        if !sw.eb_n0_db.is_empty() && s.waveform.bit_count() > 0 {
            variants = variants
                .into_iter()
                .flat_map(|v| {
                    sw.eb_n0_db.iter().map(move |&db| ScenarioSpec {
                        id: format!("{}/eb_n0_db={}", v.id, sweep_value(db)),
                        noise: NoiseSpec::EbN0 { db },
                        ..v.clone()
                    })
                })
                .collect();
        }
        if s.unified.is_some() {
            type Set = fn(&mut UnifiedSpec, f64);
            let axes: [(&str, &Vec<f64>, Set); 2] =
                [("lambda", &sw.lambda, |u, x| u.lambda = x), ("c_max", &sw.c_max, |u, x| u.c_max = x)];
            for (name, grid, set) in axes {
                if grid.is_empty() {
                    continue;
                }
                variants = variants
                    .into_iter()
                    .flat_map(|v| {
                        grid.iter().map(move |&x| {
                            let mut w = v.clone();
                            w.id = format!("{}/{name}={}", v.id, sweep_value(x));
                            set(w.unified.as_mut().expect("checked"), x);
                            w
                        })
                    })
                    .collect();
            }
        }
        out.extend(variants);
    }
    out
}

/// Runs every scenario (sweep expanded) and synchronization entry.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    Ok(run_with(cfg, &RunOptions { workers: cfg.workers, ..Default::default() })?.rows)
}

pub fn run_with(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput, HarnessError> {
    let units = prepare(cfg, opts)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.trials).flat_map(|t| (0..units.len()).map(move |u| (t, u))).collect();
    let exec = || {
        jobs.par_iter()
            .map(|&(t, u)| run_unit(cfg, &units[u], t, trial_seed(cfg.master_seed, t)))
            .collect::<Result<Vec<_>, HarnessError>>()
    };
    let results = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Io(format!("worker pool: {e}")))?
            .install(exec)?,
        None => exec()?,
    };
    let mut out = RunOutput::default();
    for (rows, record) in results {
        out.rows.extend(rows);
        out.records.extend(record);
    }
    Ok(out)
}

/// Rows of one trial under an explicit trial seed, in run order.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize, trial_seed: u64) -> Result<Vec<ResultRow>, HarnessError> {
    let units = prepare(cfg, &RunOptions::default())?;
    let mut rows = Vec::new();
    for u in &units {
        rows.extend(run_unit(cfg, u, trial, trial_seed)?.0);
    }
    Ok(rows)
}

fn prepare(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<Unit>, HarnessError> {
    let mut units = Vec::new();
    if opts.scenarios {
        let specs = if opts.sweep { expand_sweep(cfg) } else { cfg.scenarios.clone() };
        for spec in specs {
            let scene = spec
                .scene
                .as_ref()
                .map(|r| r.load(&cfg.base_dir))
                .transpose()
                .map_err(|e| HarnessError::Validation(vec![format!("{}: scene: {e}", spec.id)]))?;
            units.push(Unit::Scenario(Box::new(Prepared { spec, scene })));
        }
    }
    if opts.sync {
        for s in &cfg.sync {
            let scenario = SyncScenario::from_path(cfg.resolve(&s.file))
                .map_err(|e| HarnessError::Validation(vec![format!("{}: {e}", s.id)]))?;
            units.push(Unit::Sync { id: s.id.clone(), scenario: Box::new(scenario) });
        }
    }
    Ok(units)
}

fn run_unit(
    cfg: &ExperimentConfig,
    unit: &Unit,
    trial: usize,
    tseed: u64,
) -> Result<(Vec<ResultRow>, Option<TrialRecord>), HarnessError> {
    let wrap = |message: String| HarnessError::Trial { trial, unit: unit.id().to_string(), message };
    match unit {
        Unit::Scenario(p) => {
            let (rows, rec) = run_scenario(cfg, p, trial, tseed).map_err(wrap)?;
            Ok((rows, Some(rec)))
        }
        Unit::Sync { id, scenario } => {
            let rows = run_sync(id, scenario, trial, tseed).map_err(wrap)?;
            Ok((rows, None))
        }
    }
}

fn row(trial: usize, scenario: &str, estimator: &str, metric: &str, value: f64, units: &str, seed: u64) -> ResultRow {
    ResultRow {
        trial,
        scenario: scenario.to_string(),
        estimator: estimator.to_string(),
        metric: metric.to_string(),
        value,
        units: units.to_string(),
        seed,
    }
}

fn run_sync(id: &str, sc: &SyncScenario, trial: usize, tseed: u64) -> Result<Vec<ResultRow>, String> {
    let run = sc.run(component_seed(tseed, "sync")).map_err(|e| e.to_string())?;
    let r = &run.report;
    let values = [
        ("rms_position", r.rms_position, "m"),
        ("rms_orientation", r.rms_orientation, "rad"),
        ("rms_time_offset", r.rms_time_offset, "s"),
        ("rms_relative_time_offset", r.rms_relative_time_offset, "s"),
        ("rms_phase_offset", r.rms_phase_offset, "rad"),
        ("iterations", run.result.iterations as f64, "count"),
        ("converged", if run.result.converged { 1.0 } else { 0.0 }, "flag"),
    ];
    Ok(values.iter().map(|(m, v, u)| row(trial, id, "loopy_bp", m, *v, u, tseed)).collect())
}

fn bits_per_symbol(u: &Waveform) -> usize {
    match u.layout() {
        ModulationLayout::SingleCarrierPsk { bits_per_symbol, .. } => *bits_per_symbol,
        ModulationLayout::Ofdm(l) => l.bits_per_symbol,
        _ => 1,
    }
}

fn empty_estimate() -> EstimateReport {
    EstimateReport {
        estimator: EstimatorKind::MatchedFilter,
        targets: Vec::new(),
        predicted_signal: Vec::new(),
        decoded_bits: Vec::new(),
        residual_energy: 0.0,
        residual_history: Vec::new(),
        cost: CostLedger::default(),
        capabilities: CapabilityFlags {
            super_resolution: false,
            needs_target_count: false,
            off_grid_delay: false,
            monostatic_only: false,
        },
    }
}

/// Tallies standing in for a waveform that carries no data.
fn no_comm() -> CommReport {
    CommReport {
        bits_transmitted: 0,
        bit_errors: 0,
        symbols_transmitted: 0,
        symbol_errors: 0,
        ber: 0.0,
        ser: 0.0,
        eb_over_n0_db: f64::INFINITY,
    }
}

fn interleave(x: &[Complex64]) -> Vec<f64> {
    x.iter().flat_map(|c| [c.re, c.im]).collect()
}

fn estimate(spec: &EstimatorSpec, rx: &ReceivedSignal, u: &Waveform) -> Result<EstimateReport, String> {
    let dict = spec.grid().dictionary(u)?;
    match *spec {
        EstimatorSpec::MatchedFilter { threshold_db, refine_delay, .. } => {
            matched_filter_estimate_with(rx, u, &dict, &MatchedFilterConfig { threshold_db, refine_delay })
        }
        EstimatorSpec::Omp { sparsity, .. } => omp_estimate(rx, u, &dict, sparsity),
        EstimatorSpec::Music { order, .. } => music_estimate(rx, u, order, &dict),
    }
    .map_err(|e| e.to_string())
}

fn run_scenario(
    cfg: &ExperimentConfig,
    p: &Prepared,
    trial: usize,
    tseed: u64,
) -> Result<(Vec<ResultRow>, TrialRecord), String> {
    let spec = &p.spec;
    let mut rng = seed::rng(component_seed(tseed, "bits"));
    let bits: Vec<u8> = (0..spec.waveform.bit_count()).map(|_| rng.random_range(0..2u8)).collect();
    let u = spec.waveform.build(bits, &cfg.base_dir)?;
    let fs = u.sample_rate();
    let n0 = spec.noise.n0(&u)?;
    let noise = if n0 > 0.0 {
        NoiseModel::white(n0, component_seed(tseed, "noise")).map_err(|e| e.to_string())?
    } else {
        NoiseModel::none()
    };
    let los = TargetScene::new(vec![Target { amplitude: Complex64::new(1.0, 0.0), delay: 0.0, doppler: 0.0 }], None, "los")
        .map_err(|e| e.to_string())?;
    let scene = p.scene.as_ref().unwrap_or(&los);
    let window = spec.window(&u, Some(scene));
    let clutter = scene.clutter().map(|c| generate_clutter(c, component_seed(tseed, "clutter")));
    let full = match &clutter {
        Some(c) => scene.merged(c).map_err(|e| e.to_string())?,
        None => scene.clone(),
    };
    let estimator_id = spec.estimator.as_ref().map_or("none", |e| e.id());
    let eb_over_n0 = match u.energy_per_bit() {
        Some(eb) if n0 > 0.0 => eb / n0,
        _ => f64::INFINITY,
    };
    let has_data = !u.layout().data_bits().is_empty();
    let needs_rx = spec.metrics.iter().any(|m| m.needs_estimator() || matches!(m, Metric::Ber | Metric::Ser));

    let mut record = TrialRecord {
        trial,
        scenario: spec.id.clone(),
        estimator: estimator_id.to_string(),
        seed: tseed,
        sample_rate: fs,
        duration: u.duration(),
        truth: p.scene.as_ref().map(|s| s.targets().to_vec()).unwrap_or_default(),
        estimate: None,
        comm: None,
        eb_over_n0,
        phi: Vec::new(),
        phi_hat: Vec::new(),
    };
    if needs_rx {
        let rx = apply_channel(&u, &full, &noise, &window).map_err(|e| e.to_string())?;
        let est = spec.estimator.as_ref().map(|e| estimate(e, &rx, &u)).transpose()?;
        if has_data {
            let decoded = demodulate(&rx, &u, est.as_ref().unwrap_or(&empty_estimate())).map_err(|e| e.to_string())?;
            let db = 10.0 * eb_over_n0.log10();
            record.comm =
                Some(CommReport::from_bits(u.layout().data_bits(), &decoded, bits_per_symbol(&u), db).map_err(|e| e.to_string())?);
        }
        if let (Some(est), Some(uni)) = (&est, &spec.unified) {
            match uni.phi {
                PhiKind::Parameters => {
                    let (phi, phi_hat) = parameter_pairs(&record.truth, &est.targets, fs, u.duration());
                    record.phi = phi;
                    record.phi_hat = phi_hat;
                }
                PhiKind::Data => {
                    let mut yhat = est.predicted_signal.clone();
                    if uni.clutter_in_yhat {
                        if let Some(c) = &clutter {
                            let echo = apply_channel(&u, c, &NoiseModel::none(), &window).map_err(|e| e.to_string())?;
                            yhat.iter_mut().zip(&echo.samples).for_each(|(a, b)| *a += b);
                        }
                    }
                    record.phi = interleave(&rx.samples);
                    record.phi_hat = interleave(&yhat);
                }
            }
        }
        record.estimate = est.map(|mut e| {
            e.predicted_signal = Vec::new();
            e
        });
    }

    let mut rows = Vec::with_capacity(spec.metrics.len());
    for m in &spec.metrics {
        let value = if m.from_record() {
            record_metric(*m, &record, spec)?
        } else {
            live_metric(*m, spec, &u, &noise, scene, &window, tseed)?
        };
        rows.push(row(trial, &spec.id, estimator_id, m.name(), value, m.units(), tseed));
    }
    Ok((rows, record))
}

fn live_metric(
    m: Metric,
    spec: &ScenarioSpec,
    u: &Waveform,
    noise: &NoiseModel,
    scene: &TargetScene,
    window: &isacbench_core::ChannelWindow,
    tseed: u64,
) -> Result<f64, String> {
    let s = |e: &dyn std::fmt::Display| e.to_string();
    let prior = || SensingPrior::flat(spec.prior_variance).map_err(|e| s(&e));
    Ok(match m {
        Metric::Papr => papr(u).map_err(|e| s(&e))?.ratio,
        Metric::Energy => u.energy(),
        Metric::SensingMi => conditional_mi(u, &prior()?, noise, u.duration()).map_err(|e| s(&e))?,
        Metric::CommMi => {
            let comm = CommScenario::bpsk_hard_decision(u, noise).map_err(|e| s(&e))?;
            mutual_information(&comm.joint().map_err(|e| s(&e))?)
        }
        Metric::UnifiedSignal => {
            let uni = spec.unified.as_ref().ok_or("unified_signal needs a unified section")?;
            let comm = CommScenario::bpsk_hard_decision(u, noise).map_err(|e| s(&e))?;
            signal_metric(u, &prior()?, noise, &comm, uni.lambda, &SignalMetricConfig::default()).map_err(|e| s(&e))?.value
        }
        Metric::CrlbDelay => {
            let t = scene.targets().first().ok_or("crlb_delay needs a scene target")?;
            let fs = u.sample_rate();
            let len = isacbench_core::scene::output_len(u.len(), window, fs);
            let model = SingleTargetDelayModel {
                probe: u.samples().to_vec(),
                sample_rate: fs,
                len,
                noise_variance: noise.sample_variance(fs, len),
            };
            let a = t.amplitude.norm().max(f64::MIN_POSITIVE);
            let config = CrlbConfig {
                trials: spec.crlb_trials,
                scales: Some(vec![a, a, 1.0 / fs]),
                seed: component_seed(tseed, "crlb"),
                ..Default::default()
            };
            let res = crlb_numeric(&model, &[t.amplitude.re, t.amplitude.im, t.delay], &config).map_err(|e| s(&e))?;
            res.bound[(2, 2)]
        }
        Metric::AmbiguityWidth => {
            let map = ambiguity(u, &AmbiguityGrid::zero_doppler(u)).map_err(|e| s(&e))?;
            zero_doppler_width(&map).map_err(|e| s(&e))?
        }
        other => return Err(format!("{} is computed from trial records", other.name())),
    })
}

/// Greedy nearest assignment of estimates to true targets in normalized
/// delay-Doppler distance (samples and Doppler bins); each estimate is used
/// at most once. `None` marks a missed target.
pub fn match_targets(truth: &[Target], est: &[Target], fs: f64, duration: f64) -> Vec<Option<usize>> {
    let mut used = vec![false; est.len()];
    truth
        .iter()
        .map(|t| {
            let best = est
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, e)| {
                    let d = ((e.delay - t.delay) * fs).powi(2) + ((e.doppler - t.doppler) * duration).powi(2);
                    (j, d)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(j, _)| j);
            if let Some(j) = best {
                used[j] = true;
            }
            best
        })
        .collect()
}

/// `(Re h, Im h, delay in samples, Doppler in bins)` per true target and
/// its matched estimate; a missed target is compared against zeros.
fn parameter_pairs(truth: &[Target], est: &[Target], fs: f64, duration: f64) -> (Vec<f64>, Vec<f64>) {
    let norm = |t: &Target| [t.amplitude.re, t.amplitude.im, t.delay * fs, t.doppler * duration];
    let assignment = match_targets(truth, est, fs, duration);
    let mut phi = Vec::with_capacity(4 * truth.len());
    let mut phi_hat = Vec::with_capacity(4 * truth.len());
    for (t, a) in truth.iter().zip(&assignment) {
        phi.extend(norm(t));
        phi_hat.extend(a.map_or([0.0; 4], |j| norm(&est[j])));
    }
    (phi, phi_hat)
}

fn cost_spec(u: &UnifiedSpec) -> CostSpec {
    CostSpec { weights: u.weights.clone(), c_max: u.c_max, form: u.form }
}

/// Metrics computable from a stored [`TrialRecord`].
pub fn record_metric(m: Metric, rec: &TrialRecord, spec: &ScenarioSpec) -> Result<f64, String> {
    let est = || rec.estimate.as_ref().ok_or_else(|| format!("{} needs an estimate", m.name()));
    let comm = || rec.comm.as_ref().ok_or_else(|| format!("{} needs data bits", m.name()));
    let uni = || spec.unified.as_ref().ok_or_else(|| format!("{} needs a unified section", m.name()));
    let sq_error = |f: fn(&Target) -> f64| -> Result<f64, String> {
        let e = est()?;
        let a = match_targets(&rec.truth, &e.targets, rec.sample_rate, rec.duration);
        if a.is_empty() || a.iter().any(Option::is_none) {
            return Ok(f64::NAN);
        }
        let sum: f64 = rec.truth.iter().zip(&a).map(|(t, j)| (f(&e.targets[j.expect("matched")]) - f(t)).powi(2)).sum();
        Ok(sum / rec.truth.len() as f64)
    };
    Ok(match m {
        Metric::Ber => comm()?.ber,
        Metric::Ser => comm()?.ser,
        Metric::BerTheory => ber_theoretical_bpsk(rec.eb_over_n0),
        Metric::DelaySqError => sq_error(|t| t.delay)?,
        Metric::DopplerSqError => sq_error(|t| t.doppler)?,
        Metric::Detections => est()?.targets.len() as f64,
        Metric::ResidualEnergy => est()?.residual_energy,
        Metric::Flops => est()?.cost.flop_count as f64,
        Metric::WCost => {
            let u = uni()?;
            tally_cost(&est()?.cost, &u.weights, u.c_max, u.form).map_err(|e| e.to_string())?
        }
        Metric::UnifiedEstimator => {
            let u = uni()?;
            let c = rec.comm.clone().unwrap_or_else(no_comm);
            estimator_metric(&rec.phi, &rec.phi_hat, u.phi, &c, u.lambda, &est()?.cost, &cost_spec(u))
                .map_err(|e| e.to_string())?
                .value
        }
        other => return Err(format!("{} cannot be recomputed from a trial record", other.name())),
    })
}

/// Recomputes the record-based metrics of each record's scenario.
/// Scenario-level metrics that need the waveform are skipped.
pub fn metrics_from_records(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<Vec<ResultRow>, HarnessError> {
    // records may come from a plain or a swept run
    let mut specs = cfg.scenarios.clone();
    specs.extend(expand_sweep(cfg).into_iter().filter(|v| !cfg.scenarios.iter().any(|s| s.id == v.id)));
    let mut rows = Vec::new();
    for rec in records {
        let spec = specs.iter().find(|s| s.id == rec.scenario).ok_or_else(|| {
            HarnessError::Validation(vec![format!("record scenario {:?} is not in the configuration", rec.scenario)])
        })?;
        for m in spec.metrics.iter().filter(|m| m.from_record()) {
            let v = record_metric(*m, rec, spec).map_err(|message| HarnessError::Trial {
                trial: rec.trial,
                unit: rec.scenario.clone(),
                message,
            })?;
            rows.push(row(rec.trial, &rec.scenario, &rec.estimator, m.name(), v, m.units(), rec.seed));
        }
    }
    Ok(rows)
}

pub fn write_records(path: &std::path::Path, records: &[TrialRecord]) -> Result<(), HarnessError> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| HarnessError::Report(e.to_string()))?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: &std::path::Path) -> Result<Vec<TrialRecord>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| HarnessError::Report(format!("record {}: {e}", i + 1))))
        .collect()
}
