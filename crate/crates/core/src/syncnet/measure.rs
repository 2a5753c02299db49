use super::{
    rng_for, wrap_angle, ApertureState, NetworkTopology, StateVec, SyncError, ORIENTATION, PHASE_OFFSET, POS_X, POS_Y,
    TIME_OFFSET,
};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Which observables each pair measurement carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observables {
    pub delay: bool,
    pub aoa: bool,
    pub phase: bool,
}

impl Default for Observables {
    fn default() -> Self {
        Self { delay: true, aoa: true, phase: false }
    }
}

/// Standard deviations of the observables: delay in s, angles in rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableNoise {
    pub delay_std: f64,
    pub aoa_std: f64,
    pub phase_std: f64,
}

/// Forward model of the bidirectional pair measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementModel {
    /// Propagation speed, m/s.
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Hz.
    #[serde(default = "default_carrier")]
    pub carrier_frequency: f64,
    #[serde(default)]
    pub observables: Observables,
    /// Noise levels; also the likelihood's standard deviations.
    pub noise: ObservableNoise,
    /// `false` simulates noiseless observations while the likelihood keeps
    /// the configured standard deviations.
    #[serde(default = "default_true")]
    pub draw_noise: bool,
}

fn default_speed() -> f64 {
    SPEED_OF_LIGHT
}

fn default_carrier() -> f64 {
    2.4e9
}

fn default_true() -> bool {
    true
}

impl MeasurementModel {
    pub fn new(observables: Observables, noise: ObservableNoise) -> Self {
        Self { speed: SPEED_OF_LIGHT, carrier_frequency: default_carrier(), observables, noise, draw_noise: true }
    }

    pub fn validate(&self) -> Result<(), SyncError> {
        let o = self.observables;
        let n = self.noise;
        let bad = |used: bool, s: f64| used && !(s.is_finite() && s > 0.0);
        if bad(o.delay, n.delay_std) || bad(o.aoa, n.aoa_std) || bad(o.phase, n.phase_std) {
            return Err(SyncError::Config("every used observable needs a positive noise std".into()));
        }
        if !(o.delay || o.aoa || o.phase) {
            return Err(SyncError::Config("no observable selected".into()));
        }
        if !(self.speed > 0.0 && self.carrier_frequency > 0.0) {
            return Err(SyncError::Config("speed and carrier frequency must be positive".into()));
        }
        Ok(())
    }

    /// Noiseless `(delay, aoa, phase)` for transmitter `tx` and receiver `rx`.
    pub fn predict(&self, tx: &StateVec, rx: &StateVec) -> (f64, f64, f64) {
        let dx = tx[POS_X] - rx[POS_X];
        let dy = tx[POS_Y] - rx[POS_Y];
        let delay = dx.hypot(dy) / self.speed + (rx[TIME_OFFSET] - tx[TIME_OFFSET]);
        let aoa = wrap_angle(dy.atan2(dx) - rx[ORIENTATION]);
        let phase = wrap_angle(2.0 * PI * self.carrier_frequency * delay + rx[PHASE_OFFSET] - tx[PHASE_OFFSET]);
        (delay, aoa, phase)
    }

    /// `ln f(z | tx, rx)` including the Gaussian normalization constants.
    pub fn log_likelihood(&self, m: &PairMeasurement, tx: &StateVec, rx: &StateVec) -> f64 {
        self.log_kernel(m, tx, rx) - log_normalizer(m)
    }

    /// `ln f(z | tx, rx)` without the constant normalization terms.
    pub(crate) fn log_kernel(&self, m: &PairMeasurement, tx: &StateVec, rx: &StateVec) -> f64 {
        let (d, a, p) = self.predict(tx, rx);
        let mut q = 0.0;
        if let Some(z) = m.delay {
            q += ((z - d) / m.noise.delay_std).powi(2);
        }
        if let Some(z) = m.aoa {
            q += (wrap_angle(z - a) / m.noise.aoa_std).powi(2);
        }
        if let Some(z) = m.phase {
            q += (wrap_angle(z - p) / m.noise.phase_std).powi(2);
        }
        -0.5 * q
    }

    /// Log kernel with each endpoint convolved with a Gaussian of per-coordinate
    /// standard deviation `blur_tx` / `blur_rx`, to first order in the blur:
    /// the observation variances grow by the blur propagated through the
    /// forward model. Equals `log_kernel` up to a constant when both blurs are
    /// zero.
    pub(crate) fn log_kernel_blurred(
        &self,
        m: &PairMeasurement,
        tx: &StateVec,
        rx: &StateVec,
        blur_tx: &StateVec,
        blur_rx: &StateVec,
    ) -> f64 {
        let (d, a, p) = self.predict(tx, rx);
        let sq = |b: &StateVec, k: usize| b[k] * b[k];
        let pos = 0.5 * (sq(blur_tx, POS_X) + sq(blur_tx, POS_Y) + sq(blur_rx, POS_X) + sq(blur_rx, POS_Y));
        let delay_add = pos / (self.speed * self.speed) + sq(blur_tx, TIME_OFFSET) + sq(blur_rx, TIME_OFFSET);
        let term = |r: f64, var: f64| -0.5 * (r * r / var + var.ln());
        let mut q = 0.0;
        if let Some(z) = m.delay {
            q += term(z - d, m.noise.delay_std.powi(2) + delay_add);
        }
        if let Some(z) = m.aoa {
            let r2 = (tx[POS_X] - rx[POS_X]).powi(2) + (tx[POS_Y] - rx[POS_Y]).powi(2);
            let add = (pos / r2).min(PI * PI) + sq(blur_rx, ORIENTATION);
            q += term(wrap_angle(z - a), m.noise.aoa_std.powi(2) + add);
        }
        if let Some(z) = m.phase {
            let w = 2.0 * PI * self.carrier_frequency;
            let add = (w * w * delay_add + sq(blur_tx, PHASE_OFFSET) + sq(blur_rx, PHASE_OFFSET)).min(PI * PI);
            q += term(wrap_angle(z - p), m.noise.phase_std.powi(2) + add);
        }
        q
    }
}

fn log_normalizer(m: &PairMeasurement) -> f64 {
    let c = |s: f64| (s * (2.0 * PI).sqrt()).ln();
    m.delay.map_or(0.0, |_| c(m.noise.delay_std))
        + m.aoa.map_or(0.0, |_| c(m.noise.aoa_std))
        + m.phase.map_or(0.0, |_| c(m.noise.phase_std))
}

impl PairMeasurement {
    pub(crate) fn is_finite(&self) -> bool {
        [self.delay, self.aoa, self.phase].iter().flatten().all(|v| v.is_finite())
    }
}

/// One ordered-pair observation `z_(tx, rx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMeasurement {
    pub tx: usize,
    pub rx: usize,
    /// Propagation delay plus clock-offset difference, s.
    pub delay: Option<f64>,
    /// Bearing of `tx` in the frame of `rx`, rad.
    pub aoa: Option<f64>,
    /// Carrier phase difference, rad.
    pub phase: Option<f64>,
    pub noise: ObservableNoise,
}

/// Draws one measurement per masked pair. Each pair has its own seed stream,
/// so the result does not depend on the mask order.
pub fn simulate_measurements(
    topology: &NetworkTopology,
    truth: &BTreeMap<usize, ApertureState>,
    model: &MeasurementModel,
    seed: u64,
) -> Result<Vec<PairMeasurement>, SyncError> {
    model.validate()?;
    let state = |id: usize| {
        truth
            .get(&id)
            .map(|s| s.to_vec())
            .ok_or_else(|| SyncError::Topology(format!("no true state for aperture {id}")))
    };
    topology
        .mask()
        .iter()
        .map(|&(tx, rx)| {
            let (d, a, p) = model.predict(&state(tx)?, &state(rx)?);
            let mut rng = rng_for(seed, ((tx as u64) << 32) | rx as u64, "sync-measure");
            let mut noisy = |v: f64, s: f64| {
                if model.draw_noise {
                    v + s * rng.sample::<f64, _>(StandardNormal)
                } else {
                    v
                }
            };
            let o = model.observables;
            let n = model.noise;
            let delay = noisy(d, n.delay_std);
            let aoa = wrap_angle(noisy(a, n.aoa_std));
            let phase = wrap_angle(noisy(p, n.phase_std));
            Ok(PairMeasurement {
                tx,
                rx,
                delay: o.delay.then_some(delay),
                aoa: o.aoa.then_some(aoa),
                phase: o.phase.then_some(phase),
                noise: n,
            })
        })
        .collect()
}
