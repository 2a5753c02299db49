//! Spatiotemporal synchronization of distributed apertures: network
//! topology, pairwise measurements, the factor graph of the joint posterior,
//! and particle-based loopy belief propagation.

mod bp;
mod graph;
mod measure;
mod report;
mod scenario;

pub use bp::{estimate_map, estimate_mmse, run_loopy_bp, BandwidthRule, Belief, BpConfig, BpResult, IterationStats};
pub use graph::{build_factor_graph, FactorGraph, PairFactor, RankDiagnostics};
pub use measure::{
    simulate_measurements, MeasurementModel, ObservableNoise, Observables, PairMeasurement, SPEED_OF_LIGHT,
};
pub use report::{sync_error_report, SyncErrorReport, SyncErrorRow};
pub use scenario::{ApertureSpec, MaskSpec, PointEstimate, SyncRun, SyncScenario};

use crate::seed;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("topology: {0}")]
    Topology(String),
    #[error("all particle weights of aperture {id} vanished at iteration {iteration}")]
    Degeneracy { id: usize, iteration: usize },
    #[error("belief has no particles")]
    EmptyBelief,
    #[error("id sets differ: {0}")]
    IdMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Estimated state coordinates, in particle-vector order.
pub const POS_X: usize = 0;
pub const POS_Y: usize = 1;
pub const ORIENTATION: usize = 2;
pub const TIME_OFFSET: usize = 3;
pub const PHASE_OFFSET: usize = 4;
pub const STATE_DIM: usize = 5;

/// Coordinates living on the circle.
pub const WRAPPED: [bool; STATE_DIM] = [false, false, true, false, true];

pub type StateVec = [f64; STATE_DIM];

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    PI - (PI - x).rem_euclid(2.0 * PI)
}

/// Spatial and temporal state of one aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureState {
    pub id: usize,
    /// m.
    pub position: [f64; 2],
    /// rad, `(-pi, pi]`.
    pub orientation: f64,
    /// m/s; carried, not estimated, in static scenes.
    #[serde(default)]
    pub velocity: [f64; 2],
    /// s.
    #[serde(default)]
    pub time_offset: f64,
    /// Hz; carried, not estimated, in static scenes.
    #[serde(default)]
    pub cfo: f64,
    /// rad, `(-pi, pi]`.
    #[serde(default)]
    pub phase_offset: f64,
}

impl ApertureState {
    pub fn new(id: usize, position: [f64; 2], orientation: f64, time_offset: f64, phase_offset: f64) -> Self {
        Self {
            id,
            position,
            orientation: wrap_angle(orientation),
            velocity: [0.0; 2],
            time_offset,
            cfo: 0.0,
            phase_offset: wrap_angle(phase_offset),
        }
    }

    pub fn to_vec(&self) -> StateVec {
        [self.position[0], self.position[1], self.orientation, self.time_offset, self.phase_offset]
    }

    /// Replaces the estimated coordinates, keeping id, velocity and CFO.
    pub fn with_vec(&self, v: &StateVec) -> Self {
        Self {
            position: [v[POS_X], v[POS_Y]],
            orientation: wrap_angle(v[ORIENTATION]),
            time_offset: v[TIME_OFFSET],
            phase_offset: wrap_angle(v[PHASE_OFFSET]),
            ..*self
        }
    }
}

/// Prior on one state coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DimPrior {
    Fixed { value: f64 },
    Gaussian { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

impl DimPrior {
    fn validate(&self, wrapped: bool) -> Result<(), SyncError> {
        let ok = match *self {
            DimPrior::Fixed { value } => value.is_finite(),
            DimPrior::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && std > 0.0,
            DimPrior::Uniform { low, high } => {
                low.is_finite() && high.is_finite() && low < high && (!wrapped || (low >= -PI && high <= PI))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SyncError::Config(format!("invalid prior {self:?}")))
        }
    }

    fn log_density(&self, x: f64, wrapped: bool) -> f64 {
        match *self {
            DimPrior::Fixed { value } => {
                let d = if wrapped { wrap_angle(x - value) } else { x - value };
                if d == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            DimPrior::Gaussian { mean, std } => {
                let norm = -(std * (2.0 * PI).sqrt()).ln();
                if wrapped {
                    let d = wrap_angle(x - mean);
                    let terms: Vec<f64> =
                        (-3..=3).map(|k| -0.5 * ((d + 2.0 * PI * k as f64) / std).powi(2)).collect();
                    norm + log_sum_exp(&terms)
                } else {
                    norm - 0.5 * ((x - mean) / std).powi(2)
                }
            }
            DimPrior::Uniform { low, high } => {
                if x >= low && x <= high {
                    -(high - low).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, wrapped: bool) -> f64 {
        let v = match *self {
            DimPrior::Fixed { value } => value,
            DimPrior::Gaussian { mean, std } => mean + std * rng.sample::<f64, _>(StandardNormal),
            DimPrior::Uniform { low, high } => rng.random_range(low..=high),
        };
        if wrapped {
            wrap_angle(v)
        } else {
            v
        }
    }

    fn variance(&self) -> f64 {
        match *self {
            DimPrior::Fixed { .. } => 0.0,
            DimPrior::Gaussian { std, .. } => std * std,
            DimPrior::Uniform { low, high } => (high - low).powi(2) / 12.0,
        }
    }

    fn is_fixed(&self) -> bool {
        matches!(self, DimPrior::Fixed { .. })
    }
}

/// Independent per-coordinate prior on one aperture's state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AperturePrior {
    pub x: DimPrior,
    pub y: DimPrior,
    pub orientation: DimPrior,
    pub time_offset: DimPrior,
    pub phase_offset: DimPrior,
}

impl AperturePrior {
    /// Point mass at `state`; the prior of every anchor.
    pub fn point_mass(state: &ApertureState) -> Self {
        let v = state.to_vec();
        let f = |i: usize| DimPrior::Fixed { value: v[i] };
        Self { x: f(POS_X), y: f(POS_Y), orientation: f(ORIENTATION), time_offset: f(TIME_OFFSET), phase_offset: f(PHASE_OFFSET) }
    }

    pub fn dim(&self, i: usize) -> &DimPrior {
        match i {
            POS_X => &self.x,
            POS_Y => &self.y,
            ORIENTATION => &self.orientation,
            TIME_OFFSET => &self.time_offset,
            _ => &self.phase_offset,
        }
    }

    pub fn validate(&self) -> Result<(), SyncError> {
        (0..STATE_DIM).try_for_each(|i| self.dim(i).validate(WRAPPED[i]))
    }

    pub fn is_point_mass(&self) -> bool {
        (0..STATE_DIM).all(|i| self.dim(i).is_fixed())
    }

    /// Coordinates with a non-degenerate prior.
    pub fn active_dims(&self) -> Vec<usize> {
        (0..STATE_DIM).filter(|&i| !self.dim(i).is_fixed()).collect()
    }

    pub fn log_density(&self, x: &StateVec) -> f64 {
        (0..STATE_DIM).map(|i| self.dim(i).log_density(x[i], WRAPPED[i])).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVec {
        let mut v = [0.0; STATE_DIM];
        for (i, x) in v.iter_mut().enumerate() {
            *x = self.dim(i).sample(rng, WRAPPED[i]);
        }
        v
    }

    pub(crate) fn variance(&self, i: usize) -> f64 {
        self.dim(i).variance()
    }
}

/// Apertures, anchors and the set of measured ordered pairs `(tx, rx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    ids: Vec<usize>,
    anchors: BTreeSet<usize>,
    mask: Vec<(usize, usize)>,
}

impl NetworkTopology {
    pub fn new(ids: Vec<usize>, anchors: BTreeSet<usize>, mask: Vec<(usize, usize)>) -> Result<Self, SyncError> {
        let set: BTreeSet<usize> = ids.iter().copied().collect();
        if set.len() != ids.len() || ids.is_empty() {
            return Err(SyncError::Topology("aperture ids must be unique and nonempty".into()));
        }
        if let Some(a) = anchors.iter().find(|a| !set.contains(a)) {
            return Err(SyncError::Topology(format!("anchor {a} is not an aperture")));
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &mask {
            if a == b || !set.contains(&a) || !set.contains(&b) {
                return Err(SyncError::Topology(format!("pair ({a}, {b}) is not an ordered aperture pair")));
            }
            if !seen.insert((a, b)) {
                return Err(SyncError::Topology(format!("pair ({a}, {b}) listed twice")));
            }
        }
        let mut ids = ids;
        ids.sort_unstable();
        Ok(Self { ids, anchors, mask })
    }

    /// Apertures `1..=j`, every ordered pair measured.
    pub fn full_mesh(j: usize, anchors: BTreeSet<usize>) -> Result<Self, SyncError> {
        let ids: Vec<usize> = (1..=j).collect();
        let mask = ordered_pairs(&ids);
        Self::new(ids, anchors, mask)
    }

    /// One agent `center` measured from each anchor, one direction per pair.
    pub fn star(center: usize, anchors: &[usize]) -> Result<Self, SyncError> {
        let mut ids = vec![center];
        ids.extend_from_slice(anchors);
        let mask = anchors.iter().map(|&a| (a, center)).collect();
        Self::new(ids, anchors.iter().copied().collect(), mask)
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn anchors(&self) -> &BTreeSet<usize> {
        &self.anchors
    }

    pub fn agents(&self) -> Vec<usize> {
        self.ids.iter().copied().filter(|i| !self.anchors.contains(i)).collect()
    }

    pub fn is_anchor(&self, id: usize) -> bool {
        self.anchors.contains(&id)
    }

    /// All `J (J - 1)` ordered pairs.
    pub fn pair_set(&self) -> Vec<(usize, usize)> {
        ordered_pairs(&self.ids)
    }

    pub fn mask(&self) -> &[(usize, usize)] {
        &self.mask
    }
}

fn ordered_pairs(ids: &[usize]) -> Vec<(usize, usize)> {
    ids.iter().flat_map(|&a| ids.iter().filter(move |&&b| b != a).map(move |&b| (a, b))).collect()
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn rng_for(master: u64, index: u64, label: &str) -> rand_chacha::ChaCha20Rng {
    seed::rng(seed::derive(master, index, label))
}
