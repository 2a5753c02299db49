//! Classical sensing, communication and system-identification metrics.

mod ambiguity;
mod comm;
mod crlb;
mod info;
mod mse;
mod sysid;

pub use ambiguity::{ambiguity, zero_doppler_width, AmbiguityGrid, AmbiguityMap};
pub use comm::{ber_theoretical_bpsk, q_function, CommReport};
pub use crlb::{crlb_numeric, CrlbConfig, CrlbResult, GaussianMeanModel, LikelihoodModel, Rescaled, SingleTargetDelayModel};
pub use info::{
    binary_entropy, blahut_arimoto, channel_capacity, conditional_mi, conditional_mi_flat, mutual_information, nats_to_bits, CapacityResult,
    JointPMF,
};
pub use mse::{mse_sample, MseReport, ParamKind, ParameterVector};
pub use sysid::{cost_criterion, fpe, r_squared, Loss};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("parameter layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("Fisher information is singular (condition number {cond:e})")]
    SingularFisher { cond: f64 },
    #[error("invalid PMF: {0}")]
    InvalidPmf(String),
    #[error("channel rows must be probability vectors: {0}")]
    NonStochasticChannel(String),
    #[error("noise PSD is zero at {frequency} Hz where the signal has energy")]
    Division { frequency: f64 },
    #[error("ambiguity grid: {0}")]
    Grid(String),
    #[error("reference data is constant")]
    DegenerateData,
    #[error("model dimension {dim} must be below the sample count {n}")]
    Dimension { dim: usize, n: usize },
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("invalid metric input: {0}")]
    Invalid(String),
}

/// One named metric value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: String,
    pub value: f64,
    pub units: String,
}

/// Metric values computed for one (waveform, estimator, scene) run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub values: Vec<MetricValue>,
}

impl MetricReport {
    pub fn push(&mut self, name: impl Into<String>, value: f64, units: impl Into<String>) {
        self.values.push(MetricValue { name: name.into(), value, units: units.into() });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|v| v.name == name).map(|v| v.value)
    }
}
