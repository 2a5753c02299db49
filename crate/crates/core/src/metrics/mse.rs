use super::MetricError;
use crate::scene::Target;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Meaning of one coordinate of a [`ParameterVector`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    AmplitudeRe(usize),
    AmplitudeIm(usize),
    /// Seconds.
    Delay(usize),
    /// Hz.
    Doppler(usize),
    Other(String),
}

/// Flat real parameter vector with a per-coordinate layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    values: Vec<f64>,
    layout: Vec<ParamKind>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, layout: Vec<ParamKind>) -> Result<Self, MetricError> {
        if values.len() != layout.len() {
            return Err(MetricError::LayoutMismatch(format!(
                "{} values but {} layout entries",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { values, layout })
    }

    /// Unlabelled coordinates.
    pub fn plain(values: Vec<f64>) -> Self {
        let layout = (0..values.len()).map(|i| ParamKind::Other(format!("theta{i}"))).collect();
        Self { values, layout }
    }

    /// `(Re h, Im h, tau, nu)` per target, in target order.
    pub fn from_targets(targets: &[Target]) -> Self {
        let mut values = Vec::with_capacity(4 * targets.len());
        let mut layout = Vec::with_capacity(4 * targets.len());
        for (p, t) in targets.iter().enumerate() {
            values.extend([t.amplitude.re, t.amplitude.im, t.delay, t.doppler]);
            layout.extend([ParamKind::AmplitudeRe(p), ParamKind::AmplitudeIm(p), ParamKind::Delay(p), ParamKind::Doppler(p)]);
        }
        Self { values, layout }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout(&self) -> &[ParamKind] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    pub matrix: DMatrix<f64>,
    pub trace: f64,
}

/// Sample error covariance `(1/N) sum_k (theta - theta_k)(theta - theta_k)^T`.
pub fn mse_sample(truth: &ParameterVector, estimates: &[ParameterVector]) -> Result<MseReport, MetricError> {
    if estimates.is_empty() {
        return Err(MetricError::Invalid("no estimates".into()));
    }
    let d = truth.len();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for e in estimates {
        if e.layout != truth.layout {
            return Err(MetricError::LayoutMismatch("estimate layout differs from truth".into()));
        }
        let err = DVector::from_iterator(d, truth.values.iter().zip(&e.values).map(|(a, b)| a - b));
        m.ger(1.0, &err, &err, 1.0);
    }
    m /= estimates.len() as f64;
    let trace = m.trace();
    Ok(MseReport { matrix: m, trace })
}
