use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("cost weights sum to {sum}, expected 1")]
    Weight { sum: f64 },
    #[error("weighted cost fraction {s} reaches 1 in the FPE-like form")]
    Saturation { s: f64 },
    #[error("invalid cost input: {0}")]
    Invalid(String),
}

/// Resources an estimator consumed.
///
/// Operation counts follow one convention for every estimator: a complex
/// multiply-accumulate counts 1, a length-L FFT counts `ceil(L log2 L)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub flop_count: u64,
    pub time_samples: usize,
    pub spectral_bins: usize,
    /// Hz.
    pub occupied_bandwidth: f64,
    /// Knowledge the estimator needed up front, e.g. "target count P".
    pub apriori_inputs: Vec<String>,
}

/// Labels of [`CostLedger::cost_vector`], in order.
pub const COST_LABELS: [&str; 5] = ["flops", "time_samples", "spectral_bins", "bandwidth_hz", "apriori_inputs"];

impl CostLedger {
    pub fn add_flops(&mut self, n: u64) {
        self.flop_count += n;
    }

    /// `C_k` in the order of [`COST_LABELS`].
    pub fn cost_vector(&self) -> Vec<f64> {
        vec![
            self.flop_count as f64,
            self.time_samples as f64,
            self.spectral_bins as f64,
            self.occupied_bandwidth,
            self.apriori_inputs.len() as f64,
        ]
    }

    pub fn labelled(&self) -> Vec<(&'static str, f64)> {
        COST_LABELS.iter().copied().zip(self.cost_vector()).collect()
    }
}

/// How the weighted cost fraction enters the estimator metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostForm {
    /// `(1 + S) / (1 - S)`, diverging as the budget is used up.
    FpeLike,
    /// `1 + S`.
    Additive,
}

/// Cost weight from raw cost components.
///
/// `S = sum_k w_k C_k / c_max`; both forms share this normalized fraction, so
/// the additive form is `1 + S` rather than an unnormalized sum.
pub fn w_cost(costs: &[f64], weights: &[f64], c_max: f64, form: CostForm) -> Result<f64, CostError> {
    if costs.len() != weights.len() {
        return Err(CostError::Invalid(format!("{} costs but {} weights", costs.len(), weights.len())));
    }
    if !(c_max.is_finite() && c_max > 0.0) {
        return Err(CostError::Invalid(format!("C_max {c_max} must be positive and finite")));
    }
    if let Some(c) = costs.iter().find(|c| !c.is_finite() || **c < 0.0) {
        return Err(CostError::Invalid(format!("cost component {c} must be finite and >= 0")));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(CostError::Invalid("weights must be finite and >= 0".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(CostError::Weight { sum });
    }
    let s = costs.iter().zip(weights).map(|(c, w)| w * c).sum::<f64>() / c_max;
    match form {
        CostForm::FpeLike if s >= 1.0 => Err(CostError::Saturation { s }),
        CostForm::FpeLike => Ok((1.0 + s) / (1.0 - s)),
        CostForm::Additive => Ok(1.0 + s),
    }
}

/// [`w_cost`] applied to an estimator's ledger.
pub fn tally_cost(ledger: &CostLedger, weights: &[f64], c_max: f64, form: CostForm) -> Result<f64, CostError> {
    w_cost(&ledger.cost_vector(), weights, c_max, form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_cost_gives_unit_weight() {
        let w = [0.2; 5];
        let zero = CostLedger::default();
        assert_eq!(tally_cost(&zero, &w, 10.0, CostForm::FpeLike).unwrap(), 1.0);
        assert_eq!(tally_cost(&zero, &w, 10.0, CostForm::Additive).unwrap(), 1.0);
    }

    #[test]
    fn half_budget_triples_fpe_weight() {
        assert_eq!(w_cost(&[5.0], &[1.0], 10.0, CostForm::FpeLike).unwrap(), 3.0);
        assert_eq!(w_cost(&[5.0], &[1.0], 10.0, CostForm::Additive).unwrap(), 1.5);
    }

    #[test]
    fn weight_and_saturation_errors() {
        assert!(matches!(w_cost(&[1.0, 1.0], &[0.5, 0.6], 10.0, CostForm::Additive), Err(CostError::Weight { .. })));
        assert!(matches!(w_cost(&[10.0], &[1.0], 10.0, CostForm::FpeLike), Err(CostError::Saturation { .. })));
        // additive never saturates
        assert_eq!(w_cost(&[10.0], &[1.0], 10.0, CostForm::Additive).unwrap(), 2.0);
        assert!(w_cost(&[-1.0], &[1.0], 10.0, CostForm::Additive).is_err());
    }

    #[test]
    fn strictly_increasing_in_every_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let raw: Vec<f64> = (0..5).map(|_| rng.random::<f64>() + 0.01).collect();
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let c: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 10.0).collect();
            let c_max = 100.0;
            for form in [CostForm::FpeLike, CostForm::Additive] {
                let base = w_cost(&c, &w, c_max, form).unwrap();
                assert!(base >= 1.0);
                for k in 0..5 {
                    let mut up = c.clone();
                    up[k] += 1e-3;
                    assert!(w_cost(&up, &w, c_max, form).unwrap() > base);
                }
            }
        }
    }
}
