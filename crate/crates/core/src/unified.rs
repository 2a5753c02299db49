//! Weighted signal and estimator scores for joint sensing and communication.

use crate::estimators::{tally_cost, CostError, CostForm, CostLedger};
use crate::metrics::{
    ber_theoretical_bpsk, channel_capacity, conditional_mi, conditional_mi_flat, mutual_information, CommReport,
    JointPMF, MetricError,
};
use crate::scene::{NoiseModel, SensingPrior};
use crate::waveform::{Waveform, WaveformError};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UnifiedError {
    #[error("weight lambda = {0} outside its allowed range")]
    Lambda(f64),
    #[error("normalization reference for the {0} term is zero")]
    Normalization(&'static str),
    #[error("compared vectors differ in length: {0} vs {1}")]
    Length(usize, usize),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

/// How the sensing and communication information terms are brought to a
/// common scale before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalizationPolicy {
    /// Sensing MI of the flat spectrum with the same energy, and channel capacity.
    MaxAttainable,
    /// User-supplied reference constants (nats).
    Fixed { sensing: f64, comm: f64 },
    /// No scaling.
    Unit,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        NormalizationPolicy::MaxAttainable
    }
}

/// Reference constants actually used for one score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub policy: NormalizationPolicy,
    pub sensing_ref: f64,
    pub comm_ref: f64,
}

/// Discrete communication scenario: input distribution and row-stochastic
/// channel `W(y | x)`, from which the input/output PMF follows.
#[derive(Debug, Clone, PartialEq)]
pub struct CommScenario {
    pub input_pmf: Vec<f64>,
    pub channel: DMatrix<f64>,
}

impl CommScenario {
    pub fn new(input_pmf: Vec<f64>, channel: DMatrix<f64>) -> Result<Self, UnifiedError> {
        JointPMF::from_channel(&input_pmf, &channel)?;
        Ok(Self { input_pmf, channel })
    }

    /// Equiprobable bits over the hard-decision BPSK link that `u` sees in
    /// white noise: a binary symmetric channel with crossover
    /// `Q(sqrt(2 Eb/N0))`, with `Eb` from the waveform's data bits.
    pub fn bpsk_hard_decision(u: &Waveform, noise: &NoiseModel) -> Result<Self, UnifiedError> {
        let eb = u
            .energy_per_bit()
            .ok_or_else(|| UnifiedError::Invalid("waveform carries no data bits".into()))?;
        if !noise.is_white() {
            return Err(UnifiedError::Invalid("hard-decision link needs white noise".into()));
        }
        let n0 = noise.psd()[0];
        let p = if n0 > 0.0 { ber_theoretical_bpsk(eb / n0) } else { 0.0 };
        let w = DMatrix::from_row_slice(2, 2, &[1.0 - p, p, p, 1.0 - p]);
        Self::new(vec![0.5, 0.5], w)
    }

    pub fn joint(&self) -> Result<JointPMF, UnifiedError> {
        Ok(JointPMF::from_channel(&self.input_pmf, &self.channel)?)
    }
}

/// Optional extra penalty on the signal score, for example for the return
/// due to clutter. No formula is prescribed; the user supplies one.
pub trait ClutterTerm: Send + Sync {
    /// Penalty in the same normalized units as the two information terms.
    fn penalty(&self, u: &Waveform) -> Result<f64, UnifiedError>;
}

#[derive(Clone)]
pub struct ClutterHook {
    pub weight: f64,
    pub term: Arc<dyn ClutterTerm>,
}

impl fmt::Debug for ClutterHook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClutterHook").field("weight", &self.weight).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SignalMetricConfig {
    pub policy: NormalizationPolicy,
    /// Observation time; the waveform duration when `None`.
    pub duration: Option<f64>,
    /// Disabled by default.
    pub clutter: Option<ClutterHook>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalScore {
    /// Raw conditional sensing MI, nats.
    pub sensing_mi: f64,
    /// Raw input/output MI of the communication scenario, nats.
    pub comm_mi: f64,
    /// `sensing_mi / sensing_ref`.
    pub sensing_term: f64,
    /// `comm_mi / comm_ref`.
    pub comm_term: f64,
    pub lambda: f64,
    /// Weighted clutter penalty subtracted from the value (0 when disabled).
    pub clutter_penalty: f64,
    pub value: f64,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiKind {
    /// True against estimated parameters.
    Parameters,
    /// Measured against model-predicted data.
    Data,
}

/// Cost weighting inputs: weights over the cost vector, `C_max` and form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub weights: Vec<f64>,
    pub c_max: f64,
    pub form: CostForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorScore {
    /// Mean squared difference between the compared entities.
    pub sensing_error: f64,
    /// Bit error ratio.
    pub comm_error: f64,
    pub lambda: f64,
    pub wcost: f64,
    pub value: f64,
    pub phi_kind: PhiKind,
    /// Number of compared entries.
    pub k: usize,
}

impl EstimatorScore {
    /// `wcost * (lambda * sensing + (1 - lambda) * comm)` from the stored fields.
    pub fn recompute(&self) -> f64 {
        compose(self.wcost, self.lambda, self.sensing_error, self.comm_error)
    }
}

fn compose(scale: f64, lambda: f64, s: f64, c: f64) -> f64 {
    scale * (lambda * s + (1.0 - lambda) * c)
}

/// Scores that are affine in the weight `lambda` for fixed constituent terms.
pub trait LambdaWeighted {
    fn at_lambda(&self, lambda: f64) -> f64;
}

impl LambdaWeighted for SignalScore {
    fn at_lambda(&self, lambda: f64) -> f64 {
        compose(1.0, lambda, self.sensing_term, self.comm_term) - self.clutter_penalty
    }
}

impl LambdaWeighted for EstimatorScore {
    fn at_lambda(&self, lambda: f64) -> f64 {
        compose(self.wcost, lambda, self.sensing_error, self.comm_error)
    }
}

fn check_open(lambda: f64) -> Result<(), UnifiedError> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(UnifiedError::Lambda(lambda))
    }
}

/// `J(u) = lambda * I_s / I_s,ref + (1 - lambda) * I_c / I_c,ref`, minus the
/// clutter penalty when a hook is configured.
pub fn signal_metric(
    u: &Waveform,
    prior: &SensingPrior,
    noise: &NoiseModel,
    comm: &CommScenario,
    lambda: f64,
    config: &SignalMetricConfig,
) -> Result<SignalScore, UnifiedError> {
    check_open(lambda)?;
    let duration = config.duration.unwrap_or_else(|| u.duration());
    let sensing_mi = conditional_mi(u, prior, noise, duration)?;
    let comm_mi = mutual_information(&comm.joint()?);
    let (sensing_ref, comm_ref) = match config.policy {
        NormalizationPolicy::MaxAttainable => (
            conditional_mi_flat(u, prior, noise, duration)?,
            channel_capacity(&comm.channel, 1e-9)?.capacity,
        ),
        NormalizationPolicy::Fixed { sensing, comm } => (sensing, comm),
        NormalizationPolicy::Unit => (1.0, 1.0),
    };
    if !(sensing_ref.is_finite() && sensing_ref != 0.0) {
        return Err(UnifiedError::Normalization("sensing"));
    }
    if !(comm_ref.is_finite() && comm_ref != 0.0) {
        return Err(UnifiedError::Normalization("communication"));
    }
    let sensing_term = sensing_mi / sensing_ref;
    let comm_term = comm_mi / comm_ref;
    let clutter_penalty = match &config.clutter {
        Some(h) => h.weight * h.term.penalty(u)?,
        None => 0.0,
    };
    let value = lambda * sensing_term + (1.0 - lambda) * comm_term - clutter_penalty;
    Ok(SignalScore {
        sensing_mi,
        comm_mi,
        sensing_term,
        comm_term,
        lambda,
        clutter_penalty,
        value,
        normalization: Normalization { policy: config.policy, sensing_ref, comm_ref },
    })
}

/// `J = w_cost * (lambda * (1/K) sum (phi - phi_hat)^2 + (1 - lambda) * BER)`.
pub fn estimator_metric(
    phi: &[f64],
    phi_hat: &[f64],
    phi_kind: PhiKind,
    comm: &CommReport,
    lambda: f64,
    cost: &CostLedger,
    spec: &CostSpec,
) -> Result<EstimatorScore, UnifiedError> {
    if phi.len() != phi_hat.len() {
        return Err(UnifiedError::Length(phi.len(), phi_hat.len()));
    }
    if phi.is_empty() {
        return Err(UnifiedError::Invalid("need at least one compared entry".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(UnifiedError::Lambda(lambda));
    }
    let k = phi.len();
    let sensing_error = phi.iter().zip(phi_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / k as f64;
    let comm_error = comm.ber;
    let wcost = tally_cost(cost, &spec.weights, spec.c_max, spec.form)?;
    let value = compose(wcost, lambda, sensing_error, comm_error);
    Ok(EstimatorScore { sensing_error, comm_error, lambda, wcost, value, phi_kind, k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub value: f64,
}

/// One row per grid weight, holding the constituent terms of `score` fixed.
pub fn sweep_lambda<S: LambdaWeighted>(score: &S, grid: &[f64]) -> Result<Vec<LambdaRow>, UnifiedError> {
    grid.iter()
        .map(|&lambda| {
            check_open(lambda)?;
            Ok(LambdaRow { lambda, value: score.at_lambda(lambda) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{w_cost, COST_LABELS};
    use crate::waveform::generate_psk_frame;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn psk() -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bits: Vec<u8> = (0..128).map(|_| rng.random_range(0..2)).collect();
        generate_psk_frame(&bits, 1, 1e4, 2).unwrap()
    }

    fn setup() -> (Waveform, SensingPrior, NoiseModel, CommScenario) {
        let u = psk();
        let noise = NoiseModel::white(2e-5, 0).unwrap();
        let comm = CommScenario::bpsk_hard_decision(&u, &noise).unwrap();
        (u, SensingPrior::flat(1.0).unwrap(), noise, comm)
    }

    fn ledger(c: [f64; 5]) -> CostLedger {
        CostLedger {
            flop_count: c[0] as u64,
            time_samples: c[1] as usize,
            spectral_bins: c[2] as usize,
            occupied_bandwidth: c[3],
            apriori_inputs: (0..c[4] as usize).map(|i| format!("input {i}")).collect(),
        }
    }

    #[test]
    fn lambda_limits_recover_each_term() {
        let (u, prior, noise, comm) = setup();
        let cfg = SignalMetricConfig::default();
        let hi = signal_metric(&u, &prior, &noise, &comm, 0.999, &cfg).unwrap();
        assert!((hi.value - hi.sensing_term).abs() <= 1e-3 * hi.sensing_term);
        let lo = signal_metric(&u, &prior, &noise, &comm, 0.001, &cfg).unwrap();
        assert!((lo.value - lo.comm_term).abs() <= 1e-3 * lo.comm_term);
        assert!(signal_metric(&u, &prior, &noise, &comm, 1.0, &cfg).is_err());
        assert!(signal_metric(&u, &prior, &noise, &comm, 0.0, &cfg).is_err());
    }

    #[test]
    fn value_is_the_weighted_sum() {
        let (u, prior, noise, comm) = setup();
        let s = signal_metric(&u, &prior, &noise, &comm, 0.3, &SignalMetricConfig::default()).unwrap();
        assert_eq!(s.value, 0.3 * s.sensing_term + (1.0 - 0.3) * s.comm_term);
        assert_eq!(s.normalization.policy, NormalizationPolicy::MaxAttainable);
        assert!(s.sensing_term > 0.0 && s.sensing_term <= 1.0 + 1e-12);
        assert!((s.comm_term - 1.0).abs() < 1e-6, "symmetric channel at capacity");
    }

    #[test]
    fn doubling_prior_variance_increases_score() {
        let (u, prior, noise, comm) = setup();
        let cfg = SignalMetricConfig { policy: NormalizationPolicy::Unit, ..Default::default() };
        let a = signal_metric(&u, &prior, &noise, &comm, 0.5, &cfg).unwrap();
        let b = signal_metric(&u, &prior.scaled(2.0).unwrap(), &noise, &comm, 0.5, &cfg).unwrap();
        assert_eq!(a.comm_term, b.comm_term);
        assert!(b.value > a.value);
    }

    #[test]
    fn common_reference_scaling_is_proportional() {
        let (u, prior, noise, comm) = setup();
        let at = |c: f64| {
            let cfg = SignalMetricConfig {
                policy: NormalizationPolicy::Fixed { sensing: 2.0 * c, comm: 0.5 * c },
                ..Default::default()
            };
            signal_metric(&u, &prior, &noise, &comm, 0.5, &cfg).unwrap().value
        };
        let base = at(1.0);
        for c in [0.25, 3.0, 17.0] {
            assert!((at(c) * c - base).abs() <= 1e-14 * base.abs());
        }
        let zero = SignalMetricConfig { policy: NormalizationPolicy::Fixed { sensing: 0.0, comm: 1.0 }, ..Default::default() };
        assert!(matches!(
            signal_metric(&u, &prior, &noise, &comm, 0.5, &zero),
            Err(UnifiedError::Normalization("sensing"))
        ));
    }

    #[test]
    fn clutter_hook_subtracts_weighted_penalty() {
        struct Constant;
        impl ClutterTerm for Constant {
            fn penalty(&self, _: &Waveform) -> Result<f64, UnifiedError> {
                Ok(0.2)
            }
        }
        let (u, prior, noise, comm) = setup();
        let plain = signal_metric(&u, &prior, &noise, &comm, 0.5, &SignalMetricConfig::default()).unwrap();
        let cfg = SignalMetricConfig { clutter: Some(ClutterHook { weight: 0.5, term: Arc::new(Constant) }), ..Default::default() };
        let with = signal_metric(&u, &prior, &noise, &comm, 0.5, &cfg).unwrap();
        assert!((plain.value - with.value - 0.1).abs() < 1e-15);
        assert_eq!(with.at_lambda(0.5), with.value);
    }

    #[test]
    fn estimator_metric_examples() {
        let comm0 = CommReport::from_bits(&[0, 1], &[0, 1], 1, 10.0).unwrap();
        let spec = CostSpec { weights: vec![0.2; 5], c_max: 1e6, form: CostForm::FpeLike };
        let heavy = ledger([1e5, 1e3, 64.0, 1e5, 2.0]);
        let s = estimator_metric(&[1.0, 2.0], &[1.0, 2.0], PhiKind::Parameters, &comm0, 0.5, &heavy, &spec).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.wcost > 1.0);

        let zero = CostSpec { weights: vec![1.0, 0.0, 0.0, 0.0, 0.0], c_max: 1.0, form: CostForm::FpeLike };
        let s = estimator_metric(&[0.0, 0.0], &[1.0, 3.0], PhiKind::Data, &comm0, 1.0, &ledger([0.0; 5]), &zero).unwrap();
        assert_eq!(s.value, 5.0);
        assert_eq!(s.phi_kind, PhiKind::Data);

        // weights on flops only, flops = C_max / 2
        let half = CostSpec { weights: vec![1.0, 0.0, 0.0, 0.0, 0.0], c_max: 200.0, form: CostForm::FpeLike };
        let s = estimator_metric(&[0.0], &[1.0], PhiKind::Parameters, &comm0, 1.0, &ledger([100.0, 7.0, 3.0, 1.0, 1.0]), &half).unwrap();
        assert_eq!(s.wcost, 3.0);
        assert_eq!(s.value, 3.0);
        assert_eq!(s.recompute(), s.value);

        assert!(matches!(
            estimator_metric(&[0.0], &[1.0, 2.0], PhiKind::Parameters, &comm0, 1.0, &ledger([0.0; 5]), &half),
            Err(UnifiedError::Length(1, 2))
        ));
    }

    #[test]
    fn sweep_is_affine_in_lambda() {
        let (u, prior, noise, comm) = setup();
        let s = signal_metric(&u, &prior, &noise, &comm, 0.5, &SignalMetricConfig::default()).unwrap();
        let grid: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        let rows = sweep_lambda(&s, &grid).unwrap();
        let (a, b) = (rows[0], rows[rows.len() - 1]);
        let slope = (b.value - a.value) / (b.lambda - a.lambda);
        for r in &rows {
            assert!((a.value + slope * (r.lambda - a.lambda) - r.value).abs() < 1e-12);
        }
        assert_eq!(sweep_lambda(&s, &[0.4]).unwrap().len(), 1);
        let hi = signal_metric(&u, &prior, &noise, &comm, 0.95, &SignalMetricConfig::default()).unwrap();
        assert!((rows[18].value - hi.value).abs() < 1e-15);
        assert!(sweep_lambda(&s, &[0.0]).is_err());
    }

    #[test]
    fn cost_labels_cover_the_ledger() {
        assert_eq!(COST_LABELS.len(), ledger([0.0; 5]).cost_vector().len());
        assert_eq!(w_cost(&[0.0; 5], &[0.2; 5], 1.0, CostForm::FpeLike).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn dominance_orders_scores(
            seed in any::<u64>(),
            lambda in 0.01f64..0.99,
            fpe in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let form = if fpe { CostForm::FpeLike } else { CostForm::Additive };
            let mut w: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            let spec = CostSpec { weights: w, c_max: 1e7, form };
            let cb: [f64; 5] = [
                rng.random_range(1.0..1e6), rng.random_range(1.0..1e4), rng.random_range(1.0..1e3),
                rng.random_range(1.0..1e6), rng.random_range(1.0..5.0),
            ];
            let mut ca = cb;
            let strict = rng.random_range(0..5);
            for (i, c) in ca.iter_mut().enumerate() {
                *c = if i == strict { (*c - 1.0).floor().max(0.0) } else { (*c * rng.random::<f64>()).floor() };
            }
            let truth = [1.0, -2.0, 0.5];
            let err_b = rng.random_range(0.1..1.0);
            let err_a = err_b * rng.random::<f64>();
            let est = |e: f64| truth.iter().map(|t| t + e).collect::<Vec<_>>();
            let tx: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
            let flip = |n: usize| tx.iter().enumerate().map(|(i, b)| if i < n { 1 - b } else { *b }).collect::<Vec<_>>();
            let nb = rng.random_range(1..50);
            let na = rng.random_range(0..=nb);
            let rep_b = CommReport::from_bits(&tx, &flip(nb), 1, 0.0).unwrap();
            let rep_a = CommReport::from_bits(&tx, &flip(na), 1, 0.0).unwrap();
            let a = estimator_metric(&truth, &est(err_a), PhiKind::Parameters, &rep_a, lambda, &ledger(ca), &spec).unwrap();
            let b = estimator_metric(&truth, &est(err_b), PhiKind::Parameters, &rep_b, lambda, &ledger(cb), &spec).unwrap();
            prop_assert!(a.value < b.value, "{} vs {}", a.value, b.value);
        }
    }
}
