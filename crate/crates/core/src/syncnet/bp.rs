use super::graph::{state_diff, FactorGraph};
use super::{log_sum_exp, rng_for, wrap_angle, ApertureState, StateVec, SyncError, STATE_DIM, WRAPPED};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

/// Kernel bandwidth rule for the MAP density estimate, per coordinate
/// `h_d = sigma_d * factor(d, n_eff)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `(4 / ((d + 2) n))^(1 / (d + 4))`.
    #[default]
    Silverman,
    /// `n^(-1 / (d + 4))`.
    Scott,
}

impl BandwidthRule {
    fn factor(self, d: usize, n_eff: f64) -> f64 {
        let d = d as f64;
        match self {
            BandwidthRule::Silverman => (4.0 / ((d + 2.0) * n_eff)).powf(1.0 / (d + 4.0)),
            BandwidthRule::Scott => n_eff.powf(-1.0 / (d + 4.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BpConfig {
    pub particle_count: usize,
    pub max_iterations: usize,
    /// Largest total-variation change of any message for convergence.
    pub message_tol: f64,
    /// Particles are redrawn when the effective sample size falls below
    /// this fraction of the particle count.
    pub resample_threshold: f64,
    /// Weight of the previous message in the log-domain damping.
    pub damping: f64,
    pub kernel_bandwidth: BandwidthRule,
    pub seed: u64,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            particle_count: 1000,
            max_iterations: 50,
            message_tol: 1e-3,
            resample_threshold: 0.5,
            damping: 0.5,
            kernel_bandwidth: BandwidthRule::Silverman,
            seed: 0,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<(), SyncError> {
        if self.particle_count < 100 {
            return Err(SyncError::Config(format!("particle count {} below 100", self.particle_count)));
        }
        if self.max_iterations == 0 {
            return Err(SyncError::Config("need at least one iteration".into()));
        }
        if !(self.message_tol > 0.0) {
            return Err(SyncError::Config("message tolerance must be positive".into()));
        }
        if !(self.resample_threshold > 0.0 && self.resample_threshold <= 1.0) {
            return Err(SyncError::Config("resample threshold must be in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(SyncError::Config("damping must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Weighted particle approximation of one aperture's marginal posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub id: usize,
    pub particles: Vec<StateVec>,
    pub weights: Vec<f64>,
    /// Coordinates that vary across particles.
    pub active: Vec<usize>,
    pub iteration: usize,
    pub ess: f64,
}

impl Belief {
    pub fn weight_sum_error(&self) -> f64 {
        (self.weights.iter().sum::<f64>() - 1.0).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub max_message_change: f64,
    pub min_ess: f64,
    pub resampled: usize,
    pub max_weight_sum_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    pub beliefs: BTreeMap<usize, Belief>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationStats>,
}

impl BpResult {
    pub fn mmse(&self) -> Result<BTreeMap<usize, ApertureState>, SyncError> {
        self.beliefs.iter().map(|(id, b)| Ok((*id, estimate_mmse(b)?))).collect()
    }
}

const INFLATION: f64 = 1.5;
const SHRINK_FLOOR: f64 = 0.25;
const WINDINGS: i32 = 2;
/// Minimum effective sample size, as a fraction of the particle count, of
/// the tempered weights the proposal is fitted to.
const PROPOSAL_ESS: f64 = 0.05;

/// Weights `exp(beta * lb)`, normalized, with the largest `beta` in (0, 1]
/// whose effective sample size reaches `min_ess`.
fn tempered_weights(lb: &[f64], min_ess: f64) -> Vec<f64> {
    let at = |beta: f64| {
        let t: Vec<f64> = lb.iter().map(|v| beta * v).collect();
        let z = log_sum_exp(&t);
        let w: Vec<f64> = t.iter().map(|v| (v - z).exp()).collect();
        let ess = 1.0 / w.iter().map(|x| x * x).sum::<f64>();
        (w, ess)
    };
    let (w, ess) = at(1.0);
    if ess >= min_ess {
        return w;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if at(mid).1 >= min_ess {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo).0
}

/// Gaussian proposal over the active coordinates, wrapped on the circle for
/// angular ones.
struct Proposal {
    mean: StateVec,
    active: Vec<usize>,
    chol: DMatrix<f64>,
    log_norm: f64,
    var: Vec<f64>,
}

impl Proposal {
    fn fit(particles: &[StateVec], weights: &[f64], active: &[usize], prev_var: &[f64]) -> Proposal {
        let mean = weighted_mean(particles, weights, active);
        let n = active.len();
        let mut cov = DMatrix::<f64>::zeros(n, n);
        for (x, w) in particles.iter().zip(weights) {
            if *w == 0.0 {
                continue;
            }
            let d = state_diff(x, &mean);
            let v = DVector::from_iterator(n, active.iter().map(|&k| d[k]));
            cov.ger(*w, &v, &v, 1.0);
        }
        cov *= INFLATION;
        for (a, &k) in active.iter().enumerate() {
            let floor = SHRINK_FLOOR * prev_var[a];
            if cov[(a, a)] < floor {
                cov[(a, a)] = floor;
            }
            if WRAPPED[k] && cov[(a, a)] > PI * PI {
                let s = PI / cov[(a, a)].sqrt();
                for b in 0..n {
                    if b != a {
                        cov[(a, b)] *= s;
                        cov[(b, a)] *= s;
                    }
                }
                cov[(a, a)] = PI * PI;
            }
        }
        let var: Vec<f64> = (0..n).map(|a| cov[(a, a)]).collect();
        let chol = match cov.clone().cholesky() {
            Some(c) => c.l(),
            None => DMatrix::from_diagonal(&DVector::from_iterator(n, var.iter().map(|v| v.sqrt()))),
        };
        let log_det: f64 = 2.0 * (0..n).map(|a| chol[(a, a)].ln()).sum::<f64>();
        let log_norm = -0.5 * (n as f64 * (2.0 * PI).ln() + log_det);
        Proposal { mean, active: active.to_vec(), chol, log_norm, var }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVec {
        let n = self.active.len();
        let e = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let d = &self.chol * e;
        let mut x = self.mean;
        for (a, &k) in self.active.iter().enumerate() {
            x[k] += d[a];
            if WRAPPED[k] {
                x[k] = wrap_angle(x[k]);
            }
        }
        x
    }

    fn log_density(&self, x: &StateVec) -> f64 {
        let d = state_diff(x, &self.mean);
        let n = self.active.len();
        let base: Vec<f64> = self.active.iter().map(|&k| d[k]).collect();
        let wrapped: Vec<usize> = (0..n).filter(|&a| WRAPPED[self.active[a]]).collect();
        let span = (2 * WINDINGS + 1) as usize;
        let combos = span.pow(wrapped.len() as u32);
        let mut terms = Vec::with_capacity(combos);
        for c in 0..combos {
            let mut v = DVector::from_column_slice(&base);
            let mut rest = c;
            for &a in &wrapped {
                let k = (rest % span) as i32 - WINDINGS;
                rest /= span;
                v[a] += 2.0 * PI * k as f64;
            }
            let z = self.chol.solve_lower_triangular(&v).unwrap_or(v);
            terms.push(self.log_norm - 0.5 * z.norm_squared());
        }
        log_sum_exp(&terms)
    }
}

fn weighted_mean(particles: &[StateVec], weights: &[f64], active: &[usize]) -> StateVec {
    let mut mean = particles[0];
    for &k in active {
        if WRAPPED[k] {
            let (s, c) = particles
                .iter()
                .zip(weights)
                .fold((0.0, 0.0), |(s, c), (x, w)| (s + w * x[k].sin(), c + w * x[k].cos()));
            mean[k] = s.atan2(c);
        } else {
            mean[k] = particles.iter().zip(weights).map(|(x, w)| w * x[k]).sum();
        }
    }
    mean
}

/// Particle set and its normalized log weights, as seen by one factor.
struct Source {
    particles: Arc<Vec<StateVec>>,
    log_w: Vec<f64>,
    /// Kernel standard deviation per coordinate; zero for anchors.
    blur: StateVec,
}

struct Message {
    log_m: Vec<f64>,
    source: Arc<Source>,
}

struct VarState {
    particles: Arc<Vec<StateVec>>,
    log_q: Vec<f64>,
    log_prior: Vec<f64>,
    var: Vec<f64>,
    log_belief: Vec<f64>,
    weights: Vec<f64>,
    ess: f64,
    active: Vec<usize>,
}

impl VarState {
    fn fixed(x: StateVec) -> Self {
        VarState {
            particles: Arc::new(vec![x]),
            log_q: vec![0.0],
            log_prior: vec![0.0],
            var: vec![],
            log_belief: vec![0.0],
            weights: vec![1.0],
            ess: 1.0,
            active: vec![],
        }
    }

    fn set_belief(&mut self, lb: Vec<f64>) -> bool {
        let z = log_sum_exp(&lb);
        if !z.is_finite() {
            return false;
        }
        self.log_belief = lb.iter().map(|v| v - z).collect();
        self.weights = self.log_belief.iter().map(|v| v.exp()).collect();
        let s: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= s);
        self.ess = 1.0 / self.weights.iter().map(|w| w * w).sum::<f64>();
        true
    }
}

/// `ln sum_l w_l f(z | ...)` at each target particle; `target_is_rx`
/// selects which end of the factor the targets sit on.
fn evaluate(graph: &FactorGraph, factor: usize, target_is_rx: bool, src: &Source, targets: &[StateVec]) -> Vec<f64> {
    let m = &graph.pairs[factor].measurement;
    let live: Vec<usize> = (0..src.log_w.len()).filter(|&l| src.log_w[l].is_finite()).collect();
    let mut buf = vec![0.0; live.len()];
    let sharp = [0.0; STATE_DIM];
    let exact = src.blur == sharp;
    let kernel = |tx: &StateVec, rx: &StateVec, btx: &StateVec, brx: &StateVec| {
        if exact {
            graph.model.log_kernel(m, tx, rx)
        } else {
            graph.model.log_kernel_blurred(m, tx, rx, btx, brx)
        }
    };
    targets
        .iter()
        .map(|x| {
            for (b, &l) in buf.iter_mut().zip(&live) {
                let y = &src.particles[l];
                let ll = if target_is_rx { kernel(y, x, &src.blur, &sharp) } else { kernel(x, y, &sharp, &src.blur) };
                *b = src.log_w[l] + ll;
            }
            log_sum_exp(&buf)
        })
        .collect()
}

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let (za, zb) = (log_sum_exp(a), log_sum_exp(b));
    if !(za.is_finite() && zb.is_finite()) {
        return 1.0;
    }
    0.5 * a.iter().zip(b).map(|(x, y)| ((x - za).exp() - (y - zb).exp()).abs()).sum::<f64>()
}

/// Particle loopy belief propagation with a flooding schedule.
///
/// Each iteration first redraws the particles of every agent whose
/// effective sample size fell below the threshold, from a Gaussian fitted
/// to its belief; then recomputes every factor-to-variable message from
/// the previous iteration's extrinsic particle sets, damps it in the log
/// domain against the previous message, and forms the beliefs as
/// `prior / proposal * prod messages` at the particles. Anchors are fixed
/// points throughout.
pub fn run_loopy_bp(graph: &FactorGraph, config: &BpConfig) -> Result<BpResult, SyncError> {
    config.validate()?;
    let nv = graph.ids.len();
    let np = config.particle_count;
    let mut vars: Vec<VarState> = Vec::with_capacity(nv);
    for i in 0..nv {
        let prior = &graph.priors[i];
        if graph.anchor[i] {
            let mut rng = rng_for(config.seed, i as u64, "bp-init");
            vars.push(VarState::fixed(prior.sample(&mut rng)));
            continue;
        }
        let mut rng = rng_for(config.seed, i as u64, "bp-init");
        let particles: Vec<StateVec> = (0..np).map(|_| prior.sample(&mut rng)).collect();
        let log_prior: Vec<f64> = particles.iter().map(|x| prior.log_density(x)).collect();
        let active = prior.active_dims();
        let var = active.iter().map(|&k| prior.variance(k)).collect();
        let mut v = VarState {
            particles: Arc::new(particles),
            log_q: log_prior.clone(),
            log_prior,
            var,
            log_belief: vec![],
            weights: vec![],
            ess: 0.0,
            active,
        };
        v.set_belief(vec![0.0; np]);
        vars.push(v);
    }

    // message to the tx end is slot 0, to the rx end slot 1
    let mut msgs: Vec<[Option<Message>; 2]> = (0..graph.pairs.len()).map(|_| [None, None]).collect();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=config.max_iterations {
        iterations = t;
        // extrinsic sources from the previous iteration
        let mut sources: Vec<[Option<Arc<Source>>; 2]> = Vec::with_capacity(graph.pairs.len());
        for (f, pf) in graph.pairs.iter().enumerate() {
            let mut pair: [Option<Arc<Source>>; 2] = [None, None];
            for (slot, (target, other, other_slot)) in [(pf.tx, pf.rx, 1usize), (pf.rx, pf.tx, 0usize)].into_iter().enumerate() {
                if graph.anchor[target] {
                    continue;
                }
                let k = &vars[other];
                let mut log_w: Vec<f64> = match &msgs[f][other_slot] {
                    Some(m) => k.log_belief.iter().zip(&m.log_m).map(|(b, lm)| b - lm).collect(),
                    None => k.log_belief.clone(),
                };
                let z = log_sum_exp(&log_w);
                if z.is_finite() {
                    log_w.iter_mut().for_each(|v| *v -= z);
                }
                let mut blur = [0.0; STATE_DIM];
                let h = config.kernel_bandwidth.factor(k.active.len(), np as f64);
                for (a, &d) in k.active.iter().enumerate() {
                    blur[d] = h * k.var[a].sqrt();
                }
                pair[slot] = Some(Arc::new(Source { particles: k.particles.clone(), log_w, blur }));
            }
            sources.push(pair);
        }

        let mut resampled = 0;
        if t > 1 {
            for i in 0..nv {
                let v = &vars[i];
                if graph.anchor[i] || v.active.is_empty() || v.ess >= config.resample_threshold * np as f64 {
                    continue;
                }
                resampled += 1;
                let w = tempered_weights(&v.log_belief, PROPOSAL_ESS * np as f64);
                let proposal = Proposal::fit(&v.particles, &w, &v.active, &v.var);
                let mut rng = rng_for(config.seed, ((t as u64) << 32) | i as u64, "bp-draw");
                let particles: Vec<StateVec> = (0..np).map(|_| proposal.sample(&mut rng)).collect();
                let v = &mut vars[i];
                v.log_q = particles.iter().map(|x| proposal.log_density(x)).collect();
                v.log_prior = particles.iter().map(|x| graph.priors[i].log_density(x)).collect();
                v.var = proposal.var;
                v.particles = Arc::new(particles);
                // re-express the previous messages on the new particles
                for &f in &graph.incidence[i] {
                    let slot = usize::from(graph.pairs[f].rx == i);
                    if let Some(m) = msgs[f][slot].as_mut() {
                        m.log_m = evaluate(graph, f, slot == 1, &m.source, &v.particles);
                    }
                }
            }
        }

        let mut max_change: f64 = 0.0;
        for f in 0..graph.pairs.len() {
            for slot in 0..2 {
                let Some(src) = sources[f][slot].take() else { continue };
                let target = if slot == 0 { graph.pairs[f].tx } else { graph.pairs[f].rx };
                let fresh = evaluate(graph, f, slot == 1, &src, &vars[target].particles);
                let log_m = match &msgs[f][slot] {
                    Some(old) => {
                        max_change = max_change.max(total_variation(&fresh, &old.log_m));
                        fresh.iter().zip(&old.log_m).map(|(a, b)| (1.0 - config.damping) * a + config.damping * b).collect()
                    }
                    None => {
                        max_change = 1.0;
                        fresh
                    }
                };
                msgs[f][slot] = Some(Message { log_m, source: src });
            }
        }

        let mut min_ess = f64::INFINITY;
        let mut max_sum_err: f64 = 0.0;
        for i in 0..nv {
            if graph.anchor[i] {
                continue;
            }
            let v = &vars[i];
            let mut lb: Vec<f64> = v.log_prior.iter().zip(&v.log_q).map(|(p, q)| p - q).collect();
            for &f in &graph.incidence[i] {
                let slot = usize::from(graph.pairs[f].rx == i);
                if let Some(m) = &msgs[f][slot] {
                    lb.iter_mut().zip(&m.log_m).for_each(|(a, b)| *a += b);
                }
            }
            if lb.iter().any(|v| v.is_nan()) || !vars[i].set_belief(lb) {
                return Err(SyncError::Degeneracy { id: graph.ids[i], iteration: t });
            }
            let v = &vars[i];
            min_ess = min_ess.min(v.ess);
            max_sum_err = max_sum_err.max((v.weights.iter().sum::<f64>() - 1.0).abs());
        }
        history.push(IterationStats {
            iteration: t,
            max_message_change: max_change,
            min_ess,
            resampled,
            max_weight_sum_error: max_sum_err,
        });
        if t >= 2 && resampled == 0 && max_change < config.message_tol {
            converged = true;
            break;
        }
    }

    let beliefs = (0..nv)
        .map(|i| {
            let v = &vars[i];
            let b = Belief {
                id: graph.ids[i],
                particles: v.particles.as_ref().clone(),
                weights: v.weights.clone(),
                active: v.active.clone(),
                iteration: iterations,
                ess: v.ess,
            };
            (graph.ids[i], b)
        })
        .collect();
    Ok(BpResult { beliefs, iterations, converged, history })
}

fn check(belief: &Belief) -> Result<(), SyncError> {
    if belief.particles.is_empty() || belief.particles.len() != belief.weights.len() {
        return Err(SyncError::EmptyBelief);
    }
    Ok(())
}

fn to_state(id: usize, v: &StateVec) -> ApertureState {
    ApertureState { id, position: [0.0; 2], orientation: 0.0, velocity: [0.0; 2], time_offset: 0.0, cfo: 0.0, phase_offset: 0.0 }
        .with_vec(v)
}

/// Weighted particle mean, circular for wrapped coordinates.
pub fn estimate_mmse(belief: &Belief) -> Result<ApertureState, SyncError> {
    check(belief)?;
    let all: Vec<usize> = (0..STATE_DIM).collect();
    Ok(to_state(belief.id, &weighted_mean(&belief.particles, &belief.weights, &all)))
}

/// Particle with the highest kernel density estimate. The kernel is a
/// product of Gaussians with per-coordinate bandwidth `rule.factor * sigma`,
/// sigma being the weighted (circular) standard deviation and the sample
/// size the effective one.
pub fn estimate_map(belief: &Belief, rule: BandwidthRule) -> Result<ApertureState, SyncError> {
    check(belief)?;
    let w = &belief.weights;
    let mean = weighted_mean(&belief.particles, w, &belief.active);
    let mut dims = Vec::new();
    let mut sigmas = Vec::new();
    for &k in &belief.active {
        let sigma = if WRAPPED[k] {
            let (s, c) = belief.particles.iter().zip(w).fold((0.0, 0.0), |(s, c), (x, w)| (s + w * x[k].sin(), c + w * x[k].cos()));
            let r = s.hypot(c).min(1.0);
            (-2.0 * r.ln()).sqrt()
        } else {
            belief.particles.iter().zip(w).map(|(x, w)| w * (x[k] - mean[k]).powi(2)).sum::<f64>().sqrt()
        };
        if sigma > 0.0 {
            dims.push(k);
            sigmas.push(sigma);
        }
    }
    if dims.is_empty() {
        let best = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap_or(0);
        return Ok(to_state(belief.id, &belief.particles[best]));
    }
    let n_eff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
    let factor = rule.factor(dims.len(), n_eff);
    let inv_h: Vec<f64> = sigmas.iter().map(|s| 1.0 / (s * factor)).collect();
    let live: Vec<usize> = (0..w.len()).filter(|&l| w[l] > 0.0).collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for &m in &live {
        let xm = &belief.particles[m];
        let density: f64 = live
            .iter()
            .map(|&l| {
                let d = state_diff(xm, &belief.particles[l]);
                let q: f64 = dims.iter().zip(&inv_h).map(|(&k, ih)| (d[k] * ih).powi(2)).sum();
                w[l] * (-0.5 * q).exp()
            })
            .sum();
        if density > best.0 {
            best = (density, m);
        }
    }
    Ok(to_state(belief.id, &belief.particles[best.1]))
}

#[cfg(test)]
mod tests {
    use super::super::{
        build_factor_graph, simulate_measurements, AperturePrior, DimPrior, MeasurementModel, NetworkTopology,
        ObservableNoise, Observables, PHASE_OFFSET, POS_X, POS_Y,
    };
    use super::*;
    use crate::seed;

    fn cloud(n: usize, f: impl Fn(&mut rand_chacha::ChaCha20Rng) -> StateVec) -> Belief {
        let mut rng = seed::rng(3);
        let particles: Vec<StateVec> = (0..n).map(|_| f(&mut rng)).collect();
        Belief { id: 1, particles, weights: vec![1.0 / n as f64; n], active: vec![POS_X, POS_Y, PHASE_OFFSET], iteration: 0, ess: n as f64 }
    }

    #[test]
    fn mmse_of_gaussian_cloud() {
        let n = 4000;
        let (mu, s) = (3.0, 2.0);
        let b = cloud(n, |r| [mu + s * r.sample::<f64, _>(StandardNormal), -mu + s * r.sample::<f64, _>(StandardNormal), 0.0, 0.0, 0.0]);
        let e = estimate_mmse(&b).unwrap();
        let tol = 3.0 * s / (n as f64).sqrt();
        assert!((e.position[0] - mu).abs() < tol && (e.position[1] + mu).abs() < tol);
    }

    #[test]
    fn circular_mean_at_the_seam() {
        let b = cloud(1000, |r| [0.0, 0.0, 0.0, 0.0, wrap_angle(PI + 0.1 * r.sample::<f64, _>(StandardNormal))]);
        let e = estimate_mmse(&b).unwrap();
        assert!(PI - e.phase_offset.abs() < 0.02, "{}", e.phase_offset);
    }

    #[test]
    fn map_matches_mmse_for_symmetric_cloud() {
        let b = cloud(3000, |r| [r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal), 0.0, 0.0, 0.0]);
        let (a, m) = (estimate_map(&b, BandwidthRule::Silverman).unwrap(), estimate_mmse(&b).unwrap());
        let h = BandwidthRule::Silverman.factor(2, 3000.0);
        assert!((a.position[0] - m.position[0]).hypot(a.position[1] - m.position[1]) < 2.0 * h);
    }

    #[test]
    fn empty_belief_is_rejected() {
        let b = Belief { id: 1, particles: vec![], weights: vec![], active: vec![], iteration: 0, ess: 0.0 };
        assert!(matches!(estimate_mmse(&b), Err(SyncError::EmptyBelief)));
        assert!(matches!(estimate_map(&b, BandwidthRule::Scott), Err(SyncError::EmptyBelief)));
    }

    fn scene() -> (NetworkTopology, BTreeMap<usize, ApertureState>, MeasurementModel) {
        let t = NetworkTopology::full_mesh(4, [2, 3, 4].into()).unwrap();
        let truth: BTreeMap<usize, ApertureState> = [
            (1, ApertureState::new(1, [40.0, 55.0], 0.7, 0.0, 0.0)),
            (2, ApertureState::new(2, [0.0, 0.0], 0.0, 0.0, 0.0)),
            (3, ApertureState::new(3, [100.0, 10.0], 1.0, 0.0, 0.0)),
            (4, ApertureState::new(4, [20.0, 100.0], -2.0, 0.0, 0.0)),
        ]
        .into();
        let model = MeasurementModel::new(
            Observables { delay: true, aoa: false, phase: false },
            ObservableNoise { delay_std: 1.0 / super::super::SPEED_OF_LIGHT, aoa_std: 1.0, phase_std: 1.0 },
        );
        (t, truth, model)
    }

    fn position_prior(fixed: &ApertureState) -> AperturePrior {
        AperturePrior {
            x: DimPrior::Uniform { low: 0.0, high: 100.0 },
            y: DimPrior::Uniform { low: 0.0, high: 100.0 },
            ..AperturePrior::point_mass(fixed)
        }
    }

    #[test]
    fn point_mass_agent_and_anchors_stay_fixed() {
        let (t, truth, model) = scene();
        let priors = truth.iter().map(|(id, s)| (*id, AperturePrior::point_mass(s))).collect();
        let m = simulate_measurements(&t, &truth, &model, 2).unwrap();
        let g = build_factor_graph(&t, &priors, &m, &model).unwrap();
        let cfg = BpConfig { particle_count: 100, max_iterations: 5, ..Default::default() };
        let r = run_loopy_bp(&g, &cfg).unwrap();
        for (id, b) in &r.beliefs {
            for p in &b.particles {
                assert_eq!(*p, truth[id].to_vec());
            }
        }
    }

    #[test]
    fn localizes_one_agent_and_keeps_weights_normalized() {
        let (t, truth, model) = scene();
        let priors = truth
            .iter()
            .map(|(id, s)| (*id, if *id == 1 { position_prior(s) } else { AperturePrior::point_mass(s) }))
            .collect();
        let m = simulate_measurements(&t, &truth, &model, 2).unwrap();
        let g = build_factor_graph(&t, &priors, &m, &model).unwrap();
        let r = run_loopy_bp(&g, &BpConfig { particle_count: 1000, ..Default::default() }).unwrap();
        assert!(r.history.iter().all(|h| h.max_weight_sum_error < 1e-12));
        let e = estimate_mmse(&r.beliefs[&1]).unwrap();
        assert!((e.position[0] - 40.0).hypot(e.position[1] - 55.0) < 3.0, "{e:?}");
        for id in [2, 3, 4] {
            assert_eq!(r.beliefs[&id].particles, vec![truth[&id].to_vec()]);
        }
    }

    #[test]
    fn nan_measurement_is_degenerate() {
        let (t, truth, model) = scene();
        let priors = truth
            .iter()
            .map(|(id, s)| (*id, if *id == 1 { position_prior(s) } else { AperturePrior::point_mass(s) }))
            .collect();
        let m = simulate_measurements(&t, &truth, &model, 2).unwrap();
        let mut g = build_factor_graph(&t, &priors, &m, &model).unwrap();
        let f = g.incidence[0][0];
        g.pairs[f].measurement.delay = Some(f64::NAN);
        assert!(matches!(run_loopy_bp(&g, &BpConfig::default()), Err(SyncError::Degeneracy { id: 1, .. })));
    }
}
