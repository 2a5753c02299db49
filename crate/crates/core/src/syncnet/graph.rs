use super::{
    wrap_angle, ApertureState, AperturePrior, MeasurementModel, NetworkTopology, PairMeasurement, StateVec, SyncError,
    STATE_DIM, TIME_OFFSET, WRAPPED,
};
use nalgebra::DMatrix;
use std::collections::{BTreeMap, BTreeSet};

/// Likelihood factor `f(z_(tx, rx) | theta_tx, theta_rx)`; endpoints are
/// variable indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFactor {
    pub tx: usize,
    pub rx: usize,
    pub measurement: PairMeasurement,
}

/// Variables are apertures (anchors included, with point-mass priors); one
/// prior factor per variable and one pair factor per measured pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    pub ids: Vec<usize>,
    pub anchor: Vec<bool>,
    pub priors: Vec<AperturePrior>,
    pub pairs: Vec<PairFactor>,
    /// Pair factors incident on each variable.
    pub incidence: Vec<Vec<usize>>,
    pub model: MeasurementModel,
}

pub fn build_factor_graph(
    topology: &NetworkTopology,
    priors: &BTreeMap<usize, AperturePrior>,
    measurements: &[PairMeasurement],
    model: &MeasurementModel,
) -> Result<FactorGraph, SyncError> {
    model.validate()?;
    let ids = topology.ids().to_vec();
    let index: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut prior_list = Vec::with_capacity(ids.len());
    for id in &ids {
        let p = priors.get(id).ok_or_else(|| SyncError::Topology(format!("no prior for aperture {id}")))?;
        p.validate()?;
        if topology.is_anchor(*id) && !p.is_point_mass() {
            return Err(SyncError::Topology(format!("anchor {id} needs a point-mass prior")));
        }
        prior_list.push(*p);
    }
    if let Some(extra) = priors.keys().find(|k| !index.contains_key(k)) {
        return Err(SyncError::Topology(format!("prior for unknown aperture {extra}")));
    }
    let mask: BTreeSet<(usize, usize)> = topology.mask().iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::with_capacity(measurements.len());
    let mut incidence = vec![Vec::new(); ids.len()];
    for m in measurements {
        if !mask.contains(&(m.tx, m.rx)) {
            return Err(SyncError::Topology(format!("measurement ({}, {}) is not in the mask", m.tx, m.rx)));
        }
        if !m.is_finite() {
            return Err(SyncError::Topology(format!("measurement ({}, {}) is not finite", m.tx, m.rx)));
        }
        if !seen.insert((m.tx, m.rx)) {
            return Err(SyncError::Topology(format!("two measurements for pair ({}, {})", m.tx, m.rx)));
        }
        let f = pairs.len();
        let (tx, rx) = (index[&m.tx], index[&m.rx]);
        incidence[tx].push(f);
        incidence[rx].push(f);
        pairs.push(PairFactor { tx, rx, measurement: *m });
    }
    if let Some(missing) = mask.difference(&seen).next() {
        return Err(SyncError::Topology(format!("masked pair {missing:?} has no measurement")));
    }
    let anchor = ids.iter().map(|id| topology.is_anchor(*id)).collect();
    Ok(FactorGraph { ids, anchor, priors: prior_list, pairs, incidence, model: *model })
}

/// Rank of the whitened measurement Jacobian with respect to the agents'
/// non-fixed coordinates (time offsets expressed in metres).
#[derive(Debug, Clone, PartialEq)]
pub struct RankDiagnostics {
    pub unknowns: usize,
    pub observations: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

impl RankDiagnostics {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.unknowns
    }
}

impl FactorGraph {
    pub fn prior_factor_count(&self) -> usize {
        self.priors.len()
    }

    pub fn pair_factor_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn factor_count(&self) -> usize {
        self.prior_factor_count() + self.pair_factor_count()
    }

    pub fn variable_index(&self, id: usize) -> Option<usize> {
        self.ids.iter().position(|i| *i == id)
    }

    /// First pair factor that closes a cycle, if any. Prior factors are
    /// leaves and never do.
    pub fn find_cycle(&self) -> Option<usize> {
        let mut parent: Vec<usize> = (0..self.ids.len()).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for (f, pf) in self.pairs.iter().enumerate() {
            let (a, b) = (root(&mut parent, pf.tx), root(&mut parent, pf.rx));
            if a == b {
                return Some(f);
            }
            parent[a] = b;
        }
        None
    }

    pub fn is_tree(&self) -> bool {
        self.find_cycle().is_none()
    }

    /// Sum of the log prior and log likelihood factors at `states`.
    pub fn log_joint(&self, states: &BTreeMap<usize, ApertureState>) -> Result<f64, SyncError> {
        let v = self.state_vectors(states)?;
        let priors: f64 = self.priors.iter().zip(&v).map(|(p, x)| p.log_density(x)).sum();
        let pairs: f64 =
            self.pairs.iter().map(|f| self.model.log_likelihood(&f.measurement, &v[f.tx], &v[f.rx])).sum();
        Ok(priors + pairs)
    }

    pub(crate) fn state_vectors(&self, states: &BTreeMap<usize, ApertureState>) -> Result<Vec<StateVec>, SyncError> {
        if states.len() != self.ids.len() {
            return Err(SyncError::IdMismatch(format!("{} states for {} apertures", states.len(), self.ids.len())));
        }
        self.ids
            .iter()
            .map(|id| states.get(id).map(|s| s.to_vec()).ok_or_else(|| SyncError::IdMismatch(format!("no state for {id}"))))
            .collect()
    }

    /// Noiseless observations at `v`, each divided by its noise std.
    fn observe(&self, v: &[StateVec]) -> Vec<f64> {
        let mut out = Vec::new();
        for f in &self.pairs {
            let (d, a, p) = self.model.predict(&v[f.tx], &v[f.rx]);
            let m = &f.measurement;
            if m.delay.is_some() {
                out.push(d / m.noise.delay_std);
            }
            if m.aoa.is_some() {
                out.push(a / m.noise.aoa_std);
            }
            if m.phase.is_some() {
                out.push(p / m.noise.phase_std);
            }
        }
        out
    }

    /// Central-difference Jacobian rank at `truth`.
    pub fn jacobian_rank(&self, truth: &BTreeMap<usize, ApertureState>) -> Result<RankDiagnostics, SyncError> {
        let base = self.state_vectors(truth)?;
        let unknowns: Vec<(usize, usize)> = (0..self.ids.len())
            .filter(|&i| !self.anchor[i])
            .flat_map(|i| self.priors[i].active_dims().into_iter().map(move |d| (i, d)))
            .collect();
        let rows = self.observe(&base).len();
        let mut jac = DMatrix::zeros(rows, unknowns.len());
        let h = 1e-6;
        for (c, &(i, d)) in unknowns.iter().enumerate() {
            // one metre of time offset is 1/speed seconds
            let step = if d == TIME_OFFSET { h / self.model.speed } else { h };
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[i][d] += step;
            minus[i][d] -= step;
            let (yp, ym) = (self.observe(&plus), self.observe(&minus));
            for r in 0..rows {
                let diff = yp[r] - ym[r];
                jac[(r, c)] = diff / (2.0 * h);
            }
        }
        // wrapped observables can jump by 2 pi / std across the seam; the
        // step is far too small for that to happen away from it
        let sv = jac.clone().svd(false, false).singular_values;
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        let tol = s.first().copied().unwrap_or(0.0) * 1e-9 * rows.max(unknowns.len()).max(1) as f64;
        let rank = s.iter().filter(|v| **v > tol).count();
        Ok(RankDiagnostics { unknowns: unknowns.len(), observations: rows, rank, singular_values: s })
    }
}

/// Wrap-aware difference of two state vectors.
pub(crate) fn state_diff(a: &StateVec, b: &StateVec) -> StateVec {
    let mut d = [0.0; STATE_DIM];
    for i in 0..STATE_DIM {
        d[i] = if WRAPPED[i] { wrap_angle(a[i] - b[i]) } else { a[i] - b[i] };
    }
    d
}
