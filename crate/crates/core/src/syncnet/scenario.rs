use super::{
    build_factor_graph, estimate_map, estimate_mmse, run_loopy_bp, simulate_measurements, sync_error_report,
    AperturePrior, ApertureState, BpConfig, BpResult, MeasurementModel, NetworkTopology, PairMeasurement, SyncError,
    SyncErrorReport,
};
use crate::seed;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// One aperture of a scenario: its true state and, for agents, its prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureSpec {
    pub id: usize,
    #[serde(default)]
    pub anchor: bool,
    pub position: [f64; 2],
    #[serde(default)]
    pub orientation: f64,
    #[serde(default)]
    pub time_offset: f64,
    #[serde(default)]
    pub phase_offset: f64,
    /// Required for agents; anchors always use a point mass at the truth.
    #[serde(default)]
    pub prior: Option<AperturePrior>,
}

impl ApertureSpec {
    pub fn state(&self) -> ApertureState {
        ApertureState::new(self.id, self.position, self.orientation, self.time_offset, self.phase_offset)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskSpec {
    /// Every ordered pair.
    #[default]
    Full,
    /// Every other aperture transmits to `center`.
    Star { center: usize },
    Pairs { pairs: Vec<(usize, usize)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointEstimate {
    #[default]
    Mmse,
    Map,
}

/// A synchronization experiment as read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncScenario {
    pub apertures: Vec<ApertureSpec>,
    #[serde(default)]
    pub mask: MaskSpec,
    pub model: MeasurementModel,
    #[serde(default)]
    pub bp: BpConfig,
    #[serde(default)]
    pub estimate: PointEstimate,
}

/// Everything produced by one run of a scenario.
#[derive(Debug, Clone)]
pub struct SyncRun {
    pub truth: BTreeMap<usize, ApertureState>,
    pub measurements: Vec<PairMeasurement>,
    pub result: BpResult,
    pub estimates: BTreeMap<usize, ApertureState>,
    pub report: SyncErrorReport,
}

impl SyncScenario {
    pub fn from_toml_str(s: &str) -> Result<Self, SyncError> {
        let sc: Self = toml::from_str(s).map_err(|e| SyncError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SyncError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self) -> Result<(), SyncError> {
        let mut problems = Vec::new();
        let mut seen = BTreeSet::new();
        for a in &self.apertures {
            if !seen.insert(a.id) {
                problems.push(format!("aperture {} listed twice", a.id));
            }
            match (&a.prior, a.anchor) {
                (None, false) => problems.push(format!("agent {} has no prior", a.id)),
                (Some(p), false) => {
                    if let Err(e) = p.validate() {
                        problems.push(format!("aperture {}: {e}", a.id));
                    }
                }
                (Some(_), true) => problems.push(format!("anchor {} must not carry a prior", a.id)),
                (None, true) => {}
            }
        }
        if let Err(e) = self.model.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.bp.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.topology() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SyncError::Config(problems.join("; ")))
        }
    }

    pub fn topology(&self) -> Result<NetworkTopology, SyncError> {
        let ids: Vec<usize> = self.apertures.iter().map(|a| a.id).collect();
        let anchors = self.apertures.iter().filter(|a| a.anchor).map(|a| a.id).collect();
        let mask = match &self.mask {
            MaskSpec::Full => ids.iter().flat_map(|&a| ids.iter().filter(move |&&b| b != a).map(move |&b| (a, b))).collect(),
            MaskSpec::Star { center } => ids.iter().filter(|&&a| a != *center).map(|&a| (a, *center)).collect(),
            MaskSpec::Pairs { pairs } => pairs.clone(),
        };
        NetworkTopology::new(ids, anchors, mask)
    }

    pub fn truth(&self) -> BTreeMap<usize, ApertureState> {
        self.apertures.iter().map(|a| (a.id, a.state())).collect()
    }

    pub fn priors(&self) -> BTreeMap<usize, AperturePrior> {
        self.apertures
            .iter()
            .map(|a| {
                let p = match (&a.prior, a.anchor) {
                    (Some(p), false) => *p,
                    _ => AperturePrior::point_mass(&a.state()),
                };
                (a.id, p)
            })
            .collect()
    }

    /// Simulates measurements and runs belief propagation. The measurement
    /// and inference streams are both derived from `seed`.
    pub fn run(&self, seed: u64) -> Result<SyncRun, SyncError> {
        self.validate()?;
        let topology = self.topology()?;
        let truth = self.truth();
        let measurements = simulate_measurements(&topology, &truth, &self.model, seed::derive(seed, 0, "sync-scenario-z"))?;
        let graph = build_factor_graph(&topology, &self.priors(), &measurements, &self.model)?;
        let bp = BpConfig { seed: seed::derive(seed, 0, "sync-scenario-bp"), ..self.bp.clone() };
        let result = run_loopy_bp(&graph, &bp)?;
        let estimates = result
            .beliefs
            .iter()
            .map(|(id, b)| {
                let e = match self.estimate {
                    PointEstimate::Mmse => estimate_mmse(b)?,
                    PointEstimate::Map => estimate_map(b, bp.kernel_bandwidth)?,
                };
                // carry the non-estimated coordinates through unchanged
                let t = &truth[id];
                Ok((*id, ApertureState { velocity: t.velocity, cfo: t.cfo, ..e }))
            })
            .collect::<Result<BTreeMap<_, _>, SyncError>>()?;
        let report = sync_error_report(&estimates, &truth)?;
        Ok(SyncRun { truth, measurements, result, estimates, report })
    }
}
