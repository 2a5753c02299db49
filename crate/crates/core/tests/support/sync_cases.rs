//! Synchronization scenes with independent oracles, shared by the core
//! integration tests and the acceptance run.

use isacbench_core::seed;
use isacbench_core::syncnet::{
    build_factor_graph, estimate_mmse, run_loopy_bp, simulate_measurements, ApertureState, AperturePrior, BpConfig,
    DimPrior, MeasurementModel, NetworkTopology, ObservableNoise, Observables, SPEED_OF_LIGHT,
};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

pub const C: f64 = SPEED_OF_LIGHT;

pub fn anchors() -> Vec<ApertureState> {
    vec![
        ApertureState::new(2, [0.0, 0.0], 0.0, 0.0, 0.0),
        ApertureState::new(3, [100.0, 8.0], 2.0, 0.0, 0.0),
        ApertureState::new(4, [30.0, 100.0], -1.5, 0.0, 0.0),
        ApertureState::new(5, [95.0, 92.0], 0.4, 0.0, 0.0),
    ]
}

fn fixed(v: f64) -> DimPrior {
    DimPrior::Fixed { value: v }
}

fn uniform_position(orientation: DimPrior, time_offset: DimPrior) -> AperturePrior {
    AperturePrior {
        x: DimPrior::Uniform { low: 0.0, high: 100.0 },
        y: DimPrior::Uniform { low: 0.0, high: 100.0 },
        orientation,
        time_offset,
        phase_offset: fixed(0.0),
    }
}

// Tree: one agent measured by three anchors, delay only; agent unknowns are
// position and clock offset.
const TREE_DELAY_STD: f64 = 1.0 / C;
const TREE_TO_STD: f64 = 1.0 / C;

struct Tree {
    truth: BTreeMap<usize, ApertureState>,
    priors: BTreeMap<usize, AperturePrior>,
    topology: NetworkTopology,
    model: MeasurementModel,
}

fn tree() -> Tree {
    let agent = ApertureState::new(1, [42.0, 57.0], 0.0, 0.4 / C, 0.0);
    let mut truth: BTreeMap<usize, ApertureState> = anchors().into_iter().take(3).map(|a| (a.id, a)).collect();
    truth.insert(1, agent);
    let mut priors: BTreeMap<usize, AperturePrior> = truth.iter().map(|(i, s)| (*i, AperturePrior::point_mass(s))).collect();
    priors.insert(1, uniform_position(fixed(0.0), DimPrior::Gaussian { mean: 0.0, std: TREE_TO_STD }));
    let topology = NetworkTopology::star(1, &[2, 3, 4]).unwrap();
    let model = MeasurementModel::new(
        Observables { delay: true, aoa: false, phase: false },
        ObservableNoise { delay_std: TREE_DELAY_STD, aoa_std: 1.0, phase_std: 1.0 },
    );
    Tree { truth, priors, topology, model }
}

/// Posterior of the agent position on a dense grid, the clock offset summed
/// out on its own grid.
fn grid_posterior(t: &Tree, z: &[(ApertureState, f64)], half: f64, step: f64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let centre = t.truth[&1].position;
    let n = (2.0 * half / step) as usize + 1;
    let to: Vec<f64> = (-60..=60).map(|k| k as f64 * 0.1 * TREE_TO_STD).collect();
    let mut pts = Vec::with_capacity(n * n);
    let mut logp = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = [centre[0] - half + i as f64 * step, centre[1] - half + j as f64 * step];
            let ranges: Vec<f64> = z.iter().map(|(a, _)| (p[0] - a.position[0]).hypot(p[1] - a.position[1]) / C).collect();
            let terms: Vec<f64> = to
                .iter()
                .map(|&o| {
                    let mut q = (o / TREE_TO_STD).powi(2);
                    for ((_, zd), r) in z.iter().zip(&ranges) {
                        q += ((zd - r - o) / TREE_DELAY_STD).powi(2);
                    }
                    -0.5 * q
                })
                .collect();
            let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            pts.push(p);
            logp.push(m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln());
        }
    }
    let m = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = w.iter().sum();
    (pts, w.into_iter().map(|v| v / s).collect())
}

/// 4 x 4 bins over mean +- 2 std of the oracle, plus one bin for the rest.
fn binned(points: &[[f64; 2]], weights: &[f64], lo: [f64; 2], width: [f64; 2]) -> Vec<f64> {
    let mut h = vec![0.0; 17];
    for (p, w) in points.iter().zip(weights) {
        let bx = ((p[0] - lo[0]) / width[0]).floor();
        let by = ((p[1] - lo[1]) / width[1]).floor();
        let k = if (0.0..4.0).contains(&bx) && (0.0..4.0).contains(&by) { bx as usize * 4 + by as usize } else { 16 };
        h[k] += w;
    }
    h
}

pub struct TreeOutcome {
    /// Total variation between the binned belief and the binned grid posterior.
    pub tv: f64,
    /// Oracle mass within half a metre of the grid edge.
    pub grid_edge_mass: f64,
    pub is_tree: bool,
    pub converged: bool,
    pub iterations: usize,
}

pub fn tree_belief_vs_grid(particles: usize, bp_seed: u64) -> TreeOutcome {
    let t = tree();
    let m = simulate_measurements(&t.topology, &t.truth, &t.model, 11).unwrap();
    let graph = build_factor_graph(&t.topology, &t.priors, &m, &t.model).unwrap();
    let z: Vec<(ApertureState, f64)> = m.iter().map(|pm| (t.truth[&pm.tx], pm.delay.unwrap())).collect();
    let (pts, w) = grid_posterior(&t, &z, 12.0, 0.04);
    let truth = t.truth[&1].position;
    let grid_edge_mass: f64 = pts
        .iter()
        .zip(&w)
        .filter(|(p, _)| (p[0] - truth[0]).abs() > 11.5 || (p[1] - truth[1]).abs() > 11.5)
        .map(|(_, w)| w)
        .sum();
    let mean = [0, 1].map(|k| pts.iter().zip(&w).map(|(p, w)| w * p[k]).sum::<f64>());
    let std = [0, 1].map(|k| pts.iter().zip(&w).map(|(p, w)| w * (p[k] - mean[k]).powi(2)).sum::<f64>().sqrt());
    let lo = [mean[0] - 2.0 * std[0], mean[1] - 2.0 * std[1]];
    let width = [std[0], std[1]];
    let oracle = binned(&pts, &w, lo, width);

    let r = run_loopy_bp(&graph, &BpConfig { particle_count: particles, seed: bp_seed, ..Default::default() }).unwrap();
    let b = &r.beliefs[&1];
    let bp_pts: Vec<[f64; 2]> = b.particles.iter().map(|x| [x[0], x[1]]).collect();
    let got = binned(&bp_pts, &b.weights, lo, width);
    let tv = 0.5 * oracle.iter().zip(&got).map(|(a, b)| (a - b).abs()).sum::<f64>();
    TreeOutcome { tv, grid_edge_mass, is_tree: graph.is_tree(), converged: r.converged, iterations: r.iterations }
}

struct Mesh {
    truth: BTreeMap<usize, ApertureState>,
    priors: BTreeMap<usize, AperturePrior>,
    topology: NetworkTopology,
    model: MeasurementModel,
}

/// Two agents and four anchors, every ordered pair measured without noise.
fn noiseless_mesh(s: u64) -> Mesh {
    let mut rng = seed::rng(seed::derive(s, 0, "mesh-truth"));
    let mut truth: BTreeMap<usize, ApertureState> = anchors().into_iter().map(|a| (a.id, a)).collect();
    for id in [1, 6] {
        let p = [rng.random_range(10.0..90.0), rng.random_range(10.0..90.0)];
        truth.insert(id, ApertureState::new(id, p, rng.random_range(-PI..PI), rng.random_range(-5e-9..5e-9), 0.0));
    }
    let prior = uniform_position(DimPrior::Uniform { low: -PI, high: PI }, DimPrior::Gaussian { mean: 0.0, std: 1e-8 });
    let priors = truth
        .iter()
        .map(|(i, st)| (*i, if [1, 6].contains(i) { prior } else { AperturePrior::point_mass(st) }))
        .collect();
    let ids: Vec<usize> = truth.keys().copied().collect();
    let mask = ids.iter().flat_map(|&a| ids.iter().filter(move |&&b| b != a).map(move |&b| (a, b))).collect();
    let topology = NetworkTopology::new(ids, [2, 3, 4, 5].into(), mask).unwrap();
    let model = MeasurementModel {
        draw_noise: false,
        ..MeasurementModel::new(
            Observables { delay: true, aoa: true, phase: false },
            ObservableNoise { delay_std: 1e-12, aoa_std: 1e-5, phase_std: 1.0 },
        )
    };
    Mesh { truth, priors, topology, model }
}

pub struct MeshOutcome {
    /// MMSE position error of each agent, metres.
    pub errors: Vec<f64>,
    pub is_tree: bool,
    pub iterations: usize,
}

/// Runs the noiseless four-anchor mesh for one seed with at most 50 iterations.
pub fn noiseless_mesh_errors(s: u64) -> MeshOutcome {
    let mesh = noiseless_mesh(s);
    let m = simulate_measurements(&mesh.topology, &mesh.truth, &mesh.model, s).unwrap();
    let graph = build_factor_graph(&mesh.topology, &mesh.priors, &m, &mesh.model).unwrap();
    let cfg = BpConfig { particle_count: 300, max_iterations: 50, seed: s, ..Default::default() };
    let r = run_loopy_bp(&graph, &cfg).unwrap();
    let errors = [1, 6]
        .iter()
        .map(|id| {
            let e = estimate_mmse(&r.beliefs[id]).unwrap();
            let t = mesh.truth[id];
            (e.position[0] - t.position[0]).hypot(e.position[1] - t.position[1])
        })
        .collect();
    MeshOutcome { errors, is_tree: graph.is_tree(), iterations: r.iterations }
}

/// Factor count of a full mesh of `j` apertures.
pub fn full_mesh_factor_count(j: usize) -> usize {
    let t = NetworkTopology::full_mesh(j, BTreeSet::new()).unwrap();
    let truth: BTreeMap<usize, ApertureState> =
        (1..=j).map(|i| (i, ApertureState::new(i, [i as f64, 2.0 * i as f64], 0.0, 0.0, 0.0))).collect();
    let priors = truth.iter().map(|(i, s)| (*i, AperturePrior::point_mass(s))).collect();
    let model = MeasurementModel::new(Observables::default(), ObservableNoise { delay_std: 1e-9, aoa_std: 0.01, phase_std: 0.1 });
    let m = simulate_measurements(&t, &truth, &model, 0).unwrap();
    build_factor_graph(&t, &priors, &m, &model).unwrap().factor_count()
}
