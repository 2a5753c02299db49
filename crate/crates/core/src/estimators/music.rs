use super::matched_filter::local_maxima;
use super::omp::least_squares;
use super::{synthesis_cost, synthesize, CostLedger, Dictionary, EstimateReport, EstimatorError, EstimatorKind};
use crate::scene::{eval_dd_response, ReceivedSignal, Target, TargetScene};
use crate::waveform::{ModulationLayout, Waveform};
use crate::{dsp, seed};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Samples of the delay-Doppler response `g(t, f)` on a uniform
/// slow-time x frequency lattice: row `m` at `t0 + m dt`, column `k` at
/// `f0 + k df` (`df` may be negative).
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseGrid {
    pub values: DMatrix<Complex64>,
    pub t0: f64,
    pub dt: f64,
    pub f0: f64,
    pub df: f64,
}

impl ResponseGrid {
    /// Evaluates a scene's response on the lattice and adds circular
    /// complex Gaussian noise of variance `noise_variance` per cell.
    #[allow(clippy::too_many_arguments)]
    pub fn from_scene(
        scene: &TargetScene,
        rows: usize,
        cols: usize,
        t0: f64,
        dt: f64,
        f0: f64,
        df: f64,
        noise_variance: f64,
        noise_seed: u64,
    ) -> Self {
        let mut rng = seed::rng(noise_seed);
        let values = DMatrix::from_fn(rows, cols, |m, k| {
            eval_dd_response(scene, t0 + m as f64 * dt, f0 + k as f64 * df)
        });
        let values = if noise_variance > 0.0 {
            // noise drawn in column-major order so the stream is layout-stable
            let mut v = values;
            for x in v.iter_mut() {
                *x += dsp::complex_normal(&mut rng, noise_variance);
            }
            v
        } else {
            values
        };
        Self { values, t0, dt, f0, df }
    }

    /// Per-subcarrier channel estimates `Y / X` of a CP-OFDM frame whose
    /// subcarriers are all active. Subcarrier `k` of a delay `tau` carries
    /// phase `exp(-j 2 pi k fs/K tau)`, so the lattice has `df = -fs / K`;
    /// symbol `m` is sampled at the start of its body.
    pub fn from_ofdm(rx: &ReceivedSignal, u: &Waveform) -> Result<Self, EstimatorError> {
        let ModulationLayout::Ofdm(layout) = u.layout() else {
            return Err(EstimatorError::Layout("MUSIC front end needs an OFDM waveform".into()));
        };
        if layout.active.len() != layout.num_subcarriers {
            return Err(EstimatorError::Layout("MUSIC front end needs every subcarrier active".into()));
        }
        let k = layout.num_subcarriers;
        let fs = u.sample_rate();
        let y = layout.demodulate_grid(&rx.samples);
        let x = layout.resource_grid();
        let values = DMatrix::from_fn(layout.num_symbols, k, |m, c| y[m * k + c] / x[m * k + c]);
        Ok(Self {
            values,
            t0: layout.cp_len as f64 / fs,
            dt: layout.symbol_len() as f64 / fs,
            f0: 0.0,
            df: -fs / k as f64,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    /// `exp(j 2 pi (nu (t0 + m dt) + tau (f0 + k df)))` over a `rows x cols`
    /// block, flattened column-major; `origin` selects whether the lattice
    /// offsets `t0`, `f0` are included.
    fn steering(&self, delay: f64, doppler: f64, rows: usize, cols: usize, origin: bool) -> DVector<Complex64> {
        let (t0, f0) = if origin { (self.t0, self.f0) } else { (0.0, 0.0) };
        DVector::from_fn(rows * cols, |idx, _| {
            let (m, k) = (idx % rows, idx / rows);
            let ph = doppler * (t0 + m as f64 * self.dt) + delay * (f0 + k as f64 * self.df);
            Complex64::from_polar(1.0, 2.0 * PI * ph)
        })
    }
}

/// Sub-array size for spatial smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothingWindow {
    pub rows: usize,
    pub cols: usize,
}

impl SmoothingWindow {
    /// Half the lattice extent in each dimension (rounded up).
    pub fn half_of(grid: &ResponseGrid) -> Self {
        Self { rows: grid.rows().div_ceil(2), cols: grid.cols().div_ceil(2) }
    }
}

/// Eigen-structure of the smoothed covariance and the pseudospectrum over a
/// dictionary (delay-major, like the dictionary's flat index).
#[derive(Debug, Clone, PartialEq)]
pub struct MusicAnalysis {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub pseudospectrum: Vec<f64>,
    pub snapshots: usize,
    pub dimension: usize,
    pub flops: u64,
}

/// Smoothed sample covariance over all `window`-sized sub-blocks.
fn smoothed_covariance(grid: &ResponseGrid, w: SmoothingWindow) -> (DMatrix<Complex64>, usize) {
    let d = w.rows * w.cols;
    let mut r = DMatrix::<Complex64>::zeros(d, d);
    let (nr, nc) = (grid.rows() - w.rows + 1, grid.cols() - w.cols + 1);
    for c0 in 0..nc {
        for r0 in 0..nr {
            let block = grid.values.view((r0, c0), (w.rows, w.cols));
            let x = DVector::from_iterator(d, block.iter().copied());
            r.ger(Complex64::new(1.0, 0.0), &x, &x.conjugate(), Complex64::new(1.0, 0.0));
        }
    }
    let s = nr * nc;
    r /= Complex64::new(s as f64, 0.0);
    (r, s)
}

/// MUSIC pseudospectrum `||a||^2 / ||P_noise a||^2` on the dictionary grid.
pub fn music_pseudospectrum(
    grid: &ResponseGrid,
    order: usize,
    dict: &Dictionary,
    window: SmoothingWindow,
) -> Result<MusicAnalysis, EstimatorError> {
    if order == 0 {
        return Err(EstimatorError::Invalid("model order must be >= 1".into()));
    }
    if window.rows == 0 || window.cols == 0 || window.rows > grid.rows() || window.cols > grid.cols() {
        return Err(EstimatorError::Invalid(format!(
            "smoothing window {}x{} does not fit the {}x{} lattice",
            window.rows,
            window.cols,
            grid.rows(),
            grid.cols()
        )));
    }
    let span = |g: &[f64]| g[g.len() - 1] - g[0];
    if grid.cols() > 1 && span(dict.delays()) * grid.df.abs() >= 1.0 {
        return Err(EstimatorError::Grid("delay grid wraps around the lattice's unambiguous delay".into()));
    }
    if grid.rows() > 1 && span(dict.dopplers()) * grid.dt.abs() >= 1.0 {
        return Err(EstimatorError::Grid("doppler grid wraps around the lattice's unambiguous doppler".into()));
    }
    let dim = window.rows * window.cols;
    if order >= dim {
        return Err(EstimatorError::Order { order, dim });
    }
    let (r, snapshots) = smoothed_covariance(grid, window);
    if snapshots <= order {
        return Err(EstimatorError::Order { order, dim: snapshots });
    }
    let eig = SymmetricEigen::new(r);
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let signal = eig.eigenvectors.select_columns(&idx[..order]);
    let norm = dim as f64;
    let pseudospectrum: Vec<f64> = (0..dict.len())
        .map(|a| {
            let (i, j) = dict.cell(a);
            let s = grid.steering(dict.delays()[i], dict.dopplers()[j], window.rows, window.cols, false);
            let proj = signal.ad_mul(&s).norm_squared();
            norm / (norm - proj).max(norm * 1e-15)
        })
        .collect();
    let flops = (snapshots * dim * dim + dim * dim * dim + dict.len() * dim * (order + 1)) as u64;
    Ok(MusicAnalysis { eigenvalues, pseudospectrum, snapshots, dimension: dim, flops })
}

fn peaks_and_amplitudes(
    grid: &ResponseGrid,
    order: usize,
    dict: &Dictionary,
    analysis: &MusicAnalysis,
) -> Result<(Vec<Target>, DVector<Complex64>, u64), EstimatorError> {
    let (nd, nm) = (dict.delays().len(), dict.dopplers().len());
    let mut peaks = local_maxima(&analysis.pseudospectrum, nd, nm, 0.0);
    peaks.sort_by(|&a, &b| analysis.pseudospectrum[b].total_cmp(&analysis.pseudospectrum[a]).then(a.cmp(&b)));
    peaks.truncate(order);
    let cells: Vec<(f64, f64)> = peaks
        .iter()
        .map(|&a| {
            let (i, j) = dict.cell(a);
            (dict.delays()[i], dict.dopplers()[j])
        })
        .collect();
    let cols: Vec<DVector<Complex64>> =
        cells.iter().map(|&(d, n)| grid.steering(d, n, grid.rows(), grid.cols(), true)).collect();
    let y = DVector::from_iterator(grid.values.len(), grid.values.iter().copied());
    let (amps, fitted) = if cols.is_empty() {
        (DVector::zeros(0), DVector::zeros(y.len()))
    } else {
        let a = DMatrix::from_columns(&cols);
        let x = least_squares(&a, &y)?;
        let f = &a * &x;
        (x, f)
    };
    let n = y.len();
    let p = cells.len();
    let targets = cells
        .iter()
        .zip(amps.iter())
        .map(|(&(delay, doppler), &amplitude)| Target { amplitude, delay, doppler })
        .collect();
    Ok((targets, fitted, (n * p * p + p * p * p + n * p) as u64))
}

/// MUSIC directly on a response lattice. The predicted signal is the fitted
/// lattice, flattened column-major.
pub fn music_on_grid(
    grid: &ResponseGrid,
    order: usize,
    dict: &Dictionary,
    window: Option<SmoothingWindow>,
) -> Result<(EstimateReport, MusicAnalysis), EstimatorError> {
    let window = window.unwrap_or_else(|| SmoothingWindow::half_of(grid));
    let analysis = music_pseudospectrum(grid, order, dict, window)?;
    let (targets, fitted, fit_flops) = peaks_and_amplitudes(grid, order, dict, &analysis)?;
    let observed: Vec<Complex64> = grid.values.iter().copied().collect();
    let cost = CostLedger {
        flop_count: analysis.flops + fit_flops,
        time_samples: grid.rows(),
        spectral_bins: grid.cols(),
        occupied_bandwidth: (grid.cols() as f64 * grid.df).abs(),
        apriori_inputs: vec!["delay-doppler grid".into(), "model order P".into()],
    };
    let history = vec![dsp::energy(&observed)];
    let mut report = EstimateReport::assemble(
        EstimatorKind::Music,
        targets,
        &observed,
        fitted.iter().copied().collect(),
        history,
        cost,
    );
    report.residual_history.push(report.residual_energy);
    Ok((report, analysis))
}

/// MUSIC on a received CP-OFDM frame: per-subcarrier channel estimates
/// form the lattice, the estimated targets are re-synthesized through the
/// probe for the predicted signal.
pub fn music_estimate(
    rx: &ReceivedSignal,
    u: &Waveform,
    order: usize,
    dict: &Dictionary,
) -> Result<EstimateReport, EstimatorError> {
    if (rx.sample_rate - u.sample_rate()).abs() > 1e-9 * u.sample_rate() {
        return Err(EstimatorError::SampleRate { rx: rx.sample_rate, waveform: u.sample_rate() });
    }
    dict.check_window(&rx.window)?;
    let grid = ResponseGrid::from_ofdm(rx, u)?;
    let (lattice_report, _) = music_on_grid(&grid, order, dict, None)?;
    let fs = rx.sample_rate;
    let mut targets = lattice_report.targets;
    for t in &mut targets {
        t.delay = t.delay.max(0.0);
    }
    let predicted = synthesize(u.samples(), &targets, fs, rx.len());
    let mut cost = lattice_report.cost;
    let (k, s) = (grid.cols(), grid.rows());
    cost.add_flops(s as u64 * (dsp::fft_cost(k) + k as u64) + synthesis_cost(rx.len(), targets.len()));
    cost.time_samples = rx.len();
    cost.occupied_bandwidth = u.band().width();
    let mut report = EstimateReport::assemble(EstimatorKind::Music, targets, &rx.samples, predicted, vec![rx.energy()], cost);
    report.residual_history.push(report.residual_energy);
    Ok(report)
}
