use super::{bins_in_band, synthesis_cost, synthesize, CostLedger, Dictionary, EstimateReport, EstimatorError, EstimatorKind};
use crate::dsp;
use crate::scene::{ReceivedSignal, Target};
use crate::waveform::Waveform;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedFilterConfig {
    /// Detection threshold on correlator power relative to the peak, dB.
    pub threshold_db: f64,
    /// Refine each detected delay off the grid by maximizing the
    /// energy-normalized correlator power `|c(tau)|^2 / ||s(tau)||^2` within
    /// one grid step of the detection.
    pub refine_delay: bool,
}

impl Default for MatchedFilterConfig {
    fn default() -> Self {
        Self { threshold_db: -13.0, refine_delay: false }
    }
}

/// Cross-ambiguity of a received signal against a probe over a dictionary.
///
/// `values[i * n_doppler + j] = Ts * sum_n rx[n] conj(s_ij[n])` where `s_ij`
/// is the probe's response to a unit target at delay `i`, Doppler `j`; for a
/// noiseless unit target on a grid cell this equals the probe energy there.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorSurface {
    pub delays: Vec<f64>,
    pub dopplers: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `Ts * ||s_ij||^2` per cell.
    pub atom_energies: Vec<f64>,
}

impl CorrelatorSurface {
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.dopplers.len() + j]
    }

    pub fn power(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }
}

struct Probe {
    spectrum: Vec<Complex64>,
    len: usize,
    fs: f64,
}

impl Probe {
    fn new(u: &Waveform, len: usize) -> Self {
        let mut spectrum = vec![Complex64::default(); len];
        let take = u.len().min(len);
        spectrum[..take].copy_from_slice(&u.samples()[..take]);
        dsp::fft(&mut spectrum);
        Self { spectrum, len, fs: u.sample_rate() }
    }

    /// `FFT(rx * exp(-j 2 pi nu n / fs)) * conj(U)`.
    fn cross_spectrum(&self, rx: &[Complex64], doppler: f64) -> Vec<Complex64> {
        let mut z: Vec<Complex64> = rx.to_vec();
        dsp::apply_doppler(&mut z, -doppler, self.fs);
        dsp::fft(&mut z);
        z.iter_mut().zip(&self.spectrum).for_each(|(a, b)| *a *= b.conj());
        z
    }

    /// Sample-unit correlation at a delay of `d` samples from a cross spectrum.
    fn correlate(&self, w: &[Complex64], d: f64) -> Complex64 {
        let s: Complex64 = w.iter().enumerate().map(|(k, v)| v * dsp::delay_phase(k, self.len, d).conj()).sum();
        s / self.len as f64
    }

    /// Sample-unit energy of the probe delayed by `d` samples.
    fn atom_energy(&self, d: f64) -> f64 {
        let s: f64 = self
            .spectrum
            .iter()
            .enumerate()
            .map(|(k, v)| v.norm_sqr() * dsp::delay_phase(k, self.len, d).norm_sqr())
            .sum();
        s / self.len as f64
    }
}

fn check_inputs(rx: &ReceivedSignal, u: &Waveform, dict: &Dictionary) -> Result<(), EstimatorError> {
    if (rx.sample_rate - u.sample_rate()).abs() > 1e-9 * u.sample_rate() {
        return Err(EstimatorError::SampleRate { rx: rx.sample_rate, waveform: u.sample_rate() });
    }
    if rx.is_empty() {
        return Err(EstimatorError::Invalid("empty received signal".into()));
    }
    dict.check_window(&rx.window)
}

fn surface_with_cost(rx: &ReceivedSignal, u: &Waveform, dict: &Dictionary) -> (CorrelatorSurface, Probe, u64) {
    let len = rx.len();
    let fs = rx.sample_rate;
    let ts = 1.0 / fs;
    let probe = Probe::new(u, len);
    let delays_samples: Vec<f64> = dict.delays().iter().map(|d| d * fs).collect();
    let integer = delays_samples.iter().all(|d| (d - d.round()).abs() < 1e-9);
    let (nd, nm) = (dict.delays().len(), dict.dopplers().len());
    let mut values = vec![Complex64::default(); nd * nm];
    let mut flops = dsp::fft_cost(len);
    for (j, &nu) in dict.dopplers().iter().enumerate() {
        let w = probe.cross_spectrum(&rx.samples, nu);
        flops += 2 * len as u64 + dsp::fft_cost(len);
        if integer {
            let mut c = w.clone();
            dsp::ifft(&mut c);
            flops += dsp::fft_cost(len);
            for (i, d) in delays_samples.iter().enumerate() {
                let idx = (d.round() as i64).rem_euclid(len as i64) as usize;
                values[i * nm + j] = c[idx] * ts;
            }
        } else {
            for (i, &d) in delays_samples.iter().enumerate() {
                values[i * nm + j] = probe.correlate(&w, d) * ts;
            }
            flops += (nd * len) as u64;
        }
    }
    let atom_energies: Vec<f64> = delays_samples
        .iter()
        .flat_map(|&d| std::iter::repeat_n(probe.atom_energy(d) * ts, nm))
        .collect();
    flops += (nd * len) as u64;
    let surface = CorrelatorSurface {
        delays: dict.delays().to_vec(),
        dopplers: dict.dopplers().to_vec(),
        values,
        atom_energies,
    };
    (surface, probe, flops)
}

/// Correlates `rx` against the probe's response at every dictionary cell.
pub fn correlator_surface(rx: &ReceivedSignal, u: &Waveform, dict: &Dictionary) -> Result<CorrelatorSurface, EstimatorError> {
    check_inputs(rx, u, dict)?;
    Ok(surface_with_cost(rx, u, dict).0)
}

/// Cells that are local maxima of `power` over their 8-neighbourhood and lie
/// within `rel` of the global peak. Ties go to the lower flat index.
pub(crate) fn local_maxima(power: &[f64], nd: usize, nm: usize, rel: f64) -> Vec<usize> {
    let peak = power.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    let floor = peak * rel;
    let mut out = Vec::new();
    for i in 0..nd {
        for j in 0..nm {
            let a = i * nm + j;
            let p = power[a];
            if p < floor || p <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= nd as i64 || jj >= nm as i64 {
                        continue;
                    }
                    let b = ii as usize * nm + jj as usize;
                    if power[b] > p || (power[b] == p && b < a) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                out.push(a);
            }
        }
    }
    out
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

const REFINE_ITERS: usize = 60;

/// 2-D matched-filter (periodogram) estimator with the default configuration
/// and the given threshold.
pub fn matched_filter_estimate(
    rx: &ReceivedSignal,
    u: &Waveform,
    dict: &Dictionary,
    threshold_db: f64,
) -> Result<EstimateReport, EstimatorError> {
    matched_filter_estimate_with(rx, u, dict, &MatchedFilterConfig { threshold_db, ..Default::default() })
}

/// Reports every local maximum of the correlator power within
/// `threshold_db` of the peak; amplitudes are `correlation / atom energy`.
pub fn matched_filter_estimate_with(
    rx: &ReceivedSignal,
    u: &Waveform,
    dict: &Dictionary,
    config: &MatchedFilterConfig,
) -> Result<EstimateReport, EstimatorError> {
    check_inputs(rx, u, dict)?;
    let (surface, probe, mut flops) = surface_with_cost(rx, u, dict);
    let (nd, nm) = (dict.delays().len(), dict.dopplers().len());
    let fs = rx.sample_rate;
    let rel = 10f64.powf(config.threshold_db / 10.0);
    let peaks = local_maxima(&surface.power(), nd, nm, rel);
    flops += (nd * nm) as u64;

    let step = if nd > 1 { dict.delays()[1] - dict.delays()[0] } else { 1.0 / fs };
    let mut targets = Vec::with_capacity(peaks.len());
    for a in peaks {
        let (i, j) = (a / nm, a % nm);
        let (delay, amplitude) = if config.refine_delay {
            let w = probe.cross_spectrum(&rx.samples, dict.dopplers()[j]);
            let lo = ((dict.delays()[i] - step) * fs).max(0.0);
            let hi = (dict.delays()[i] + step) * fs;
            let d = golden_max(lo, hi, |d| probe.correlate(&w, d).norm_sqr() / probe.atom_energy(d), REFINE_ITERS);
            flops += 2 * len_u64(rx) + dsp::fft_cost(rx.len()) + (REFINE_ITERS as u64 + 3) * len_u64(rx);
            (d / fs, probe.correlate(&w, d) / probe.atom_energy(d))
        } else {
            (dict.delays()[i], surface.values[a] / surface.atom_energies[a])
        };
        targets.push(Target { amplitude, delay, doppler: dict.dopplers()[j] });
    }
    let predicted = synthesize(u.samples(), &targets, fs, rx.len());
    flops += synthesis_cost(rx.len(), targets.len());
    let band = u.band();
    let cost = CostLedger {
        flop_count: flops,
        time_samples: rx.len(),
        spectral_bins: bins_in_band(rx.len(), fs, band.lower, band.upper),
        occupied_bandwidth: band.width(),
        apriori_inputs: vec!["delay-doppler grid".into(), "detection threshold".into()],
    };
    let history = vec![rx.energy()];
    let mut report = EstimateReport::assemble(EstimatorKind::MatchedFilter, targets, &rx.samples, predicted, history, cost);
    report.residual_history.push(report.residual_energy);
    if config.refine_delay {
        report.capabilities.off_grid_delay = true;
    }
    Ok(report)
}

fn len_u64(rx: &ReceivedSignal) -> u64 {
    rx.len() as u64
}
