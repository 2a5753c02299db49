use super::MetricError;
use crate::scene::{NoiseModel, SensingPrior};
use crate::waveform::Waveform;
use crate::dsp;
use nalgebra::DMatrix;

/// Joint probability mass function over finite alphabets (rows `x`, columns `y`).
#[derive(Debug, Clone, PartialEq)]
pub struct JointPMF {
    p: DMatrix<f64>,
    x_labels: Vec<String>,
    y_labels: Vec<String>,
}

impl JointPMF {
    pub fn new(p: DMatrix<f64>) -> Result<Self, MetricError> {
        let x_labels = (0..p.nrows()).map(|i| format!("x{i}")).collect();
        let y_labels = (0..p.ncols()).map(|j| format!("y{j}")).collect();
        Self::labelled(p, x_labels, y_labels)
    }

    pub fn labelled(p: DMatrix<f64>, x_labels: Vec<String>, y_labels: Vec<String>) -> Result<Self, MetricError> {
        if p.is_empty() {
            return Err(MetricError::InvalidPmf("empty alphabet".into()));
        }
        if x_labels.len() != p.nrows() || y_labels.len() != p.ncols() {
            return Err(MetricError::InvalidPmf("label count does not match the alphabet sizes".into()));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MetricError::InvalidPmf("entries must be finite and nonnegative".into()));
        }
        let s = p.sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(MetricError::InvalidPmf(format!("entries sum to {s}")));
        }
        Ok(Self { p, x_labels, y_labels })
    }

    /// `p(x, y) = p(x) W(y | x)` for a row-stochastic channel `W`.
    pub fn from_channel(input: &[f64], channel: &DMatrix<f64>) -> Result<Self, MetricError> {
        check_channel(channel)?;
        if input.len() != channel.nrows() {
            return Err(MetricError::InvalidPmf(format!(
                "{} input probabilities for {} channel inputs",
                input.len(),
                channel.nrows()
            )));
        }
        let mut p = channel.clone();
        for (mut row, px) in p.row_iter_mut().zip(input) {
            row *= *px;
        }
        Self::new(p)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn x_labels(&self) -> &[String] {
        &self.x_labels
    }

    pub fn y_labels(&self) -> &[String] {
        &self.y_labels
    }

    pub fn transposed(&self) -> Self {
        Self { p: self.p.transpose(), x_labels: self.y_labels.clone(), y_labels: self.x_labels.clone() }
    }
}

/// `I(X; Y)` in nats with `0 ln 0 = 0`.
pub fn mutual_information(pmf: &JointPMF) -> f64 {
    let p = &pmf.p;
    let px: Vec<f64> = p.row_iter().map(|r| r.sum()).collect();
    let py: Vec<f64> = p.column_iter().map(|c| c.sum()).collect();
    let mut mi = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let v = p[(i, j)];
            if v > 0.0 {
                mi += v * (v / (px[i] * py[j])).ln();
            }
        }
    }
    mi.max(0.0)
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}

fn check_channel(w: &DMatrix<f64>) -> Result<(), MetricError> {
    if w.is_empty() {
        return Err(MetricError::NonStochasticChannel("empty channel".into()));
    }
    for (i, row) in w.row_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MetricError::NonStochasticChannel(format!("row {i} has a negative or non-finite entry")));
        }
        let s = row.sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(MetricError::NonStochasticChannel(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    /// Lower bound at termination, nats.
    pub capacity: f64,
    /// Upper bound at termination, nats.
    pub upper_bound: f64,
    pub input_pmf: Vec<f64>,
    pub iterations: usize,
}

/// Blahut-Arimoto iteration for a row-stochastic channel `W(y | x)` (rows
/// are inputs). Stops when the gap between the standard lower and upper
/// capacity bounds drops below `tol` nats or after `max_iter` updates.
pub fn blahut_arimoto(channel: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<CapacityResult, MetricError> {
    check_channel(channel)?;
    let (nx, ny) = channel.shape();
    let mut p = vec![1.0 / nx as f64; nx];
    let mut iterations = 0;
    loop {
        let q: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| p[x] * channel[(x, y)]).sum()).collect();
        let d: Vec<f64> = (0..nx)
            .map(|x| {
                (0..ny)
                    .filter(|&y| channel[(x, y)] > 0.0)
                    .map(|y| channel[(x, y)] * (channel[(x, y)] / q[y]).ln())
                    .sum()
            })
            .collect();
        let dmax = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // shift by dmax before exponentiating to stay in range
        let c: Vec<f64> = d.iter().map(|v| (v - dmax).exp()).collect();
        let z: f64 = p.iter().zip(&c).map(|(a, b)| a * b).sum();
        let lower = dmax + z.ln();
        if dmax - lower < tol || iterations >= max_iter {
            return Ok(CapacityResult { capacity: lower.max(0.0), upper_bound: dmax.max(0.0), input_pmf: p, iterations });
        }
        p = p.iter().zip(&c).map(|(a, b)| a * b / z).collect();
        iterations += 1;
    }
}

/// Capacity with tolerance `tol` nats and at most 10 000 iterations.
pub fn channel_capacity(channel: &DMatrix<f64>, tol: f64) -> Result<CapacityResult, MetricError> {
    blahut_arimoto(channel, tol, 10_000)
}

/// Sensing mutual information between the random impulse response and the
/// received signal given the transmit signal:
/// `T * int_W ln(1 + 2 |U(f)|^2 sigma_g^2(f) / (P_nn(f) T)) df`.
///
/// `|U(f)|^2 = Ts^2 |DFT(u)[k]|^2` on the DFT bins of `u`; the integral runs
/// over the bins inside the waveform band, each weighted by the bin width
/// (the periodic trapezoid rule on the full band).
pub fn conditional_mi(u: &Waveform, prior: &SensingPrior, noise: &NoiseModel, duration: f64) -> Result<f64, MetricError> {
    let (bins, df) = band_spectrum(u);
    mi_integral(&bins, df, u.sample_rate(), prior, noise, duration)
}

/// Conditional MI of a spectrum that spreads the energy of `u` evenly over
/// the DFT bins of its band; the reference used to normalize the sensing term.
pub fn conditional_mi_flat(u: &Waveform, prior: &SensingPrior, noise: &NoiseModel, duration: f64) -> Result<f64, MetricError> {
    let (bins, df) = band_spectrum(u);
    if bins.is_empty() {
        return Ok(0.0);
    }
    let level = u.energy() / (bins.len() as f64 * df);
    let flat: Vec<(f64, f64)> = bins.iter().map(|(f, _)| (*f, level)).collect();
    mi_integral(&flat, df, u.sample_rate(), prior, noise, duration)
}

/// `(f, |U(f)|^2)` on the DFT bins of `u` inside its band, and the bin width.
fn band_spectrum(u: &Waveform) -> (Vec<(f64, f64)>, f64) {
    let fs = u.sample_rate();
    let n = u.len();
    let ts = 1.0 / fs;
    let mut spec = u.samples().to_vec();
    dsp::fft(&mut spec);
    let band = u.band();
    let tol = 1e-9 * fs;
    let bins = spec
        .iter()
        .enumerate()
        .map(|(k, x)| (dsp::bin_frequency(k, n, fs), ts * ts * x.norm_sqr()))
        .filter(|(f, _)| *f >= band.lower - tol && *f <= band.upper + tol)
        .collect();
    (bins, fs / n.max(1) as f64)
}

fn mi_integral(
    bins: &[(f64, f64)],
    df: f64,
    fs: f64,
    prior: &SensingPrior,
    noise: &NoiseModel,
    duration: f64,
) -> Result<f64, MetricError> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(MetricError::Invalid(format!("observation time {duration} must be positive")));
    }
    let mut integral = 0.0;
    for &(f, uu) in bins {
        if uu == 0.0 {
            continue;
        }
        let pnn = if noise.is_enabled() { noise.psd_at(f, fs) } else { 0.0 };
        if pnn <= 0.0 {
            return Err(MetricError::Division { frequency: f });
        }
        integral += (2.0 * uu * prior.at(f, fs) / (pnn * duration)).ln_1p() * df;
    }
    Ok(duration * integral)
}
