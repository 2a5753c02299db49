use super::MetricError;
use crate::dsp;
use crate::waveform::Waveform;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Delay axis in whole samples and Doppler axis in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityGrid {
    pub lags: Vec<i64>,
    pub dopplers: Vec<f64>,
}

impl AmbiguityGrid {
    pub fn new(lags: Vec<i64>, dopplers: Vec<f64>) -> Result<Self, MetricError> {
        if lags.is_empty() || dopplers.is_empty() {
            return Err(MetricError::Grid("both axes need at least one point".into()));
        }
        if dopplers.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::Grid("Doppler values must be finite".into()));
        }
        Ok(Self { lags, dopplers })
    }

    /// Every lag `-(N-1)..=N-1` and `N` Doppler cells covering `[-fs/2, fs/2)`;
    /// on this grid the weighted volume equals the squared energy exactly.
    pub fn full(u: &Waveform) -> Self {
        let n = u.len() as i64;
        let fs = u.sample_rate();
        let m = u.len().max(1);
        Self {
            lags: (-(n - 1)..n).collect(),
            dopplers: (0..m).map(|k| -fs / 2.0 + k as f64 * fs / m as f64).collect(),
        }
    }

    /// All lags with only the zero-Doppler row.
    pub fn zero_doppler(u: &Waveform) -> Self {
        let n = u.len() as i64;
        Self { lags: (-(n - 1)..n).collect(), dopplers: vec![0.0] }
    }
}

/// `|A(nu, tau)|` with rows indexed by Doppler and columns by lag.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityMap {
    pub grid: AmbiguityGrid,
    pub values: DMatrix<f64>,
    pub sample_rate: f64,
    pub flops: u64,
}

impl AmbiguityMap {
    pub fn at(&self, doppler_idx: usize, lag_idx: usize) -> f64 {
        self.values[(doppler_idx, lag_idx)]
    }

    pub fn lag_seconds(&self) -> Vec<f64> {
        self.grid.lags.iter().map(|l| *l as f64 / self.sample_rate).collect()
    }

    /// Position `(doppler_idx, lag_idx)` of the largest value.
    pub fn peak(&self) -> (usize, usize) {
        self.values.iamax_full()
    }

    /// `sum |A|^2 dnu dtau` with `dtau = Ts` and `dnu` the Doppler spacing
    /// (`fs` for a single Doppler row).
    pub fn volume(&self) -> f64 {
        let d = &self.grid.dopplers;
        let dnu = if d.len() > 1 { (d[d.len() - 1] - d[0]) / (d.len() - 1) as f64 } else { self.sample_rate };
        self.values.iter().map(|v| v * v).sum::<f64>() * dnu.abs() / self.sample_rate
    }

    /// Largest value outside the mainlobe cell region `|lag| <= exclude_lags`
    /// of the zero-Doppler row's neighbourhood, relative to the peak, in dB.
    pub fn peak_sidelobe_db(&self, exclude_lags: i64, exclude_dopplers: f64) -> f64 {
        let peak = self.values.max();
        let mut side = 0.0f64;
        for (i, nu) in self.grid.dopplers.iter().enumerate() {
            for (j, l) in self.grid.lags.iter().enumerate() {
                if l.abs() <= exclude_lags && nu.abs() <= exclude_dopplers {
                    continue;
                }
                side = side.max(self.values[(i, j)]);
            }
        }
        20.0 * (side / peak).log10()
    }
}

/// `|A(nu, tau)| = |Ts sum_n u[n] e^{j 2 pi nu n Ts} u*[n - tau]|`.
///
/// Each Doppler row is one zero-padded FFT cross-correlation over all lags.
pub fn ambiguity(u: &Waveform, grid: &AmbiguityGrid) -> Result<AmbiguityMap, MetricError> {
    let n = u.len();
    let fs = u.sample_rate();
    if n == 0 {
        return Err(MetricError::Grid("empty waveform".into()));
    }
    if let Some(l) = grid.lags.iter().find(|l| l.unsigned_abs() as usize >= n) {
        return Err(MetricError::Grid(format!("lag {l} outside the {n}-sample support")));
    }
    if let Some(v) = grid.dopplers.iter().find(|v| v.abs() > fs / 2.0) {
        return Err(MetricError::Grid(format!("Doppler {v} Hz beyond fs/2")));
    }
    let ts = 1.0 / fs;
    let len = (2 * n - 1).next_power_of_two();
    let mut ref_spec = vec![Complex64::default(); len];
    ref_spec[..n].copy_from_slice(u.samples());
    dsp::fft(&mut ref_spec);
    let mut values = DMatrix::zeros(grid.dopplers.len(), grid.lags.len());
    let mut buf = vec![Complex64::default(); len];
    for (i, nu) in grid.dopplers.iter().enumerate() {
        buf.iter_mut().for_each(|x| *x = Complex64::default());
        for (k, x) in u.samples().iter().enumerate() {
            buf[k] = x * Complex64::from_polar(1.0, 2.0 * PI * nu * k as f64 * ts);
        }
        dsp::fft(&mut buf);
        for (b, r) in buf.iter_mut().zip(&ref_spec) {
            *b *= r.conj();
        }
        dsp::ifft(&mut buf);
        for (j, l) in grid.lags.iter().enumerate() {
            let idx = if *l >= 0 { *l as usize } else { len - l.unsigned_abs() as usize };
            values[(i, j)] = ts * buf[idx].norm();
        }
    }
    let rows = grid.dopplers.len() as u64;
    let flops = dsp::fft_cost(len) * (2 * rows + 1) + rows * (n + len) as u64;
    Ok(AmbiguityMap { grid: grid.clone(), values, sample_rate: fs, flops })
}

/// Full -3 dB mainlobe width (seconds) of the zero-Doppler cut, with the
/// half-power crossings placed by linear interpolation of `|A|`.
pub fn zero_doppler_width(map: &AmbiguityMap) -> Result<f64, MetricError> {
    let row = map
        .grid
        .dopplers
        .iter()
        .position(|v| *v == 0.0)
        .ok_or_else(|| MetricError::Grid("no zero-Doppler row".into()))?;
    let lags = &map.grid.lags;
    if lags.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(MetricError::Grid("zero-Doppler width needs consecutive lags".into()));
    }
    let center = lags.iter().position(|l| *l == 0).ok_or_else(|| MetricError::Grid("no zero lag".into()))?;
    let cut: Vec<f64> = (0..lags.len()).map(|j| map.values[(row, j)]).collect();
    let level = cut[center] / std::f64::consts::SQRT_2;
    let crossing = |step: isize| -> Result<f64, MetricError> {
        let mut j = center as isize;
        loop {
            let next = j + step;
            if next < 0 || next as usize >= cut.len() {
                return Err(MetricError::Grid("mainlobe does not fall to -3 dB inside the lag window".into()));
            }
            let (a, b) = (cut[j as usize], cut[next as usize]);
            if b < level {
                let frac = (a - level) / (a - b);
                return Ok((j as f64 - center as f64 + step as f64 * frac).abs());
            }
            j = next;
        }
    };
    Ok((crossing(-1)? + crossing(1)?) / map.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::generate_chirp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct double loop over the definition.
    fn brute(u: &[Complex64], fs: f64, lag: i64, nu: f64) -> f64 {
        let ts = 1.0 / fs;
        let mut acc = Complex64::default();
        for (k, x) in u.iter().enumerate() {
            let m = k as i64 - lag;
            if m < 0 || m as usize >= u.len() {
                continue;
            }
            acc += x * Complex64::from_polar(1.0, 2.0 * PI * nu * k as f64 * ts) * u[m as usize].conj();
        }
        ts * acc.norm()
    }

    fn random_waveform(seed: u64, n: usize, fs: f64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        Waveform::from_samples(s, fs).unwrap()
    }

    #[test]
    fn fft_map_matches_brute_force() {
        let u = random_waveform(1, 37, 100.0);
        let grid = AmbiguityGrid::new(vec![-36, -5, 0, 3, 36], vec![-50.0, -7.3, 0.0, 12.5]).unwrap();
        let map = ambiguity(&u, &grid).unwrap();
        for (i, nu) in grid.dopplers.iter().enumerate() {
            for (j, l) in grid.lags.iter().enumerate() {
                let b = brute(u.samples(), 100.0, *l, *nu);
                assert!((map.at(i, j) - b).abs() < 1e-12, "{l} {nu}");
            }
        }
    }

    #[test]
    fn origin_is_energy_and_peak() {
        let u = random_waveform(2, 64, 1e3);
        let map = ambiguity(&u, &AmbiguityGrid::full(&u)).unwrap();
        let (pi, pj) = map.peak();
        assert_eq!(map.grid.dopplers[pi], 0.0);
        assert_eq!(map.grid.lags[pj], 0);
        assert!((map.at(pi, pj) - u.energy()).abs() < 1e-9 * u.energy());
        assert!(map.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn volume_equals_squared_energy() {
        for u in [random_waveform(3, 50, 2e3), generate_chirp(1e3, 0.05, 2e3).unwrap()] {
            let map = ambiguity(&u, &AmbiguityGrid::full(&u)).unwrap();
            let e = u.energy();
            assert!((map.volume() - e * e).abs() < 1e-9 * e * e);
        }
    }

    #[test]
    fn rectangular_cut_is_triangular() {
        let n = 40;
        let fs = 1e3;
        let u = Waveform::from_samples(vec![Complex64::new(1.0, 0.0); n], fs).unwrap();
        let map = ambiguity(&u, &AmbiguityGrid::zero_doppler(&u)).unwrap();
        let e = u.energy();
        for (j, l) in map.grid.lags.iter().enumerate() {
            let tri = e * (1.0 - l.abs() as f64 / n as f64);
            assert!((map.at(0, j) - tri).abs() < 1e-6 * e);
            assert!((map.at(0, j) - brute(u.samples(), fs, *l, 0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn global_phase_does_not_change_the_map() {
        let u = random_waveform(4, 45, 1.0);
        let grid = AmbiguityGrid::full(&u);
        let base = ambiguity(&u, &grid).unwrap();
        // negation commutes exactly with every FFT butterfly
        let flipped = Waveform::from_samples(u.samples().iter().map(|x| -x).collect(), 1.0).unwrap();
        assert_eq!(ambiguity(&flipped, &grid).unwrap().values, base.values);
        let r = Complex64::from_polar(1.0, 0.731);
        let rot = Waveform::from_samples(u.samples().iter().map(|x| x * r).collect(), 1.0).unwrap();
        let m = ambiguity(&rot, &grid).unwrap();
        let scale = base.values.max();
        assert!(m.values.iter().zip(base.values.iter()).all(|(a, b)| (a - b).abs() <= 1e-12 * scale));
    }

    #[test]
    fn chirp_mainlobe_width_is_near_inverse_bandwidth() {
        let (b, fs) = (1e6, 16e6);
        let u = generate_chirp(b, 100e-6, fs).unwrap();
        let map = ambiguity(&u, &AmbiguityGrid::zero_doppler(&u)).unwrap();
        let w = zero_doppler_width(&map).unwrap();
        // sinc-shaped compressed pulse: -3 dB full width 0.886 / B
        assert!((w * b - 0.886).abs() < 0.0886, "{}", w * b);
        assert!((w * b - 1.0).abs() < 0.15, "{}", w * b);
    }

    #[test]
    fn out_of_window_grids_are_rejected() {
        let u = random_waveform(5, 8, 10.0);
        assert!(ambiguity(&u, &AmbiguityGrid::new(vec![8], vec![0.0]).unwrap()).is_err());
        assert!(ambiguity(&u, &AmbiguityGrid::new(vec![0], vec![6.0]).unwrap()).is_err());
        assert!(AmbiguityGrid::new(vec![], vec![0.0]).is_err());
    }
}
