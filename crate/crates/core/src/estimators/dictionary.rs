use super::EstimatorError;
use crate::dsp;
use crate::scene::ChannelWindow;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Delay-Doppler hypothesis grid. Atoms are the unit-norm noiseless responses
/// of a probe waveform to a single unit target at each grid cell; they are
/// built on demand rather than stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    delays: Vec<f64>,
    dopplers: Vec<f64>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

impl Dictionary {
    pub fn new(delays: Vec<f64>, dopplers: Vec<f64>) -> Result<Self, EstimatorError> {
        if delays.is_empty() || dopplers.is_empty() {
            return Err(EstimatorError::Grid("delay and doppler grids must be nonempty".into()));
        }
        if !strictly_increasing(&delays) || !strictly_increasing(&dopplers) {
            return Err(EstimatorError::Grid("grids must be finite and strictly increasing".into()));
        }
        if delays[0] < 0.0 {
            return Err(EstimatorError::Grid(format!("negative delay {} in grid", delays[0])));
        }
        Ok(Self { delays, dopplers })
    }

    /// `n_delay` delays from `delay_start` in steps of `delay_step`, likewise
    /// for Doppler.
    pub fn uniform(
        delay_start: f64,
        delay_step: f64,
        n_delay: usize,
        doppler_start: f64,
        doppler_step: f64,
        n_doppler: usize,
    ) -> Result<Self, EstimatorError> {
        Self::new(
            (0..n_delay).map(|i| delay_start + i as f64 * delay_step).collect(),
            (0..n_doppler).map(|j| doppler_start + j as f64 * doppler_step).collect(),
        )
    }

    /// Integer-sample delays `0..n_delay` and Doppler bins `j * fs / len`
    /// for `j` in `-(n_doppler / 2)..` (the natural grid of a length-`len`
    /// correlator).
    pub fn sample_grid(fs: f64, len: usize, n_delay: usize, n_doppler: usize) -> Result<Self, EstimatorError> {
        let dnu = fs / len as f64;
        let j0 = -((n_doppler / 2) as f64);
        Self::uniform(0.0, 1.0 / fs, n_delay, j0 * dnu, dnu, n_doppler)
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn dopplers(&self) -> &[f64] {
        &self.dopplers
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.delays.len() * self.dopplers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(delay index, doppler index)` of flat atom index `a` (delay-major).
    pub fn cell(&self, a: usize) -> (usize, usize) {
        (a / self.dopplers.len(), a % self.dopplers.len())
    }

    pub fn check_window(&self, window: &ChannelWindow) -> Result<(), EstimatorError> {
        let dmax = *self.delays.last().unwrap();
        if dmax > window.max_delay * (1.0 + 1e-12) {
            return Err(EstimatorError::Grid(format!(
                "delay grid reaches {dmax} s beyond the unambiguous window {} s",
                window.max_delay
            )));
        }
        let nu = self.dopplers[0].abs().max(self.dopplers.last().unwrap().abs());
        if nu > window.max_doppler() * (1.0 + 1e-12) {
            return Err(EstimatorError::Grid(format!(
                "doppler grid reaches {nu} Hz beyond +/-{} Hz",
                window.max_doppler()
            )));
        }
        Ok(())
    }

    /// Unnormalized response of `probe` to a unit target at cell `(i, j)`.
    pub fn response(&self, probe: &[Complex64], fs: f64, i: usize, j: usize, len: usize) -> Vec<Complex64> {
        dsp::path_response(probe, self.delays[i], self.dopplers[j], fs, len)
    }

    /// Unit-norm atom for cell `(i, j)` and the norm it was divided by.
    pub fn atom(&self, probe: &[Complex64], fs: f64, i: usize, j: usize, len: usize) -> (Vec<Complex64>, f64) {
        let mut a = self.response(probe, fs, i, j, len);
        let norm = dsp::energy(&a).sqrt();
        if norm > 0.0 {
            a.iter_mut().for_each(|v| *v /= norm);
        }
        (a, norm)
    }

    /// Largest `|<a_i, a_j>|` over distinct atom pairs.
    pub fn coherence(&self, probe: &[Complex64], fs: f64, len: usize) -> f64 {
        let atoms: Vec<Vec<Complex64>> = (0..self.len())
            .map(|a| {
                let (i, j) = self.cell(a);
                self.atom(probe, fs, i, j, len).0
            })
            .collect();
        let mut mu: f64 = 0.0;
        for a in 0..atoms.len() {
            for b in a + 1..atoms.len() {
                let ip: Complex64 = atoms[a].iter().zip(&atoms[b]).map(|(x, y)| x.conj() * y).sum();
                mu = mu.max(ip.norm());
            }
        }
        mu
    }
}
