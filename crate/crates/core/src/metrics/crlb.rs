use super::MetricError;
use crate::{dsp, seed};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

/// Data model `p(y | theta)` for the numeric Fisher information.
pub trait LikelihoodModel {
    type Data;

    fn dim(&self) -> usize;

    /// Draws one data record at `theta`.
    fn draw(&self, theta: &[f64], rng: &mut ChaCha20Rng) -> Self::Data;

    /// `ln p(data | theta)`, up to a theta-independent constant.
    fn log_likelihood(&self, data: &Self::Data, theta: &[f64]) -> f64;

    /// Typical magnitude of each coordinate; finite-difference steps are
    /// `rel_step * max(|theta_i|, scale_i)`.
    fn scales(&self) -> Vec<f64> {
        vec![1.0; self.dim()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrlbConfig {
    pub trials: usize,
    pub rel_step: f64,
    /// Overrides [`LikelihoodModel::scales`].
    pub scales: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for CrlbConfig {
    fn default() -> Self {
        Self { trials: 1000, rel_step: 1e-5, scales: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrlbResult {
    /// Monte Carlo average of the negative log-likelihood Hessian.
    pub fisher: DMatrix<f64>,
    /// Inverse of `fisher`.
    pub bound: DMatrix<f64>,
    /// Condition number of the Fisher matrix after scaling coordinate `i`
    /// by `scale_i`.
    pub condition: f64,
}

const MAX_CONDITION: f64 = 1e12;

fn hessian<M: LikelihoodModel>(model: &M, data: &M::Data, theta: &[f64], h: &[f64]) -> DMatrix<f64> {
    let d = theta.len();
    let f = |shifts: &[(usize, f64)]| {
        let mut t = theta.to_vec();
        for &(i, s) in shifts {
            t[i] += s;
        }
        model.log_likelihood(data, &t)
    };
    let f0 = f(&[]);
    let mut hm = DMatrix::zeros(d, d);
    for i in 0..d {
        hm[(i, i)] = (f(&[(i, h[i])]) - 2.0 * f0 + f(&[(i, -h[i])])) / (h[i] * h[i]);
        for j in 0..i {
            let v = (f(&[(i, h[i]), (j, h[j])]) - f(&[(i, h[i]), (j, -h[j])]) - f(&[(i, -h[i]), (j, h[j])])
                + f(&[(i, -h[i]), (j, -h[j])]))
                / (4.0 * h[i] * h[j]);
            hm[(i, j)] = v;
            hm[(j, i)] = v;
        }
    }
    hm
}

/// Cramer-Rao bound from the Monte Carlo averaged negative Hessian of the
/// log-likelihood of the data given the parameters, by central differences.
pub fn crlb_numeric<M: LikelihoodModel>(model: &M, theta0: &[f64], config: &CrlbConfig) -> Result<CrlbResult, MetricError> {
    let d = model.dim();
    if theta0.len() != d {
        return Err(MetricError::LayoutMismatch(format!("theta has {} entries, model {d}", theta0.len())));
    }
    if config.trials == 0 || !(config.rel_step > 0.0) {
        return Err(MetricError::Invalid("need at least one trial and a positive step".into()));
    }
    let scales = config.scales.clone().unwrap_or_else(|| model.scales());
    if scales.len() != d {
        return Err(MetricError::LayoutMismatch(format!("{} scales for {d} parameters", scales.len())));
    }
    let h: Vec<f64> = theta0.iter().zip(&scales).map(|(t, s)| config.rel_step * t.abs().max(*s)).collect();
    let mut fisher = DMatrix::<f64>::zeros(d, d);
    for trial in 0..config.trials {
        let mut rng = seed::rng(seed::derive(config.seed, trial as u64, "crlb"));
        let data = model.draw(theta0, &mut rng);
        fisher -= hessian(model, &data, theta0, &h);
    }
    fisher /= config.trials as f64;
    let fisher = (&fisher + fisher.transpose()) * 0.5;
    // condition of the Fisher matrix in scale-normalized coordinates, so
    // that mixing seconds with unit amplitudes does not count as singular
    let normalized = DMatrix::from_fn(d, d, |i, j| fisher[(i, j)] * scales[i] * scales[j]);
    let eig = SymmetricEigen::new(normalized);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(MetricError::SingularFisher { cond: condition });
    }
    let inv = fisher.clone().try_inverse().ok_or(MetricError::SingularFisher { cond: condition })?;
    let bound = (&inv + inv.transpose()) * 0.5;
    Ok(CrlbResult { fisher, bound, condition })
}

/// `n` i.i.d. samples `N(theta, sigma^2)`; one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeanModel {
    pub n: usize,
    pub sigma: f64,
}

impl LikelihoodModel for GaussianMeanModel {
    type Data = Vec<f64>;

    fn dim(&self) -> usize {
        1
    }

    fn draw(&self, theta: &[f64], rng: &mut ChaCha20Rng) -> Vec<f64> {
        let g = Normal::new(theta[0], self.sigma).expect("sigma > 0");
        (0..self.n).map(|_| g.sample(rng)).collect()
    }

    fn log_likelihood(&self, data: &Vec<f64>, theta: &[f64]) -> f64 {
        let s2 = self.sigma * self.sigma;
        -data.iter().map(|x| (x - theta[0]).powi(2)).sum::<f64>() / (2.0 * s2)
    }

    fn scales(&self) -> Vec<f64> {
        vec![self.sigma]
    }
}

/// Reparametrization `theta' = factor * theta` of another model.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled<M> {
    pub inner: M,
    pub factor: f64,
}

impl<M: LikelihoodModel> Rescaled<M> {
    fn back(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|t| t / self.factor).collect()
    }
}

impl<M: LikelihoodModel> LikelihoodModel for Rescaled<M> {
    type Data = M::Data;

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn draw(&self, theta: &[f64], rng: &mut ChaCha20Rng) -> M::Data {
        self.inner.draw(&self.back(theta), rng)
    }

    fn log_likelihood(&self, data: &M::Data, theta: &[f64]) -> f64 {
        self.inner.log_likelihood(data, &self.back(theta))
    }

    fn scales(&self) -> Vec<f64> {
        self.inner.scales().iter().map(|s| s * self.factor.abs()).collect()
    }
}

/// One path `y = h s(tau) + n` with `n ~ CN(0, noise_variance)` per sample,
/// `s(tau)` the probe delayed by `tau` seconds over `len` samples.
/// Parameters `(Re h, Im h, tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleTargetDelayModel {
    pub probe: Vec<Complex64>,
    pub sample_rate: f64,
    pub len: usize,
    pub noise_variance: f64,
}

impl SingleTargetDelayModel {
    pub fn mean(&self, theta: &[f64]) -> Vec<Complex64> {
        let h = Complex64::new(theta[0], theta[1]);
        let mut s = dsp::path_response(&self.probe, theta[2], 0.0, self.sample_rate, self.len);
        s.iter_mut().for_each(|v| *v *= h);
        s
    }
}

impl LikelihoodModel for SingleTargetDelayModel {
    type Data = Vec<Complex64>;

    fn dim(&self) -> usize {
        3
    }

    fn draw(&self, theta: &[f64], rng: &mut ChaCha20Rng) -> Vec<Complex64> {
        self.mean(theta)
            .into_iter()
            .map(|m| m + dsp::complex_normal(rng, self.noise_variance))
            .collect()
    }

    fn log_likelihood(&self, data: &Vec<Complex64>, theta: &[f64]) -> f64 {
        let m = self.mean(theta);
        -data.iter().zip(&m).map(|(y, s)| (y - s).norm_sqr()).sum::<f64>() / self.noise_variance
    }

    fn scales(&self) -> Vec<f64> {
        vec![1.0, 1.0, 1.0 / self.sample_rate]
    }
}
