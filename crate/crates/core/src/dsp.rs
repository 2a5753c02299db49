//! Small FFT and signal helpers shared by the channel, estimators and metrics.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Tolerance (in samples) under which a delay is treated as an integer shift.
const INTEGER_DELAY_TOL: f64 = 1e-9;

pub(crate) fn fft(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// Inverse FFT including the `1/L` normalization.
pub(crate) fn ifft(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|x| *x *= s);
}

/// Signed frequency (Hz) of FFT bin `k` for a length-`len` transform.
pub(crate) fn bin_frequency(k: usize, len: usize, fs: f64) -> f64 {
    let ks = if 2 * k >= len { k as f64 - len as f64 } else { k as f64 };
    ks * fs / len as f64
}

/// Cost in counted operations of a length-`len` FFT (`L log2 L`).
pub(crate) fn fft_cost(len: usize) -> u64 {
    if len < 2 {
        return len as u64;
    }
    (len as f64 * (len as f64).log2()).ceil() as u64
}

pub(crate) fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// Returns `u` delayed by `delay_samples` inside a zero-padded buffer of
/// `out_len` samples. Integer delays shift directly; fractional delays are
/// applied as a band-limited phase ramp over the padded length, so the
/// result is a circular shift of the padded signal.
pub(crate) fn delayed(u: &[Complex64], delay_samples: f64, out_len: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];
    let rounded = delay_samples.round();
    if (delay_samples - rounded).abs() < INTEGER_DELAY_TOL {
        let d = rounded as i64;
        for (n, &v) in u.iter().enumerate() {
            let m = (n as i64 + d).rem_euclid(out_len as i64) as usize;
            out[m] += v;
        }
        return out;
    }
    let take = u.len().min(out_len);
    out[..take].copy_from_slice(&u[..take]);
    fft(&mut out);
    for (k, v) in out.iter_mut().enumerate() {
        *v *= delay_phase(k, out_len, delay_samples);
    }
    ifft(&mut out);
    out
}

/// Frequency-domain factor applied to bin `k` of a length-`len` transform by
/// a delay of `d` samples. The Nyquist bin of an even length is split
/// symmetrically between +/- 1/2 cycles/sample, leaving `cos(pi d)`.
pub(crate) fn delay_phase(k: usize, len: usize, d: f64) -> Complex64 {
    if len % 2 == 0 && 2 * k == len {
        return Complex64::new((PI * d).cos(), 0.0);
    }
    let f = bin_frequency(k, len, 1.0);
    Complex64::from_polar(1.0, -2.0 * PI * f * d)
}

/// Noiseless single-path response: `u` delayed by `delay` seconds and
/// Doppler-shifted by `doppler` Hz over `out_len` samples.
pub(crate) fn path_response(u: &[Complex64], delay: f64, doppler: f64, fs: f64, out_len: usize) -> Vec<Complex64> {
    let mut x = delayed(u, delay * fs, out_len);
    apply_doppler(&mut x, doppler, fs);
    x
}

/// Multiplies `x[n]` by `exp(+j 2 pi nu n / fs)` in place.
pub(crate) fn apply_doppler(x: &mut [Complex64], doppler_hz: f64, fs: f64) {
    if doppler_hz == 0.0 {
        return;
    }
    let w = 2.0 * PI * doppler_hz / fs;
    for (n, v) in x.iter_mut().enumerate() {
        *v *= Complex64::from_polar(1.0, w * n as f64);
    }
}

/// Circularly-symmetric complex Gaussian sample with total variance `var`.
pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}
