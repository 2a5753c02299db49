use super::{EstimateReport, EstimatorError};
use crate::dsp;
use crate::scene::{ReceivedSignal, Target};
use crate::waveform::{demap_symbols, ModulationLayout, Waveform};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Recovers the data bits of `u` from `rx` given a channel estimate.
///
/// The strongest estimated path is used for single-carrier PSK: its Doppler
/// is removed, its delay undone, and each symbol is matched-filtered with the
/// rectangular pulse and hard-decided after phase correction. For OFDM every
/// estimated path contributes to a one-tap equalizer per subcarrier and
/// symbol. An empty estimate stands for the identity channel.
pub fn demodulate(rx: &ReceivedSignal, u: &Waveform, estimate: &EstimateReport) -> Result<Vec<u8>, EstimatorError> {
    if (rx.sample_rate - u.sample_rate()).abs() > 1e-9 * u.sample_rate() {
        return Err(EstimatorError::SampleRate { rx: rx.sample_rate, waveform: u.sample_rate() });
    }
    let identity = [Target { amplitude: Complex64::new(1.0, 0.0), delay: 0.0, doppler: 0.0 }];
    let paths: &[Target] = if estimate.targets.is_empty() { &identity } else { &estimate.targets };
    match u.layout() {
        ModulationLayout::SingleCarrierPsk { bits_per_symbol, oversampling, data_bits } => {
            let main = paths
                .iter()
                .max_by(|a, b| a.amplitude.norm_sqr().total_cmp(&b.amplitude.norm_sqr()))
                .copied()
                .expect("nonempty");
            let fs = rx.sample_rate;
            let mut z = rx.samples.clone();
            dsp::apply_doppler(&mut z, -main.doppler, fs);
            let len = z.len();
            let aligned = dsp::delayed(&z, -main.delay * fs, len);
            let n_sym = data_bits.len() / bits_per_symbol;
            let g = 1.0 / (*oversampling as f64).sqrt();
            let rot = main.amplitude.conj();
            let stats: Vec<Complex64> = (0..n_sym)
                .map(|i| {
                    let s: Complex64 = (i * oversampling..(i + 1) * oversampling)
                        .map(|n| aligned.get(n).copied().unwrap_or_default())
                        .sum();
                    s * g * rot
                })
                .collect();
            Ok(demap_symbols(&stats, *bits_per_symbol))
        }
        ModulationLayout::Ofdm(layout) => {
            let k = layout.num_subcarriers;
            let fs = rx.sample_rate;
            let grid = layout.demodulate_grid(&rx.samples);
            let data: Vec<Complex64> = layout
                .data_cells()
                .into_iter()
                .map(|cell| {
                    let (m, c) = (cell / k, cell % k);
                    let t = (m * layout.symbol_len() + layout.cp_len) as f64 / fs;
                    let f = c as f64 * fs / k as f64;
                    let h: Complex64 = paths
                        .iter()
                        .map(|p| {
                            p.amplitude * Complex64::from_polar(1.0, 2.0 * PI * (p.doppler * t - f * p.delay))
                        })
                        .sum();
                    grid[cell] * h.conj()
                })
                .collect();
            Ok(demap_symbols(&data, layout.bits_per_symbol))
        }
        other => Err(EstimatorError::Layout(format!("no data carried by a {other:?} waveform"))),
    }
}
