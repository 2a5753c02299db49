use super::{bins_in_band, CostLedger, Dictionary, EstimateReport, EstimatorError, EstimatorKind};
use crate::dsp;
use crate::scene::{ReceivedSignal, Target};
use crate::waveform::Waveform;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const MAX_CONDITION: f64 = 1e12;

/// Least-squares coefficients of `b` on the columns of `a`, rejecting
/// ill-conditioned column sets.
pub(crate) fn least_squares(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Result<DVector<Complex64>, EstimatorError> {
    if a.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > MAX_CONDITION {
        return Err(EstimatorError::Rank { cond });
    }
    svd.solve(b, 0.0).map_err(|e| EstimatorError::Invalid(e.to_string()))
}

/// Orthogonal matching pursuit over the probe's unit-norm dictionary atoms.
///
/// Each of the `sparsity` iterations picks the atom most correlated with the
/// residual, re-fits all selected atoms by least squares and updates the
/// residual. Amplitudes are reported on the physical scale (per unit target).
pub fn omp_estimate(
    rx: &ReceivedSignal,
    u: &Waveform,
    dict: &Dictionary,
    sparsity: usize,
) -> Result<EstimateReport, EstimatorError> {
    if (rx.sample_rate - u.sample_rate()).abs() > 1e-9 * u.sample_rate() {
        return Err(EstimatorError::SampleRate { rx: rx.sample_rate, waveform: u.sample_rate() });
    }
    if sparsity > dict.len() {
        return Err(EstimatorError::Invalid(format!(
            "sparsity {sparsity} exceeds the {} dictionary atoms",
            dict.len()
        )));
    }
    dict.check_window(&rx.window)?;
    let len = rx.len();
    let fs = rx.sample_rate;
    let n_atoms = dict.len();
    let mut flops = 0u64;

    let mut atoms = DMatrix::<Complex64>::zeros(len, n_atoms);
    let mut norms = vec![0.0; n_atoms];
    if sparsity > 0 {
        for a in 0..n_atoms {
            let (i, j) = dict.cell(a);
            let (col, norm) = dict.atom(u.samples(), fs, i, j, len);
            atoms.set_column(a, &DVector::from_vec(col));
            norms[a] = norm;
        }
        flops += n_atoms as u64 * (2 * dsp::fft_cost(len) + 3 * len as u64);
    }

    let y = DVector::from_column_slice(&rx.samples);
    let mut residual = y.clone();
    let mut history = vec![residual.norm_squared()];
    let mut selected: Vec<usize> = Vec::with_capacity(sparsity);
    let mut coeffs = DVector::<Complex64>::zeros(0);
    for _ in 0..sparsity {
        let corr = atoms.ad_mul(&residual);
        flops += (len * n_atoms) as u64;
        let best = (0..n_atoms)
            .filter(|a| !selected.contains(a))
            .max_by(|&a, &b| corr[a].norm_sqr().total_cmp(&corr[b].norm_sqr()).then(b.cmp(&a)))
            .expect("sparsity <= atoms");
        selected.push(best);
        let sub = atoms.select_columns(&selected);
        coeffs = least_squares(&sub, &y)?;
        let s = selected.len();
        flops += (len * s * s + s * s * s) as u64;
        residual = &y - &sub * &coeffs;
        flops += (len * s) as u64;
        history.push(residual.norm_squared());
    }

    let targets: Vec<Target> = selected
        .iter()
        .zip(coeffs.iter())
        .map(|(&a, c)| {
            let (i, j) = dict.cell(a);
            Target { amplitude: c / norms[a], delay: dict.delays()[i], doppler: dict.dopplers()[j] }
        })
        .collect();
    let predicted: Vec<Complex64> = (&y - &residual).iter().copied().collect();
    let band = u.band();
    let mut apriori = vec!["delay-doppler grid".to_string()];
    apriori.push("target count P".into());
    let cost = CostLedger {
        flop_count: flops,
        time_samples: len,
        spectral_bins: bins_in_band(len, fs, band.lower, band.upper),
        occupied_bandwidth: band.width(),
        apriori_inputs: apriori,
    };
    Ok(EstimateReport::assemble(EstimatorKind::Omp, targets, &rx.samples, predicted, history, cost))
}
