use super::MetricError;
use serde::{Deserialize, Serialize};
use libm::erfc;

/// Gaussian tail `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// BPSK bit error probability over AWGN, `Q(sqrt(2 Eb/N0))`, for a linear
/// `Eb/N0`.
pub fn ber_theoretical_bpsk(eb_over_n0: f64) -> f64 {
    // Q(sqrt(2x)) = erfc(sqrt x) / 2 avoids the sqrt 2 round trip
    0.5 * erfc(eb_over_n0.max(0.0).sqrt())
}

/// Bit and symbol error tallies of one transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommReport {
    pub bits_transmitted: usize,
    pub bit_errors: usize,
    pub symbols_transmitted: usize,
    pub symbol_errors: usize,
    pub ber: f64,
    pub ser: f64,
    pub eb_over_n0_db: f64,
}

impl CommReport {
    pub fn from_bits(tx: &[u8], rx: &[u8], bits_per_symbol: usize, eb_over_n0_db: f64) -> Result<Self, MetricError> {
        if tx.len() != rx.len() {
            return Err(MetricError::Length(tx.len(), rx.len()));
        }
        if tx.is_empty() || bits_per_symbol == 0 || tx.len() % bits_per_symbol != 0 {
            return Err(MetricError::Invalid("bit count must be a positive multiple of bits per symbol".into()));
        }
        let bit_errors = tx.iter().zip(rx).filter(|(a, b)| a != b).count();
        let symbol_errors = tx.chunks(bits_per_symbol).zip(rx.chunks(bits_per_symbol)).filter(|(a, b)| a != b).count();
        let symbols = tx.len() / bits_per_symbol;
        Ok(Self {
            bits_transmitted: tx.len(),
            bit_errors,
            symbols_transmitted: symbols,
            symbol_errors,
            ber: bit_errors as f64 / tx.len() as f64,
            ser: symbol_errors as f64 / symbols as f64,
            eb_over_n0_db,
        })
    }
}
