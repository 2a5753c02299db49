//! Phase and unit conventions shared by every module.
//!
//! The delay-Doppler response is written with positive exponents in both
//! variables:
//!
//! ```text
//! g(t, f) = sum_p h_p * exp(+j 2 pi t nu_p) * exp(+j 2 pi f tau_p)
//! ```
//!
//! The time-domain channel applies the delay to the waveform,
//! `h_p * u(t - tau_p) * exp(+j 2 pi nu_p t)`, with Doppler acting at the
//! channel output (after the delay). Energies are continuous-time energies,
//! `E = Ts * sum |u[n]|^2`, and noise PSDs are in W/Hz so a flat PSD `N0`
//! produces a per-sample complex variance of `N0 * fs`.

/// Sign of the exponent multiplying `t * nu_p` in the delay-Doppler response.
pub const DOPPLER_PHASE_SIGN: f64 = 1.0;

/// Sign of the exponent multiplying `f * tau_p` in the delay-Doppler response.
pub const DELAY_PHASE_SIGN: f64 = 1.0;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to dB.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Converts nats to bits.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    // rem_euclid maps -pi to pi already; keep the half-open interval
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}
