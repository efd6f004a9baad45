//! Complex frequency translation.

use num_complex::Complex64;
use std::f64::consts::TAU;

use super::waveform::ComplexWaveform;

/// Multiply sample n by exp(+j 2 pi f_c n / fs). Exactly invertible by
/// shifting with -f_c; preserves power since the multiplier has unit modulus.
pub fn frequency_shift(x: &ComplexWaveform, f_c_hz: f64) -> ComplexWaveform {
    if f_c_hz == 0.0 {
        return x.clone();
    }
    let step = f_c_hz / x.sample_rate_hz();
    let out: Vec<Complex64> = x
        .samples()
        .iter()
        .enumerate()
        .map(|(n, &s)| {
            // Keep the phase argument small for precision on long records.
            let phase = TAU * (n as f64 * step).fract();
            s * Complex64::new(phase.cos(), phase.sin())
        })
        .collect();
    ComplexWaveform::new(out, x.sample_rate_hz()).expect("shift preserves validity")
}
