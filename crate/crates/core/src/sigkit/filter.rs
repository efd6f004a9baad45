//! FIR taps, square-root raised cosine design, and delay-compensated filtering.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::fft::{fft_in_place, ifft_in_place, next_pow2};
use super::waveform::{ComplexWaveform, RealWaveform};
use crate::error::{Error, Result};

/// Declared gain normalization of a tap set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainNorm {
    /// Tap energy sums to one.
    UnitEnergy,
    /// Taps sum to one.
    UnitDc,
}

/// Default RRC span in symbols. At roll-off 0.01 shorter filters leave the
/// cascaded response with off-peak ISI above the 1e-3 budget.
pub const DEFAULT_RRC_SPAN: usize = 192;

/// Real FIR coefficients with a declared normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTaps {
    coefficients: Vec<f64>,
    norm: GainNorm,
}

impl FilterTaps {
    pub fn new(coefficients: Vec<f64>, norm: GainNorm) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::parameter("filter needs at least one tap"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::parameter("filter taps contain non-finite values"));
        }
        Ok(Self {
            coefficients,
            norm,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn norm(&self) -> GainNorm {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// Unnormalized RRC impulse response at offset `t` (in symbol periods).
fn rrc_point(t: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return if t == 0.0 { 1.0 } else { (PI * t).sin() / (PI * t) };
    }
    if t == 0.0 {
        return 1.0 + beta * (4.0 / PI - 1.0);
    }
    // Singularity of the closed form at |t| = 1/(4 beta); use the limit value.
    let ts = (t.abs() - 1.0 / (4.0 * beta)).abs();
    if ts < 1e-9 {
        let a = PI / (4.0 * beta);
        return (beta / std::f64::consts::SQRT_2)
            * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Design a unit-energy square-root raised cosine filter.
///
/// Length is `span_symbols * samples_per_symbol + 1`, always odd so the
/// group delay is an integer number of samples. The two halves are mirrored
/// from one computation so the taps are exactly symmetric.
pub fn design_rrc(rolloff: f64, span_symbols: usize, samples_per_symbol: usize) -> Result<FilterTaps> {
    if !(0.0..=1.0).contains(&rolloff) || !rolloff.is_finite() {
        return Err(Error::parameter(format!(
            "rolloff must lie in [0, 1], got {rolloff}"
        )));
    }
    if span_symbols == 0 || samples_per_symbol == 0 {
        return Err(Error::parameter("span and samples/symbol must be positive"));
    }
    let half = span_symbols * samples_per_symbol / 2;
    let n = 2 * half + 1;
    let mut taps = vec![0.0; n];
    for k in 0..=half {
        let t = k as f64 / samples_per_symbol as f64;
        let v = rrc_point(t, rolloff);
        taps[half + k] = v;
        taps[half - k] = v;
    }
    let energy: f64 = taps.iter().map(|c| c * c).sum();
    if !(energy.is_finite() && energy > 0.0) {
        return Err(Error::dsp("design_rrc", "non-finite tap energy"));
    }
    let scale = 1.0 / energy.sqrt();
    for c in &mut taps {
        *c *= scale;
    }
    FilterTaps::new(taps, GainNorm::UnitEnergy)
}

/// Full linear convolution of complex samples with real taps.
fn convolve_full(x: &[Complex64], h: &[f64]) -> Vec<Complex64> {
    let out_len = x.len() + h.len() - 1;
    // Direct form for small problems, FFT overlap otherwise.
    if x.len().saturating_mul(h.len()) <= 1 << 18 {
        let mut out = vec![Complex64::new(0.0, 0.0); out_len];
        for (i, &xi) in x.iter().enumerate() {
            for (j, &hj) in h.iter().enumerate() {
                out[i + j] += xi * hj;
            }
        }
        return out;
    }
    let n = next_pow2(out_len);
    let mut fx = vec![Complex64::new(0.0, 0.0); n];
    fx[..x.len()].copy_from_slice(x);
    let mut fh = vec![Complex64::new(0.0, 0.0); n];
    for (dst, &c) in fh.iter_mut().zip(h.iter()) {
        *dst = Complex64::new(c, 0.0);
    }
    fft_in_place(&mut fx);
    fft_in_place(&mut fh);
    for (a, b) in fx.iter_mut().zip(fh.iter()) {
        *a *= b;
    }
    ifft_in_place(&mut fx);
    fx.truncate(out_len);
    fx
}

/// Delay-compensated convolution on complex samples: output index k holds the
/// full convolution at k + (len(h)-1)/2, so the result stays aligned with the
/// input and has the same length.
pub fn filter_complex_samples(x: &[Complex64], h: &FilterTaps) -> Vec<Complex64> {
    let full = convolve_full(x, h.coefficients());
    let delay = (h.len() - 1) / 2;
    full[delay..delay + x.len()].to_vec()
}

/// Delay-compensated FIR filtering of a complex waveform.
pub fn fir_filter(x: &ComplexWaveform, h: &FilterTaps) -> ComplexWaveform {
    let out = filter_complex_samples(x.samples(), h);
    ComplexWaveform::new(out, x.sample_rate_hz()).expect("filtering preserves validity")
}

/// Delay-compensated FIR filtering of a real waveform.
pub fn fir_filter_real(x: &RealWaveform, h: &FilterTaps) -> RealWaveform {
    let cx = x.to_complex();
    let out = filter_complex_samples(cx.samples(), h);
    RealWaveform::new(out.into_iter().map(|c| c.re).collect(), x.sample_rate_hz())
        .expect("filtering preserves validity")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[Complex64], h: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); x.len() + h.len() - 1];
        for (i, &xi) in x.iter().enumerate() {
            for (j, &hj) in h.iter().enumerate() {
                out[i + j] += xi * hj;
            }
        }
        out
    }

    #[test]
    fn rrc_rejects_bad_rolloff() {
        assert!(design_rrc(-0.1, 16, 4).is_err());
        assert!(design_rrc(1.5, 16, 4).is_err());
    }

    #[test]
    fn rrc_is_bit_exact_symmetric_and_unit_energy() {
        for &(beta, span, sps) in &[(0.1, 64, 4), (0.01, 64, 8), (0.35, 16, 4), (0.25, 10, 5)] {
            let taps = design_rrc(beta, span, sps).unwrap();
            let c = taps.coefficients();
            let n = c.len();
            assert_eq!(n % 2, 1);
            for k in 0..n / 2 {
                assert_eq!(c[k].to_bits(), c[n - 1 - k].to_bits(), "beta={beta}");
            }
            let e: f64 = c.iter().map(|v| v * v).sum();
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rolloff_zero_is_sampled_sinc() {
        let sps = 4;
        let taps = design_rrc(0.0, 16, sps).unwrap();
        let c = taps.coefficients();
        let half = c.len() / 2;
        // Compare against an independently normalized sinc.
        let mut sinc: Vec<f64> = (0..c.len())
            .map(|i| {
                let t = (i as f64 - half as f64) / sps as f64;
                if t == 0.0 {
                    1.0
                } else {
                    (PI * t).sin() / (PI * t)
                }
            })
            .collect();
        let e: f64 = sinc.iter().map(|v| v * v).sum();
        let s = 1.0 / e.sqrt();
        for v in &mut sinc {
            *v *= s;
        }
        for (a, b) in c.iter().zip(sinc.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn nyquist_isi_criterion_for_default_plan_rolloffs() {
        // Cascade of two identical RRCs sampled at symbol spacing: the
        // off-peak values must stay below 1e-3 of the peak.
        for &(beta, sps) in &[(0.1, 4), (0.01, 4), (0.1, 12), (0.01, 12)] {
            let taps = design_rrc(beta, DEFAULT_RRC_SPAN, sps).unwrap();
            let h = taps.coefficients();
            let full: Vec<f64> = {
                let x: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                naive_conv(&x, h).into_iter().map(|c| c.re).collect()
            };
            let center = full.len() / 2;
            let peak = full[center];
            let mut k = 1;
            while center + k * sps < full.len() {
                let off = full[center + k * sps].abs() / peak;
                assert!(off < 1e-3, "beta={beta} sps={sps} k={k}: isi {off}");
                k += 1;
            }
        }
    }

    #[test]
    fn impulse_recovers_taps_with_delay_removed() {
        let taps = design_rrc(0.25, 8, 4).unwrap();
        let n = taps.len();
        let mut imp = vec![Complex64::new(0.0, 0.0); n];
        imp[n / 2] = Complex64::new(1.0, 0.0);
        let x = ComplexWaveform::new(imp, 1.0).unwrap();
        let y = fir_filter(&x, &taps);
        // Output at index n/2 + k is h[n/2 + k] (impulse placed at center).
        for (k, &c) in taps.coefficients().iter().enumerate() {
            let idx = k as i64;
            if (0..n as i64).contains(&idx) {
                assert!((y.samples()[idx as usize].re - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_tap_is_identity() {
        let h = FilterTaps::new(vec![1.0], GainNorm::UnitDc).unwrap();
        let x = ComplexWaveform::new(
            (0..32)
                .map(|i| Complex64::new(i as f64, -(i as f64)))
                .collect(),
            1.0,
        )
        .unwrap();
        let y = fir_filter(&x, &h);
        assert_eq!(x.samples(), y.samples());
    }

    #[test]
    fn fft_convolution_matches_naive() {
        // Force the FFT path with a long input.
        let x: Vec<Complex64> = (0..4096)
            .map(|i| {
                let t = i as f64;
                Complex64::new((t * 0.01).sin(), (t * 0.007).cos())
            })
            .collect();
        let h: Vec<f64> = (0..257).map(|i| ((i as f64) * 0.03).cos()).collect();
        let taps = FilterTaps::new(h.clone(), GainNorm::UnitDc).unwrap();
        let fast = convolve_full(&x, taps.coefficients());
        let slow = naive_conv(&x, &h);
        let peak = slow.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).norm() / peak < 1e-12);
        }
    }
}
