//! Uniformly sampled waveform containers.
//!
//! `ComplexWaveform` and `RealWaveform` are the currency of every DSP stage:
//! a sample vector plus an explicit sample rate. Amplitudes are dimensionless;
//! physical scaling is carried by explicit parameters at module boundaries.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex baseband / analytic signal with an explicit sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexWaveform {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

/// Real-valued signal with an explicit sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RealWaveform {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::parameter(format!(
            "sample rate must be positive and finite, got {rate}"
        )));
    }
    Ok(())
}

impl ComplexWaveform {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        check_rate(sample_rate_hz)?;
        if samples.is_empty() {
            return Err(Error::parameter("waveform must hold at least one sample"));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::parameter("waveform contains non-finite samples"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean of |x|^2.
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Real part as a `RealWaveform`.
    pub fn real_part(&self) -> RealWaveform {
        RealWaveform {
            samples: self.samples.iter().map(|s| s.re).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Truncate to `len` samples (no-op if already shorter).
    pub fn truncate(&mut self, len: usize) {
        if len >= 1 {
            self.samples.truncate(len);
        }
    }
}

impl RealWaveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        check_rate(sample_rate_hz)?;
        if samples.is_empty() {
            return Err(Error::parameter("waveform must hold at least one sample"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::parameter("waveform contains non-finite samples"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        self.mean_power().sqrt()
    }

    /// Promote to a complex waveform with zero imaginary part.
    pub fn to_complex(&self) -> ComplexWaveform {
        ComplexWaveform {
            samples: self
                .samples
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Subtract the sample mean (AC coupling).
    pub fn remove_dc(&mut self) {
        let mean = self.samples.iter().sum::<f64>() / self.samples.len() as f64;
        for s in &mut self.samples {
            *s -= mean;
        }
    }

    pub fn truncate(&mut self, len: usize) {
        if len >= 1 {
            self.samples.truncate(len);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rate_and_empty() {
        assert!(ComplexWaveform::new(vec![Complex64::new(1.0, 0.0)], 0.0).is_err());
        assert!(RealWaveform::new(vec![], 1.0).is_err());
        assert!(RealWaveform::new(vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn mean_power_matches_hand_value() {
        let w = RealWaveform::new(vec![1.0, -1.0, 1.0, -1.0], 10.0).unwrap();
        assert_eq!(w.mean_power(), 1.0);
        assert_eq!(w.duration_s(), 0.4);
    }
}
