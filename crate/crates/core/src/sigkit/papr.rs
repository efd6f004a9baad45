//! Peak-to-average power ratio measurement.

use crate::error::{Error, Result};

/// 10 log10( percentile of |x|^2 / mean of |x|^2 ). `percentile = 100` gives
/// the true peak. Accepts the instantaneous-power sequence so it works for
/// both real and complex waveforms.
pub fn papr_db_from_powers(powers: &[f64], percentile: f64) -> Result<f64> {
    if powers.is_empty() {
        return Err(Error::parameter("papr of an empty signal"));
    }
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::parameter(format!(
            "percentile must lie in (0, 100], got {percentile}"
        )));
    }
    let mean = powers.iter().sum::<f64>() / powers.len() as f64;
    if mean <= 0.0 {
        return Err(Error::parameter("papr of a zero-power signal"));
    }
    let mut sorted = powers.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let idx = if percentile >= 100.0 {
        sorted.len() - 1
    } else {
        // Nearest-rank percentile.
        ((percentile / 100.0 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1
    };
    Ok(10.0 * (sorted[idx] / mean).log10())
}

pub fn measure_papr_real(x: &crate::sigkit::RealWaveform, percentile: f64) -> Result<f64> {
    let p: Vec<f64> = x.samples().iter().map(|v| v * v).collect();
    papr_db_from_powers(&p, percentile)
}

pub fn measure_papr_complex(x: &crate::sigkit::ComplexWaveform, percentile: f64) -> Result<f64> {
    let p: Vec<f64> = x.samples().iter().map(|v| v.norm_sqr()).collect();
    papr_db_from_powers(&p, percentile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigkit::RealWaveform;

    #[test]
    fn constant_amplitude_is_zero_db() {
        let w = RealWaveform::new(vec![0.7; 1000], 1.0).unwrap();
        let papr = measure_papr_real(&w, 100.0).unwrap();
        assert!(papr.abs() < 1e-12);
    }

    #[test]
    fn real_sinusoid_peaks_at_3db() {
        let n = 100_000;
        let w = RealWaveform::new(
            (0..n)
                .map(|i| (std::f64::consts::TAU * i as f64 / n as f64).sin())
                .collect(),
            1.0,
        )
        .unwrap();
        let papr = measure_papr_real(&w, 100.0).unwrap();
        assert!((papr - 3.0103).abs() < 0.01, "papr {papr}");
    }

    #[test]
    fn zero_power_is_an_error() {
        let w = RealWaveform::new(vec![0.0; 16], 1.0).unwrap();
        assert!(measure_papr_real(&w, 100.0).is_err());
    }
}
