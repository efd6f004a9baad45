//! Physical link models: push-pull MZM, dispersive fiber, square-law
//! photodetection, noise injection, and band-limited front ends.
//!
//! The small-signal cascade MZM -> fiber -> photodiode has the classic
//! cosine power-fading response cos(2 pi^2 beta2 L f^2); `propagate_field`
//! keeps the full field so the same cascade also reproduces beating and
//! clipping effects that the small-signal form hides.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sigkit::fft::{fft_freqs, fft_in_place, ifft_in_place};
use crate::sigkit::{ComplexWaveform, RealWaveform};

/// Dispersive fiber segment. beta2 carries its sign; only |beta2 L| enters
/// the small-signal fading because the cosine is even.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FiberParams {
    pub beta2_ps2_per_km: f64,
    pub length_km: f64,
}

impl FiberParams {
    pub fn new(beta2_ps2_per_km: f64, length_km: f64) -> Result<Self> {
        if length_km < 0.0 || !length_km.is_finite() || !beta2_ps2_per_km.is_finite() {
            return Err(Error::parameter("invalid fiber parameters"));
        }
        Ok(Self {
            beta2_ps2_per_km,
            length_km,
        })
    }

    /// Accumulated beta2 * L in s^2.
    pub fn beta2_l_s2(&self) -> f64 {
        self.beta2_ps2_per_km * self.length_km * 1e-24
    }

    /// Frequencies of the first `count` small-signal nulls, from
    /// 2 pi^2 beta2 L f^2 = pi/2 + k pi.
    pub fn null_frequencies_hz(&self, count: usize) -> Vec<f64> {
        let b = self.beta2_l_s2().abs();
        if b == 0.0 {
            return Vec::new();
        }
        (0..count)
            .map(|k| ((2.0 * k as f64 + 1.0) / (4.0 * PI * b)).sqrt())
            .collect()
    }
}

/// Push-pull Mach-Zehnder modulator. The two differential drives collapse to
/// one equivalent drive path; the field transfer is chirp-free (real).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct MzmParams {
    pub v_pi: f64,
    pub bias_v: f64,
    /// Volts per unit waveform amplitude.
    pub drive_scale: f64,
}

impl MzmParams {
    pub fn new(v_pi: f64, bias_v: f64, drive_scale: f64) -> Result<Self> {
        if !(v_pi > 0.0 && v_pi.is_finite()) {
            return Err(Error::parameter("v_pi must be positive"));
        }
        Ok(Self {
            v_pi,
            bias_v,
            drive_scale,
        })
    }
}

/// Noise injection mode.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseMode {
    Off,
    /// ASE loading: complex white Gaussian field noise sized so that
    /// signal power over noise power in the 12.5 GHz (0.1 nm) reference
    /// band equals the target.
    Osnr { osnr_db: f64 },
    /// Received-optical-power operating point: the field is scaled to the
    /// target power and white electrical noise of fixed one-sided density
    /// is added after photodetection (thermal-receiver regime).
    Rop {
        rop_dbm: f64,
        electrical_noise_density: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub mode: NoiseMode,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn off() -> Self {
        Self {
            mode: NoiseMode::Off,
            seed: 0,
        }
    }

    pub fn osnr(osnr_db: f64, seed: u64) -> Self {
        Self {
            mode: NoiseMode::Osnr { osnr_db },
            seed,
        }
    }
}

/// OSNR reference bandwidth: 0.1 nm at 1550 nm.
pub const OSNR_REF_BANDWIDTH_HZ: f64 = 12.5e9;

/// Analog front end: low-pass of the given order (maximally-flat-delay
/// response) plus an optional uniform mid-rise quantizer clipped at
/// `clip_ratio` times the RMS.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FrontEnd {
    pub bandwidth_3db_hz: f64,
    pub order: u32,
    pub resolution_bits: Option<u8>,
    pub clip_ratio: Option<f64>,
}

impl FrontEnd {
    pub fn new(bandwidth_3db_hz: f64, order: u32) -> Result<Self> {
        if !(bandwidth_3db_hz > 0.0) || order == 0 || order > 6 {
            return Err(Error::parameter("front end needs bandwidth > 0, order 1..=6"));
        }
        Ok(Self {
            bandwidth_3db_hz,
            order,
            resolution_bits: None,
            clip_ratio: None,
        })
    }

    pub fn with_quantizer(mut self, bits: u8, clip_ratio: f64) -> Result<Self> {
        if !(4..=16).contains(&bits) {
            return Err(Error::parameter("resolution must lie in [4, 16] bits"));
        }
        if !(clip_ratio > 0.0) {
            return Err(Error::parameter("clip ratio must be positive"));
        }
        self.resolution_bits = Some(bits);
        self.clip_ratio = Some(clip_ratio);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_3db_hz > 0.0) || self.order == 0 || self.order > 6 {
            return Err(Error::parameter("front end needs bandwidth > 0, order 1..=6"));
        }
        if let Some(bits) = self.resolution_bits {
            if !(4..=16).contains(&bits) {
                return Err(Error::parameter("resolution must lie in [4, 16] bits"));
            }
        }
        Ok(())
    }
}

/// Small-signal fiber response cos(2 pi^2 beta2 L f^2).
pub fn small_signal_response(fiber: &FiberParams, f_hz: f64) -> f64 {
    (2.0 * PI * PI * fiber.beta2_l_s2() * f_hz * f_hz).cos()
}

/// Modulate a drive waveform onto an optical carrier:
/// field = sqrt(P) cos( (pi/2) (drive_scale * d + bias) / v_pi ).
pub fn mzm_modulate(
    drive: &RealWaveform,
    p: &MzmParams,
    carrier_power_mw: f64,
) -> Result<ComplexWaveform> {
    if !(carrier_power_mw >= 0.0) {
        return Err(Error::parameter("carrier power must be nonnegative"));
    }
    let amp = carrier_power_mw.sqrt();
    let k = 0.5 * PI / p.v_pi;
    let samples: Vec<Complex64> = drive
        .samples()
        .iter()
        .map(|&d| Complex64::new(amp * (k * (p.drive_scale * d + p.bias_v)).cos(), 0.0))
        .collect();
    ComplexWaveform::new(samples, drive.sample_rate_hz())
}

/// All-pass dispersion: multiply the spectrum by exp(+j (beta2/2) w^2 L).
/// Power is conserved exactly up to FFT round-off.
pub fn propagate_field(field: &ComplexWaveform, fiber: &FiberParams) -> ComplexWaveform {
    let b2l = fiber.beta2_l_s2();
    if b2l == 0.0 {
        return field.clone();
    }
    let n = field.len();
    let mut buf = field.samples().to_vec();
    fft_in_place(&mut buf);
    let freqs = fft_freqs(n, field.sample_rate_hz());
    for (v, f) in buf.iter_mut().zip(freqs.iter()) {
        let w = 2.0 * PI * f;
        let phase = 0.5 * b2l * w * w;
        *v *= Complex64::new(phase.cos(), phase.sin());
    }
    ifft_in_place(&mut buf);
    ComplexWaveform::new(buf, field.sample_rate_hz()).expect("dispersion preserves validity")
}

/// Square-law detection: responsivity * |field|^2.
pub fn photodetect(field: &ComplexWaveform, responsivity: f64) -> RealWaveform {
    let samples: Vec<f64> = field
        .samples()
        .iter()
        .map(|s| responsivity * s.norm_sqr())
        .collect();
    RealWaveform::new(samples, field.sample_rate_hz()).expect("photodetect preserves validity")
}

/// Carrier-to-signal power ratio of an optical field in dB:
/// P_carrier = |mean|^2, P_signal = mean(|field - mean|^2).
pub fn compute_cspr(field: &ComplexWaveform) -> Result<f64> {
    let n = field.len() as f64;
    let mean = field.samples().iter().sum::<Complex64>() / n;
    let p_carrier = mean.norm_sqr();
    let p_signal = field
        .samples()
        .iter()
        .map(|s| (s - mean).norm_sqr())
        .sum::<f64>()
        / n;
    if p_signal <= 0.0 {
        return Err(Error::dsp("compute_cspr", "unmodulated carrier"));
    }
    if p_carrier <= 0.0 {
        return Err(Error::dsp("compute_cspr", "zero-mean field has no carrier"));
    }
    Ok(10.0 * (p_carrier / p_signal).log10())
}

fn gaussian_pairs(rng: &mut ChaCha12Rng, n: usize) -> Vec<(f64, f64)> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n)
        .map(|_| (normal.sample(rng), normal.sample(rng)))
        .collect()
}

/// Apply the optical part of a noise spec to a field: ASE loading for OSNR
/// mode, power scaling for ROP mode. Deterministic under a fixed seed.
pub fn add_noise(field: &ComplexWaveform, spec: &NoiseSpec) -> Result<ComplexWaveform> {
    match spec.mode {
        NoiseMode::Off => Ok(field.clone()),
        NoiseMode::Osnr { osnr_db } => {
            let p_sig = field.mean_power();
            let p_noise_ref = p_sig / 10f64.powf(osnr_db / 10.0);
            if !(p_noise_ref > 0.0) {
                return Err(Error::parameter("OSNR target yields nonpositive noise"));
            }
            let psd = p_noise_ref / OSNR_REF_BANDWIDTH_HZ;
            let total = psd * field.sample_rate_hz();
            let sigma = (total / 2.0).sqrt();
            let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
            let pairs = gaussian_pairs(&mut rng, field.len());
            let samples: Vec<Complex64> = field
                .samples()
                .iter()
                .zip(pairs)
                .map(|(&s, (a, b))| s + Complex64::new(sigma * a, sigma * b))
                .collect();
            ComplexWaveform::new(samples, field.sample_rate_hz())
        }
        NoiseMode::Rop { rop_dbm, .. } => {
            let target_mw = 10f64.powf(rop_dbm / 10.0);
            let p_now = field.mean_power();
            if !(p_now > 0.0) {
                return Err(Error::parameter("cannot scale a zero-power field"));
            }
            let scale = (target_mw / p_now).sqrt();
            let samples: Vec<Complex64> = field.samples().iter().map(|&s| s * scale).collect();
            ComplexWaveform::new(samples, field.sample_rate_hz())
        }
    }
}

/// Additive white Gaussian electrical noise with one-sided density
/// `density` (power per Hz over the Nyquist band).
pub fn add_electrical_noise(wave: &RealWaveform, density: f64, seed: u64) -> Result<RealWaveform> {
    if density < 0.0 {
        return Err(Error::parameter("noise density must be nonnegative"));
    }
    if density == 0.0 {
        return Ok(wave.clone());
    }
    let var = density * wave.sample_rate_hz() / 2.0;
    let sigma = var.sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("normal");
    let samples: Vec<f64> = wave
        .samples()
        .iter()
        .map(|&s| s + normal.sample(&mut rng))
        .collect();
    RealWaveform::new(samples, wave.sample_rate_hz())
}

/// Reverse Bessel polynomial coefficients (ascending powers) for orders 1..6,
/// normalized to unit DC group delay.
const BESSEL_COEFFS: [&[f64]; 6] = [
    &[1.0, 1.0],
    &[3.0, 3.0, 1.0],
    &[15.0, 15.0, 6.0, 1.0],
    &[105.0, 105.0, 45.0, 10.0, 1.0],
    &[945.0, 945.0, 420.0, 105.0, 15.0, 1.0],
    &[10395.0, 10395.0, 4725.0, 1260.0, 210.0, 21.0, 1.0],
];

/// Normalized 3 dB frequencies of those responses.
const BESSEL_W3DB: [f64; 6] = [1.0, 1.3617, 1.7557, 2.1139, 2.4274, 2.7034];

/// Complex response of the normalized Bessel low-pass at normalized
/// frequency `w` (w = 1 at the group-delay-normalized unit).
fn bessel_response(order: u32, w: f64) -> Complex64 {
    let coeffs = BESSEL_COEFFS[(order - 1) as usize];
    let jw = Complex64::new(0.0, w);
    let mut den = Complex64::new(0.0, 0.0);
    let mut p = Complex64::new(1.0, 0.0);
    for &c in coeffs {
        den += p * c;
        p *= jw;
    }
    coeffs[0] / den
}

/// Front-end magnitude response in dB at `f_hz` (no quantizer).
pub fn frontend_gain_db(fe: &FrontEnd, f_hz: f64) -> f64 {
    let w = BESSEL_W3DB[(fe.order - 1) as usize] * f_hz / fe.bandwidth_3db_hz;
    20.0 * bessel_response(fe.order, w).norm().log10()
}

fn apply_frontend_core(samples: &mut [Complex64], fs: f64, fe: &FrontEnd) {
    let n = samples.len();
    fft_in_place(samples);
    let freqs = fft_freqs(n, fs);
    let w3 = BESSEL_W3DB[(fe.order - 1) as usize];
    let w_unit = fe.bandwidth_3db_hz / w3; // Hz per normalized unit
    for (v, f) in samples.iter_mut().zip(freqs.iter()) {
        let w = f / w_unit;
        let mut h = bessel_response(fe.order, w);
        // Remove the DC group delay (1 normalized unit) so stages stay aligned.
        let comp = 2.0 * PI * f / (2.0 * PI * w_unit);
        h *= Complex64::new(comp.cos(), comp.sin());
        *v *= h;
    }
    ifft_in_place(samples);
}

fn quantize_midrise(samples: &mut [f64], bits: u8, clip_ratio: f64) {
    let n = samples.len() as f64;
    let rms = (samples.iter().map(|s| s * s).sum::<f64>() / n).sqrt();
    if rms <= 0.0 {
        return;
    }
    let clip = clip_ratio * rms;
    let levels = 2u64.pow(bits as u32) as f64;
    let delta = 2.0 * clip / levels;
    let top = clip - delta / 2.0;
    for s in samples.iter_mut() {
        let q = ((*s / delta).floor() + 0.5) * delta;
        *s = q.clamp(-top, top);
    }
}

/// Band-limit (and optionally quantize) a real waveform.
pub fn apply_frontend(x: &RealWaveform, fe: &FrontEnd) -> Result<RealWaveform> {
    fe.validate()?;
    let mut buf: Vec<Complex64> = x.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    apply_frontend_core(&mut buf, x.sample_rate_hz(), fe);
    let mut samples: Vec<f64> = buf.into_iter().map(|c| c.re).collect();
    if let Some(bits) = fe.resolution_bits {
        quantize_midrise(&mut samples, bits, fe.clip_ratio.unwrap_or(4.0));
    }
    RealWaveform::new(samples, x.sample_rate_hz())
}

/// Band-limit (and optionally quantize per rail) a complex waveform.
pub fn apply_frontend_complex(x: &ComplexWaveform, fe: &FrontEnd) -> Result<ComplexWaveform> {
    fe.validate()?;
    let mut buf = x.samples().to_vec();
    apply_frontend_core(&mut buf, x.sample_rate_hz(), fe);
    if let Some(bits) = fe.resolution_bits {
        let clip = fe.clip_ratio.unwrap_or(4.0);
        let mut re: Vec<f64> = buf.iter().map(|c| c.re).collect();
        let mut im: Vec<f64> = buf.iter().map(|c| c.im).collect();
        quantize_midrise(&mut re, bits, clip);
        quantize_midrise(&mut im, bits, clip);
        buf = re
            .into_iter()
            .zip(im)
            .map(|(r, i)| Complex64::new(r, i))
            .collect();
    }
    ComplexWaveform::new(buf, x.sample_rate_hz())
}
