//! Per-band transmit chain: framing, up-sampling, RRC shaping, rational
//! resampling to the DAC rate, up-conversion, and band combining.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::bandplan::{Band, BandPlan, BAUD_GRID_HZ};
use crate::error::{Error, Result};
use crate::modem::{
    make_constellation, map_uniform, ModulationSpec, PasMapper, ShapedConstellation,
    DEFAULT_CCDM_BLOCK,
};
use crate::sigkit::{
    design_rrc, fir_filter, frequency_shift, resample, ComplexWaveform, Ratio, DEFAULT_RRC_SPAN,
};

/// Frame layout for one band: known training symbols followed by payload.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FrameSpec {
    pub training_len: usize,
    pub payload_len: usize,
    pub training_seed: u64,
}

/// Unscored guard symbols wrapped around each frame so shaping-filter and
/// resampler edge transients never touch training or payload.
pub const GUARD_SYMBOLS: usize = 160;

/// How per-band powers combine.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandPowerPolicy {
    /// Unit-energy symbols in every band; per-band power scales with baud,
    /// i.e. flat power spectral density.
    #[default]
    EqualSymbolPower,
    /// Every band carries the same total power regardless of baud.
    EqualBandPower,
}

/// Everything the receiver needs to score one band, plus the transmitted
/// payload for BER accounting. Bits are stored packed for the JSON dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthRecord {
    pub band_index: usize,
    pub constellation: ModulationSpec,
    pub training_seed: u64,
    pub training_len: usize,
    pub payload_len: usize,
    /// Hex-encoded payload bits, MSB first within each byte.
    pub payload_bits_hex: String,
    pub payload_bit_count: usize,
}

impl TruthRecord {
    pub fn payload_bits(&self) -> Vec<u8> {
        unpack_bits(&self.payload_bits_hex, self.payload_bit_count)
    }
}

pub fn pack_bits(bits: &[u8]) -> String {
    let mut out = String::with_capacity(bits.len().div_ceil(4));
    for chunk in bits.chunks(8) {
        let mut byte = 0u8;
        for (i, &b) in chunk.iter().enumerate() {
            byte |= (b & 1) << (7 - i);
        }
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn unpack_bits(hex: &str, count: usize) -> Vec<u8> {
    let mut bits = Vec::with_capacity(count);
    for i in 0..count {
        let byte = u8::from_str_radix(&hex[2 * (i / 8)..2 * (i / 8) + 2], 16).unwrap_or(0);
        bits.push((byte >> (7 - i % 8)) & 1);
    }
    bits
}

/// Constant-amplitude QPSK-like training sequence from a seeded generator.
pub fn training_symbols(len: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            let i = if rng.random_range(0..2) == 0 { r } else { -r };
            let q = if rng.random_range(0..2) == 0 { r } else { -r };
            Complex64::new(i, q)
        })
        .collect()
}

/// Symbol mapper for one band, uniform or PAS-shaped.
pub enum BandMapper {
    Uniform(ShapedConstellation),
    Shaped(PasMapper),
}

impl BandMapper {
    pub fn for_spec(spec: &ModulationSpec) -> Result<Self> {
        let constellation = make_constellation(spec)?;
        match spec {
            ModulationSpec::Uniform { .. } => Ok(BandMapper::Uniform(constellation)),
            ModulationSpec::Pcs { .. } => Ok(BandMapper::Shaped(PasMapper::new(
                &constellation,
                DEFAULT_CCDM_BLOCK,
            )?)),
        }
    }

    pub fn constellation(&self) -> &ShapedConstellation {
        match self {
            BandMapper::Uniform(c) => c,
            BandMapper::Shaped(m) => m.constellation(),
        }
    }

    /// Bits needed to fill `payload_len` symbols (payload is rounded down to
    /// whole mapping units).
    pub fn bits_for_symbols(&self, payload_len: usize) -> usize {
        match self {
            BandMapper::Uniform(c) => payload_len * c.bits_per_symbol,
            BandMapper::Shaped(m) => payload_len / m.symbols_per_block() * m.bits_per_block(),
        }
    }

    /// Round a payload length down to a whole number of mapping units.
    pub fn align_payload(&self, payload_len: usize) -> usize {
        match self {
            BandMapper::Uniform(_) => payload_len,
            BandMapper::Shaped(m) => payload_len / m.symbols_per_block() * m.symbols_per_block(),
        }
    }

    pub fn map(&self, bits: &[u8]) -> Result<Vec<usize>> {
        match self {
            BandMapper::Uniform(c) => map_uniform(bits, c),
            BandMapper::Shaped(m) => m.map(bits),
        }
    }
}

/// Build one band's frame: training then payload, plus the truth record.
pub fn build_frame(
    band: &Band,
    spec: &FrameSpec,
    payload_bits: &[u8],
) -> Result<(Vec<Complex64>, TruthRecord)> {
    let modulation = band
        .modulation
        .as_ref()
        .ok_or_else(|| Error::parameter(format!("band {} has no modulation", band.index)))?;
    let mapper = BandMapper::for_spec(modulation)?;
    let needed = mapper.bits_for_symbols(mapper.align_payload(spec.payload_len));
    if payload_bits.len() != needed {
        return Err(Error::parameter(format!(
            "band {}: payload needs {needed} bits, got {}",
            band.index,
            payload_bits.len()
        )));
    }
    let constellation = mapper.constellation();
    let head = training_symbols(GUARD_SYMBOLS, spec.training_seed ^ 0x67756172645f68);
    let tail = training_symbols(GUARD_SYMBOLS, spec.training_seed ^ 0x67756172645f74);
    let mut symbols = head;
    symbols.extend(training_symbols(spec.training_len, spec.training_seed));
    let indices = mapper.map(payload_bits)?;
    symbols.extend(indices.iter().map(|&i| constellation.points[i]));
    symbols.extend(tail);
    let truth = TruthRecord {
        band_index: band.index,
        constellation: *modulation,
        training_seed: spec.training_seed,
        training_len: spec.training_len,
        payload_len: indices.len(),
        payload_bits_hex: pack_bits(payload_bits),
        payload_bit_count: payload_bits.len(),
    };
    Ok((symbols, truth))
}

/// Shape one band's symbols to the DAC rate: integer up-sampling by
/// floor(fs/RS), RRC at that rate, rational resampling by
/// fs/(RS * floor(fs/RS)), then the shift to the band center.
pub fn shape_band(symbols: &[Complex64], band: &Band, fs_dac: f64) -> Result<ComplexWaveform> {
    let (lo, hi) = band.occupied_hz();
    if hi > fs_dac / 2.0 || lo < 0.0 {
        return Err(Error::parameter(format!(
            "band {} occupied range [{lo:.3e}, {hi:.3e}] exceeds the DAC Nyquist band",
            band.index
        )));
    }
    let up = (fs_dac / band.baud_hz).floor() as usize;
    if up < 2 {
        return Err(Error::parameter("need at least 2 samples per symbol"));
    }
    let mut upsampled = vec![Complex64::new(0.0, 0.0); symbols.len() * up];
    for (i, &s) in symbols.iter().enumerate() {
        upsampled[i * up] = s;
    }
    let taps = design_rrc(band.rolloff, DEFAULT_RRC_SPAN, up)?;
    let wave = ComplexWaveform::new(upsampled, band.baud_hz * up as f64)?;
    let shaped = fir_filter(&wave, &taps);
    let ratio = Ratio::from_rates(fs_dac, band.baud_hz * up as f64, BAUD_GRID_HZ)?;
    let at_dac = resample(&shaped, ratio)?;
    Ok(frequency_shift(&at_dac, band.f_center_hz))
}

/// Sum the real parts of the per-band waveforms, weight per the power
/// policy, and normalize the total to unit RMS.
pub fn combine_bands(
    band_waveforms: &[ComplexWaveform],
    bands: &[Band],
    policy: BandPowerPolicy,
) -> Result<crate::sigkit::RealWaveform> {
    if band_waveforms.is_empty() || band_waveforms.len() != bands.len() {
        return Err(Error::parameter("need one waveform per band"));
    }
    let fs = band_waveforms[0].sample_rate_hz();
    if band_waveforms
        .iter()
        .any(|w| (w.sample_rate_hz() - fs).abs() > 1e-3)
    {
        return Err(Error::parameter("band waveforms must share a sample rate"));
    }
    for pair in bands.windows(2) {
        if pair[0].occupied_hz().1 > pair[1].occupied_hz().0 + 1.0 {
            return Err(Error::parameter(format!(
                "bands {} and {} overlap",
                pair[0].index, pair[1].index
            )));
        }
    }
    let len = band_waveforms.iter().map(|w| w.len()).min().unwrap();
    let mut sum = vec![0.0; len];
    for (wave, band) in band_waveforms.iter().zip(bands.iter()) {
        let weight = match policy {
            BandPowerPolicy::EqualSymbolPower => 1.0,
            BandPowerPolicy::EqualBandPower => {
                // Unit-energy symbols give power proportional to baud; undo it.
                (bands[0].baud_hz / band.baud_hz).sqrt()
            }
        };
        for (acc, s) in sum.iter_mut().zip(wave.samples()) {
            *acc += weight * s.re;
        }
    }
    let rms = (sum.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if rms <= 0.0 {
        return Err(Error::dsp("combine_bands", "zero-power combined signal"));
    }
    for v in &mut sum {
        *v /= rms;
    }
    crate::sigkit::RealWaveform::new(sum, fs)
}

/// Net information rate after training overhead:
/// sum over bands of rate_i * payload_i / (payload_i + training_i).
pub fn net_rate(plan: &BandPlan, frames: &[FrameSpec]) -> Result<f64> {
    if frames.len() != plan.bands.len() {
        return Err(Error::parameter("need one frame spec per band"));
    }
    let mut total = 0.0;
    for (band, frame) in plan.bands.iter().zip(frames.iter()) {
        let m = band
            .modulation
            .as_ref()
            .ok_or_else(|| Error::parameter("band missing modulation"))?
            .info_bits_per_symbol();
        let denom = (frame.payload_len + frame.training_len) as f64;
        if denom > 0.0 {
            total += band.baud_hz * m * frame.payload_len as f64 / denom;
        }
    }
    Ok(total)
}

/// Per-band payload lengths for a common frame duration, aligned to whole
/// mapping units. The duration covers guards, training, and payload, so all
/// bands span the same time and combine cleanly.
pub fn payload_lengths_for_duration(
    plan: &BandPlan,
    frames_training: &[usize],
    duration_s: f64,
) -> Result<Vec<usize>> {
    if frames_training.len() != plan.bands.len() {
        return Err(Error::parameter("training lengths must match band count"));
    }
    plan.bands
        .iter()
        .zip(frames_training.iter())
        .map(|(band, &train)| {
            let total = (band.baud_hz * duration_s).round() as usize;
            let overhead = train + 2 * GUARD_SYMBOLS;
            if total <= overhead {
                return Err(Error::parameter(format!(
                    "band {}: frame duration too short for {train} training symbols plus guards",
                    band.index
                )));
            }
            let modulation = band
                .modulation
                .as_ref()
                .ok_or_else(|| Error::parameter("band missing modulation"))?;
            let mapper = BandMapper::for_spec(modulation)?;
            Ok(mapper.align_payload(total - overhead))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandplan::Band;
    use crate::sigkit::fft::{fft_freqs, fft_in_place};

    fn test_band(baud: f64, f_center: f64, rolloff: f64, m: ModulationSpec) -> Band {
        Band {
            index: 1,
            f_center_hz: f_center,
            baud_hz: baud,
            rolloff,
            segment_hz: (0.0, 2.0 * f_center),
            modulation: Some(m),
        }
    }

    #[test]
    fn upsample_factor_and_residual_ratio_match_the_chain() {
        // 7.01 GBaud at 90 GSa/s: integer factor 12, residual 750/701.
        let fs: f64 = 90e9;
        let baud = 7.01e9;
        assert_eq!((fs / baud).floor() as u64, 12);
        let ratio = Ratio::from_rates(fs, baud * 12.0, BAUD_GRID_HZ).unwrap();
        assert_eq!((ratio.num(), ratio.den()), (750, 701));
        // Exactly divisible: residual ratio collapses to one.
        let ratio = Ratio::from_rates(90e9, 4.5e9 * 20.0, BAUD_GRID_HZ).unwrap();
        assert!(ratio.is_unity());
    }

    #[test]
    fn single_band_combination_is_the_real_part() {
        let band = test_band(2e9, 5e9, 0.1, ModulationSpec::Uniform { order: 4 });
        let symbols = training_symbols(256, 7);
        let wave = shape_band(&symbols, &band, 20e9).unwrap();
        let combined = combine_bands(
            std::slice::from_ref(&wave),
            std::slice::from_ref(&band),
            BandPowerPolicy::EqualSymbolPower,
        )
        .unwrap();
        let rms = wave.real_part().rms();
        for (a, b) in combined.samples().iter().zip(wave.samples()) {
            assert!((a - b.re / rms).abs() < 1e-9);
        }
    }

    #[test]
    fn build_frame_counts_and_prepends_training() {
        let band = test_band(2e9, 5e9, 0.1, ModulationSpec::Uniform { order: 16 });
        let spec = FrameSpec {
            training_len: 500,
            payload_len: 1000,
            training_seed: 3,
        };
        let bits: Vec<u8> = (0..4000).map(|i| (i % 2) as u8).collect();
        let (symbols, truth) = build_frame(&band, &spec, &bits).unwrap();
        assert_eq!(symbols.len(), 1500 + 2 * GUARD_SYMBOLS);
        assert_eq!(truth.payload_len, 1000);
        assert_eq!(truth.payload_bits(), bits);
        let train = training_symbols(500, 3);
        assert_eq!(&symbols[GUARD_SYMBOLS..GUARD_SYMBOLS + 500], &train[..]);
        // Zero training degenerates to pure payload (between the guards).
        let spec0 = FrameSpec {
            training_len: 0,
            payload_len: 1000,
            training_seed: 3,
        };
        let (symbols, _) = build_frame(&band, &spec0, &bits).unwrap();
        assert_eq!(symbols.len(), 1000 + 2 * GUARD_SYMBOLS);
    }

    #[test]
    fn combined_spectrum_shows_disjoint_band_humps() {
        let bands = vec![
            test_band(2.0e9, 3e9, 0.1, ModulationSpec::Uniform { order: 4 }),
            test_band(1.5e9, 6e9, 0.1, ModulationSpec::Uniform { order: 4 }),
            test_band(1.0e9, 8.5e9, 0.01, ModulationSpec::Uniform { order: 4 }),
        ];
        let fs = 20e9;
        let waves: Vec<ComplexWaveform> = bands
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let n = (2048.0 * b.baud_hz / 2.0e9) as usize;
                shape_band(&training_symbols(n, i as u64), b, fs).unwrap()
            })
            .collect();
        let combined = combine_bands(&waves, &bands, BandPowerPolicy::EqualSymbolPower).unwrap();
        let mut spec: Vec<Complex64> = combined
            .samples()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let n = spec.len();
        fft_in_place(&mut spec);
        let freqs = fft_freqs(n, fs);
        let psd_at = |f: f64| -> f64 {
            let idx = freqs
                .iter()
                .enumerate()
                .filter(|(_, &g)| g >= 0.0)
                .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
                .unwrap()
                .0;
            let lo = idx.saturating_sub(3);
            spec[lo..(idx + 4).min(n)]
                .iter()
                .map(|c| c.norm_sqr())
                .sum::<f64>()
                / 7.0
        };
        let in_band = psd_at(3e9).min(psd_at(6e9)).min(psd_at(8.5e9));
        let gap = psd_at(4.6e9).max(psd_at(7.4e9));
        assert!(
            in_band > 10.0 * gap,
            "bands should stand clear of the gaps: in {in_band:.3e} gap {gap:.3e}"
        );
    }

    #[test]
    fn power_adds_across_disjoint_bands() {
        let bands = vec![
            test_band(2.0e9, 3e9, 0.1, ModulationSpec::Uniform { order: 4 }),
            test_band(2.0e9, 7e9, 0.1, ModulationSpec::Uniform { order: 4 }),
        ];
        let fs = 20e9;
        let waves: Vec<ComplexWaveform> = bands
            .iter()
            .enumerate()
            .map(|(i, b)| shape_band(&training_symbols(4096, i as u64), b, fs).unwrap())
            .collect();
        let len = waves.iter().map(|w| w.len()).min().unwrap();
        let p_sum: f64 = waves
            .iter()
            .map(|w| {
                w.samples()[..len].iter().map(|s| s.re * s.re).sum::<f64>() / len as f64
            })
            .sum();
        let mut total = vec![0.0; len];
        for w in &waves {
            for (acc, s) in total.iter_mut().zip(w.samples()) {
                *acc += s.re;
            }
        }
        let p_total = total.iter().map(|v| v * v).sum::<f64>() / len as f64;
        assert!(
            ((p_total - p_sum) / p_sum).abs() < 0.01,
            "power additivity violated: {p_total} vs {p_sum}"
        );
    }

    #[test]
    fn net_rate_reduces_to_aggregate_without_training() {
        let mut bands = vec![
            test_band(2.0e9, 3e9, 0.1, ModulationSpec::Uniform { order: 16 }),
            test_band(1.0e9, 7e9, 0.1, ModulationSpec::Uniform { order: 4 }),
        ];
        bands[1].index = 2;
        let plan = BandPlan {
            bands,
            f_max_hz: 10e9,
            drop_db: 10.0,
        };
        let frames = vec![
            FrameSpec {
                training_len: 0,
                payload_len: 1000,
                training_seed: 0,
            },
            FrameSpec {
                training_len: 0,
                payload_len: 500,
                training_seed: 0,
            },
        ];
        let net = net_rate(&plan, &frames).unwrap();
        let agg = crate::bandplan::aggregate_rate(&plan).unwrap();
        assert!((net - agg).abs() < 1e-6);
        assert!((agg - 10e9).abs() < 1.0);
    }

    #[test]
    fn bit_packing_round_trips() {
        let bits: Vec<u8> = (0..37).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let hex = pack_bits(&bits);
        assert_eq!(unpack_bits(&hex, 37), bits);
    }
}
