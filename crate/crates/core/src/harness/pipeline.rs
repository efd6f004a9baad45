//! End-to-end orchestration: plan resolution (probe + estimate when auto),
//! transmit build, channel simulation, receive, and scoring.
//!
//! The three stages exchange waveforms through the file format's f32
//! representation even when run in memory, so a monolithic run and a
//! stage-wise run produce bit-identical reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::config::{
    derive_seed, per_band, seed_tags, LinkConfig, ModemConfig, PayloadConfig, PlanConfig,
};
use crate::bandplan::{
    assign_rolloff, estimate_channel, plan_bands, usable_f_max, BandPlan, ChannelEstimate,
    RolloffThresholds, BAUD_GRID_HZ, DEFAULT_FMAX_DROP_DB, DEFAULT_RESOLUTION_HZ,
};
use crate::channel::{
    add_electrical_noise, add_noise, apply_frontend, compute_cspr, mzm_modulate, photodetect,
    propagate_field, NoiseMode, NoiseSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{
    assemble_report, ber, compute_llrs, ngmi, BandOutcome, LinkReport,
};
use crate::modem::{entropy_loading, initial_entropy, EntropyLoadingPlan, ModulationSpec};
use crate::rxdsp::{recover_band, BandDsp, EqualizerConfig, MlseConfig};
use crate::sigkit::{
    measure_papr_real, quantize_to_f32_real, resample_real, Ratio, RealWaveform,
};
use crate::txdsp::{
    build_frame, combine_bands, net_rate, payload_lengths_for_duration, shape_band, BandMapper,
    FrameSpec, TruthRecord,
};

/// Transmit-side products.
pub struct TxArtifacts {
    pub plan: BandPlan,
    pub frames: Vec<FrameSpec>,
    pub truths: Vec<TruthRecord>,
    pub drive: RealWaveform,
    pub papr_db: f64,
    pub loading: Option<EntropyLoadingPlan>,
}

/// Channel-side products.
pub struct ChannelArtifacts {
    pub rx: RealWaveform,
    pub cspr_db: f64,
}

/// 64 Gbit/s on-off keying probe at the DAC rate, unit RMS.
pub fn build_ook_probe(fs_dac: f64, n_bits: usize, seed: u64) -> Result<RealWaveform> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let nrz: Vec<f64> = (0..n_bits)
        .map(|_| if rng.random_range(0..2) == 0 { -1.0 } else { 1.0 })
        .collect();
    let ook = RealWaveform::new(nrz, 64e9)?;
    let ratio = Ratio::from_rates(fs_dac, 64e9, BAUD_GRID_HZ)?;
    resample_real(&ook, ratio)
}

/// Probe the modeled channel and estimate its magnitude response.
pub fn probe_channel_estimate(cfg: &LinkConfig) -> Result<ChannelEstimate> {
    let probe = build_ook_probe(cfg.tx.fs_dac_hz, 1 << 16, derive_seed(cfg.seed, seed_tags::PROBE))?;
    let rx = run_channel(cfg, &probe)?.rx;
    let ratio = Ratio::from_rates(cfg.rx.fs_adc_hz, cfg.tx.fs_dac_hz, BAUD_GRID_HZ)?;
    let tx_ref = resample_real(&probe, ratio)?;
    let mut tx_ref = tx_ref;
    tx_ref.truncate(rx.len());
    let mut rx = rx;
    rx.truncate(tx_ref.len());
    estimate_channel(&tx_ref, &rx, DEFAULT_RESOLUTION_HZ)
}

/// Resolve the band plan: explicit layout as configured, or probe-estimate-
/// plan when auto. Modulation is then assigned per the modem config.
pub fn resolve_plan(cfg: &LinkConfig) -> Result<(BandPlan, Option<EntropyLoadingPlan>)> {
    let (mut plan, est) = match &cfg.plan {
        PlanConfig::Explicit { bands } => {
            let f_max = bands
                .iter()
                .map(|b| b.f_center_hz + (1.0 + b.rolloff) * b.baud_hz / 2.0)
                .fold(0.0, f64::max)
                .max(1.0)
                .ceil();
            (PlanConfig::explicit_plan(bands, f_max)?, None)
        }
        PlanConfig::Auto {
            f_max_hz,
            drop_db,
            guard_hz,
        } => {
            let est = probe_channel_estimate(cfg)?;
            let f_max = f_max_hz.unwrap_or_else(|| usable_f_max(&est, DEFAULT_FMAX_DROP_DB));
            let plan = plan_bands(&est, f_max, *drop_db, *guard_hz)?;
            let plan = assign_rolloff(&plan, &est, &RolloffThresholds::default())?;
            (plan, Some(est))
        }
    };
    let loading = assign_modulation(&mut plan, &cfg.modem, est.as_ref())?;
    Ok((plan, loading))
}

/// Attach per-band modulation specs; for PCS, run entropy loading toward the
/// target rate first.
fn assign_modulation(
    plan: &mut BandPlan,
    modem: &ModemConfig,
    est: Option<&ChannelEstimate>,
) -> Result<Option<EntropyLoadingPlan>> {
    let n = plan.bands.len();
    match modem {
        ModemConfig::Uniform { orders } => {
            let orders = per_band(orders, n, "modem.orders")?;
            for (band, order) in plan.bands.iter_mut().zip(orders) {
                band.modulation = Some(ModulationSpec::Uniform { order });
            }
            Ok(None)
        }
        ModemConfig::Pcs {
            base_orders,
            rs_target_bps,
            initial_entropy: h0,
        } => {
            let base_orders = per_band(base_orders, n, "modem.base_orders")?;
            let h0 = match h0 {
                Some(values) => per_band(values, n, "modem.initial_entropy")?,
                None => {
                    // Estimate per-band SNR from the channel gain, anchored
                    // at 24 dB for the strongest band.
                    let gains: Vec<f64> = plan
                        .bands
                        .iter()
                        .map(|b| match est {
                            Some(e) => {
                                let (lo, hi) = b.occupied_hz();
                                
                                e.gain_db_at(0.5 * (lo + hi))
                            }
                            None => 0.0,
                        })
                        .collect();
                    let peak = gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    gains
                        .iter()
                        .zip(base_orders.iter())
                        .map(|(&g, &m)| initial_entropy(24.0 + g - peak, m))
                        .collect::<Result<Vec<_>>>()?
                }
            };
            let rs: Vec<f64> = plan.bands.iter().map(|b| b.baud_hz).collect();
            let caps: Vec<f64> = base_orders.iter().map(|&m| (m as f64).log2()).collect();
            let loading = entropy_loading(&h0, &rs, &caps, *rs_target_bps)?;
            for ((band, order), h) in plan
                .bands
                .iter_mut()
                .zip(base_orders)
                .zip(loading.entropy.iter())
            {
                band.modulation = Some(ModulationSpec::Pcs {
                    base_order: order,
                    entropy: *h,
                });
            }
            Ok(Some(loading))
        }
    }
}

/// Frame specs for a resolved plan: training lengths from config, payloads
/// per the sizing policy, seeds derived per band.
pub fn frames_for_plan(cfg: &LinkConfig, plan: &BandPlan) -> Result<Vec<FrameSpec>> {
    let n = plan.bands.len();
    let training = per_band(&cfg.tx.training, n, "tx.training")?;
    let payloads = match &cfg.tx.payload {
        PayloadConfig::Duration { seconds } => {
            payload_lengths_for_duration(plan, &training, *seconds)?
        }
        PayloadConfig::MinSymbols { symbols } => {
            let mut duration = plan
                .bands
                .iter()
                .zip(training.iter())
                .map(|(b, &t)| {
                    (*symbols + t + 2 * crate::txdsp::GUARD_SYMBOLS) as f64 / b.baud_hz
                })
                .fold(0.0, f64::max);
            // Block alignment can shave a mapping unit; stretch until every
            // band clears the floor.
            loop {
                let payloads = payload_lengths_for_duration(plan, &training, duration)?;
                if payloads.iter().all(|&p| p >= *symbols) {
                    break payloads;
                }
                duration *= 1.002;
            }
        }
    };
    Ok(plan
        .bands
        .iter()
        .zip(training.iter().zip(payloads.iter()))
        .map(|(band, (&t, &p))| FrameSpec {
            training_len: t,
            payload_len: p,
            training_seed: derive_seed(cfg.seed, seed_tags::TRAINING_BASE + band.index as u64),
        })
        .collect())
}

/// Build the transmit waveform and truth records for a resolved plan.
pub fn build_tx(cfg: &LinkConfig, plan: &BandPlan, frames: &[FrameSpec]) -> Result<TxArtifacts> {
    let mut symbol_streams = Vec::with_capacity(plan.bands.len());
    let mut truths = Vec::with_capacity(plan.bands.len());
    for (band, frame) in plan.bands.iter().zip(frames.iter()) {
        let modulation = band
            .modulation
            .as_ref()
            .ok_or_else(|| Error::config("plan bands need modulation"))?;
        let mapper = BandMapper::for_spec(modulation)?;
        let n_bits = mapper.bits_for_symbols(frame.payload_len);
        let payload = random_bits(
            n_bits,
            derive_seed(cfg.seed, seed_tags::PAYLOAD_BASE + band.index as u64),
        );
        let (symbols, truth) = build_frame(band, frame, &payload)?;
        symbol_streams.push(symbols);
        truths.push(truth);
    }
    // Mapping-unit alignment leaves the bands with slightly different frame
    // durations; pad the short ones with extra guard symbols so combining
    // never trims into a payload.
    let d_max = plan
        .bands
        .iter()
        .zip(symbol_streams.iter())
        .map(|(b, s)| s.len() as f64 / b.baud_hz)
        .fold(0.0, f64::max);
    let mut waves = Vec::with_capacity(plan.bands.len());
    for ((band, frame), symbols) in plan.bands.iter().zip(frames.iter()).zip(&mut symbol_streams) {
        let extra = ((d_max - symbols.len() as f64 / band.baud_hz) * band.baud_hz).floor() as usize;
        if extra > 0 {
            symbols.extend(crate::txdsp::training_symbols(
                extra,
                frame.training_seed ^ 0x7061645f7461696c,
            ));
        }
        waves.push(shape_band(symbols, band, cfg.tx.fs_dac_hz)?);
    }
    let drive = combine_bands(&waves, &plan.bands, cfg.tx.power_policy)?;
    let papr_db = measure_papr_real(&drive, 99.99)?;
    let drive = quantize_to_f32_real(&drive);
    Ok(TxArtifacts {
        plan: plan.clone(),
        frames: frames.to_vec(),
        truths,
        drive,
        papr_db,
        loading: None,
    })
}

fn random_bits(count: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(0..2u8)).collect()
}

/// Simulate the optical path: DAC front end, MZM, fiber, noise loading,
/// photodetection, receiver front ends, and digitization at the scope rate.
pub fn run_channel(cfg: &LinkConfig, drive: &RealWaveform) -> Result<ChannelArtifacts> {
    let dac = cfg.frontend.dac.front_end()?;
    let pin = cfg.frontend.pin.front_end()?;
    let adc = cfg.frontend.adc.front_end()?;
    let mzm = cfg.mzm.params()?;
    let analog = apply_frontend(drive, &dac)?;
    let field = mzm_modulate(&analog, &mzm, cfg.mzm.carrier_power_mw)?;
    let cspr_db = compute_cspr(&field).unwrap_or(f64::INFINITY);
    let field = propagate_field(&field, &cfg.fiber);
    let spec = NoiseSpec {
        mode: cfg.noise.mode()?,
        seed: derive_seed(cfg.seed, seed_tags::OPTICAL_NOISE),
    };
    let field = add_noise(&field, &spec)?;
    let mut elec = photodetect(&field, cfg.frontend.responsivity);
    if let NoiseMode::Rop {
        electrical_noise_density,
        ..
    } = spec.mode
    {
        elec = add_electrical_noise(
            &elec,
            electrical_noise_density,
            derive_seed(cfg.seed, seed_tags::ELECTRICAL_NOISE),
        )?;
    }
    let mut elec = apply_frontend(&elec, &pin)?;
    elec.remove_dc();
    let ratio = Ratio::from_rates(cfg.rx.fs_adc_hz, cfg.tx.fs_dac_hz, BAUD_GRID_HZ)?;
    let sampled = resample_real(&elec, ratio)?;
    let digitized = apply_frontend(&sampled, &adc)?;
    Ok(ChannelArtifacts {
        rx: quantize_to_f32_real(&digitized),
        cspr_db,
    })
}

/// Recover every band, score it, and assemble the report.
#[allow(clippy::too_many_arguments)]
pub fn run_rx(
    cfg: &LinkConfig,
    plan: &BandPlan,
    frames: &[FrameSpec],
    truths: &[TruthRecord],
    rx: &RealWaveform,
    papr_db: f64,
    cspr_db: f64,
) -> Result<LinkReport> {
    let n = plan.bands.len();
    if frames.len() != n || truths.len() != n {
        return Err(Error::parameter("plan, frames, and truths must align"));
    }
    let taps = per_band(&cfg.rx.ffe_taps, n, "rx.ffe_taps")?;
    let alphas = per_band(&cfg.rx.pf_alpha, n, "rx.pf_alpha")?;
    // Bands recover independently; ones whose own sync cannot clear the
    // gate retry with the frame offset agreed on by the others.
    let band_dsp = |i: usize| BandDsp {
        equalizer: EqualizerConfig {
            num_taps: taps[i],
            mu_train: cfg.rx.mu_train,
            mu_dd: cfg.rx.mu_dd,
            train_passes: cfg.rx.train_passes,
        },
        pf_alpha: alphas[i],
        mlse: MlseConfig {
            traceback_depth: cfg.rx.mlse_traceback,
            use_priors: cfg.rx.mlse_use_priors,
        },
        detector: cfg.rx.detector,
        sps: cfg.rx.sps,
    };
    let mut recoveries: Vec<Option<crate::rxdsp::BandRecovery>> = Vec::with_capacity(n);
    let mut offsets = Vec::new();
    for (i, band) in plan.bands.iter().enumerate() {
        match recover_band(rx, band, &frames[i], &truths[i], &band_dsp(i), None) {
            Ok(r) => {
                offsets.push(r.diagnostics.sync_offset);
                recoveries.push(Some(r));
            }
            Err(_) => recoveries.push(None),
        }
    }
    let hint = if offsets.is_empty() {
        None
    } else {
        let mut sorted = offsets.clone();
        sorted.sort_unstable();
        Some(sorted[sorted.len() / 2])
    };
    let mut outcomes = Vec::with_capacity(n);
    for (i, band) in plan.bands.iter().enumerate() {
        let recovery = match recoveries[i].take() {
            Some(r) => r,
            None => recover_band(rx, band, &frames[i], &truths[i], &band_dsp(i), hint)?,
        };
        let tx_bits = truths[i].payload_bits();
        let band_ber = ber(&tx_bits, &recovery.bits)?;
        // NGMI from the equalized symbols against the transmitted labels.
        let mapper = BandMapper::for_spec(&truths[i].constellation)?;
        let constellation = mapper.constellation();
        let tx_indices = mapper.map(&tx_bits)?;
        let mut label_bits = Vec::with_capacity(tx_indices.len() * constellation.bits_per_symbol);
        for &idx in &tx_indices {
            for b in 0..constellation.bits_per_symbol {
                label_bits.push(constellation.bit(idx, b));
            }
        }
        let rec = compute_llrs(
            &recovery.q,
            &label_bits,
            constellation,
            recovery.diagnostics.sigma2.max(1e-12),
        )?;
        let band_ngmi = ngmi(&rec, constellation.bits_per_symbol)?;
        let ser = recovery
            .decided
            .iter()
            .zip(tx_indices.iter())
            .filter(|(a, b)| a != b)
            .count() as f64
            / tx_indices.len().max(1) as f64;
        outcomes.push(BandOutcome {
            index: band.index,
            baud_hz: band.baud_hz,
            info_bits_per_symbol: band
                .modulation
                .as_ref()
                .map(|m| m.info_bits_per_symbol())
                .unwrap_or(0.0),
            ber: band_ber,
            ser,
            ngmi: band_ngmi,
            mse_db: recovery.diagnostics.training_mse_db,
        });
    }
    let gross = crate::bandplan::aggregate_rate(plan)?;
    let net = net_rate(plan, frames)?;
    assemble_report(&outcomes, gross, net, papr_db, cspr_db, cfg.seed, cfg.hash())
}

/// One deterministic end-to-end run.
pub fn run_link(cfg: &LinkConfig) -> Result<LinkReport> {
    cfg.validate()?;
    let (plan, _loading) = resolve_plan(cfg)?;
    let frames = frames_for_plan(cfg, &plan)?;
    let tx = build_tx(cfg, &plan, &frames)?;
    let ch = run_channel(cfg, &tx.drive)?;
    run_rx(cfg, &plan, &frames, &tx.truths, &ch.rx, tx.papr_db, ch.cspr_db)
}

