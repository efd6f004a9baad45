//! Shipped configurations.
//!
//! The two paper-* presets pin the experimental layout: seven bands at
//! {3.9, 12, 17.3, 21.3, 24.5, 27.4, 29.95} GHz with rates
//! {7.01, 5.11, 3.81, 2.76, 2.9, 2.62, 1.92} GBaud, roll-offs 0.1 on the
//! first three bands and 0.01 on the rest, training lengths
//! {500, 300, 300, 300, 200, 200, 100}, FFE taps 31/31/21.../21, and
//! post-filter taps {0.3, 0.4, 0.4, 0.4, 0.5, 0.5, 0.2}.

use super::config::*;
use crate::channel::FiberParams;
use crate::error::{Error, Result};
use crate::rxdsp::Detector;
use crate::txdsp::BandPowerPolicy;

pub const PRESET_NAMES: [&str; 5] = [
    "obtb-uniform",
    "obtb-pcs",
    "paper-50km-uniform",
    "paper-50km-pcs",
    "desk-scale-fast",
];

pub fn paper_bands() -> Vec<BandSpec> {
    let centers = [3.9e9, 12.0e9, 17.3e9, 21.3e9, 24.5e9, 27.4e9, 29.95e9];
    let bauds = [7.01e9, 5.11e9, 3.81e9, 2.76e9, 2.9e9, 2.62e9, 1.92e9];
    let rolloffs = [0.1, 0.1, 0.1, 0.01, 0.01, 0.01, 0.01];
    centers
        .iter()
        .zip(bauds.iter())
        .zip(rolloffs.iter())
        .map(|((&f, &b), &r)| BandSpec {
            f_center_hz: f,
            baud_hz: b,
            rolloff: r,
        })
        .collect()
}

/// Uniform orders used band by band: 128QAM, 16QAM, 8QAM, 8QAM, 4QAM,
/// 4QAM, BPSK.
pub fn paper_uniform_orders() -> Vec<u32> {
    vec![128, 16, 8, 8, 4, 4, 2]
}

/// PCS base orders: 256QAM on the first band, 16QAM elsewhere.
pub fn paper_pcs_base_orders() -> Vec<u32> {
    vec![256, 16, 16, 16, 16, 16, 16]
}

/// Pinned per-band initial entropies (uniform-QAM mutual information at the
/// per-band operating SNRs of the 50 km link).
pub fn paper_initial_entropy() -> Vec<f64> {
    vec![5.0, 3.95, 3.8, 3.95, 3.1, 3.0, 3.45]
}

pub fn paper_training() -> Vec<usize> {
    vec![500, 300, 300, 300, 200, 200, 100]
}

fn base_config() -> LinkConfig {
    LinkConfig {
        preset: None,
        seed: 1,
        // The published band layout only clears the dispersion nulls for
        // beta2 L in a narrow window around 21.1 ps^2/km x 50 km; the
        // experiment's fiber must have sat there (D ~ 16.5 ps/nm/km).
        fiber: FiberParams {
            beta2_ps2_per_km: -21.1,
            length_km: 50.0,
        },
        mzm: MzmConfig {
            v_pi: 3.5,
            bias_v: 1.75,
            drive_scale: 0.35,
            carrier_power_mw: 1.0,
        },
        noise: NoiseConfig {
            mode: "osnr".into(),
            value: 50.0,
            electrical_noise_density: 0.0,
        },
        frontend: FrontEndsConfig {
            dac: FrontEndConfig {
                bandwidth_3db_hz: 16e9,
                order: 4,
                resolution_bits: Some(8),
                clip_ratio: Some(4.0),
            },
            pin: FrontEndConfig {
                bandwidth_3db_hz: 31e9,
                order: 4,
                resolution_bits: None,
                clip_ratio: None,
            },
            adc: FrontEndConfig {
                bandwidth_3db_hz: 36e9,
                order: 4,
                resolution_bits: Some(8),
                clip_ratio: Some(4.0),
            },
            responsivity: 0.8,
        },
        plan: PlanConfig::Explicit {
            bands: paper_bands(),
        },
        modem: ModemConfig::Uniform {
            orders: paper_uniform_orders(),
        },
        tx: TxConfig {
            fs_dac_hz: 90e9,
            power_policy: BandPowerPolicy::EqualBandPower,
            training: paper_training(),
            payload: PayloadConfig::MinSymbols { symbols: 1 << 15 },
        },
        rx: RxConfig {
            fs_adc_hz: 80e9,
            sps: 4,
            ffe_taps: vec![31, 31, 21, 21, 21, 21, 21],
            mu_train: 5e-3,
            mu_dd: 1e-3,
            train_passes: 25,
            pf_alpha: vec![0.3, 0.4, 0.4, 0.4, 0.5, 0.5, 0.2],
            mlse_traceback: 32,
            mlse_use_priors: false,
            detector: Detector::PostFilterMlse,
        },
        sweep_workers: 1,
    }
}

/// Look up a shipped preset by name.
pub fn preset(name: &str) -> Result<LinkConfig> {
    let mut cfg = base_config();
    cfg.preset = Some(name.to_string());
    match name {
        "obtb-uniform" => {
            cfg.fiber.length_km = 0.0;
            cfg.noise = NoiseConfig::off();
            cfg.tx.payload = PayloadConfig::MinSymbols { symbols: 1 << 12 };
        }
        "obtb-pcs" => {
            cfg.fiber.length_km = 0.0;
            cfg.noise = NoiseConfig::off();
            cfg.tx.payload = PayloadConfig::MinSymbols { symbols: 1 << 12 };
            cfg.modem = ModemConfig::Pcs {
                base_orders: paper_pcs_base_orders(),
                rs_target_bps: 103e9,
                initial_entropy: Some(paper_initial_entropy()),
            };
            cfg.rx.mlse_use_priors = true;
        }
        "paper-50km-uniform" => {}
        "paper-50km-pcs" => {
            cfg.modem = ModemConfig::Pcs {
                base_orders: paper_pcs_base_orders(),
                rs_target_bps: 103e9,
                initial_entropy: Some(paper_initial_entropy()),
            };
            cfg.rx.mlse_use_priors = true;
        }
        "desk-scale-fast" => {
            cfg.modem = ModemConfig::Pcs {
                base_orders: paper_pcs_base_orders(),
                rs_target_bps: 103e9,
                initial_entropy: Some(paper_initial_entropy()),
            };
            cfg.rx.mlse_use_priors = true;
            cfg.tx.payload = PayloadConfig::MinSymbols { symbols: 1 << 12 };
        }
        other => {
            return Err(Error::config(format!(
                "unknown preset '{other}'; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    }
    Ok(cfg)
}
