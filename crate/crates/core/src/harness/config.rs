//! Link configuration: one document that feeds every stage.
//!
//! TOML is the primary on-disk format (sections mirror the module layout);
//! JSON is accepted as an alternative. All seeds derive from the single
//! top-level seed, so one (config, seed) pair pins the whole run.

use serde::{Deserialize, Serialize};

use crate::bandplan::{Band, BandPlan, DEFAULT_DROP_DB, DEFAULT_GUARD_HZ};
use crate::channel::{FiberParams, FrontEnd, MzmParams, NoiseMode};
use crate::error::{Error, Result};
use crate::rxdsp::Detector;
use crate::txdsp::BandPowerPolicy;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MzmConfig {
    pub v_pi: f64,
    pub bias_v: f64,
    /// Volts per unit drive amplitude.
    pub drive_scale: f64,
    pub carrier_power_mw: f64,
}

impl MzmConfig {
    pub fn params(&self) -> Result<MzmParams> {
        MzmParams::new(self.v_pi, self.bias_v, self.drive_scale)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NoiseConfig {
    /// off | osnr | rop
    pub mode: String,
    /// OSNR in dB or ROP in dBm, depending on the mode.
    pub value: f64,
    /// One-sided electrical noise density after photodetection (ROP mode).
    #[serde(default)]
    pub electrical_noise_density: f64,
}

impl NoiseConfig {
    pub fn off() -> Self {
        Self {
            mode: "off".into(),
            value: 0.0,
            electrical_noise_density: 0.0,
        }
    }

    pub fn mode(&self) -> Result<NoiseMode> {
        match self.mode.as_str() {
            "off" => Ok(NoiseMode::Off),
            "osnr" => Ok(NoiseMode::Osnr { osnr_db: self.value }),
            "rop" => Ok(NoiseMode::Rop {
                rop_dbm: self.value,
                electrical_noise_density: self.electrical_noise_density,
            }),
            other => Err(Error::config(format!(
                "noise.mode must be off|osnr|rop, got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FrontEndConfig {
    pub bandwidth_3db_hz: f64,
    #[serde(default = "default_fe_order")]
    pub order: u32,
    #[serde(default)]
    pub resolution_bits: Option<u8>,
    #[serde(default)]
    pub clip_ratio: Option<f64>,
}

fn default_fe_order() -> u32 {
    4
}

impl FrontEndConfig {
    pub fn front_end(&self) -> Result<FrontEnd> {
        let mut fe = FrontEnd::new(self.bandwidth_3db_hz, self.order)?;
        if let Some(bits) = self.resolution_bits {
            fe = fe.with_quantizer(bits, self.clip_ratio.unwrap_or(4.0))?;
        }
        Ok(fe)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FrontEndsConfig {
    pub dac: FrontEndConfig,
    pub pin: FrontEndConfig,
    pub adc: FrontEndConfig,
    pub responsivity: f64,
}

/// Explicit band layout entry (paper-style plans).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BandSpec {
    pub f_center_hz: f64,
    pub baud_hz: f64,
    pub rolloff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PlanConfig {
    /// Probe the channel, estimate, and plan automatically.
    Auto {
        #[serde(default)]
        f_max_hz: Option<f64>,
        #[serde(default = "default_drop")]
        drop_db: f64,
        #[serde(default = "default_guard")]
        guard_hz: f64,
    },
    /// Use the given layout as-is.
    Explicit { bands: Vec<BandSpec> },
}

fn default_drop() -> f64 {
    DEFAULT_DROP_DB
}

fn default_guard() -> f64 {
    DEFAULT_GUARD_HZ
}

impl PlanConfig {
    /// Build a plan from explicit band specs (segments are bookkeeping only).
    pub fn explicit_plan(bands: &[BandSpec], f_max_hz: f64) -> Result<BandPlan> {
        let bands: Vec<Band> = bands
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let half = (1.0 + b.rolloff) * b.baud_hz / 2.0;
                Band {
                    index: i + 1,
                    f_center_hz: b.f_center_hz,
                    baud_hz: b.baud_hz,
                    rolloff: b.rolloff,
                    segment_hz: (
                        (b.f_center_hz - half - DEFAULT_GUARD_HZ / 2.0).max(0.0).round(),
                        (b.f_center_hz + half + DEFAULT_GUARD_HZ / 2.0).round(),
                    ),
                    modulation: None,
                }
            })
            .collect();
        let plan = BandPlan {
            bands,
            f_max_hz,
            drop_db: DEFAULT_DROP_DB,
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum ModemConfig {
    /// Per-band uniform orders (one entry per band).
    Uniform { orders: Vec<u32> },
    /// Entropy loading toward a target rate over the given base orders.
    Pcs {
        base_orders: Vec<u32>,
        rs_target_bps: f64,
        /// Per-band initial entropies; when omitted they come from the
        /// estimated per-band SNRs.
        #[serde(default)]
        initial_entropy: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "sizing", rename_all = "snake_case")]
pub enum PayloadConfig {
    /// Common frame duration in seconds (payload = duration * baud - training).
    Duration { seconds: f64 },
    /// Every band carries at least this many payload symbols.
    MinSymbols { symbols: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TxConfig {
    pub fs_dac_hz: f64,
    #[serde(default)]
    pub power_policy: BandPowerPolicy,
    /// Per-band training lengths (one entry per band, or one for all).
    pub training: Vec<usize>,
    pub payload: PayloadConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RxConfig {
    pub fs_adc_hz: f64,
    #[serde(default = "default_sps")]
    pub sps: usize,
    /// Per-band FFE tap counts (one entry per band, or one for all).
    pub ffe_taps: Vec<usize>,
    #[serde(default = "default_mu_train")]
    pub mu_train: f64,
    #[serde(default = "default_mu_dd")]
    pub mu_dd: f64,
    #[serde(default = "default_passes")]
    pub train_passes: usize,
    /// Per-band post-filter coefficients (one entry per band, or one for all).
    pub pf_alpha: Vec<f64>,
    #[serde(default = "default_traceback")]
    pub mlse_traceback: usize,
    #[serde(default)]
    pub mlse_use_priors: bool,
    #[serde(default)]
    pub detector: Detector,
}

fn default_sps() -> usize {
    2
}
fn default_mu_train() -> f64 {
    5e-3
}
fn default_mu_dd() -> f64 {
    1e-3
}
fn default_passes() -> usize {
    3
}
fn default_traceback() -> usize {
    32
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LinkConfig {
    #[serde(default)]
    pub preset: Option<String>,
    pub seed: u64,
    pub fiber: FiberParams,
    pub mzm: MzmConfig,
    pub noise: NoiseConfig,
    pub frontend: FrontEndsConfig,
    pub plan: PlanConfig,
    pub modem: ModemConfig,
    pub tx: TxConfig,
    pub rx: RxConfig,
    /// Worker threads for sweeps.
    #[serde(default = "default_workers")]
    pub sweep_workers: usize,
}

fn default_workers() -> usize {
    1
}

impl LinkConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: LinkConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("TOML parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: LinkConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("JSON parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a config file by extension (.toml or .json).
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tx.fs_dac_hz > 0.0 && self.rx.fs_adc_hz > 0.0) {
            return Err(Error::config("sample rates must be positive"));
        }
        self.mzm.params()?;
        self.noise.mode()?;
        self.frontend.dac.front_end()?;
        self.frontend.pin.front_end()?;
        self.frontend.adc.front_end()?;
        if self.tx.training.is_empty() {
            return Err(Error::config("tx.training must not be empty"));
        }
        if self.rx.ffe_taps.is_empty() || self.rx.pf_alpha.is_empty() {
            return Err(Error::config("rx.ffe_taps and rx.pf_alpha must not be empty"));
        }
        if let PlanConfig::Explicit { bands } = &self.plan {
            if bands.is_empty() {
                return Err(Error::config("explicit plan needs at least one band"));
            }
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical JSON form, hex-encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// Broadcast a per-band vector: one entry applies to all bands.
pub fn per_band<T: Clone>(values: &[T], n_bands: usize, what: &str) -> Result<Vec<T>> {
    if values.len() == n_bands {
        Ok(values.to_vec())
    } else if values.len() == 1 {
        Ok(vec![values[0].clone(); n_bands])
    } else {
        Err(Error::config(format!(
            "{what}: expected 1 or {n_bands} entries, got {}",
            values.len()
        )))
    }
}

/// Derive a purpose-specific seed from the base seed (splitmix64 step).
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed tags for the pipeline stages.
pub mod seed_tags {
    pub const PAYLOAD_BASE: u64 = 0x100;
    pub const TRAINING_BASE: u64 = 0x200;
    pub const OPTICAL_NOISE: u64 = 0x301;
    pub const ELECTRICAL_NOISE: u64 = 0x302;
    pub const PROBE: u64 = 0x400;
    pub const SWEEP_BASE: u64 = 0x500;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets;

    #[test]
    fn preset_round_trips_through_toml_and_json() {
        let cfg = presets::preset("paper-50km-pcs").unwrap();
        let toml_text = toml::to_string(&cfg).unwrap();
        let back = LinkConfig::from_toml(&toml_text).unwrap();
        assert_eq!(cfg, back);
        let back = LinkConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = presets::preset("obtb-uniform").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = a.seed + 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn per_band_broadcasts() {
        assert_eq!(per_band(&[31], 3, "taps").unwrap(), vec![31, 31, 31]);
        assert_eq!(per_band(&[1, 2, 3], 3, "taps").unwrap(), vec![1, 2, 3]);
        assert!(per_band(&[1, 2], 3, "taps").is_err());
    }

    #[test]
    fn bad_noise_mode_is_a_config_error() {
        let mut cfg = presets::preset("obtb-uniform").unwrap();
        cfg.noise.mode = "floor".into();
        assert!(cfg.validate().is_err());
    }
}
