//! Configuration, presets, experiment orchestration, and sweeps.

pub mod config;
pub mod pipeline;
pub mod presets;
pub mod sweep;

pub use config::{derive_seed, per_band, LinkConfig, ModemConfig, PayloadConfig, PlanConfig};
pub use pipeline::{
    build_ook_probe, build_tx, frames_for_plan, probe_channel_estimate, resolve_plan, run_channel,
    run_link, run_rx, ChannelArtifacts, TxArtifacts,
};
pub use presets::{preset, PRESET_NAMES};
pub use sweep::{aggregate_ber, sweep, SweepAxis, SweepPoint, SweepResult};
