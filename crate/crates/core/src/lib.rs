//! Desk-scale simulator and DSP library for a C-band 100 Gbit/s IM/DD optical
//! link over dispersion-uncompensated fiber.
//!
//! The link uses multi-rate Nyquist subcarrier multiplexing: the dispersive
//! channel response is estimated, spectral nulls are located, and per-band
//! baud rates and center frequencies are planned to sidestep the nulls. Each
//! band carries uniform or probabilistically shaped QAM, recovered by an FFE,
//! a two-tap post filter, and a one-memory MLSE, and scored with BER and NGMI.
//!
//! Modules mirror the processing chain:
//!
//! - [`sigkit`]: waveforms, RRC design, filtering, resampling, PAPR, file IO
//! - [`channel`]: MZM, dispersive fiber, photodetection, noise, front ends
//! - [`bandplan`]: channel estimation, null search, band planning
//! - [`modem`]: constellations, shaping, CCDM, entropy loading
//! - [`txdsp`]: framing, pulse shaping, band combining
//! - [`rxdsp`]: down-conversion, synchronization, FFE, post filter, MLSE
//! - [`metrics`]: BER, LLRs, NGMI, FEC overhead, report assembly
//! - [`harness`]: configuration, presets, end-to-end runs, sweeps

pub mod bandplan;
pub mod channel;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod modem;
pub mod rxdsp;
pub mod sigkit;
pub mod txdsp;

pub use error::{Error, Result};
