//! Waveform containers and generic DSP primitives: filter design, filtering,
//! frequency shifting, rational resampling, PAPR measurement, and file dumps.

pub mod fft;
mod filter;
mod io;
mod papr;
mod resample;
mod shift;
mod waveform;

pub use filter::{
    design_rrc, filter_complex_samples, fir_filter, fir_filter_real, FilterTaps, GainNorm,
    DEFAULT_RRC_SPAN,
};
pub use io::{
    export_csv_complex, export_csv_real, quantize_to_f32, quantize_to_f32_real, read_waveform,
    write_complex, write_real, WaveformFile,
};
pub use papr::{measure_papr_complex, measure_papr_real, papr_db_from_powers};
pub use resample::{resample, resample_real, Ratio};
pub use shift::frequency_shift;
pub use waveform::{ComplexWaveform, RealWaveform};
