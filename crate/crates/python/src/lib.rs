//! Python bindings for the main link-simulator types and operations.
//!
//! Build with `maturin develop` or plain cargo:
//! `cargo build -p nyqscm-py --release` then import the cdylib as
//! `nyqscm_py` (see python/smoke_test.py, which handles the rename).

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nyqscm::bandplan::{
    assign_rolloff, find_spectral_nulls, plan_bands as plan_bands_rs, usable_f_max,
    ChannelEstimate, RolloffThresholds, DEFAULT_FMAX_DROP_DB,
};
use nyqscm::channel::FiberParams;
use nyqscm::error::Error;
use nyqscm::harness::{preset, run_link, PayloadConfig, PRESET_NAMES};
use nyqscm::metrics::{fec_overhead as fec_overhead_rs, ngmi as ngmi_rs, BitLlrRecord};
use nyqscm::modem::{entropy_loading as entropy_loading_rs, mb_for_entropy, CcdmCode};
use nyqscm::sigkit::{design_rrc as design_rrc_rs, papr_db_from_powers};

fn err(e: Error) -> PyErr {
    match e {
        Error::Parameter(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Crate version string.
#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Shipped preset names.
#[pyfunction]
fn presets() -> Vec<String> {
    PRESET_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Unit-energy square-root raised cosine taps.
#[pyfunction]
fn design_rrc(rolloff: f64, span_symbols: usize, samples_per_symbol: usize) -> PyResult<Vec<f64>> {
    Ok(design_rrc_rs(rolloff, span_symbols, samples_per_symbol)
        .map_err(err)?
        .coefficients()
        .to_vec())
}

/// Small-signal dispersive fading cos(2 pi^2 beta2 L f^2).
#[pyfunction]
fn small_signal_response(beta2_ps2_per_km: f64, length_km: f64, f_hz: f64) -> PyResult<f64> {
    let fiber = FiberParams::new(beta2_ps2_per_km, length_km).map_err(err)?;
    Ok(nyqscm::channel::small_signal_response(&fiber, f_hz))
}

/// First `count` spectral null frequencies of the dispersive channel, Hz.
#[pyfunction]
fn dispersion_nulls(beta2_ps2_per_km: f64, length_km: f64, count: usize) -> PyResult<Vec<f64>> {
    let fiber = FiberParams::new(beta2_ps2_per_km, length_km).map_err(err)?;
    Ok(fiber.null_frequencies_hz(count))
}

/// Plan bands from a magnitude response sampled on a uniform grid.
/// Returns the plan as a JSON string (same schema as the CLI emits).
#[pyfunction]
#[pyo3(signature = (freqs_hz, magnitude_db, drop_db=10.0, guard_hz=1e8, f_max_hz=None))]
fn plan_bands(
    freqs_hz: Vec<f64>,
    magnitude_db: Vec<f64>,
    drop_db: f64,
    guard_hz: f64,
    f_max_hz: Option<f64>,
) -> PyResult<String> {
    if freqs_hz.len() < 2 {
        return Err(PyValueError::new_err("need at least two grid points"));
    }
    let resolution = freqs_hz[1] - freqs_hz[0];
    let est = ChannelEstimate::new(freqs_hz, magnitude_db, resolution).map_err(err)?;
    let f_max = f_max_hz.unwrap_or_else(|| usable_f_max(&est, DEFAULT_FMAX_DROP_DB));
    let plan = plan_bands_rs(&est, f_max, drop_db, guard_hz).map_err(err)?;
    let plan = assign_rolloff(&plan, &est, &RolloffThresholds::default()).map_err(err)?;
    Ok(plan.to_json())
}

/// Spectral nulls of a sampled magnitude response, Hz.
#[pyfunction]
#[pyo3(signature = (freqs_hz, magnitude_db, floor_db=-15.0))]
fn spectral_nulls(freqs_hz: Vec<f64>, magnitude_db: Vec<f64>, floor_db: f64) -> PyResult<Vec<f64>> {
    if freqs_hz.len() < 2 {
        return Err(PyValueError::new_err("need at least two grid points"));
    }
    let resolution = freqs_hz[1] - freqs_hz[0];
    let est = ChannelEstimate::new(freqs_hz, magnitude_db, resolution).map_err(err)?;
    Ok(find_spectral_nulls(&est, floor_db))
}

/// Entropy loading toward a target rate: returns the per-band entropies.
#[pyfunction]
fn entropy_loading(
    h0: Vec<f64>,
    rs_baud: Vec<f64>,
    caps: Vec<f64>,
    rs_target_bps: f64,
) -> PyResult<Vec<f64>> {
    Ok(entropy_loading_rs(&h0, &rs_baud, &caps, rs_target_bps)
        .map_err(err)?
        .entropy)
}

/// Maxwell-Boltzmann priors for a target entropy on a square QAM grid.
/// Returns (points as (re, im) pairs, priors).
#[pyfunction]
fn mb_constellation(base_order: u32, entropy: f64) -> PyResult<(Vec<(f64, f64)>, Vec<f64>)> {
    let c = mb_for_entropy(base_order, entropy).map_err(err)?;
    Ok((
        c.points.iter().map(|p| (p.re, p.im)).collect(),
        c.priors.clone(),
    ))
}

/// Normalized GMI from transmitted bits and their LLRs.
#[pyfunction]
fn ngmi(bits: Vec<u8>, llrs: Vec<f64>, bits_per_symbol: usize) -> PyResult<f64> {
    let rec = BitLlrRecord {
        bits,
        llrs,
        bits_per_symbol,
    };
    ngmi_rs(&rec, bits_per_symbol).map_err(err)
}

/// Predicted FEC overhead (1 - NGMI) / NGMI.
#[pyfunction]
fn fec_overhead(ngmi_value: f64) -> PyResult<f64> {
    fec_overhead_rs(ngmi_value).map_err(err)
}

/// Rate-weighted average NGMI over (baud, bits_per_symbol, ngmi) triples.
#[pyfunction]
fn average_ngmi(bands: Vec<(f64, f64, f64)>) -> PyResult<f64> {
    nyqscm::metrics::average_ngmi(&bands).map_err(err)
}

/// PAPR in dB of a real sample sequence at the given percentile.
#[pyfunction]
#[pyo3(signature = (samples, percentile=99.99))]
fn measure_papr(samples: Vec<f64>, percentile: f64) -> PyResult<f64> {
    let powers: Vec<f64> = samples.iter().map(|s| s * s).collect();
    papr_db_from_powers(&powers, percentile).map_err(err)
}

/// CCDM encode: k bits -> amplitude level indices with the composition.
#[pyfunction]
fn ccdm_encode(bits: Vec<u8>, composition: Vec<u32>) -> PyResult<Vec<u8>> {
    CcdmCode::new(composition).map_err(err)?.encode(&bits).map_err(err)
}

/// CCDM decode: amplitude level indices -> k bits.
#[pyfunction]
fn ccdm_decode(levels: Vec<u8>, composition: Vec<u32>) -> PyResult<Vec<u8>> {
    CcdmCode::new(composition).map_err(err)?.decode(&levels).map_err(err)
}

/// Input bits per CCDM block for a composition.
#[pyfunction]
fn ccdm_input_bits(composition: Vec<u32>) -> PyResult<usize> {
    Ok(CcdmCode::new(composition).map_err(err)?.input_bits())
}

/// Bitwise LLRs of received symbols against a uniform square constellation.
#[pyfunction]
fn qam_llrs(
    received: Vec<(f64, f64)>,
    tx_bits: Vec<u8>,
    order: u32,
    noise_var: f64,
) -> PyResult<Vec<f64>> {
    let c = nyqscm::modem::build_constellation(order, None).map_err(err)?;
    let rx: Vec<Complex64> = received.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    Ok(nyqscm::metrics::compute_llrs(&rx, &tx_bits, &c, noise_var)
        .map_err(err)?
        .llrs)
}

/// Run a shipped preset end to end; returns the link report as JSON.
#[pyfunction]
#[pyo3(signature = (name, seed=None, payload_symbols=None))]
fn run_preset(name: &str, seed: Option<u64>, payload_symbols: Option<usize>) -> PyResult<String> {
    let mut cfg = preset(name).map_err(err)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(symbols) = payload_symbols {
        cfg.tx.payload = PayloadConfig::MinSymbols { symbols };
    }
    let report = run_link(&cfg).map_err(err)?;
    serde_json::to_string_pretty(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn nyqscm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(design_rrc, m)?)?;
    m.add_function(wrap_pyfunction!(small_signal_response, m)?)?;
    m.add_function(wrap_pyfunction!(dispersion_nulls, m)?)?;
    m.add_function(wrap_pyfunction!(plan_bands, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_nulls, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_loading, m)?)?;
    m.add_function(wrap_pyfunction!(mb_constellation, m)?)?;
    m.add_function(wrap_pyfunction!(ngmi, m)?)?;
    m.add_function(wrap_pyfunction!(fec_overhead, m)?)?;
    m.add_function(wrap_pyfunction!(average_ngmi, m)?)?;
    m.add_function(wrap_pyfunction!(measure_papr, m)?)?;
    m.add_function(wrap_pyfunction!(ccdm_encode, m)?)?;
    m.add_function(wrap_pyfunction!(ccdm_decode, m)?)?;
    m.add_function(wrap_pyfunction!(ccdm_input_bits, m)?)?;
    m.add_function(wrap_pyfunction!(qam_llrs, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    Ok(())
}
