//! Link scoring: BER, bitwise LLRs, normalized GMI, predicted FEC overhead,
//! and report assembly.
//!
//! NGMI per band comes from exact bitwise log-likelihood ratios of the
//! equalized symbols against the known transmitted bits; the aggregate is
//! the rate-weighted mean across bands.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::ShapedConstellation;

/// Pre-FEC BER threshold of 7% hard-decision FEC.
pub const HD_FEC_BER: f64 = 3.8e-3;
/// Pre-FEC BER threshold of 20% soft-decision FEC.
pub const SD_FEC_BER: f64 = 2.2e-2;
/// NGMI threshold matching 7% FEC overhead.
pub const HD_FEC_NGMI: f64 = 0.9346;
/// NGMI threshold of the 20% LDPC + 6.25% staircase concatenation.
pub const SD_FEC_NGMI: f64 = 0.858;

/// LLR magnitudes are clamped here; large enough that the clamp moves NGMI
/// by far less than its reporting precision.
pub const LLR_CLAMP: f64 = 50.0;

/// Transmitted bits and their per-bit LLRs, symbol-major.
#[derive(Debug, Clone)]
pub struct BitLlrRecord {
    pub bits: Vec<u8>,
    pub llrs: Vec<f64>,
    pub bits_per_symbol: usize,
}

/// Hamming distance over total length.
pub fn ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<f64> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::parameter(format!(
            "bit streams differ in length: {} vs {}",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    if tx_bits.is_empty() {
        return Err(Error::parameter("empty bit streams"));
    }
    let errors = tx_bits
        .iter()
        .zip(rx_bits.iter())
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / tx_bits.len() as f64)
}

/// Exact bitwise LLRs under circular Gaussian noise with the symbol priors
/// included: Lambda_i = ln sum_{s: b_i=0} P(s) e^{-|y-s|^2/sigma^2}
///                    - ln sum_{s: b_i=1} P(s) e^{-|y-s|^2/sigma^2},
/// clamped to +-LLR_CLAMP. Positive values favor bit 0.
pub fn compute_llrs(
    received: &[Complex64],
    tx_bits: &[u8],
    constellation: &ShapedConstellation,
    noise_var: f64,
) -> Result<BitLlrRecord> {
    if !(noise_var > 0.0) {
        return Err(Error::parameter("noise variance must be positive"));
    }
    let m = constellation.bits_per_symbol;
    if tx_bits.len() != received.len() * m {
        return Err(Error::parameter(format!(
            "need {} bits for {} symbols of {m} bits",
            received.len() * m,
            received.len()
        )));
    }
    let order = constellation.order();
    let log_priors: Vec<f64> = constellation
        .priors
        .iter()
        .map(|&p| p.max(1e-300).ln())
        .collect();
    let mut llrs = Vec::with_capacity(tx_bits.len());
    let mut exps = vec![0.0f64; order];
    for &y in received {
        for (k, e) in exps.iter_mut().enumerate() {
            *e = log_priors[k] - (y - constellation.points[k]).norm_sqr() / noise_var;
        }
        for i in 0..m {
            let mut max0 = f64::NEG_INFINITY;
            let mut max1 = f64::NEG_INFINITY;
            for k in 0..order {
                if constellation.bit(k, i) == 0 {
                    max0 = max0.max(exps[k]);
                } else {
                    max1 = max1.max(exps[k]);
                }
            }
            let mut sum0 = 0.0;
            let mut sum1 = 0.0;
            for k in 0..order {
                if constellation.bit(k, i) == 0 {
                    sum0 += (exps[k] - max0).exp();
                } else {
                    sum1 += (exps[k] - max1).exp();
                }
            }
            let llr = (max0 + sum0.ln()) - (max1 + sum1.ln());
            llrs.push(llr.clamp(-LLR_CLAMP, LLR_CLAMP));
        }
    }
    Ok(BitLlrRecord {
        bits: tx_bits.to_vec(),
        llrs,
        bits_per_symbol: m,
    })
}

/// Normalized GMI: 1 - (1/(m S)) sum_k sum_i log2(1 + e^{-(-1)^{b} Lambda}),
/// where the exponent sign is fixed so a correct, confident LLR contributes
/// a vanishing penalty. May go negative for garbage input; clamped only in
/// the report.
pub fn ngmi(rec: &BitLlrRecord, bits_per_symbol: usize) -> Result<f64> {
    if rec.bits.is_empty() || rec.bits.len() != rec.llrs.len() {
        return Err(Error::parameter("bit/LLR arrays must align and be non-empty"));
    }
    let total: f64 = rec
        .bits
        .iter()
        .zip(rec.llrs.iter())
        .map(|(&b, &l)| {
            let e = if b == 0 { -l } else { l };
            // log2(1 + exp(e)), stabilized for large |e|.
            if e > 30.0 {
                e / std::f64::consts::LN_2
            } else {
                e.exp().ln_1p() / std::f64::consts::LN_2
            }
        })
        .sum();
    let s = rec.bits.len() as f64 / rec.bits_per_symbol as f64;
    Ok(1.0 - total / (bits_per_symbol as f64 * s))
}

/// Predicted FEC overhead OH = (1 - NGMI) / NGMI.
pub fn fec_overhead(ngmi_value: f64) -> Result<f64> {
    if !(ngmi_value > 0.0 && ngmi_value <= 1.0) {
        return Err(Error::parameter(format!(
            "ngmi must lie in (0, 1], got {ngmi_value}"
        )));
    }
    Ok((1.0 - ngmi_value) / ngmi_value)
}

/// Rate-weighted mean NGMI: sum RS_i m_i NGMI_i / sum RS_i m_i.
pub fn average_ngmi(bands: &[(f64, f64, f64)]) -> Result<f64> {
    if bands.is_empty() {
        return Err(Error::parameter("no bands"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(rs, m, g) in bands {
        if !(rs > 0.0 && m > 0.0) {
            return Err(Error::parameter("rates and bit counts must be positive"));
        }
        num += rs * m * g;
        den += rs * m;
    }
    Ok(num / den)
}

/// Pass/fail flags of one band against the pinned thresholds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct BandFlags {
    pub ber_hd_ok: bool,
    pub ber_sd_ok: bool,
    pub ngmi_hd_ok: bool,
    pub ngmi_sd_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BandReport {
    pub i: usize,
    pub baud_hz: f64,
    /// Information bits per symbol (entropy for shaped formats).
    pub m: f64,
    pub ber: f64,
    /// Symbol error rate before any distribution-matcher decoding.
    pub ser: f64,
    pub ngmi: f64,
    pub mse_db: f64,
    pub flags: BandFlags,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AggregateReport {
    pub avg_ngmi: f64,
    pub gross_bps: f64,
    pub net_bps: f64,
    pub papr_db: f64,
    pub cspr_db: f64,
    pub oh_pred: f64,
    pub all_bands_hd_ok: bool,
    pub all_bands_sd_ok: bool,
}

/// Per-band and aggregate link scorecard.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LinkReport {
    pub schema_version: u32,
    pub bands: Vec<BandReport>,
    pub aggregate: AggregateReport,
    pub seed: u64,
    pub config_hash: String,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Raw ingredients of one band's report entry.
pub struct BandOutcome {
    pub index: usize,
    pub baud_hz: f64,
    pub info_bits_per_symbol: f64,
    pub ber: f64,
    pub ser: f64,
    pub ngmi: f64,
    pub mse_db: f64,
}

/// Assemble the scorecard and flag every band against the thresholds.
pub fn assemble_report(
    outcomes: &[BandOutcome],
    gross_bps: f64,
    net_bps: f64,
    papr_db: f64,
    cspr_db: f64,
    seed: u64,
    config_hash: String,
) -> Result<LinkReport> {
    if outcomes.is_empty() {
        return Err(Error::parameter("no band outcomes"));
    }
    let bands: Vec<BandReport> = outcomes
        .iter()
        .map(|o| BandReport {
            i: o.index,
            baud_hz: o.baud_hz,
            m: o.info_bits_per_symbol,
            ber: o.ber,
            ser: o.ser,
            ngmi: o.ngmi.min(1.0),
            mse_db: o.mse_db,
            flags: BandFlags {
                ber_hd_ok: o.ber < HD_FEC_BER,
                ber_sd_ok: o.ber < SD_FEC_BER,
                ngmi_hd_ok: o.ngmi >= HD_FEC_NGMI,
                ngmi_sd_ok: o.ngmi >= SD_FEC_NGMI,
            },
        })
        .collect();
    let avg = average_ngmi(
        &outcomes
            .iter()
            .map(|o| (o.baud_hz, o.info_bits_per_symbol, o.ngmi))
            .collect::<Vec<_>>(),
    )?;
    let aggregate = AggregateReport {
        avg_ngmi: avg.min(1.0),
        gross_bps,
        net_bps,
        papr_db,
        cspr_db,
        oh_pred: if avg > 0.0 { (1.0 - avg) / avg } else { f64::INFINITY },
        all_bands_hd_ok: bands.iter().all(|b| b.flags.ber_hd_ok),
        all_bands_sd_ok: bands.iter().all(|b| b.flags.ber_sd_ok),
    };
    Ok(LinkReport {
        schema_version: REPORT_SCHEMA_VERSION,
        bands,
        aggregate,
        seed,
        config_hash,
    })
}
