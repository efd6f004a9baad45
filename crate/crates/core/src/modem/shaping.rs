//! Probabilistic shaping: Maxwell-Boltzmann priors for a target entropy,
//! entropy loading across bands, and AWGN mutual information of uniform QAM.

use std::collections::HashMap;
use std::sync::Mutex;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::constellation::{build_constellation, entropy_bits, raw_energies, ShapedConstellation};
use crate::error::{Error, Result};

fn mb_priors(energies: &[f64], nu: f64) -> Vec<f64> {
    let weights: Vec<f64> = energies.iter().map(|&e| (-nu * e).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

fn nu_cache() -> &'static Mutex<HashMap<(u32, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Solve the Maxwell-Boltzmann shaping factor for the requested entropy and
/// return the shaped constellation (unit mean energy under the priors).
///
/// The shaping-factor lookup is realized as a memoized bisection on nu:
/// entropy is strictly decreasing in nu, from log2(M) at nu = 0.
pub fn mb_for_entropy(base_order: u32, target_entropy: f64) -> Result<ShapedConstellation> {
    let cap = (base_order as f64).log2();
    if !(target_entropy > 1.0 && target_entropy <= cap) {
        return Err(Error::parameter(format!(
            "target entropy {target_entropy} outside (1, {cap}]"
        )));
    }
    let energies = raw_energies(base_order)?;
    if (target_entropy - cap).abs() < 1e-12 {
        return build_constellation(base_order, None);
    }
    let key = (base_order, target_entropy.to_bits());
    let cached = nu_cache().lock().unwrap().get(&key).copied();
    let nu = match cached {
        Some(nu) => nu,
        None => {
            // Bracket: entropy(0) = cap, entropy grows small as nu grows.
            let mut hi = 1.0;
            while entropy_bits(&mb_priors(&energies, hi)) > target_entropy {
                hi *= 2.0;
                if hi > 1e6 {
                    return Err(Error::parameter("entropy target unreachable"));
                }
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let h = entropy_bits(&mb_priors(&energies, mid));
                if h > target_entropy {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            let nu = 0.5 * (lo + hi);
            nu_cache().lock().unwrap().insert(key, nu);
            nu
        }
    };
    let priors = mb_priors(&energies, nu);
    let achieved = entropy_bits(&priors);
    if (achieved - target_entropy).abs() > 1e-6 {
        return Err(Error::dsp(
            "mb_for_entropy",
            format!("bisection stalled at entropy {achieved}"),
        ));
    }
    build_constellation(base_order, Some(priors))
}

/// Per-band entropies after loading toward a target aggregate rate.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EntropyLoadingPlan {
    pub initial_entropy: Vec<f64>,
    pub entropy: Vec<f64>,
    pub baud_hz: Vec<f64>,
    pub rs_target_bps: f64,
}

impl EntropyLoadingPlan {
    /// sum H_i RS_i, which must equal the target.
    pub fn achieved_rate(&self) -> f64 {
        self.entropy
            .iter()
            .zip(self.baud_hz.iter())
            .map(|(h, rs)| h * rs)
            .sum()
    }
}

/// Distribute entropy across bands so the aggregate rate hits `rs_target`:
/// each band gets H_i = H0_i + (RS_target - sum H0_t RS_t) / sum RS_t, with
/// entries clamped to (1, cap_i] and the residual redistributed over the
/// unclamped bands.
pub fn entropy_loading(
    h0: &[f64],
    rs: &[f64],
    caps: &[f64],
    rs_target: f64,
) -> Result<EntropyLoadingPlan> {
    let n = h0.len();
    if n == 0 || rs.len() != n || caps.len() != n {
        return Err(Error::parameter("entropy loading arrays must align"));
    }
    if rs.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::parameter("baud rates must be positive"));
    }
    const H_MIN: f64 = 1.0;
    let mut h: Vec<f64> = h0.to_vec();
    let mut fixed = vec![false; n];
    for _ in 0..=n {
        let free_rs: f64 = (0..n).filter(|&i| !fixed[i]).map(|i| rs[i]).sum();
        if free_rs == 0.0 {
            break;
        }
        let fixed_rate: f64 = (0..n).filter(|&i| fixed[i]).map(|i| h[i] * rs[i]).sum();
        let free_rate: f64 = (0..n).filter(|&i| !fixed[i]).map(|i| h0[i] * rs[i]).sum();
        let delta = (rs_target - fixed_rate - free_rate) / free_rs;
        let mut newly_fixed = false;
        for i in 0..n {
            if fixed[i] {
                continue;
            }
            let v = h0[i] + delta;
            if v > caps[i] {
                h[i] = caps[i];
                fixed[i] = true;
                newly_fixed = true;
            } else if v < H_MIN {
                h[i] = H_MIN;
                fixed[i] = true;
                newly_fixed = true;
            } else {
                h[i] = v;
            }
        }
        if !newly_fixed {
            break;
        }
    }
    let plan = EntropyLoadingPlan {
        initial_entropy: h0.to_vec(),
        entropy: h,
        baud_hz: rs.to_vec(),
        rs_target_bps: rs_target,
    };
    let achieved = plan.achieved_rate();
    if (achieved - rs_target).abs() > 1e-6 * rs_target.abs().max(1.0) {
        let min_rate: f64 = rs.iter().map(|r| H_MIN * r).sum();
        let max_rate: f64 = caps.iter().zip(rs.iter()).map(|(c, r)| c * r).sum();
        return Err(Error::parameter(format!(
            "target rate {rs_target} unreachable after clamping; achievable range [{min_rate}, {max_rate}]"
        )));
    }
    Ok(plan)
}

/// AWGN symbol-wise mutual information of uniform M-QAM at the given SNR,
/// in bits/symbol, clipped to [1, log2 M]. Deterministic Monte-Carlo
/// estimate (fixed internal seed), memoized on (order, centi-dB).
pub fn initial_entropy(snr_db: f64, base_order: u32) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::parameter("snr must be finite"));
    }
    let cap = (base_order as f64).log2();
    if snr_db > 60.0 {
        return Ok(cap);
    }
    static MI_CACHE: OnceLock<Mutex<HashMap<(u32, i64), f64>>> = OnceLock::new();
    let cache = MI_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (base_order, (snr_db * 100.0).round() as i64);
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let c = build_constellation(base_order, None)?;
    let snr = 10f64.powf(snr_db / 10.0);
    let sigma2 = 1.0 / snr; // unit-energy constellation
    let trials = if base_order >= 128 { 60_000 } else { 120_000 };
    let mi = mi_monte_carlo(&c.points, sigma2, trials, 0x6e79_7173_636d);
    let result = mi.clamp(1.0, cap);
    cache.lock().unwrap().insert(key, result);
    Ok(result)
}

/// Symbol-wise MI of an equiprobable point set over complex AWGN with total
/// noise variance `sigma2`, by Monte-Carlo with the given seed.
pub fn mi_monte_carlo(points: &[Complex64], sigma2: f64, trials: usize, seed: u64) -> f64 {
    let m = points.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, (sigma2 / 2.0).sqrt()).expect("normal");
    let mut acc = 0.0;
    for t in 0..trials {
        let s = points[t % m];
        let n = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        let y = s + n;
        // log2 sum_j exp((|n|^2 - |y - s_j|^2) / sigma2), stabilized.
        let base = n.norm_sqr();
        let mut best = f64::NEG_INFINITY;
        let exps: Vec<f64> = points
            .iter()
            .map(|&p| {
                let e = (base - (y - p).norm_sqr()) / sigma2;
                if e > best {
                    best = e;
                }
                e
            })
            .collect();
        let sum: f64 = exps.iter().map(|&e| (e - best).exp()).sum();
        acc += (best + sum.ln()) / std::f64::consts::LN_2;
    }
    (m as f64).log2() - acc / trials as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_entropy_target_gives_uniform_priors() {
        let c = mb_for_entropy(16, 4.0).unwrap();
        for p in &c.priors {
            assert!((p - 1.0 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn target_entropy_is_hit_within_tolerance() {
        let c = mb_for_entropy(16, 3.5).unwrap();
        assert!((entropy_bits(&c.priors) - 3.5).abs() < 1e-6);
        assert!((c.mean_energy() - 1.0).abs() < 1e-9);
        let c = mb_for_entropy(256, 6.4).unwrap();
        assert!((entropy_bits(&c.priors) - 6.4).abs() < 1e-6);
    }

    #[test]
    fn entropy_is_monotone_in_nu() {
        let energies = raw_energies(16).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let nu = 0.05 * k as f64;
            let h = entropy_bits(&mb_priors(&energies, nu));
            assert!(h <= last + 1e-12, "entropy rose at nu={nu}");
            last = h;
        }
    }

    #[test]
    fn mb_priors_respect_quadrant_symmetry() {
        let c = mb_for_entropy(16, 3.2).unwrap();
        for (i, pi) in c.points.iter().enumerate() {
            for (j, pj) in c.points.iter().enumerate() {
                if (pi.norm() - pj.norm()).abs() < 1e-12 {
                    assert!((c.priors[i] - c.priors[j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn loading_identity_when_target_already_met() {
        let h0 = [3.0, 2.0];
        let rs = [2e9, 1e9];
        let target = 8e9;
        let plan = entropy_loading(&h0, &rs, &[4.0, 4.0], target).unwrap();
        assert_eq!(plan.entropy, vec![3.0, 2.0]);
    }

    #[test]
    fn loading_matches_closed_form() {
        // H0 = {3, 2}, RS = {2, 1} GBaud, target 9 Gbit/s -> H = {10/3, 7/3}.
        let plan = entropy_loading(&[3.0, 2.0], &[2e9, 1e9], &[6.0, 6.0], 9e9).unwrap();
        assert!((plan.entropy[0] - 10.0 / 3.0).abs() < 1e-9);
        assert!((plan.entropy[1] - 7.0 / 3.0).abs() < 1e-9);
        assert!((plan.achieved_rate() - 9e9).abs() < 1e-3);
    }

    #[test]
    fn loading_clamps_and_redistributes() {
        // First band capped at 2.5; the residual moves to the second.
        let plan = entropy_loading(&[2.4, 2.0], &[1e9, 1e9], &[2.5, 6.0], 6e9).unwrap();
        assert!((plan.entropy[0] - 2.5).abs() < 1e-9);
        assert!((plan.entropy[1] - 3.5).abs() < 1e-9);
    }

    #[test]
    fn loading_reports_achievable_range_when_impossible() {
        let err = entropy_loading(&[2.0], &[1e9], &[3.0], 10e9).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unreachable"), "{msg}");
    }

    #[test]
    fn mi_saturates_at_high_snr_and_matches_oracle_at_0db() {
        assert_eq!(initial_entropy(80.0, 16).unwrap(), 4.0);
        // QPSK at 0 dB: independent Monte-Carlo oracle with its own seed.
        let mi = initial_entropy(0.0, 4).unwrap();
        let c = build_constellation(4, None).unwrap();
        let oracle = mi_monte_carlo(&c.points, 1.0, 1_000_000, 0xdead_beef);
        assert!((mi - oracle).abs() < 0.05, "mi {mi} oracle {oracle}");
    }

    #[test]
    fn mi_is_monotone_in_snr() {
        let mut last = 0.0;
        for snr in [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0] {
            let mi = initial_entropy(snr, 16).unwrap();
            assert!(mi >= last - 0.02, "MI dropped at {snr} dB");
            last = mi;
        }
    }
}
