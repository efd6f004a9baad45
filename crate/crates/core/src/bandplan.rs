//! Channel estimation and automatic multi-rate band planning.
//!
//! The dispersive IM/DD channel has cosine power fading with spectral nulls.
//! Planning walks each inter-null segment: find the peak response, walk out
//! to the two frequencies a fixed drop below it, and place a band across that
//! window. Bands therefore dodge the nulls no matter where dispersion puts
//! them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::ModulationSpec;
use crate::sigkit::fft::{fft_in_place, next_pow2};
use crate::sigkit::RealWaveform;
use num_complex::Complex64;

/// Default analysis grid spacing.
pub const DEFAULT_RESOLUTION_HZ: f64 = 5.0e7;

/// Default drop from the per-segment peak that bounds a band.
pub const DEFAULT_DROP_DB: f64 = 10.0;

/// Default guard subtracted from each band window.
pub const DEFAULT_GUARD_HZ: f64 = 1.0e8;

/// Bands thinner than this after the walk are dropped as slivers.
pub const MIN_BAUD_HZ: f64 = 5.0e8;

/// Baud rates and centers snap to this grid so resampling ratios stay
/// rational with small terms.
pub const BAUD_GRID_HZ: f64 = 1.0e7;

/// Moving average (in dB) applied before the null search to suppress probe
/// noise without filling the notches in.
pub const SMOOTHING_BINS: usize = 5;

/// The drop walk smooths each inter-null segment over this fraction of the
/// segment's own width. Dispersive fading is periodic in f^2, so scaling the
/// analysis window with the local lobe width treats every lobe alike.
pub const WALK_SMOOTHING_FRACTION: f64 = 0.26;

/// Segments whose peak response sits more than this below the global peak
/// are not worth a band (they would need that much gain equalization).
pub const SEGMENT_MIN_PEAK_REL_DB: f64 = 17.5;

/// Frequencies where the usable range ends: the smoothed estimate has fallen
/// this far below its maximum.
pub const DEFAULT_FMAX_DROP_DB: f64 = 20.0;

/// Magnitude response of a channel on a uniform frequency grid, normalized
/// to 0 dB at its maximum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelEstimate {
    freqs_hz: Vec<f64>,
    magnitude_db: Vec<f64>,
    resolution_hz: f64,
}

impl ChannelEstimate {
    pub fn new(freqs_hz: Vec<f64>, magnitude_db: Vec<f64>, resolution_hz: f64) -> Result<Self> {
        if freqs_hz.len() != magnitude_db.len() || freqs_hz.is_empty() {
            return Err(Error::parameter("estimate grids must match and be non-empty"));
        }
        if !(resolution_hz > 0.0) {
            return Err(Error::parameter("estimate resolution must be positive"));
        }
        if freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::parameter("estimate grid must ascend"));
        }
        if magnitude_db.iter().any(|m| !m.is_finite()) {
            return Err(Error::parameter("estimate magnitudes must be finite"));
        }
        Ok(Self {
            freqs_hz,
            magnitude_db,
            resolution_hz,
        })
    }

    /// Evaluate an analytic response on a uniform grid [0, f_max].
    pub fn from_response(
        f_max_hz: f64,
        resolution_hz: f64,
        gain_db: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(f_max_hz > 0.0 && resolution_hz > 0.0) {
            return Err(Error::parameter("f_max and resolution must be positive"));
        }
        let n = (f_max_hz / resolution_hz).floor() as usize + 1;
        let freqs: Vec<f64> = (0..n).map(|k| k as f64 * resolution_hz).collect();
        let mut mags: Vec<f64> = freqs.iter().map(|&f| gain_db(f)).collect();
        let peak = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for m in &mut mags {
            *m -= peak;
            *m = m.max(-60.0);
        }
        Self::new(freqs, mags, resolution_hz)
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn magnitude_db(&self) -> &[f64] {
        &self.magnitude_db
    }

    pub fn resolution_hz(&self) -> f64 {
        self.resolution_hz
    }

    pub fn f_max(&self) -> f64 {
        *self.freqs_hz.last().unwrap()
    }

    /// Linear interpolation of the stored magnitude at `f_hz`.
    pub fn gain_db_at(&self, f_hz: f64) -> f64 {
        let res = self.resolution_hz;
        let pos = (f_hz - self.freqs_hz[0]) / res;
        if pos <= 0.0 {
            return self.magnitude_db[0];
        }
        let idx = pos.floor() as usize;
        if idx + 1 >= self.magnitude_db.len() {
            return *self.magnitude_db.last().unwrap();
        }
        let frac = pos - idx as f64;
        self.magnitude_db[idx] * (1.0 - frac) + self.magnitude_db[idx + 1] * frac
    }

    /// Moving-average smoothing of the linear power response, returned in dB.
    pub fn smoothed_db(&self, bins: usize) -> Vec<f64> {
        smooth_linear_db(&self.magnitude_db, bins)
    }

    /// Moving-average smoothing of the dB response (keeps notches deep).
    pub fn smoothed_db_domain(&self, bins: usize) -> Vec<f64> {
        smooth_db_domain(&self.magnitude_db, bins)
    }
}

fn smooth_linear_db(mag_db: &[f64], bins: usize) -> Vec<f64> {
    let lin: Vec<f64> = mag_db.iter().map(|&m| 10f64.powf(m / 10.0)).collect();
    let half = bins / 2;
    let n = lin.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let mean = lin[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
            10.0 * mean.max(1e-12).log10()
        })
        .collect()
}

fn smooth_db_domain(mag_db: &[f64], bins: usize) -> Vec<f64> {
    let half = bins / 2;
    let n = mag_db.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            mag_db[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// One-sided Welch power spectrum with a Hann window and 50 % overlap.
fn welch_psd(x: &[f64], nperseg: usize) -> Vec<f64> {
    let nfft = next_pow2(nperseg);
    let window: Vec<f64> = (0..nperseg)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (nperseg - 1) as f64).cos())
        .collect();
    let hop = nperseg / 2;
    let n_freq = nfft / 2 + 1;
    let mut acc = vec![0.0; n_freq];
    let mut count = 0usize;
    let mut start = 0usize;
    while start + nperseg <= x.len() {
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        for (i, b) in buf.iter_mut().take(nperseg).enumerate() {
            *b = Complex64::new(x[start + i] * window[i], 0.0);
        }
        fft_in_place(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
        count += 1;
        start += hop;
    }
    if count == 0 {
        // Signal shorter than one segment: single zero-padded periodogram.
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        for (i, &v) in x.iter().enumerate() {
            buf[i] = Complex64::new(v, 0.0);
        }
        fft_in_place(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a = buf[k].norm_sqr();
        }
        count = 1;
    }
    for a in &mut acc {
        *a /= count as f64;
    }
    acc
}

/// Estimate the channel magnitude response as the smoothed Welch-spectrum
/// ratio of a received probe to the transmitted probe, normalized to 0 dB at
/// its maximum. Bins where the probe carries no power are floored at -60 dB.
pub fn estimate_channel(
    tx_probe: &RealWaveform,
    rx_probe: &RealWaveform,
    resolution_hz: f64,
) -> Result<ChannelEstimate> {
    if (tx_probe.sample_rate_hz() - rx_probe.sample_rate_hz()).abs() > 1e-3 {
        return Err(Error::parameter("probe sample rates must match"));
    }
    if !(resolution_hz > 0.0) {
        return Err(Error::parameter("resolution must be positive"));
    }
    let fs = tx_probe.sample_rate_hz();
    let nperseg = ((fs / resolution_hz).round() as usize).max(16);
    let s_tx = welch_psd(tx_probe.samples(), nperseg);
    let s_rx = welch_psd(rx_probe.samples(), nperseg);
    let nfft = next_pow2(nperseg);
    let res = fs / nfft as f64;
    // Bins where the probe carries too little power produce noise-dominated
    // ratios; mark them at the floor instead of letting them skew the
    // normalization.
    let tx_peak = s_tx.iter().cloned().fold(0.0, f64::max);
    let usable = tx_peak * 10f64.powf(-2.5);
    let mut mags: Vec<f64> = s_tx
        .iter()
        .zip(s_rx.iter())
        .map(|(&t, &r)| {
            if t <= usable {
                -60.0
            } else {
                (10.0 * (r / t).log10()).max(-60.0)
            }
        })
        .collect();
    let peak = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for m in &mut mags {
        *m -= peak;
        *m = m.max(-60.0);
    }
    let freqs: Vec<f64> = (0..mags.len()).map(|k| k as f64 * res).collect();
    ChannelEstimate::new(freqs, mags, res)
}

/// Local minima of the smoothed estimate below `floor_db`, refined by
/// parabolic interpolation and deduplicated within two grid bins.
///
/// Plateau-aware: a run of equal values counts once (its midpoint) and only
/// when strictly higher values bound it on both sides, so floored stretches
/// at the band edges do not register.
pub fn find_spectral_nulls(est: &ChannelEstimate, floor_db: f64) -> Vec<f64> {
    let mag = est.smoothed_db_domain(SMOOTHING_BINS);
    let freqs = est.freqs_hz();
    let res = est.resolution_hz();
    let n = mag.len();
    let mut nulls = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if mag[i] >= floor_db || mag[i] > mag[i - 1] {
            i += 1;
            continue;
        }
        // Extend a plateau of equal values.
        let mut j = i;
        while j + 1 < n && (mag[j + 1] - mag[i]).abs() < 1e-12 {
            j += 1;
        }
        if mag[i] < mag[i - 1] && j + 1 < n && mag[i] < mag[j + 1] {
            if j == i {
                let (a, b, c) = (mag[i - 1], mag[i], mag[i + 1]);
                let denom = a - 2.0 * b + c;
                let delta = if denom.abs() > 1e-12 {
                    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                };
                nulls.push(freqs[i] + delta * res);
            } else {
                nulls.push(0.5 * (freqs[i] + freqs[j]));
            }
        }
        i = j + 1;
    }
    nulls.dedup_by(|b, a| (*b - *a).abs() < 2.0 * res);
    nulls
}

/// One subcarrier of the plan. The segment records the inter-null region the
/// band lives in; the occupied range must stay inside it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Band {
    pub index: usize,
    pub f_center_hz: f64,
    pub baud_hz: f64,
    pub rolloff: f64,
    pub segment_hz: (f64, f64),
    pub modulation: Option<ModulationSpec>,
}

impl Band {
    /// Lower and upper edge of the occupied range.
    pub fn occupied_hz(&self) -> (f64, f64) {
        let half = (1.0 + self.rolloff) * self.baud_hz / 2.0;
        (self.f_center_hz - half, self.f_center_hz + half)
    }
}

/// The multi-rate subcarrier layout.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BandPlan {
    pub bands: Vec<Band>,
    pub f_max_hz: f64,
    pub drop_db: f64,
}

impl BandPlan {
    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::parameter("plan needs at least one band"));
        }
        for b in &self.bands {
            if !(b.baud_hz > 0.0) {
                return Err(Error::parameter(format!(
                    "band {} has nonpositive baud",
                    b.index
                )));
            }
            let (lo, hi) = b.occupied_hz();
            if lo < -1.0 || hi > self.f_max_hz + 1.0 {
                return Err(Error::parameter(format!(
                    "band {} occupied range [{lo}, {hi}] leaves [0, {}]",
                    b.index, self.f_max_hz
                )));
            }
        }
        for w in self.bands.windows(2) {
            if w[1].f_center_hz <= w[0].f_center_hz {
                return Err(Error::parameter("bands must ascend by center frequency"));
            }
            if w[0].occupied_hz().1 > w[1].occupied_hz().0 + 1.0 {
                return Err(Error::parameter(format!(
                    "bands {} and {} overlap",
                    w[0].index, w[1].index
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: BandPlan = serde_json::from_str(s)?;
        plan.validate()?;
        Ok(plan)
    }
}

fn snap(f: f64) -> f64 {
    (f / BAUD_GRID_HZ).round() * BAUD_GRID_HZ
}

/// Usable upper frequency: the highest grid point whose smoothed response is
/// within `fmax_drop_db` of the maximum.
pub fn usable_f_max(est: &ChannelEstimate, fmax_drop_db: f64) -> f64 {
    let bins = ((1.0e9 / est.resolution_hz()).round() as usize).max(1) | 1;
    let smooth = est.smoothed_db(bins);
    let peak = smooth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut f_max = est.freqs_hz()[0];
    for (f, m) in est.freqs_hz().iter().zip(smooth.iter()) {
        if *m >= peak - fmax_drop_db {
            f_max = *f;
        }
    }
    f_max
}

/// Derive the band layout from a channel estimate.
///
/// Each inter-null segment (bounded by detected nulls, 0, and `f_max`)
/// contributes one band: find the segment's peak of the smoothed response,
/// walk outward to the two frequencies `drop_db` below that peak (clamped to
/// the segment edges), subtract the guard, and snap to the baud grid.
/// Slivers below `MIN_BAUD_HZ` are dropped. Roll-offs start at zero; see
/// [`assign_rolloff`].
pub fn plan_bands(
    est: &ChannelEstimate,
    f_max_hz: f64,
    drop_db: f64,
    guard_hz: f64,
) -> Result<BandPlan> {
    if !(drop_db > 0.0) {
        return Err(Error::parameter("drop_db must be positive"));
    }
    if f_max_hz > est.f_max() + est.resolution_hz() {
        return Err(Error::parameter(format!(
            "estimate covers only {:.3} GHz of the requested {:.3} GHz",
            est.f_max() / 1e9,
            f_max_hz / 1e9
        )));
    }
    let f_max = f_max_hz.min(est.f_max());
    let freqs = est.freqs_hz();
    let res = est.resolution_hz();
    let nulls: Vec<f64> = find_spectral_nulls(est, -15.0)
        .into_iter()
        .filter(|&f| f > 0.0 && f < f_max)
        .collect();

    let mut edges = vec![0.0];
    edges.extend(nulls.iter().cloned());
    edges.push(f_max);

    let idx_of = |f: f64| -> usize { ((f / res).round() as usize).min(freqs.len() - 1) };
    let global_peak = est
        .smoothed_db_domain(SMOOTHING_BINS)
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    let mut bands = Vec::new();
    for seg in edges.windows(2) {
        let (seg_lo, seg_hi) = (seg[0], seg[1]);
        if seg_hi - seg_lo < MIN_BAUD_HZ {
            continue;
        }
        let (i_lo, i_hi) = (idx_of(seg_lo), idx_of(seg_hi));
        if i_hi <= i_lo + 1 {
            continue;
        }
        // Walk-smooth the segment over a fraction of its own width.
        let bins =
            (((seg_hi - seg_lo) * WALK_SMOOTHING_FRACTION / res).round() as usize).max(1) | 1;
        let smooth = smooth_linear_db(&est.magnitude_db()[i_lo..=i_hi], bins);
        // Peak of the smoothed response inside the segment.
        let (p, peak_db) = smooth
            .iter()
            .cloned()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if peak_db < global_peak - SEGMENT_MIN_PEAK_REL_DB {
            continue;
        }
        let threshold = peak_db - drop_db;
        // Walk outward with linear interpolation at the crossing.
        let mut f_lo = seg_lo;
        for i in (0..=p).rev() {
            if smooth[i] < threshold {
                let frac = (threshold - smooth[i]) / (smooth[i + 1] - smooth[i]);
                f_lo = (freqs[i_lo + i] + frac.clamp(0.0, 1.0) * res).max(seg_lo);
                break;
            }
        }
        let mut f_hi = seg_hi;
        for i in p..smooth.len() {
            if smooth[i] < threshold {
                let frac = (threshold - smooth[i]) / (smooth[i - 1] - smooth[i]);
                f_hi = (freqs[i_lo + i] - frac.clamp(0.0, 1.0) * res).min(seg_hi);
                break;
            }
        }
        let baud = snap(f_hi - f_lo - guard_hz);
        if baud < MIN_BAUD_HZ {
            continue;
        }
        let center = snap((f_lo + f_hi) / 2.0);
        bands.push(Band {
            index: bands.len() + 1,
            f_center_hz: center,
            baud_hz: baud,
            rolloff: 0.0,
            segment_hz: (seg_lo.round(), seg_hi.round()),
            modulation: None,
        });
    }
    if bands.is_empty() {
        return Err(Error::dsp(
            "plan_bands",
            format!("channel unusable at requested drop of {drop_db} dB"),
        ));
    }
    let plan = BandPlan {
        bands,
        f_max_hz: f_max,
        drop_db,
    };
    plan.validate()?;
    Ok(plan)
}

/// Roll-off candidates with the steepest channel-edge slope each tolerates.
///
/// A wide roll-off skirt is only acceptable where the response changes
/// slowly near the band edges; the faster the response falls toward the
/// bounding nulls, the smaller the roll-off must be.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloffThresholds {
    /// (rolloff, max tolerable edge slope in dB/GHz), descending roll-offs.
    pub candidates: Vec<(f64, f64)>,
}

impl Default for RolloffThresholds {
    fn default() -> Self {
        Self {
            candidates: vec![(0.1, 12.5), (0.05, 13.5), (0.01, f64::INFINITY)],
        }
    }
}

/// Assign per-band roll-offs from the measured edge slope of the smoothed
/// channel response: the largest candidate whose slope bound covers the
/// band's steeper window edge, with the smallest candidate as the fallback.
/// The symbol rate is shaved by 1/(1+rolloff) so the occupied band keeps to
/// the measured drop window.
pub fn assign_rolloff(
    plan: &BandPlan,
    est: &ChannelEstimate,
    thresholds: &RolloffThresholds,
) -> Result<BandPlan> {
    if thresholds.candidates.is_empty() {
        return Err(Error::parameter("need at least one roll-off candidate"));
    }
    let mut cands = thresholds.candidates.clone();
    cands.sort_by(|a, b| b.0.total_cmp(&a.0));
    let smallest = cands.last().unwrap().0;
    let res = est.resolution_hz();
    let mut out = plan.clone();
    for band in &mut out.bands {
        let window = band.baud_hz; // walk window minus guard, from plan_bands
        let (seg_lo, seg_hi) = band.segment_hz;
        let (i_lo, i_hi) = (
            ((seg_lo / res).round() as usize).min(est.freqs_hz().len() - 1),
            ((seg_hi / res).round() as usize).min(est.freqs_hz().len() - 1),
        );
        let bins =
            (((seg_hi - seg_lo) * WALK_SMOOTHING_FRACTION / res).round() as usize).max(1) | 1;
        let smooth = smooth_linear_db(&est.magnitude_db()[i_lo..=i_hi], bins);
        let slope = edge_slope_db_per_ghz(
            &smooth,
            res,
            band.f_center_hz - (window + DEFAULT_GUARD_HZ) / 2.0 - seg_lo,
            band.f_center_hz + (window + DEFAULT_GUARD_HZ) / 2.0 - seg_lo,
        );
        let mut chosen = smallest;
        for &(r, max_slope) in &cands {
            if slope <= max_slope {
                chosen = r;
                break;
            }
        }
        band.rolloff = chosen;
        band.baud_hz = snap(window / (1.0 + chosen));
        // Keep the occupied band inside [0, f_max] and its segment.
        let (lo, hi) = band.occupied_hz();
        if lo < 0.0 {
            band.f_center_hz = snap(band.f_center_hz - lo);
        } else if hi > out.f_max_hz {
            band.f_center_hz = snap(band.f_center_hz - (hi - out.f_max_hz));
        }
    }
    out.validate()?;
    Ok(out)
}

/// Measured edge slopes (dB/GHz) for each band of a plan; the quantity the
/// roll-off assignment thresholds against.
pub fn band_edge_slopes(plan: &BandPlan, est: &ChannelEstimate) -> Vec<f64> {
    let res = est.resolution_hz();
    plan.bands
        .iter()
        .map(|band| {
            let (seg_lo, seg_hi) = band.segment_hz;
            let (i_lo, i_hi) = (
                ((seg_lo / res).round() as usize).min(est.freqs_hz().len() - 1),
                ((seg_hi / res).round() as usize).min(est.freqs_hz().len() - 1),
            );
            let bins =
                (((seg_hi - seg_lo) * WALK_SMOOTHING_FRACTION / res).round() as usize).max(1) | 1;
            let smooth = smooth_linear_db(&est.magnitude_db()[i_lo..=i_hi], bins);
            let window = band.baud_hz * (1.0 + band.rolloff) + DEFAULT_GUARD_HZ;
            edge_slope_db_per_ghz(
                &smooth,
                res,
                band.f_center_hz - window / 2.0 - seg_lo,
                band.f_center_hz + window / 2.0 - seg_lo,
            )
        })
        .collect()
}

/// Steepest response change (dB/GHz) in the outer quarters of the window,
/// measured on a segment-local smoothed curve.
fn edge_slope_db_per_ghz(smooth: &[f64], res: f64, w_lo: f64, w_hi: f64) -> f64 {
    let n = smooth.len();
    if n < 3 {
        return 0.0;
    }
    let clamp_idx = |f: f64| ((f / res).round() as i64).clamp(0, n as i64 - 1) as usize;
    let quarter = (w_hi - w_lo) * 0.25;
    let regions = [
        (clamp_idx(w_lo), clamp_idx(w_lo + quarter)),
        (clamp_idx(w_hi - quarter), clamp_idx(w_hi)),
    ];
    let mut worst: f64 = 0.0;
    for (a, b) in regions {
        for i in a.max(1)..=b.min(n - 2) {
            let s = (smooth[i + 1] - smooth[i - 1]).abs() / (2.0 * res) * 1e9;
            worst = worst.max(s);
        }
    }
    worst
}

/// Aggregate information rate: sum of baud * bits-per-symbol over bands.
pub fn aggregate_rate(plan: &BandPlan) -> Result<f64> {
    let mut total = 0.0;
    for b in &plan.bands {
        let m = b
            .modulation
            .as_ref()
            .ok_or_else(|| {
                Error::parameter(format!("band {} has no modulation assigned", b.index))
            })?
            .info_bits_per_symbol();
        total += b.baud_hz * m;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{small_signal_response, FiberParams};

    fn fiber() -> FiberParams {
        FiberParams::new(-21.7, 50.0).unwrap()
    }

    fn eq1_estimate(f_max: f64) -> ChannelEstimate {
        let fib = fiber();
        ChannelEstimate::from_response(f_max, DEFAULT_RESOLUTION_HZ, |f| {
            20.0 * small_signal_response(&fib, f).abs().max(1e-6).log10()
        })
        .unwrap()
    }

    #[test]
    fn identity_channel_estimates_flat() {
        let fs = 20e9;
        let n = 1 << 16;
        let mut rng = 0x12345u64;
        let mut next = || {
            rng = rng
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((rng >> 33) as f64 / (1u64 << 30) as f64) - 1.0
        };
        let samples: Vec<f64> = (0..n).map(|_| next()).collect();
        let tx = RealWaveform::new(samples, fs).unwrap();
        let est = estimate_channel(&tx, &tx, 1e8).unwrap();
        for (&f, &m) in est.freqs_hz().iter().zip(est.magnitude_db()) {
            if f < 0.95 * est.f_max() {
                assert!(m.abs() < 0.1, "flat channel reads {m} dB at {f}");
            }
        }
    }

    #[test]
    fn flat_channel_has_no_nulls() {
        let est = ChannelEstimate::from_response(10e9, 1e8, |_| 0.0).unwrap();
        assert!(find_spectral_nulls(&est, -15.0).is_empty());
    }

    #[test]
    fn eq1_nulls_match_closed_form() {
        let est = eq1_estimate(32e9);
        let nulls = find_spectral_nulls(&est, -15.0);
        let expected = fiber().null_frequencies_hz(7);
        assert!(nulls.len() >= 7, "found {} nulls", nulls.len());
        for (n, e) in nulls.iter().zip(expected.iter()) {
            assert!(
                (n - e).abs() <= 2.0 * est.resolution_hz(),
                "null {n} vs expected {e}"
            );
        }
    }

    #[test]
    fn synthesized_single_null_is_found_once() {
        let est = ChannelEstimate::from_response(20e9, 1e8, |f| {
            let d = (f - 10e9).abs() / 0.4e9;
            20.0 * (1.0 - (-d * d).exp() * 0.9999).max(1e-6).log10()
        })
        .unwrap();
        let nulls = find_spectral_nulls(&est, -15.0);
        assert_eq!(nulls.len(), 1, "nulls: {nulls:?}");
        assert!((nulls[0] - 10e9).abs() < 2e8);
    }

    #[test]
    fn flat_channel_plans_single_full_band() {
        let est = ChannelEstimate::from_response(10e9, 1e8, |_| 0.0).unwrap();
        let plan = plan_bands(&est, 10e9, 10.0, DEFAULT_GUARD_HZ).unwrap();
        assert_eq!(plan.bands.len(), 1);
        let b = &plan.bands[0];
        assert!((b.f_center_hz - 5e9).abs() < 2e8);
        assert!((b.baud_hz - (10e9 - DEFAULT_GUARD_HZ)).abs() < 2e8);
    }

    #[test]
    fn symmetric_segments_get_equal_bauds() {
        // Two identical raised bumps separated by one null.
        let bump = |f: f64, c: f64| {
            let x = (f - c) / 2.0e9;
            -30.0 * x * x
        };
        let est = ChannelEstimate::from_response(20e9, 1e8, |f| {
            if f < 10e9 {
                bump(f, 5e9)
            } else {
                bump(f, 15e9)
            }
        })
        .unwrap();
        let plan = plan_bands(&est, 20e9, 10.0, DEFAULT_GUARD_HZ).unwrap();
        assert_eq!(plan.bands.len(), 2);
        assert!((plan.bands[0].baud_hz - plan.bands[1].baud_hz).abs() < 1e8);
        assert!(plan.bands[0].f_center_hz < plan.bands[1].f_center_hz);
    }

    #[test]
    fn planning_is_deterministic() {
        let est = eq1_estimate(31e9);
        let a = plan_bands(&est, 30.5e9, 10.0, DEFAULT_GUARD_HZ).unwrap();
        let b = plan_bands(&est, 30.5e9, 10.0, DEFAULT_GUARD_HZ).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wide_band_gets_largest_rolloff_and_full_band_gets_smallest() {
        let th = RolloffThresholds::default();
        // Flat channel: gentle edges everywhere -> largest candidate.
        let flat = ChannelEstimate::from_response(10e9, 1e8, |_| 0.0).unwrap();
        let plan = plan_bands(&flat, 10e9, 10.0, DEFAULT_GUARD_HZ).unwrap();
        let wide = assign_rolloff(&plan, &flat, &th).unwrap();
        assert_eq!(wide.bands[0].rolloff, 0.1);
        // Band pinched between two steep notch walls fills its segment; the
        // fast-changing edges force the smallest candidate.
        let notched = ChannelEstimate::from_response(10e9, 2.5e7, |f| {
            let d = (f - 3e9).abs().min((f - 7e9).abs());
            (-40.0 + d / 1e9 * 40.0).min(0.0)
        })
        .unwrap();
        let plan = plan_bands(&notched, 10e9, 10.0, DEFAULT_GUARD_HZ).unwrap();
        let assigned = assign_rolloff(&plan, &notched, &th).unwrap();
        let middle = assigned
            .bands
            .iter()
            .find(|b| (b.f_center_hz - 5e9).abs() < 1e9)
            .expect("middle band");
        assert_eq!(middle.rolloff, 0.01);
    }

    #[test]
    fn plan_json_round_trip() {
        let est = eq1_estimate(31e9);
        let plan = plan_bands(&est, 30.5e9, 10.0, DEFAULT_GUARD_HZ).unwrap();
        let back = BandPlan::from_json(&plan.to_json()).unwrap();
        assert_eq!(plan, back);
    }
}
