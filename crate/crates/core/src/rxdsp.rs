//! Per-band receive chain: down-conversion, matched filtering,
//! synchronization, LMS/DD-LMS feed-forward equalization, the two-tap post
//! filter, and maximum-likelihood sequence estimation over its one-symbol
//! memory.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bandplan::{Band, BAUD_GRID_HZ};
use crate::error::{Error, Result};
use crate::modem::{PasMapper, ShapedConstellation, DEFAULT_CCDM_BLOCK};
use crate::sigkit::{
    design_rrc, fir_filter, frequency_shift, resample, Ratio, RealWaveform, DEFAULT_RRC_SPAN,
};
use crate::txdsp::{training_symbols, BandMapper, FrameSpec, TruthRecord};

/// Feed-forward equalizer settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EqualizerConfig {
    pub num_taps: usize,
    pub mu_train: f64,
    pub mu_dd: f64,
    pub train_passes: usize,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            num_taps: 21,
            mu_train: 5e-3,
            mu_dd: 1e-3,
            train_passes: 3,
        }
    }
}

impl EqualizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_taps == 0 || self.num_taps.is_multiple_of(2) {
            return Err(Error::parameter("equalizer needs an odd tap count"));
        }
        if !(self.mu_train > 0.0 && self.mu_train < 1.0 && self.mu_dd > 0.0 && self.mu_dd < 1.0) {
            return Err(Error::parameter("step sizes must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Two-tap post filter coefficient: p(n) = q(n) + alpha q(n-1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PostFilterCoef {
    pub alpha: f64,
}

impl PostFilterCoef {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.abs() < 1.0) {
            return Err(Error::parameter("|alpha| must be below one"));
        }
        Ok(Self { alpha })
    }
}

/// MLSE settings. Memory is fixed at one symbol (the post filter's ISI).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct MlseConfig {
    pub traceback_depth: usize,
    pub use_priors: bool,
}

impl Default for MlseConfig {
    fn default() -> Self {
        Self {
            traceback_depth: 32,
            use_priors: false,
        }
    }
}

impl MlseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.traceback_depth < 8 {
            return Err(Error::parameter("traceback depth must be at least 8"));
        }
        Ok(())
    }
}

/// Shift a band to baseband and matched-filter it at `sps` samples per
/// symbol (the fractional-rate stream, before any decimation).
pub fn downconvert_band_fractional(
    rx: &RealWaveform,
    band: &Band,
    sps: usize,
) -> Result<Vec<Complex64>> {
    if band.occupied_hz().1 > rx.sample_rate_hz() / 2.0 {
        return Err(Error::parameter("band exceeds the receiver Nyquist range"));
    }
    let baseband = frequency_shift(&rx.to_complex(), -band.f_center_hz);
    let target = band.baud_hz * sps as f64;
    let ratio = Ratio::from_rates(target, rx.sample_rate_hz(), BAUD_GRID_HZ)?;
    let at_sps = resample(&baseband, ratio)?;
    let taps = design_rrc(band.rolloff, DEFAULT_RRC_SPAN, sps)?;
    Ok(fir_filter(&at_sps, &taps).into_samples())
}

/// Shift a band to baseband, matched-filter it, and decimate to one sample
/// per symbol at the maximum-energy phase. Returns the symbol stream and the
/// chosen decimation phase.
pub fn downconvert_band(
    rx: &RealWaveform,
    band: &Band,
    sps: usize,
) -> Result<(Vec<Complex64>, usize)> {
    let samples = downconvert_band_fractional(rx, band, sps)?;
    let (phase, _) = (0..sps)
        .map(|p| {
            let e: f64 = samples
                .iter()
                .skip(p)
                .step_by(sps)
                .map(|s| s.norm_sqr())
                .sum();
            (p, e)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let symbols: Vec<Complex64> = samples.iter().skip(phase).step_by(sps).copied().collect();
    Ok((symbols, phase))
}

/// Locate known training in a symbol stream by cross-correlation magnitude.
/// Returns the offset of the first training symbol and the quarter-turn
/// rotation that best aligns phases.
pub fn synchronize(stream: &[Complex64], training: &[Complex64]) -> Result<(usize, u8)> {
    synchronize_scored(stream, training).map(|(offset, quarter, _)| (offset, quarter))
}

/// `synchronize` plus the peak-to-side score, for timing-phase selection.
pub fn synchronize_scored(
    stream: &[Complex64],
    training: &[Complex64],
) -> Result<(usize, u8, f64)> {
    if training.is_empty() || stream.len() < training.len() {
        return Err(Error::dsp("synchronize", "stream shorter than training"));
    }
    let t_energy: f64 = training.iter().map(|t| t.norm_sqr()).sum();
    if t_energy <= 0.0 {
        return Err(Error::parameter("training sequence has no energy"));
    }
    let span = stream.len() - training.len() + 1;
    let mut corrs = vec![Complex64::new(0.0, 0.0); span];
    let mut mags = vec![0.0; span];
    for d in 0..span {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, t) in training.iter().enumerate() {
            acc += stream[d + i] * t.conj();
        }
        corrs[d] = acc;
        mags[d] = acc.norm_sqr();
    }
    // Channel ISI smears the true peak over a few lags; score lag d by the
    // correlation energy in a +-2 lobe so a spread peak still wins cleanly.
    let lobe = |d: usize| -> f64 {
        let lo = d.saturating_sub(2);
        let hi = (d + 2).min(span - 1);
        mags[lo..=hi].iter().sum()
    };
    let (offset, peak_lobe) = (0..span)
        .map(|d| (d, lobe(d)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    // Side level away from the peak, beyond the ISI spread.
    let side_lobe = (0..span)
        .filter(|d| d.abs_diff(offset) > 32)
        .map(lobe)
        .fold(0.0, f64::max);
    let ratio = if side_lobe > 0.0 {
        (peak_lobe / side_lobe).sqrt()
    } else {
        f64::INFINITY
    };
    if ratio < 3.0 {
        return Err(Error::dsp(
            "synchronize",
            format!("peak-to-side ratio {ratio:.2} below 3"),
        ));
    }
    // Refine to the strongest single lag within the winning lobe.
    let lo = offset.saturating_sub(2);
    let hi = (offset + 2).min(span - 1);
    let (offset, _) = (lo..=hi)
        .map(|d| (d, mags[d]))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let corr = corrs[offset];
    let quarter = (corr.arg() / std::f64::consts::FRAC_PI_2).round().rem_euclid(4.0) as u8;
    Ok((offset, quarter % 4, ratio))
}

/// Equalizer outcome: outputs across the whole aligned stream plus the
/// training-region error power.
pub struct EqualizedStream {
    pub q: Vec<Complex64>,
    pub taps: Vec<Complex64>,
    pub training_mse: f64,
}

/// Symbol-spaced complex FFE: center-spike start, LMS passes over the
/// training block, then decision-directed tracking across the payload.
pub fn ffe_equalize(
    stream: &[Complex64],
    training: &[Complex64],
    constellation: &ShapedConstellation,
    cfg: &EqualizerConfig,
) -> Result<EqualizedStream> {
    cfg.validate()?;
    let n_taps = cfg.num_taps;
    let c = n_taps / 2;
    let len = stream.len();
    if len < training.len() || training.is_empty() {
        return Err(Error::dsp("ffe_equalize", "stream shorter than training"));
    }
    let x = |n: i64| -> Complex64 {
        if n < 0 || n >= len as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            stream[n as usize]
        }
    };
    let mut w = vec![Complex64::new(0.0, 0.0); n_taps];
    w[c] = Complex64::new(1.0, 0.0);
    let filter_at = |w: &[Complex64], n: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, wk) in w.iter().enumerate() {
            acc += wk * x(n as i64 + c as i64 - k as i64);
        }
        acc
    };
    // Training passes.
    let mut mse = 0.0;
    for pass in 0..cfg.train_passes.max(1) {
        let mut err_acc = 0.0;
        for (n, d) in training.iter().enumerate() {
            let y = filter_at(&w, n);
            let e = d - y;
            err_acc += e.norm_sqr();
            for k in 0..n_taps {
                w[k] += cfg.mu_train * e * x(n as i64 + c as i64 - k as i64).conj();
            }
        }
        mse = err_acc / training.len() as f64;
        if pass > 0 && !mse.is_finite() {
            return Err(Error::dsp("ffe_equalize", "training diverged"));
        }
    }
    // Decision-directed tracking over the remainder, collecting q(n).
    let mut q = Vec::with_capacity(len);
    let mut window_err = 0.0;
    let mut window_count = 0usize;
    let mut baseline: Option<f64> = None;
    for n in 0..len {
        let y = filter_at(&w, n);
        q.push(y);
        let reference = if n < training.len() {
            training[n]
        } else {
            constellation.points[constellation.nearest(y)]
        };
        let e = reference - y;
        let mu = if n < training.len() { cfg.mu_train } else { cfg.mu_dd };
        for k in 0..n_taps {
            w[k] += mu * e * x(n as i64 + c as i64 - k as i64).conj();
        }
        window_err += e.norm_sqr();
        window_count += 1;
        if window_count == 512 {
            let avg = window_err / window_count as f64;
            match baseline {
                None => baseline = Some(avg.max(1e-12)),
                Some(b) => {
                    if avg > 10.0 * b && avg > 10.0 * mse.max(1e-12) {
                        return Err(Error::dsp(
                            "ffe_equalize",
                            format!("diverged: windowed MSE {avg:.3e} vs baseline {b:.3e}"),
                        ));
                    }
                    baseline = Some(b.min(avg).max(1e-12));
                }
            }
            window_err = 0.0;
            window_count = 0;
        }
    }
    Ok(EqualizedStream {
        q,
        taps: w,
        training_mse: mse,
    })
}

/// p(n) = q(n) + alpha q(n-1), with q(-1) = 0.
pub fn post_filter(q: &[Complex64], coef: PostFilterCoef) -> Vec<Complex64> {
    let mut prev = Complex64::new(0.0, 0.0);
    q.iter()
        .map(|&v| {
            let out = v + coef.alpha * prev;
            prev = v;
            out
        })
        .collect()
}

/// Maximum-likelihood sequence detection over the post filter's one-symbol
/// memory. Branch metric |p(n) - s_i - alpha s_j|^2, minus sigma^2 ln P(s_i)
/// when priors are enabled. Square constellations with product priors run as
/// two independent per-dimension trellises, which is exactly equivalent.
pub fn mlse_detect(
    p: &[Complex64],
    coef: PostFilterCoef,
    constellation: &ShapedConstellation,
    cfg: &MlseConfig,
    sigma2: f64,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    if p.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(grid) = SquareGrid::try_from_constellation(constellation) {
        return mlse_square(p, coef, &grid, cfg, sigma2);
    }
    mlse_full(p, coef, constellation, cfg, sigma2)
}

fn prior_penalties(constellation: &ShapedConstellation, cfg: &MlseConfig, sigma2: f64) -> Vec<f64> {
    if cfg.use_priors {
        constellation
            .priors
            .iter()
            .map(|&pr| -sigma2 * pr.max(1e-300).ln())
            .collect()
    } else {
        vec![0.0; constellation.order()]
    }
}

fn mlse_full(
    p: &[Complex64],
    coef: PostFilterCoef,
    constellation: &ShapedConstellation,
    cfg: &MlseConfig,
    sigma2: f64,
) -> Result<Vec<usize>> {
    let m = constellation.order();
    let points = &constellation.points;
    let penalty = prior_penalties(constellation, cfg, sigma2);
    let n = p.len();
    let mut pm: Vec<f64> = (0..m)
        .map(|i| (p[0] - points[i]).norm_sqr() + penalty[i])
        .collect();
    let mut prev = vec![0u8; n.saturating_mul(m)];
    // cross[j * m + i] = s_i + alpha s_j
    let cross: Vec<Complex64> = (0..m * m)
        .map(|ji| points[ji % m] + coef.alpha * points[ji / m])
        .collect();
    let mut next = vec![0.0f64; m];
    for t in 1..n {
        let pt = p[t];
        for i in 0..m {
            let mut best = f64::INFINITY;
            let mut arg = 0u8;
            for j in 0..m {
                let d = pt - cross[j * m + i];
                let metric = pm[j] + d.norm_sqr();
                if metric < best {
                    best = metric;
                    arg = j as u8;
                }
            }
            next[i] = best + penalty[i];
            prev[t * m + i] = arg;
        }
        std::mem::swap(&mut pm, &mut next);
    }
    let mut state = pm
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let mut decided = vec![0usize; n];
    for t in (0..n).rev() {
        decided[t] = state;
        if t > 0 {
            state = prev[t * m + state] as usize;
        }
    }
    Ok(decided)
}

/// Per-dimension view of a square QAM constellation whose priors factor.
struct SquareGrid {
    /// Signed PAM levels in the constellation's scale, ascending.
    levels: Vec<f64>,
    /// Marginal priors per level (one dimension).
    level_priors: Vec<f64>,
    /// (i_level_idx, q_level_idx) -> point index.
    point_of: Vec<usize>,
}

impl SquareGrid {
    fn try_from_constellation(c: &ShapedConstellation) -> Option<Self> {
        if ![4u32, 16, 64, 256].contains(&c.base_order) {
            return None;
        }
        let mut levels: Vec<f64> = Vec::new();
        for p in &c.points {
            if !levels.iter().any(|&l| (l - p.re).abs() < 1e-12) {
                levels.push(p.re);
            }
        }
        levels.sort_by(|a, b| a.total_cmp(b));
        let l = levels.len();
        if l * l != c.order() {
            return None;
        }
        let idx_of = |v: f64| levels.iter().position(|&x| (x - v).abs() < 1e-9);
        let mut point_of = vec![usize::MAX; l * l];
        let mut level_priors = vec![0.0; l];
        for (idx, p) in c.points.iter().enumerate() {
            let (i, q) = (idx_of(p.re)?, idx_of(p.im)?);
            point_of[i * l + q] = idx;
            level_priors[i] += c.priors[idx];
        }
        if point_of.contains(&usize::MAX) {
            return None;
        }
        // Product-prior check: P(point) ~ P_I(i) P_Q(q).
        for (idx, p) in c.points.iter().enumerate() {
            let (i, q) = (idx_of(p.re)?, idx_of(p.im)?);
            let product = level_priors[i] * level_priors[q];
            if (c.priors[idx] - product).abs() > 1e-9 {
                return None;
            }
        }
        Some(Self {
            levels,
            level_priors,
            point_of,
        })
    }
}

fn mlse_square(
    p: &[Complex64],
    coef: PostFilterCoef,
    grid: &SquareGrid,
    cfg: &MlseConfig,
    sigma2: f64,
) -> Result<Vec<usize>> {
    let re: Vec<f64> = p.iter().map(|v| v.re).collect();
    let im: Vec<f64> = p.iter().map(|v| v.im).collect();
    let di = viterbi_pam(&re, coef.alpha, &grid.levels, &grid.level_priors, cfg, sigma2);
    let dq = viterbi_pam(&im, coef.alpha, &grid.levels, &grid.level_priors, cfg, sigma2);
    let l = grid.levels.len();
    Ok(di
        .into_iter()
        .zip(dq)
        .map(|(i, q)| grid.point_of[i * l + q])
        .collect())
}

fn viterbi_pam(
    p: &[f64],
    alpha: f64,
    levels: &[f64],
    priors: &[f64],
    cfg: &MlseConfig,
    sigma2: f64,
) -> Vec<usize> {
    let m = levels.len();
    let n = p.len();
    // Per-dimension prior penalty: the complex-branch penalty splits as the
    // sum of the two marginals' logs.
    let penalty: Vec<f64> = if cfg.use_priors {
        priors.iter().map(|&pr| -sigma2 * pr.max(1e-300).ln()).collect()
    } else {
        vec![0.0; m]
    };
    let mut pm: Vec<f64> = (0..m)
        .map(|i| {
            let d = p[0] - levels[i];
            d * d + penalty[i]
        })
        .collect();
    let mut prev = vec![0u8; n * m];
    let mut next = vec![0.0f64; m];
    for t in 1..n {
        let pt = p[t];
        for i in 0..m {
            let target = pt - levels[i];
            let mut best = f64::INFINITY;
            let mut arg = 0u8;
            for j in 0..m {
                let d = target - alpha * levels[j];
                let metric = pm[j] + d * d;
                if metric < best {
                    best = metric;
                    arg = j as u8;
                }
            }
            next[i] = best + penalty[i];
            prev[t * m + i] = arg;
        }
        std::mem::swap(&mut pm, &mut next);
    }
    let mut state = pm
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let mut decided = vec![0usize; n];
    for t in (0..n).rev() {
        decided[t] = state;
        if t > 0 {
            state = prev[t * m + state] as usize;
        }
    }
    decided
}

/// Best correlation lag within `hint +- radius`, without the side-lobe gate.
fn correlate_near(
    stream: &[Complex64],
    training: &[Complex64],
    hint: usize,
    radius: usize,
) -> Option<(usize, u8, f64)> {
    if training.is_empty() || stream.len() < training.len() {
        return None;
    }
    let span = stream.len() - training.len() + 1;
    let lo = hint.saturating_sub(radius);
    let hi = (hint + radius).min(span - 1);
    let mut best: Option<(usize, Complex64, f64)> = None;
    for d in lo..=hi {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, t) in training.iter().enumerate() {
            acc += stream[d + i] * t.conj();
        }
        let mag = acc.norm_sqr();
        if best.map(|(_, _, m)| mag > m).unwrap_or(true) {
            best = Some((d, acc, mag));
        }
    }
    best.map(|(d, corr, mag)| {
        let quarter = (corr.arg() / std::f64::consts::FRAC_PI_2)
            .round()
            .rem_euclid(4.0) as u8;
        (d, quarter, mag.sqrt())
    })
}

/// Detector applied after the FFE.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    /// Post filter then MLSE over its known ISI.
    #[default]
    PostFilterMlse,
    /// Plain symbol-by-symbol slicing of the equalizer output.
    Slicer,
}

/// Per-band DSP parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BandDsp {
    pub equalizer: EqualizerConfig,
    pub pf_alpha: f64,
    pub mlse: MlseConfig,
    pub detector: Detector,
    pub sps: usize,
}

impl Default for BandDsp {
    fn default() -> Self {
        Self {
            equalizer: EqualizerConfig::default(),
            pf_alpha: 0.4,
            mlse: MlseConfig::default(),
            detector: Detector::PostFilterMlse,
            sps: 2,
        }
    }
}

/// One band's recovery products.
pub struct BandRecovery {
    pub bits: Vec<u8>,
    pub decided: Vec<usize>,
    pub q: Vec<Complex64>,
    pub diagnostics: RxDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RxDiagnostics {
    pub sync_offset: usize,
    pub rotation_quarter_turns: u8,
    pub decimation_phase: usize,
    pub training_mse_db: f64,
    pub sigma2: f64,
}

/// Full receive chain for one band: down-convert, synchronize, equalize,
/// post-filter, detect, demap.
///
/// Timing recovery: fiber group delay shifts each band by a fraction of a
/// symbol, so the decimation phase is chosen by training correlation across
/// all polyphase branches rather than by energy alone.
pub fn recover_band(
    rx: &RealWaveform,
    band: &Band,
    frame: &FrameSpec,
    truth: &TruthRecord,
    dsp: &BandDsp,
    offset_hint: Option<usize>,
) -> Result<BandRecovery> {
    let filtered = downconvert_band_fractional(rx, band, dsp.sps)?;
    let training = training_symbols(frame.training_len, frame.training_seed);
    let mut candidates: Vec<(Vec<Complex64>, usize, usize, u8)> = Vec::new();
    let mut last_err = None;
    for phase in 0..dsp.sps {
        let raw: Vec<Complex64> = filtered.iter().skip(phase).step_by(dsp.sps).copied().collect();
        let power = raw.iter().map(|s| s.norm_sqr()).sum::<f64>() / raw.len().max(1) as f64;
        if power <= 0.0 {
            continue;
        }
        let scale = 1.0 / power.sqrt();
        let stream: Vec<Complex64> = raw.iter().map(|&s| s * scale).collect();
        match synchronize_scored(&stream, &training) {
            Ok((offset, quarter, _)) => candidates.push((stream, offset, phase, quarter)),
            Err(e) => last_err = Some(e),
        }
    }
    // A weak band whose own correlation cannot clear the gate still shares
    // the frame timing with the strong bands; fall back to their offset and
    // fine-align locally.
    if candidates.is_empty() {
        if let Some(hint) = offset_hint {
            for phase in 0..dsp.sps {
                let raw: Vec<Complex64> =
                    filtered.iter().skip(phase).step_by(dsp.sps).copied().collect();
                let power = raw.iter().map(|s| s.norm_sqr()).sum::<f64>() / raw.len().max(1) as f64;
                if power <= 0.0 {
                    continue;
                }
                let scale = 1.0 / power.sqrt();
                let stream: Vec<Complex64> = raw.iter().map(|&s| s * scale).collect();
                if let Some((offset, quarter, _)) = correlate_near(&stream, &training, hint, 8) {
                    candidates.push((stream, offset, phase, quarter));
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::dsp("recover_band", "no usable phase")));
    }
    // Decide the timing phase by equalizer quality: a short training-only
    // probe per candidate, keeping the one with the lowest converged MSE.
    let mut best: Option<(Vec<Complex64>, usize, usize, u8, f64)> = None;
    for (stream, offset, phase, quarter) in candidates {
        if offset + training.len() > stream.len() {
            continue;
        }
        let rot = Complex64::new(0.0, -std::f64::consts::FRAC_PI_2 * quarter as f64).exp();
        let probe: Vec<Complex64> = stream[offset..offset + training.len()]
            .iter()
            .map(|&s| s * rot)
            .collect();
        let mse = match ffe_equalize(
            &probe,
            &training,
            crate::modem::build_constellation(4, None)
                .as_ref()
                .expect("qpsk builds"),
            &EqualizerConfig {
                num_taps: dsp.equalizer.num_taps,
                mu_train: dsp.equalizer.mu_train,
                mu_dd: dsp.equalizer.mu_dd,
                train_passes: dsp.equalizer.train_passes,
            },
        ) {
            Ok(eq) => eq.training_mse,
            Err(_) => continue,
        };
        if best.as_ref().map(|b| mse < b.4).unwrap_or(true) {
            best = Some((stream, offset, phase, quarter, mse));
        }
    }
    let Some((stream, offset, decimation_phase, quarter, _)) = best else {
        return Err(last_err.unwrap_or_else(|| Error::dsp("recover_band", "no usable phase")));
    };
    let rot = Complex64::new(0.0, -std::f64::consts::FRAC_PI_2 * quarter as f64).exp();
    let needed = frame.training_len + truth.payload_len;
    if offset + needed > stream.len() {
        return Err(Error::dsp(
            "recover_band",
            format!(
                "frame of {needed} symbols does not fit after offset {offset} in {}",
                stream.len()
            ),
        ));
    }
    let aligned: Vec<Complex64> = stream[offset..offset + needed]
        .iter()
        .map(|&s| s * rot)
        .collect();
    let mapper = BandMapper::for_spec(&truth.constellation)?;
    let constellation = mapper.constellation().clone();
    let eq = ffe_equalize(&aligned, &training, &constellation, &dsp.equalizer)?;
    // Noise variance from training-region error vectors.
    let sigma2 = eq
        .q
        .iter()
        .zip(training.iter())
        .map(|(y, d)| (y - d).norm_sqr())
        .sum::<f64>()
        / frame.training_len.max(1) as f64;
    let q_payload = eq.q[frame.training_len..].to_vec();
    let decided = match dsp.detector {
        Detector::PostFilterMlse => {
            let coef = PostFilterCoef::new(dsp.pf_alpha)?;
            let p = post_filter(&q_payload, coef);
            mlse_detect(&p, coef, &constellation, &dsp.mlse, sigma2)?
        }
        Detector::Slicer => q_payload.iter().map(|&y| constellation.nearest(y)).collect(),
    };
    let bits = match &mapper {
        BandMapper::Uniform(c) => crate::modem::demap_uniform(&decided, c),
        BandMapper::Shaped(_) => {
            let pas = PasMapper::new(&constellation, DEFAULT_CCDM_BLOCK)?;
            pas.demap(&decided, Some(&q_payload))?
        }
    };
    Ok(BandRecovery {
        bits,
        decided,
        q: q_payload,
        diagnostics: RxDiagnostics {
            sync_offset: offset,
            rotation_quarter_turns: quarter,
            decimation_phase,
            training_mse_db: 10.0 * eq.training_mse.max(1e-30).log10(),
            sigma2,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{build_constellation, mb_for_entropy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, Normal};

    fn awgn(symbols: &[Complex64], sigma2: f64, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, (sigma2 / 2.0).sqrt()).unwrap();
        symbols
            .iter()
            .map(|&s| s + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect()
    }

    #[test]
    fn sync_finds_inserted_delay() {
        let training = training_symbols(64, 5);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 0.05).unwrap();
        let mut stream: Vec<Complex64> = (0..777)
            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        stream.extend(awgn(&training, 0.01, 10));
        stream.extend((0..200).map(|_| {
            Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))
        }));
        let (offset, rot) = synchronize(&stream, &training).unwrap();
        assert_eq!(offset, 777);
        assert_eq!(rot, 0);
        // Zero offset, clean.
        let (offset, _) = synchronize(&awgn(&training, 1e-6, 3), &training).unwrap();
        assert_eq!(offset, 0);
    }

    #[test]
    fn sync_rejects_pure_noise() {
        let training = training_symbols(64, 5);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let stream: Vec<Complex64> = (0..2000)
            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        assert!(synchronize(&stream, &training).is_err());
    }

    #[test]
    fn ffe_on_identity_channel_converges_to_spike() {
        let c = build_constellation(4, None).unwrap();
        let training = training_symbols(500, 2);
        let mut stream = training.clone();
        stream.extend(training_symbols(1000, 77));
        let eq = ffe_equalize(&stream, &training, &c, &EqualizerConfig::default()).unwrap();
        let mse_db = 10.0 * eq.training_mse.log10();
        assert!(mse_db < -30.0, "training MSE {mse_db} dB");
        let center = eq.taps.len() / 2;
        assert!((eq.taps[center].norm() - 1.0).abs() < 0.05);
        for (k, w) in eq.taps.iter().enumerate() {
            if k != center {
                assert!(w.norm() < 0.05, "tap {k} = {}", w.norm());
            }
        }
    }

    #[test]
    fn ffe_approaches_wiener_mse_on_known_channel() {
        // Channel h = {0.8, 0.5, 0.2}, QPSK, noise var 0.01.
        let h = [0.8, 0.5, 0.2];
        let sigma2 = 0.01;
        let c = build_constellation(4, None).unwrap();
        let n_train = 4000;
        let data = training_symbols(n_train + 4000, 4);
        let mut channel_out = vec![Complex64::new(0.0, 0.0); data.len()];
        for (n, out) in channel_out.iter_mut().enumerate() {
            for (k, &hk) in h.iter().enumerate() {
                if n >= k {
                    *out += hk * data[n - k];
                }
            }
        }
        let noisy = awgn(&channel_out, sigma2, 11);
        // The stream is aligned so stream[n] corresponds to data[n] through
        // h[0]; the FFE's center-spike reference handles the rest.
        let cfg = EqualizerConfig {
            num_taps: 15,
            mu_train: 2e-3,
            mu_dd: 5e-4,
            train_passes: 3,
        };
        let eq = ffe_equalize(&noisy, &data[..n_train], &c, &cfg).unwrap();
        // Wiener solution for the same length via normal equations.
        let mmse = wiener_mmse(&h, sigma2, 15);
        let lms_db = 10.0 * eq.training_mse.log10();
        let wiener_db = 10.0 * mmse.log10();
        assert!(
            lms_db < wiener_db + 1.0,
            "LMS {lms_db:.2} dB vs Wiener {wiener_db:.2} dB"
        );
    }

    /// MMSE of the length-L symbol-spaced Wiener equalizer for channel h and
    /// noise variance sigma2 (unit-power uncorrelated symbols), minimized
    /// over the decision delay.
    fn wiener_mmse(h: &[f64], sigma2: f64, l: usize) -> f64 {
        let m = h.len();
        let mut best = f64::INFINITY;
        for delay in 0..l + m - 1 {
            // R[a][b] = sum_k h[k+a-b] h[k]... build via channel correlation.
            let mut r = vec![vec![0.0f64; l]; l];
            for a in 0..l {
                for b in 0..l {
                    let mut acc = 0.0;
                    for k in 0..m {
                        let idx = k as i64 + a as i64 - b as i64;
                        if idx >= 0 && (idx as usize) < m {
                            acc += h[idx as usize] * h[k];
                        }
                    }
                    r[a][b] = acc + if a == b { sigma2 } else { 0.0 };
                }
            }
            let mut p = vec![0.0f64; l];
            for (a, pa) in p.iter_mut().enumerate() {
                let idx = delay as i64 - a as i64;
                if idx >= 0 && (idx as usize) < m {
                    *pa = h[idx as usize];
                }
            }
            // Solve R w = p by Gaussian elimination.
            let mut aug = r.clone();
            let mut rhs = p.clone();
            for col in 0..l {
                let piv = (col..l)
                    .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
                    .unwrap();
                aug.swap(col, piv);
                rhs.swap(col, piv);
                let d = aug[col][col];
                if d.abs() < 1e-12 {
                    continue;
                }
                for row in col + 1..l {
                    let f = aug[row][col] / d;
                    for k in col..l {
                        aug[row][k] -= f * aug[col][k];
                    }
                    rhs[row] -= f * rhs[col];
                }
            }
            let mut w = vec![0.0f64; l];
            for row in (0..l).rev() {
                let mut acc = rhs[row];
                for k in row + 1..l {
                    acc -= aug[row][k] * w[k];
                }
                if aug[row][row].abs() > 1e-12 {
                    w[row] = acc / aug[row][row];
                }
            }
            let mmse = 1.0 - w.iter().zip(p.iter()).map(|(a, b)| a * b).sum::<f64>();
            best = best.min(mmse.max(1e-12));
        }
        best
    }

    #[test]
    fn post_filter_matches_expansion_and_is_linear() {
        let coef = PostFilterCoef::new(0.3).unwrap();
        let mut impulse = vec![Complex64::new(0.0, 0.0); 8];
        impulse[0] = Complex64::new(1.0, 0.0);
        let out = post_filter(&impulse, coef);
        assert!((out[0].re - 1.0).abs() < 1e-15);
        assert!((out[1].re - 0.3).abs() < 1e-15);
        assert!(out[2].norm() < 1e-15);
        // alpha = 0 is the identity.
        let x = training_symbols(64, 8);
        assert_eq!(post_filter(&x, PostFilterCoef::new(0.0).unwrap()), x);
        // Exact linearity.
        let y = training_symbols(64, 9);
        let a = Complex64::new(0.7, -0.2);
        let b = Complex64::new(-1.1, 0.4);
        let mixed: Vec<Complex64> = x.iter().zip(&y).map(|(&u, &v)| a * u + b * v).collect();
        let lhs = post_filter(&mixed, coef);
        let px = post_filter(&x, coef);
        let py = post_filter(&y, coef);
        for (i, l) in lhs.iter().enumerate() {
            assert!((l - (a * px[i] + b * py[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn white_input_autocorrelation_after_post_filter() {
        let coef = PostFilterCoef::new(0.5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let q: Vec<Complex64> = (0..200_000)
            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        let p = post_filter(&q, coef);
        let n = p.len();
        let r0: f64 = p.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        let r1: f64 = p.windows(2).map(|w| (w[1] * w[0].conj()).re).sum::<f64>() / (n - 1) as f64;
        let expected = coef.alpha / (1.0 + coef.alpha * coef.alpha);
        assert!(
            (r1 / r0 - expected).abs() < 0.01,
            "lag-1 correlation {} vs {expected}",
            r1 / r0
        );
    }

    #[test]
    fn mlse_with_zero_alpha_is_min_distance_slicing() {
        let c = build_constellation(16, None).unwrap();
        let clean = training_symbols(64, 2);
        let symbols: Vec<Complex64> = clean
            .iter()
            .map(|&s| c.points[c.nearest(s * 1.3)])
            .collect();
        let noisy = awgn(&symbols, 0.02, 5);
        let coef = PostFilterCoef::new(0.0).unwrap();
        let decided = mlse_detect(&noisy, coef, &c, &MlseConfig::default(), 0.02).unwrap();
        for (d, y) in decided.iter().zip(noisy.iter()) {
            assert_eq!(*d, c.nearest(*y));
        }
    }

    #[test]
    fn mlse_recovers_noiseless_post_filter_output() {
        for order in [4u32, 8, 16] {
            let c = build_constellation(order, None).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(order as u64);
            let tx: Vec<usize> = (0..512).map(|_| rng.random_range(0..c.order())).collect();
            let symbols: Vec<Complex64> = tx.iter().map(|&i| c.points[i]).collect();
            let coef = PostFilterCoef::new(0.5).unwrap();
            let p = post_filter(&symbols, coef);
            let decided = mlse_detect(&p, coef, &c, &MlseConfig::default(), 0.01).unwrap();
            assert_eq!(decided, tx, "order {order}");
        }
    }

    #[test]
    fn mlse_beats_symbol_by_symbol_on_correlated_isi() {
        let c = build_constellation(4, None).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let tx: Vec<usize> = (0..20_000).map(|_| rng.random_range(0..4)).collect();
        let symbols: Vec<Complex64> = tx.iter().map(|&i| c.points[i]).collect();
        let coef = PostFilterCoef::new(0.5).unwrap();
        let sigma2 = 10f64.powf(-1.0); // 10 dB
        let p = awgn(&post_filter(&symbols, coef), sigma2, 29);
        let decided = mlse_detect(&p, coef, &c, &MlseConfig::default(), sigma2).unwrap();
        let ser_mlse = decided
            .iter()
            .zip(tx.iter())
            .filter(|&(a, b)| *a != *b)
            .count() as f64
            / tx.len() as f64;
        let ser_direct = p
            .iter()
            .map(|&y| c.nearest(y))
            .zip(tx.iter())
            .filter(|&(a, b)| a != *b)
            .count() as f64
            / tx.len() as f64;
        assert!(
            ser_mlse < ser_direct,
            "MLSE {ser_mlse} should beat direct slicing {ser_direct}"
        );
    }

    #[test]
    fn viterbi_equals_exhaustive_search_on_short_blocks() {
        // Cross 8QAM exercises the full trellis; 16QAM the per-dimension one.
        for (order, block) in [(8u32, 6usize), (16, 5)] {
            let c = build_constellation(order, None).unwrap();
            let m = c.order();
            for trial in 0..6u64 {
                for &alpha in &[0.2, 0.5] {
                    let coef = PostFilterCoef::new(alpha).unwrap();
                    let mut rng = ChaCha12Rng::seed_from_u64(trial * 31 + order as u64);
                    let tx: Vec<usize> = (0..block).map(|_| rng.random_range(0..m)).collect();
                    let symbols: Vec<Complex64> = tx.iter().map(|&i| c.points[i]).collect();
                    let p = awgn(&post_filter(&symbols, coef), 0.05, trial + 100);
                    let decided =
                        mlse_detect(&p, coef, &c, &MlseConfig::default(), 0.05).unwrap();
                    let (brute, brute_metric) = exhaustive_ml(&p, alpha, &c);
                    let viterbi_metric = sequence_metric(&p, alpha, &c, &decided);
                    assert!(
                        viterbi_metric <= brute_metric + 1e-9,
                        "viterbi metric {viterbi_metric} worse than brute {brute_metric}"
                    );
                    if (brute_metric - viterbi_metric).abs() > 1e-12 {
                        continue; // numerically tied paths
                    }
                    assert_eq!(decided, brute, "order {order} trial {trial} alpha {alpha}");
                }
            }
        }
    }

    fn sequence_metric(p: &[Complex64], alpha: f64, c: &ShapedConstellation, seq: &[usize]) -> f64 {
        let mut acc = 0.0;
        for (t, &i) in seq.iter().enumerate() {
            let isi = if t > 0 {
                alpha * c.points[seq[t - 1]]
            } else {
                Complex64::new(0.0, 0.0)
            };
            acc += (p[t] - c.points[i] - isi).norm_sqr();
        }
        acc
    }

    fn exhaustive_ml(p: &[Complex64], alpha: f64, c: &ShapedConstellation) -> (Vec<usize>, f64) {
        let m = c.order();
        let n = p.len();
        let mut best = (vec![0usize; n], f64::INFINITY);
        let mut seq = vec![0usize; n];
        loop {
            let metric = sequence_metric(p, alpha, c, &seq);
            if metric < best.1 {
                best = (seq.clone(), metric);
            }
            // Odometer increment.
            let mut pos = 0;
            loop {
                if pos == n {
                    return best;
                }
                seq[pos] += 1;
                if seq[pos] < m {
                    break;
                }
                seq[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn priors_pull_decisions_toward_the_shaped_distribution() {
        let c = mb_for_entropy(16, 2.8).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        // Sample indices from the shaped priors.
        let cdf: Vec<f64> = c
            .priors
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let tx: Vec<usize> = (0..30_000)
            .map(|_| {
                let u: f64 = rng.random();
                cdf.iter().position(|&x| x >= u).unwrap_or(15)
            })
            .collect();
        let symbols: Vec<Complex64> = tx.iter().map(|&i| c.points[i]).collect();
        let coef = PostFilterCoef::new(0.3).unwrap();
        let sigma2 = 0.35; // low SNR
        let p = awgn(&post_filter(&symbols, coef), sigma2, 7);
        let kl_of = |use_priors: bool| -> f64 {
            let cfg = MlseConfig {
                traceback_depth: 32,
                use_priors,
            };
            let decided = mlse_detect(&p, coef, &c, &cfg, sigma2).unwrap();
            let mut hist = vec![1e-9; c.order()];
            for &d in &decided {
                hist[d] += 1.0;
            }
            let total: f64 = hist.iter().sum();
            hist.iter()
                .zip(c.priors.iter())
                .map(|(&h, &pr)| {
                    let q = h / total;
                    q * (q / pr.max(1e-12)).ln()
                })
                .sum()
        };
        let kl_with = kl_of(true);
        let kl_without = kl_of(false);
        assert!(
            kl_with < kl_without,
            "prior-aware decisions should sit closer to the priors: {kl_with} vs {kl_without}"
        );
    }
}
