//! Probabilistic amplitude shaping: CCDM-shaped per-dimension amplitudes
//! with uniform sign bits, the standard layered construction for PCS QAM.
//!
//! Block layout on the bit side: [k CCDM bits][n sign bits] per block of n
//! amplitudes (n/2 symbols, I and Q interleaved). Uniform formats bypass the
//! matcher and map Gray labels directly.

use num_complex::Complex64;
use std::collections::HashMap;

use super::ccdm::CcdmCode;
use super::constellation::ShapedConstellation;
use crate::error::{Error, Result};

/// Default CCDM block length in amplitudes.
pub const DEFAULT_CCDM_BLOCK: usize = 256;

/// Per-dimension amplitude alphabet of a square QAM constellation.
#[derive(Debug, Clone)]
struct AmplitudeGrid {
    /// Positive levels in ascending order, in the constellation's scale.
    levels: Vec<f64>,
    /// (signed I level index, signed Q level index) -> point index.
    point_of: HashMap<(i32, i32), usize>,
    /// Per-point (i_signed, q_signed) integer levels.
    grid_of: Vec<(i32, i32)>,
}

impl AmplitudeGrid {
    fn from_constellation(c: &ShapedConstellation) -> Result<Self> {
        if ![4u32, 16, 64, 256].contains(&c.base_order) {
            return Err(Error::parameter(
                "amplitude shaping needs a square constellation (4/16/64/256)",
            ));
        }
        let scale = c
            .points
            .iter()
            .map(|p| p.re.abs())
            .fold(f64::INFINITY, f64::min);
        let mut levels: Vec<f64> = Vec::new();
        let mut point_of = HashMap::new();
        let mut grid_of = Vec::with_capacity(c.points.len());
        for (idx, p) in c.points.iter().enumerate() {
            let gi = (p.re / scale).round() as i32;
            let gq = (p.im / scale).round() as i32;
            point_of.insert((gi, gq), idx);
            grid_of.push((gi, gq));
            let a = p.re.abs();
            if !levels.iter().any(|&l| (l - a).abs() < 1e-12) {
                levels.push(a);
            }
        }
        levels.sort_by(|a, b| a.total_cmp(b));
        Ok(Self {
            levels,
            point_of,
            grid_of,
        })
    }

    fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Signed integer level for (level index, sign bit).
    fn signed_level(&self, level_idx: usize, sign: u8) -> i32 {
        let mag = 2 * level_idx as i32 + 1;
        if sign == 1 {
            mag
        } else {
            -mag
        }
    }

    /// (level index, sign bit) of a point's I or Q coordinate.
    fn split(&self, point_idx: usize, q_dim: bool) -> (usize, u8) {
        let (gi, gq) = self.grid_of[point_idx];
        let v = if q_dim { gq } else { gi };
        (((v.abs() - 1) / 2) as usize, (v > 0) as u8)
    }

    /// Nearest level index to an analog magnitude (constellation scale).
    fn nearest_level(&self, mag: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &l) in self.levels.iter().enumerate() {
            let d = (mag - l).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Maps payload bits to shaped symbols and back for one band.
#[derive(Debug, Clone)]
pub struct PasMapper {
    constellation: ShapedConstellation,
    grid: AmplitudeGrid,
    code: CcdmCode,
}

impl PasMapper {
    /// Build the mapper: the CCDM composition is the largest-remainder
    /// rounding of the constellation's per-dimension amplitude marginal.
    pub fn new(constellation: &ShapedConstellation, block_len: usize) -> Result<Self> {
        if block_len < 2 || !block_len.is_multiple_of(2) {
            return Err(Error::parameter("block length must be even and >= 2"));
        }
        let grid = AmplitudeGrid::from_constellation(constellation)?;
        let levels = grid.level_count();
        // Marginal over the I dimension (quadrant symmetry makes Q equal).
        let mut marginal = vec![0.0; levels];
        for (idx, p) in constellation.priors.iter().enumerate() {
            let (lvl, _) = grid.split(idx, false);
            marginal[lvl] += p;
        }
        let composition = round_composition(&marginal, block_len);
        let code = CcdmCode::new(composition)?;
        Ok(Self {
            constellation: constellation.clone(),
            grid,
            code,
        })
    }

    pub fn with_code(constellation: &ShapedConstellation, code: CcdmCode) -> Result<Self> {
        let grid = AmplitudeGrid::from_constellation(constellation)?;
        if code.levels() != grid.level_count() {
            return Err(Error::parameter(
                "code level count does not match the constellation",
            ));
        }
        Ok(Self {
            constellation: constellation.clone(),
            grid,
            code,
        })
    }

    pub fn code(&self) -> &CcdmCode {
        &self.code
    }

    pub fn constellation(&self) -> &ShapedConstellation {
        &self.constellation
    }

    /// Payload bits consumed per block.
    pub fn bits_per_block(&self) -> usize {
        self.code.input_bits() + self.code.block_len()
    }

    /// Symbols produced per block.
    pub fn symbols_per_block(&self) -> usize {
        self.code.block_len() / 2
    }

    /// Information bits per symbol actually realized by the matcher.
    pub fn realized_bits_per_symbol(&self) -> f64 {
        self.bits_per_block() as f64 / self.symbols_per_block() as f64
    }

    /// Map whole blocks of payload bits to symbol indices. The bit count
    /// must be a multiple of `bits_per_block`.
    pub fn map(&self, bits: &[u8]) -> Result<Vec<usize>> {
        let bpb = self.bits_per_block();
        if !bits.len().is_multiple_of(bpb) {
            return Err(Error::parameter(format!(
                "bit count {} is not a multiple of the block size {bpb}",
                bits.len()
            )));
        }
        let n = self.code.block_len();
        let k = self.code.input_bits();
        let mut out = Vec::with_capacity(bits.len() / bpb * self.symbols_per_block());
        for block in bits.chunks_exact(bpb) {
            let amps = self.code.encode(&block[..k])?;
            let signs = &block[k..];
            for s in 0..n / 2 {
                let i_lvl = self.grid.signed_level(amps[2 * s] as usize, signs[2 * s]);
                let q_lvl = self
                    .grid
                    .signed_level(amps[2 * s + 1] as usize, signs[2 * s + 1]);
                let idx = *self
                    .grid
                    .point_of
                    .get(&(i_lvl, q_lvl))
                    .expect("grid covers all level pairs");
                out.push(idx);
            }
        }
        Ok(out)
    }

    /// Invert `map` from decided symbol indices. `analog`, when given,
    /// supplies the pre-decision symbols used to repair blocks whose decided
    /// composition disagrees with the code (least-confident flips first).
    pub fn demap(&self, decided: &[usize], analog: Option<&[Complex64]>) -> Result<Vec<u8>> {
        let spb = self.symbols_per_block();
        if !decided.len().is_multiple_of(spb) {
            return Err(Error::parameter(format!(
                "symbol count {} is not a multiple of the block size {spb}",
                decided.len()
            )));
        }
        let n = self.code.block_len();
        let mut bits = Vec::with_capacity(decided.len() / spb * self.bits_per_block());
        for (b, block) in decided.chunks_exact(spb).enumerate() {
            let mut amps = Vec::with_capacity(n);
            let mut signs = Vec::with_capacity(n);
            let mut mags = Vec::with_capacity(n);
            for (s, &idx) in block.iter().enumerate() {
                for dim in [false, true] {
                    let (lvl, sign) = self.grid.split(idx, dim);
                    amps.push(lvl as u8);
                    signs.push(sign);
                    let mag = analog.map(|a| {
                        let y = a[b * spb + s];
                        if dim {
                            y.im.abs()
                        } else {
                            y.re.abs()
                        }
                    });
                    mags.push(mag.unwrap_or(self.grid.levels[lvl]));
                }
            }
            self.repair_composition(&mut amps, &mags);
            let mut block_bits = self.code.decode(&amps)?;
            block_bits.extend_from_slice(&signs);
            bits.extend_from_slice(&block_bits);
        }
        Ok(bits)
    }

    /// Force a decided amplitude block onto the code's composition by
    /// flipping the cheapest decisions (distance cost against the analog
    /// magnitudes) until the histogram matches.
    fn repair_composition(&self, amps: &mut [u8], mags: &[f64]) {
        let levels = self.grid.level_count();
        let target = self.code.composition();
        let mut counts = vec![0i64; levels];
        for &a in amps.iter() {
            counts[a as usize] += 1;
        }
        loop {
            let mut excess: Option<usize> = None;
            let mut deficit: Option<usize> = None;
            for l in 0..levels {
                if counts[l] > target[l] as i64 && excess.is_none() {
                    excess = Some(l);
                }
                if counts[l] < target[l] as i64 && deficit.is_none() {
                    deficit = Some(l);
                }
            }
            let (Some(_), Some(to)) = (excess, deficit) else {
                break;
            };
            // Cheapest single move: any over-represented level -> `to`.
            let mut best: Option<(usize, f64)> = None;
            for (pos, &a) in amps.iter().enumerate() {
                let from = a as usize;
                if counts[from] <= target[from] as i64 {
                    continue;
                }
                let cost = (mags[pos] - self.grid.levels[to]).abs()
                    - (mags[pos] - self.grid.levels[from]).abs();
                if best.map(|(_, c)| cost < c).unwrap_or(true) {
                    best = Some((pos, cost));
                }
            }
            let Some((pos, _)) = best else { break };
            counts[amps[pos] as usize] -= 1;
            amps[pos] = to as u8;
            counts[to] += 1;
        }
    }

    /// Decide the nearest point for each analog symbol, then demap with
    /// composition repair.
    pub fn demap_hard(&self, symbols: &[Complex64]) -> Result<Vec<u8>> {
        let decided: Vec<usize> = symbols
            .iter()
            .map(|&y| self.nearest_by_level(y))
            .collect();
        self.demap(&decided, Some(symbols))
    }

    /// Nearest point by per-dimension level slicing (equivalent to nearest
    /// Euclidean point on a square grid).
    fn nearest_by_level(&self, y: Complex64) -> usize {
        let li = self.grid.nearest_level(y.re.abs());
        let lq = self.grid.nearest_level(y.im.abs());
        let gi = self.grid.signed_level(li, (y.re > 0.0) as u8);
        let gq = self.grid.signed_level(lq, (y.im > 0.0) as u8);
        self.grid.point_of[&(gi, gq)]
    }
}

/// Largest-remainder rounding of `n * p` to integers summing to `n`.
fn round_composition(p: &[f64], n: usize) -> Vec<u32> {
    let raw: Vec<f64> = p.iter().map(|&x| x * n as f64).collect();
    let mut counts: Vec<u32> = raw.iter().map(|&x| x.floor() as u32).collect();
    let mut short = n as i64 - counts.iter().sum::<u32>() as i64;
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())));
    let mut i = 0;
    while short > 0 {
        counts[order[i % order.len()]] += 1;
        short -= 1;
        i += 1;
    }
    counts
}

/// Plain Gray mapping of uniform payload bits to symbol indices.
pub fn map_uniform(bits: &[u8], c: &ShapedConstellation) -> Result<Vec<usize>> {
    let m = c.bits_per_symbol;
    if !bits.len().is_multiple_of(m) {
        return Err(Error::parameter(format!(
            "bit count {} is not a multiple of {m}",
            bits.len()
        )));
    }
    let mut lut = vec![usize::MAX; 1 << m];
    for (idx, &label) in c.labels.iter().enumerate() {
        lut[label as usize] = idx;
    }
    Ok(bits
        .chunks_exact(m)
        .map(|chunk| {
            let mut label = 0u32;
            for &b in chunk {
                label = (label << 1) | b as u32;
            }
            lut[label as usize]
        })
        .collect())
}

/// Invert `map_uniform` from symbol indices.
pub fn demap_uniform(indices: &[usize], c: &ShapedConstellation) -> Vec<u8> {
    let m = c.bits_per_symbol;
    let mut bits = Vec::with_capacity(indices.len() * m);
    for &idx in indices {
        for i in 0..m {
            bits.push(c.bit(idx, i));
        }
    }
    bits
}

/// Map payload bits to shaped symbols (whole CCDM blocks).
pub fn pcs_map(
    bits: &[u8],
    shaped: &ShapedConstellation,
    code: &CcdmCode,
) -> Result<Vec<Complex64>> {
    let mapper = PasMapper::with_code(shaped, code.clone())?;
    let indices = mapper.map(bits)?;
    Ok(indices.iter().map(|&i| shaped.points[i]).collect())
}

/// Hard-demap shaped symbols back to payload bits.
pub fn pcs_demap_hard(
    symbols: &[Complex64],
    shaped: &ShapedConstellation,
    code: &CcdmCode,
) -> Result<Vec<u8>> {
    let mapper = PasMapper::with_code(shaped, code.clone())?;
    mapper.demap_hard(symbols)
}
