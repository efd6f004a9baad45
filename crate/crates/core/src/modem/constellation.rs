//! Gray-labeled constellations from BPSK to 256QAM, uniform or shaped.
//!
//! Square orders use per-dimension Gray PAM. The cross orders (32, 128) are
//! built from the next-larger rectangular Gray grid with the outer columns
//! relocated into the cross stubs, which keeps neighbor labels within two bit
//! flips. 8QAM uses the 4x2 rectangular grid, which Gray-codes exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modulation choice for one band.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulationSpec {
    Uniform { order: u32 },
    Pcs { base_order: u32, entropy: f64 },
}

pub const SUPPORTED_ORDERS: [u32; 8] = [2, 4, 8, 16, 32, 64, 128, 256];

impl ModulationSpec {
    pub fn base_order(&self) -> u32 {
        match self {
            ModulationSpec::Uniform { order } => *order,
            ModulationSpec::Pcs { base_order, .. } => *base_order,
        }
    }

    /// Information bits per symbol: log2(M) for uniform, the target entropy
    /// for shaped formats.
    pub fn info_bits_per_symbol(&self) -> f64 {
        match self {
            ModulationSpec::Uniform { order } => (*order as f64).log2(),
            ModulationSpec::Pcs { entropy, .. } => *entropy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.base_order();
        if !SUPPORTED_ORDERS.contains(&m) {
            return Err(Error::parameter(format!("unsupported order {m}")));
        }
        if let ModulationSpec::Pcs { base_order, entropy } = self {
            let cap = (*base_order as f64).log2();
            if !(*entropy > 1.0 && *entropy <= cap) {
                return Err(Error::parameter(format!(
                    "pcs entropy {entropy} outside (1, {cap}]"
                )));
            }
        }
        Ok(())
    }
}

/// Constellation points with bit labels, symbol priors, and entropy.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ShapedConstellation {
    pub points: Vec<Complex64>,
    /// Bit label of each point, packed LSB-last (bit i of the label is bit
    /// position i of the symbol, MSB first at i = 0).
    pub labels: Vec<u32>,
    pub priors: Vec<f64>,
    pub entropy: f64,
    pub bits_per_symbol: usize,
    pub base_order: u32,
}

impl ShapedConstellation {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// Bit i (0 = MSB) of point `idx`'s label.
    pub fn bit(&self, idx: usize, i: usize) -> u8 {
        ((self.labels[idx] >> (self.bits_per_symbol - 1 - i)) & 1) as u8
    }

    /// Index of the point with the given label.
    pub fn index_of_label(&self, label: u32) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Nearest point to `y` by Euclidean distance.
    pub fn nearest(&self, y: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn mean_energy(&self) -> f64 {
        self.points
            .iter()
            .zip(self.priors.iter())
            .map(|(p, w)| w * p.norm_sqr())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if self.labels.len() != n || self.priors.len() != n {
            return Err(Error::parameter("constellation arrays must align"));
        }
        let sum: f64 = self.priors.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::parameter(format!("priors sum to {sum}")));
        }
        let h = entropy_bits(&self.priors);
        if (h - self.entropy).abs() > 1e-9 {
            return Err(Error::parameter("stored entropy is stale"));
        }
        if (self.mean_energy() - 1.0).abs() > 1e-9 {
            return Err(Error::parameter("constellation is not unit energy"));
        }
        Ok(())
    }
}

pub fn entropy_bits(priors: &[f64]) -> f64 {
    -priors
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Gray code of a PAM position index.
fn gray(p: u32) -> u32 {
    p ^ (p >> 1)
}

/// PAM levels -(2^b - 1) .. (2^b - 1) step 2, with their Gray labels.
/// Returns (level, label) in ascending level order.
pub fn gray_pam(bits: usize) -> Vec<(i32, u32)> {
    let n = 1u32 << bits;
    (0..n)
        .map(|p| {
            let level = 2 * p as i32 - (n as i32 - 1);
            (level, gray(p))
        })
        .collect()
}

/// Integer-grid points and labels before energy normalization.
fn raw_points(order: u32) -> Result<Vec<(i32, i32, u32)>> {
    match order {
        2 => Ok(vec![(1, 0, 0), (-1, 0, 1)]),
        8 => {
            // 4x2 rectangle: 2 Gray bits on I (PAM4), 1 bit on Q (PAM2).
            let pam_i = gray_pam(2);
            let pam_q = gray_pam(1);
            let mut pts = Vec::with_capacity(8);
            for &(i, gi) in &pam_i {
                for &(q, gq) in &pam_q {
                    pts.push((i, q, (gi << 1) | gq));
                }
            }
            Ok(pts)
        }
        4 | 16 | 64 | 256 => {
            let b = (order as f64).log2() as usize / 2;
            let pam = gray_pam(b);
            let mut pts = Vec::with_capacity(order as usize);
            for &(i, gi) in &pam {
                for &(q, gq) in &pam {
                    pts.push((i, q, (gi << b) | gq));
                }
            }
            Ok(pts)
        }
        32 => {
            // Rectangular 8x4 Gray grid with the |I| = 7 columns relocated
            // into the cross stubs; every neighbor stays within 2 bit flips.
            let pam_i = gray_pam(3);
            let pam_q = gray_pam(2);
            let mut pts = Vec::with_capacity(32);
            for &(i, gi) in &pam_i {
                for &(q, gq) in &pam_q {
                    let label = (gi << 2) | gq;
                    let (ri, rq) = if i.abs() > 5 {
                        (i.signum() * q.abs(), q.signum() * (i.abs() - 2))
                    } else {
                        (i, q)
                    };
                    pts.push((ri, rq, label));
                }
            }
            Ok(pts)
        }
        128 => Ok(CROSS_128.iter().map(|&(i, q, l)| (i, q, l)).collect()),
        _ => Err(Error::parameter(format!("unsupported order {order}"))),
    }
}

/// Quasi-Gray 128-cross labeling (precomputed: every minimum-distance
/// neighbor pair differs in at most two bits).
const CROSS_128: [(i32, i32, u32); 128] = [
   (-11, -7, 24), (-11, -5, 25), (-11, -3, 27), (-11, -1, 26),
   (-11, 1, 31), (-11, 3, 30), (-11, 5, 20), (-11, 7, 36),
   (-9, -7, 16), (-9, -5, 17), (-9, -3, 19), (-9, -1, 18),
   (-9, 1, 22), (-9, 3, 23), (-9, 5, 21), (-9, 7, 4),
   (-7, -11, 1), (-7, -9, 0), (-7, -7, 48), (-7, -5, 49),
   (-7, -3, 51), (-7, -1, 50), (-7, 1, 54), (-7, 3, 55),
   (-7, 5, 53), (-7, 7, 52), (-7, 9, 28), (-7, 11, 29),
   (-5, -11, 9), (-5, -9, 8), (-5, -7, 56), (-5, -5, 57),
   (-5, -3, 59), (-5, -1, 58), (-5, 1, 62), (-5, 3, 63),
   (-5, 5, 61), (-5, 7, 60), (-5, 9, 44), (-5, 11, 13),
   (-3, -11, 11), (-3, -9, 10), (-3, -7, 40), (-3, -5, 41),
   (-3, -3, 43), (-3, -1, 42), (-3, 1, 46), (-3, 3, 47),
   (-3, 5, 45), (-3, 7, 12), (-3, 9, 14), (-3, 11, 15),
   (-1, -11, 3), (-1, -9, 2), (-1, -7, 32), (-1, -5, 33),
   (-1, -3, 35), (-1, -1, 34), (-1, 1, 38), (-1, 3, 39),
   (-1, 5, 37), (-1, 7, 5), (-1, 9, 6), (-1, 11, 7),
   (1, -11, 67), (1, -9, 66), (1, -7, 96), (1, -5, 97),
   (1, -3, 99), (1, -1, 98), (1, 1, 102), (1, 3, 103),
   (1, 5, 101), (1, 7, 69), (1, 9, 70), (1, 11, 71),
   (3, -11, 75), (3, -9, 74), (3, -7, 104), (3, -5, 105),
   (3, -3, 107), (3, -1, 106), (3, 1, 110), (3, 3, 111),
   (3, 5, 109), (3, 7, 100), (3, 9, 76), (3, 11, 79),
   (5, -11, 73), (5, -9, 72), (5, -7, 120), (5, -5, 121),
   (5, -3, 123), (5, -1, 122), (5, 1, 126), (5, 3, 127),
   (5, 5, 125), (5, 7, 116), (5, 9, 68), (5, 11, 77),
   (7, -11, 65), (7, -9, 64), (7, -7, 112), (7, -5, 113),
   (7, -3, 115), (7, -1, 114), (7, 1, 118), (7, 3, 119),
   (7, 5, 117), (7, 7, 124), (7, 9, 108), (7, 11, 78),
   (9, -7, 80), (9, -5, 81), (9, -3, 83), (9, -1, 82),
   (9, 1, 86), (9, 3, 87), (9, 5, 85), (9, 7, 84),
   (11, -7, 88), (11, -5, 89), (11, -3, 91), (11, -1, 90),
   (11, 1, 94), (11, 3, 95), (11, 5, 93), (11, 7, 92),
];

/// Build a constellation: Gray-labeled points with the given priors
/// (uniform when `priors` is `None`), normalized to unit mean energy under
/// those priors.
pub fn build_constellation(order: u32, priors: Option<Vec<f64>>) -> Result<ShapedConstellation> {
    let raw = raw_points(order)?;
    let n = raw.len();
    debug_assert_eq!(n, order as usize);
    let priors = match priors {
        Some(p) => {
            if p.len() != n {
                return Err(Error::parameter("prior length mismatch"));
            }
            p
        }
        None => vec![1.0 / n as f64; n],
    };
    let energy: f64 = raw
        .iter()
        .zip(priors.iter())
        .map(|(&(i, q, _), &w)| w * (i as f64 * i as f64 + q as f64 * q as f64))
        .sum();
    let scale = 1.0 / energy.sqrt();
    let mut points = vec![Complex64::new(0.0, 0.0); n];
    let mut labels = vec![0u32; n];
    for (idx, &(i, q, label)) in raw.iter().enumerate() {
        points[idx] = Complex64::new(i as f64 * scale, q as f64 * scale);
        labels[idx] = label;
    }
    let bits = (order as f64).log2() as usize;
    let c = ShapedConstellation {
        points,
        labels,
        priors: priors.clone(),
        entropy: entropy_bits(&priors),
        bits_per_symbol: bits,
        base_order: order,
    };
    c.validate()?;
    Ok(c)
}

/// Build the constellation named by a modulation spec (shaped specs get
/// Maxwell-Boltzmann priors solved for the target entropy).
pub fn make_constellation(spec: &ModulationSpec) -> Result<ShapedConstellation> {
    spec.validate()?;
    match spec {
        ModulationSpec::Uniform { order } => build_constellation(*order, None),
        ModulationSpec::Pcs { base_order, entropy } => {
            super::shaping::mb_for_entropy(*base_order, *entropy)
        }
    }
}

/// Unnormalized integer-grid energies, used by the shaping solver.
pub fn raw_energies(order: u32) -> Result<Vec<f64>> {
    Ok(raw_points(order)?
        .iter()
        .map(|&(i, q, _)| (i * i + q * q) as f64)
        .collect())
}
