//! Constant composition distribution matching.
//!
//! A block of `k` bits indexes one of the multiset permutations of a fixed
//! amplitude composition; encode walks the lexicographic unranking, decode
//! ranks the sequence back. Every output block carries exactly the target
//! composition and decode(encode(x)) == x.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CcdmCode {
    block_len: usize,
    composition: Vec<u32>,
    input_bits: usize,
}

/// floor(log2 x) for a positive big integer.
fn floor_log2(x: &BigUint) -> usize {
    (x.bits() - 1) as usize
}

fn multinomial(n: usize, counts: &[u32]) -> BigUint {
    let mut result = BigUint::from(1u32);
    let mut k = 0u64;
    for &c in counts {
        for j in 1..=c as u64 {
            k += 1;
            result = result * k / j; // binomial build-up stays exact
        }
    }
    debug_assert_eq!(k as usize, n);
    result
}

impl CcdmCode {
    /// `composition[a]` is the count of amplitude level `a` per block.
    pub fn new(composition: Vec<u32>) -> Result<Self> {
        if composition.len() < 2 {
            return Err(Error::parameter("composition needs at least two levels"));
        }
        let n: u32 = composition.iter().sum();
        if n == 0 {
            return Err(Error::parameter("composition must be non-empty"));
        }
        let total = multinomial(n as usize, &composition);
        let input_bits = floor_log2(&total);
        Ok(Self {
            block_len: n as usize,
            composition,
            input_bits,
        })
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn composition(&self) -> &[u32] {
        &self.composition
    }

    /// Input bits per block: floor(log2 of the multiset permutation count).
    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    pub fn levels(&self) -> usize {
        self.composition.len()
    }

    /// Matching rate in bits per amplitude.
    pub fn rate(&self) -> f64 {
        self.input_bits as f64 / self.block_len as f64
    }

    /// Entropy of the composition in bits per amplitude.
    pub fn composition_entropy(&self) -> f64 {
        let n = self.block_len as f64;
        -self
            .composition
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.log2()
            })
            .sum::<f64>()
    }

    /// Map `input_bits` bits (MSB first) to one amplitude block.
    pub fn encode(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.len() != self.input_bits {
            return Err(Error::parameter(format!(
                "encode needs exactly {} bits, got {}",
                self.input_bits,
                bits.len()
            )));
        }
        let mut index = BigUint::from(0u32);
        for &b in bits {
            index <<= 1;
            if b != 0 {
                index += 1u32;
            }
        }
        let mut counts = self.composition.clone();
        let mut total = multinomial(self.block_len, &counts);
        let mut out = Vec::with_capacity(self.block_len);
        for remaining in (1..=self.block_len).rev() {
            for a in 0..counts.len() {
                if counts[a] == 0 {
                    continue;
                }
                // Sequences starting with level a.
                let with_a = &total * counts[a] / remaining as u32;
                if index < with_a {
                    out.push(a as u8);
                    counts[a] -= 1;
                    total = with_a;
                    break;
                }
                index -= with_a;
            }
        }
        debug_assert_eq!(out.len(), self.block_len);
        Ok(out)
    }

    /// Invert `encode`. The input must carry exactly the code's composition.
    pub fn decode(&self, amplitudes: &[u8]) -> Result<Vec<u8>> {
        if amplitudes.len() != self.block_len {
            return Err(Error::parameter("wrong block length"));
        }
        let mut counts_check = vec![0u32; self.composition.len()];
        for &a in amplitudes {
            let slot = counts_check
                .get_mut(a as usize)
                .ok_or_else(|| Error::parameter("amplitude level out of range"))?;
            *slot += 1;
        }
        if counts_check != self.composition {
            return Err(Error::dsp(
                "ccdm_decode",
                "input composition does not match the code",
            ));
        }
        let mut counts = self.composition.clone();
        let mut total = multinomial(self.block_len, &counts);
        let mut index = BigUint::from(0u32);
        for (pos, &sym) in amplitudes.iter().enumerate() {
            let remaining = (self.block_len - pos) as u32;
            for a in 0..sym as usize {
                if counts[a] == 0 {
                    continue;
                }
                index += &total * counts[a] / remaining;
            }
            let with_sym = &total * counts[sym as usize] / remaining;
            counts[sym as usize] -= 1;
            total = with_sym;
        }
        let mut bits = vec![0u8; self.input_bits];
        for i in (0..self.input_bits).rev() {
            bits[i] = (index.bit(0)) as u8;
            index >>= 1;
        }
        Ok(bits)
    }
}
