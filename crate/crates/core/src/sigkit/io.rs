//! Waveform file format.
//!
//! Binary dumps use a 32-byte little-endian header followed by IEEE-754
//! float32 samples, interleaved (re, im) when complex:
//!
//! | offset | field          | type  |
//! |--------|----------------|-------|
//! | 0      | magic "WVFM"   | [u8;4]|
//! | 4      | version        | u32   |
//! | 8      | sample_rate_hz | f64   |
//! | 16     | length         | u64   |
//! | 24     | flags (bit0: complex) | u32 |
//! | 28     | reserved       | u32   |
//!
//! A CSV export (`index,re,im`) is provided for quick inspection.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::waveform::{ComplexWaveform, RealWaveform};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WVFM";
const VERSION: u32 = 1;
const FLAG_COMPLEX: u32 = 1;

/// A waveform loaded from disk, either flavor.
#[derive(Debug, Clone)]
pub enum WaveformFile {
    Real(RealWaveform),
    Complex(ComplexWaveform),
}

impl WaveformFile {
    pub fn sample_rate_hz(&self) -> f64 {
        match self {
            WaveformFile::Real(w) => w.sample_rate_hz(),
            WaveformFile::Complex(w) => w.sample_rate_hz(),
        }
    }

    pub fn into_real(self) -> Result<RealWaveform> {
        match self {
            WaveformFile::Real(w) => Ok(w),
            WaveformFile::Complex(_) => Err(Error::parameter("expected a real waveform file")),
        }
    }

    pub fn into_complex(self) -> Result<ComplexWaveform> {
        match self {
            WaveformFile::Complex(w) => Ok(w),
            WaveformFile::Real(w) => Ok(w.to_complex()),
        }
    }
}

fn write_header<W: Write>(w: &mut W, rate: f64, len: u64, flags: u32) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&rate.to_le_bytes())?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    Ok(())
}

pub fn write_complex(path: &Path, wave: &ComplexWaveform) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        wave.sample_rate_hz(),
        wave.len() as u64,
        FLAG_COMPLEX,
    )?;
    for s in wave.samples() {
        w.write_all(&(s.re as f32).to_le_bytes())?;
        w.write_all(&(s.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_real(path: &Path, wave: &RealWaveform) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, wave.sample_rate_hz(), wave.len() as u64, 0)?;
    for s in wave.samples() {
        w.write_all(&(*s as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_waveform(path: &Path) -> Result<WaveformFile> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(Error::parameter(format!(
            "{} is not a waveform file (bad magic)",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::parameter(format!(
            "unsupported waveform file version {version}"
        )));
    }
    let rate = f64::from_le_bytes(header[8..16].try_into().unwrap());
    let len = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let flags = u32::from_le_bytes(header[24..28].try_into().unwrap());
    let complex = flags & FLAG_COMPLEX != 0;
    let floats = len * if complex { 2 } else { 1 };
    let mut buf = vec![0u8; floats * 4];
    r.read_exact(&mut buf)?;
    let vals: Vec<f32> = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if complex {
        let samples: Vec<Complex64> = vals
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0] as f64, p[1] as f64))
            .collect();
        Ok(WaveformFile::Complex(ComplexWaveform::new(samples, rate)?))
    } else {
        Ok(WaveformFile::Real(RealWaveform::new(
            vals.into_iter().map(|v| v as f64).collect(),
            rate,
        )?))
    }
}

/// Round-trip a complex waveform through the file's f32 representation
/// without touching the disk. Used at pipeline stage boundaries so in-memory
/// runs match stage-wise runs bit for bit.
pub fn quantize_to_f32(wave: &ComplexWaveform) -> ComplexWaveform {
    let samples: Vec<Complex64> = wave
        .samples()
        .iter()
        .map(|s| Complex64::new(s.re as f32 as f64, s.im as f32 as f64))
        .collect();
    ComplexWaveform::new(samples, wave.sample_rate_hz()).expect("f32 round trip stays valid")
}

pub fn quantize_to_f32_real(wave: &RealWaveform) -> RealWaveform {
    let samples: Vec<f64> = wave.samples().iter().map(|&s| s as f32 as f64).collect();
    RealWaveform::new(samples, wave.sample_rate_hz()).expect("f32 round trip stays valid")
}

pub fn export_csv_complex(path: &Path, wave: &ComplexWaveform) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "index,re,im")?;
    for (i, s) in wave.samples().iter().enumerate() {
        writeln!(w, "{i},{},{}", s.re, s.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv_real(path: &Path, wave: &RealWaveform) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "index,re,im")?;
    for (i, s) in wave.samples().iter().enumerate() {
        writeln!(w, "{i},{s},0")?;
    }
    w.flush()?;
    Ok(())
}
