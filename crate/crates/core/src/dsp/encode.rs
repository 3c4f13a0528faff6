//! Quantization and companding (stage 4 -> 3 encoding).

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};

use super::Waveform;

/// Count of samples that fell outside `[-1, 1]` and were clipped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClipStats {
    pub clipped: usize,
}

fn check_bits(bits: u32) -> Result<()> {
    if bits != 8 && bits != 16 {
        return Err(CoreError::InvalidArgument(format!("bits must be 8 or 16, got {bits}")));
    }
    Ok(())
}

fn quantize_grid(samples: &[f64], bits: u32) -> (Vec<f64>, ClipStats) {
    let levels = (1i64 << (bits - 1)) as f64; // e.g. 32768 for 16 bits
    let mut stats = ClipStats::default();
    let out = samples
        .iter()
        .map(|&x| {
            let x = if !(-1.0..=1.0).contains(&x) {
                stats.clipped += 1;
                x.clamp(-1.0, 1.0)
            } else {
                x
            };
            let q = (x * levels).round().clamp(-levels, levels - 1.0);
            q / levels
        })
        .collect();
    (out, stats)
}

/// Snap samples to the linear PCM integer grid for the given bit depth and
/// scale back to `[-1, 1]`. Out-of-range samples are clipped and counted.
pub fn lpcm_quantize(w: &Waveform, bits: u32) -> Result<(Waveform, ClipStats)> {
    check_bits(bits)?;
    let (samples, stats) = quantize_grid(&w.samples, bits);
    Ok((Waveform { samples, sample_rate: w.sample_rate }, stats))
}

fn compand(x: f64, mu: f64) -> f64 {
    x.signum() * (1.0 + mu * x.abs()).ln() / (1.0 + mu).ln()
}

fn expand(y: f64, mu: f64) -> f64 {
    y.signum() * (((1.0 + mu).ln() * y.abs()).exp() - 1.0) / mu
}

/// Mu-law companding followed by quantization of the companded value to the
/// `bits`-deep grid. The output is the quantized companded signal.
pub fn mu_law_encode(w: &Waveform, mu: u32, bits: u32) -> Result<(Waveform, ClipStats)> {
    if mu == 0 {
        return Err(CoreError::InvalidArgument("mu must be > 0".into()));
    }
    check_bits(bits)?;
    let mu = mu as f64;
    let mut stats = ClipStats::default();
    let companded: Vec<f64> = w
        .samples
        .iter()
        .map(|&x| {
            let x = if !(-1.0..=1.0).contains(&x) {
                stats.clipped += 1;
                x.clamp(-1.0, 1.0)
            } else {
                x
            };
            compand(x, mu)
        })
        .collect();
    let (samples, _) = quantize_grid(&companded, bits);
    Ok((Waveform { samples, sample_rate: w.sample_rate }, stats))
}

/// Inverse of [`mu_law_encode`]: expand companded grid values back to the
/// linear domain.
pub fn mu_law_decode(w: &Waveform, mu: u32) -> Result<Waveform> {
    if mu == 0 {
        return Err(CoreError::InvalidArgument("mu must be > 0".into()));
    }
    let mu = mu as f64;
    let samples = w.samples.iter().map(|&y| expand(y, mu)).collect();
    Ok(Waveform { samples, sample_rate: w.sample_rate })
}
