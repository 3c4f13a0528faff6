//! Digital preprocessing: DC offset removal, dither, pre-emphasis.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::rng;

use super::Waveform;

/// Remove the mean amplitude so the output has zero DC offset.
pub fn dc_filter(w: &Waveform) -> Waveform {
    let mean = w.samples.iter().sum::<f64>() / w.samples.len() as f64;
    Waveform {
        samples: w.samples.iter().map(|&x| x - mean).collect(),
        sample_rate: w.sample_rate,
    }
}

/// Add seeded uniform noise in `[-amplitude, amplitude]` to decorrelate
/// quantization error.
pub fn dither(w: &Waveform, amplitude: f64, seed: u64) -> Result<Waveform> {
    if amplitude < 0.0 {
        return Err(CoreError::InvalidArgument("dither amplitude must be >= 0".into()));
    }
    if amplitude == 0.0 {
        return Ok(w.clone());
    }
    let mut r = rng::rng(seed);
    let samples = w
        .samples
        .iter()
        .map(|&x| x + rng::uniform(&mut r, -amplitude, amplitude))
        .collect::<Vec<_>>();
    Ok(Waveform { samples, sample_rate: w.sample_rate })
}

/// High-pass pre-emphasis: `out[n] = w[n] - alpha * w[n-1]`, `out[0] = w[0]`.
pub fn pre_emphasis(w: &Waveform, alpha: f64) -> Result<Waveform> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(CoreError::InvalidArgument("pre-emphasis alpha must be in [0, 1)".into()));
    }
    let mut samples = Vec::with_capacity(w.samples.len());
    samples.push(w.samples[0]);
    for i in 1..w.samples.len() {
        samples.push(w.samples[i] - alpha * w.samples[i - 1]);
    }
    Ok(Waveform { samples, sample_rate: w.sample_rate })
}
