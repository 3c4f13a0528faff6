//! Griffin-Lim iterative phase reconstruction: alternate between inverting
//! the current complex estimate and replacing its magnitudes with the target,
//! starting from seeded random phases. An optional momentum term extrapolates
//! successive estimates (fast Griffin-Lim); the plain alternation is the
//! `momentum = 0` case.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::rng;

use super::stft::{istft, stft_complex, Spectrogram, StftComplex};
use super::Waveform;

/// Default extrapolation factor for the accelerated variant.
pub const GRIFFIN_LIM_MOMENTUM: f64 = 0.99;

/// Reconstruct a time-domain signal from a power spectrogram with the
/// default momentum.
pub fn griffin_lim(s: &Spectrogram, iterations: usize, seed: u64) -> Result<Waveform> {
    Ok(griffin_lim_momentum(s, iterations, seed, GRIFFIN_LIM_MOMENTUM)?.0)
}

/// As [`griffin_lim`], also returning the relative spectral magnitude error
/// after the initial estimate and after each iteration.
pub fn griffin_lim_with_trace(
    s: &Spectrogram,
    iterations: usize,
    seed: u64,
) -> Result<(Waveform, Vec<f64>)> {
    griffin_lim_momentum(s, iterations, seed, GRIFFIN_LIM_MOMENTUM)
}

/// Reconstruction with an explicit momentum. `momentum = 0` is the classic
/// alternating projection, whose spectral error is non-increasing.
pub fn griffin_lim_momentum(
    s: &Spectrogram,
    iterations: usize,
    seed: u64,
    momentum: f64,
) -> Result<(Waveform, Vec<f64>)> {
    if s.frames == 0 {
        return Err(CoreError::InvalidInput("spectrogram has no frames".into()));
    }
    // The paper's reconstruction conditions need >= 50% frame overlap.
    if s.params.hop * 2 > s.params.win_len {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "griffin_lim requires >= 50% overlap (hop {} vs window {})",
            s.params.hop,
            s.params.win_len
        )));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(CoreError::InvalidArgument("momentum must be in [0, 1)".into()));
    }
    let n = s.power.len();
    let magnitude: Vec<f64> = s.power.iter().map(|&p| p.max(0.0).sqrt()).collect();
    let mag_norm = magnitude.iter().map(|&m| m * m).sum::<f64>().sqrt().max(1e-300);

    // Unit-phase field, random init in [-pi, pi), seeded.
    let mut r = rng::rng(seed);
    let mut ang_re = Vec::with_capacity(n);
    let mut ang_im = Vec::with_capacity(n);
    for _ in 0..n {
        let phi = rng::uniform(&mut r, -core::f64::consts::PI, core::f64::consts::PI);
        ang_re.push(phi.cos());
        ang_im.push(phi.sin());
    }

    let apply_mag = |ar: &[f64], ai: &[f64]| StftComplex {
        params: s.params,
        frames: s.frames,
        re: magnitude.iter().zip(ar.iter()).map(|(&m, &c)| m * c).collect(),
        im: magnitude.iter().zip(ai.iter()).map(|(&m, &c)| m * c).collect(),
    };

    let mut wave = istft(&apply_mag(&ang_re, &ang_im));
    let mut trace = Vec::with_capacity(iterations + 1);
    trace.push(spectral_error(&wave, s, &magnitude, mag_norm)?);

    let mut prev_re: Vec<f64> = Vec::new();
    let mut prev_im: Vec<f64> = Vec::new();
    let shrink = momentum / (1.0 + momentum);
    for it in 0..iterations {
        let rebuilt = stft_complex(&wave, &s.params)?;
        for k in 0..n {
            let (mut re, mut im) = (rebuilt.re[k], rebuilt.im[k]);
            if it > 0 && momentum > 0.0 {
                re -= shrink * prev_re[k];
                im -= shrink * prev_im[k];
            }
            let mag = (re * re + im * im).sqrt();
            if mag > 1e-300 {
                ang_re[k] = re / mag;
                ang_im[k] = im / mag;
            } else {
                ang_re[k] = 1.0;
                ang_im[k] = 0.0;
            }
        }
        if momentum > 0.0 {
            prev_re = rebuilt.re;
            prev_im = rebuilt.im;
        }
        wave = istft(&apply_mag(&ang_re, &ang_im));
        trace.push(spectral_error(&wave, s, &magnitude, mag_norm)?);
    }
    Ok((wave, trace))
}

/// Relative Frobenius distance between the magnitude spectrogram of `w` and
/// the target magnitudes.
fn spectral_error(
    w: &Waveform,
    target: &Spectrogram,
    magnitude: &[f64],
    mag_norm: f64,
) -> Result<f64> {
    let est = stft_complex(w, &target.params)?;
    let mut acc = 0.0;
    for k in 0..magnitude.len() {
        let m = (est.re[k] * est.re[k] + est.im[k] * est.im[k]).sqrt();
        let d = m - magnitude[k];
        acc += d * d;
    }
    Ok(acc.sqrt() / mag_norm)
}

/// Largest-magnitude normalized cross-correlation between two signals over
/// integer lags in `[-max_lag, max_lag]`. Returns the best absolute value.
pub fn max_lag_correlation(a: &[f64], b: &[f64], max_lag: usize) -> f64 {
    let ea = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ea < 1e-300 || eb < 1e-300 {
        return 0.0;
    }
    let mut best: f64 = 0.0;
    let lags = -(max_lag as isize)..=(max_lag as isize);
    for lag in lags {
        let mut acc = 0.0;
        for (i, &av) in a.iter().enumerate() {
            let j = i as isize + lag;
            if j >= 0 && (j as usize) < b.len() {
                acc += av * b[j as usize];
            }
        }
        best = best.max((acc / (ea * eb)).abs());
    }
    best
}
