//! FIR low-pass filtering and whole-signal spectra.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::fft::dft_real;

use super::{stft::hamming, Waveform};

pub const LOWPASS_TAPS: usize = 101;

/// Hamming-windowed sinc low-pass prototype with unit DC gain.
pub fn design_lowpass_fir(cutoff_hz: f64, sample_rate: u32, taps: usize) -> Result<Vec<f64>> {
    let fs = sample_rate as f64;
    if !(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0) {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "cutoff {cutoff_hz} Hz must be in (0, {})",
            fs / 2.0
        )));
    }
    if taps % 2 == 0 || taps < 3 {
        return Err(CoreError::InvalidArgument("tap count must be odd and >= 3".into()));
    }
    let fc = cutoff_hz / fs; // cycles per sample
    let center = (taps - 1) as f64 / 2.0;
    let window = hamming(taps);
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let t = n as f64 - center;
            let ideal = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * core::f64::consts::PI * fc * t).sin() / (core::f64::consts::PI * t)
            };
            ideal * window[n]
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in h.iter_mut() {
        *v /= sum;
    }
    Ok(h)
}

/// Same-length convolution with zero-padded edges, centered on the filter.
fn filter_same(x: &[f64], h: &[f64]) -> Vec<f64> {
    let c = (h.len() - 1) / 2;
    let n = x.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &hv) in h.iter().enumerate() {
            let idx = i as isize + c as isize - j as isize;
            if idx >= 0 && (idx as usize) < n {
                acc += hv * x[idx as usize];
            }
        }
        *o = acc;
    }
    out
}

/// Zero-phase low-pass: a 101-tap Hamming-windowed sinc applied forward and
/// backward, squaring the magnitude response and cancelling group delay.
pub fn low_pass(w: &Waveform, cutoff_hz: f64) -> Result<Waveform> {
    let h = design_lowpass_fir(cutoff_hz, w.sample_rate, LOWPASS_TAPS)?;
    let fwd = filter_same(&w.samples, &h);
    let mut rev: Vec<f64> = fwd.into_iter().rev().collect();
    rev = filter_same(&rev, &h);
    rev.reverse();
    Ok(Waveform { samples: rev, sample_rate: w.sample_rate })
}

/// Power spectrum of the whole signal on its exact length-n DFT grid
/// (bins `0..=n/2`).
pub fn power_spectrum(w: &Waveform) -> Vec<f64> {
    let (re, im) = dft_real(&w.samples);
    let half = w.len() / 2 + 1;
    (0..half).map(|k| re[k] * re[k] + im[k] * im[k]).collect()
}

/// Fraction of whole-signal spectral power (non-mirrored half) that falls in
/// `[lo_hz, hi_hz)`.
pub fn band_energy_fraction(w: &Waveform, lo_hz: f64, hi_hz: f64) -> f64 {
    let spec = power_spectrum(w);
    let fs = w.sample_rate as f64;
    let n = w.len() as f64;
    let mut band = 0.0;
    let mut total = 0.0;
    for (k, &p) in spec.iter().enumerate() {
        let f = k as f64 * fs / n;
        total += p;
        if f >= lo_hz && f < hi_hz {
            band += p;
        }
    }
    if total > 0.0 {
        band / total
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::DEFAULT_SAMPLE_RATE;

    fn sine(freq: f64, len: usize, amp: f64) -> Waveform {
        let fs = DEFAULT_SAMPLE_RATE as f64;
        let samples =
            (0..len).map(|n| amp * (2.0 * core::f64::consts::PI * freq * n as f64 / fs).sin()).collect();
        Waveform::new(samples, DEFAULT_SAMPLE_RATE).unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    /// Interior RMS, away from filter edge transients.
    fn interior_rms(x: &[f64]) -> f64 {
        rms(&x[400..x.len() - 400])
    }

    #[test]
    fn passband_tone_attenuation_below_one_percent() {
        let w = sine(1000.0, 16_000, 0.5);
        let out = low_pass(&w, 7000.0).unwrap();
        let ratio = interior_rms(&out.samples) / interior_rms(&w.samples);
        assert!((ratio - 1.0).abs() <= 0.01, "ratio {ratio}");
    }

    #[test]
    fn stopband_tone_attenuated_by_40_db() {
        let w = sine(7500.0, 16_000, 0.5);
        let out = low_pass(&w, 7000.0).unwrap();
        let ratio = interior_rms(&out.samples) / interior_rms(&w.samples);
        assert!(ratio <= 0.01, "only {} dB", -20.0 * ratio.log10());
    }

    #[test]
    fn dc_passes_unchanged() {
        let w = Waveform::new(vec![0.5; 4000], DEFAULT_SAMPLE_RATE).unwrap();
        let out = low_pass(&w, 7000.0).unwrap();
        for &v in &out.samples[200..3800] {
            assert!((v - 0.5).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn idempotent_on_band_limited_signals() {
        // Content far inside the passband: once-filtered vs twice-filtered.
        // A 101-tap Hamming-windowed sinc has a passband ripple floor around
        // 1e-4, which bounds how idempotent the pinned design can be.
        let mut w = sine(200.0, 8000, 0.3);
        for (n, v) in w.samples.iter_mut().enumerate() {
            *v += 0.2 * (2.0 * core::f64::consts::PI * 450.0 * n as f64 / 16_000.0).sin();
        }
        let once = low_pass(&w, 7000.0).unwrap();
        let twice = low_pass(&once, 7000.0).unwrap();
        let max_diff = once
            .samples
            .iter()
            .zip(twice.samples.iter())
            .skip(400)
            .take(once.len() - 800)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff <= 2e-3, "max diff {max_diff}");
    }

    #[test]
    fn band_energy_fraction_localizes_tones() {
        let w = sine(7500.0, 16_000, 0.3);
        assert!(band_energy_fraction(&w, 7000.0, 8000.0) > 0.999);
        let w2 = sine(1000.0, 16_000, 0.3);
        assert!(band_energy_fraction(&w2, 7000.0, 8000.0) < 1e-6);
    }

    #[test]
    fn lowpass_validates_cutoff() {
        let w = sine(440.0, 1600, 0.1);
        assert!(low_pass(&w, 0.0).is_err());
        assert!(low_pass(&w, 8000.0).is_err());
    }
}
