//! Mel filterbank and MFCC features.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::kernels;
use crate::tape::dct2_basis;

use super::Spectrogram;

/// Power floor applied before any log of spectral energy.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10.0f64.powf(m / 2595.0) - 1.0)
}

/// Log-Mel energies (and optionally their DCT-II coefficients) per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFeatures {
    pub frames: usize,
    pub n_mels: usize,
    /// `frames x n_mels`, natural log of floored Mel energies.
    pub log_mel: Vec<f64>,
    /// `frames x n_mfcc` DCT-II coefficients, when requested.
    pub mfcc: Option<(usize, Vec<f64>)>,
}

/// Triangular filters on the Mel scale, evaluated at bin center frequencies.
/// Returns a `n_mels x (n_fft/2 + 1)` row-major matrix.
pub fn mel_filterbank(n_fft: usize, n_mels: usize, sample_rate: u32) -> Result<Vec<f64>> {
    if n_mels < 2 {
        return Err(CoreError::InvalidArgument("n_mels must be >= 2".into()));
    }
    let half = n_fft / 2 + 1;
    let fs = sample_rate as f64;
    let mel_max = hz_to_mel(fs / 2.0);
    // n_mels + 2 vertices uniformly spaced on the Mel axis
    let verts_hz: Vec<f64> =
        (0..n_mels + 2).map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64)).collect();
    let mut bank = vec![0.0; n_mels * half];
    for m in 0..n_mels {
        let (lo, center, hi) = (verts_hz[m], verts_hz[m + 1], verts_hz[m + 2]);
        for k in 0..half {
            let f = k as f64 * fs / n_fft as f64;
            let w = if f <= lo || f >= hi {
                0.0
            } else if f <= center {
                (f - lo) / (center - lo)
            } else {
                (hi - f) / (hi - center)
            };
            bank[m * half + k] = w;
        }
    }
    Ok(bank)
}

/// Log-Mel energies and the first `n_mfcc` orthonormal DCT-II coefficients of
/// each frame of a power spectrogram.
pub fn mfcc(s: &Spectrogram, n_mels: usize, n_mfcc: usize) -> Result<MelFeatures> {
    if n_mfcc > n_mels {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "n_mfcc {n_mfcc} exceeds n_mels {n_mels}"
        )));
    }
    let half = s.params.n_fft / 2 + 1;
    let bank = mel_filterbank(s.params.n_fft, n_mels, s.params.sample_rate)?;
    let mut log_mel = vec![0.0; s.frames * n_mels];
    for t in 0..s.frames {
        let frame = &s.frame(t)[..half];
        for m in 0..n_mels {
            let row = &bank[m * half..(m + 1) * half];
            let mut acc = 0.0;
            for (&p, &w) in frame.iter().zip(row.iter()) {
                acc += p * w;
            }
            log_mel[t * n_mels + m] = acc.max(LOG_FLOOR).ln();
        }
    }
    let mfcc = if n_mfcc > 0 {
        let basis = dct2_basis(n_mfcc, n_mels);
        let mut coeffs = vec![0.0; s.frames * n_mfcc];
        kernels::matmul_bt(s.frames, n_mels, n_mfcc, &log_mel, &basis, &mut coeffs);
        Some((n_mfcc, coeffs))
    } else {
        None
    };
    Ok(MelFeatures { frames: s.frames, n_mels, log_mel, mfcc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft, StftParams, Waveform, DEFAULT_SAMPLE_RATE};

    #[test]
    fn mel_scale_endpoints() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        // 2595 * log10(1 + 1000/700)
        let m = hz_to_mel(1000.0);
        assert!((m - 999.98).abs() < 0.1, "{m}");
        assert!((mel_to_hz(hz_to_mel(3456.0)) - 3456.0).abs() < 1e-9);
    }

    /// Re-derive the triangle vertices independently and compare weights.
    #[test]
    fn filterbank_matches_triangle_oracle() {
        let (n_fft, n_mels, fs) = (512usize, 26usize, DEFAULT_SAMPLE_RATE);
        let half = n_fft / 2 + 1;
        let bank = mel_filterbank(n_fft, n_mels, fs).unwrap();
        let mel_max = hz_to_mel(fs as f64 / 2.0);
        for m in 0..n_mels {
            let lo = mel_to_hz(mel_max * m as f64 / (n_mels + 1) as f64);
            let c = mel_to_hz(mel_max * (m + 1) as f64 / (n_mels + 1) as f64);
            let hi = mel_to_hz(mel_max * (m + 2) as f64 / (n_mels + 1) as f64);
            let mut oracle_sum = 0.0;
            for k in 0..half {
                let f = k as f64 * fs as f64 / n_fft as f64;
                let up = (f - lo) / (c - lo);
                let down = (hi - f) / (hi - c);
                let w = up.min(down).max(0.0);
                oracle_sum += w;
                assert!((bank[m * half + k] - w).abs() <= 1e-9);
            }
            let got_sum: f64 = bank[m * half..(m + 1) * half].iter().sum();
            assert!((got_sum - oracle_sum).abs() <= 1e-9 * oracle_sum.max(1.0));
        }
    }

    #[test]
    fn filter_weights_are_unit_peak_triangles() {
        let bank = mel_filterbank(512, 26, DEFAULT_SAMPLE_RATE).unwrap();
        let half = 257;
        for m in 0..26 {
            let peak = bank[m * half..(m + 1) * half].iter().cloned().fold(0.0, f64::max);
            assert!(peak > 0.5 && peak <= 1.0, "filter {m} peak {peak}");
        }
    }

    #[test]
    fn mfcc_shapes_and_finiteness_on_silence() {
        // silent frames hit the log floor instead of -inf
        let w = Waveform::new(vec![0.0; 4800], DEFAULT_SAMPLE_RATE).unwrap();
        let s = stft(&w, &StftParams::default_16k()).unwrap();
        let f = mfcc(&s, 26, 13).unwrap();
        assert_eq!(f.log_mel.len(), s.frames * 26);
        assert!(f.log_mel.iter().all(|v| v.is_finite()));
        let (n_mfcc, coeffs) = f.mfcc.unwrap();
        assert_eq!(n_mfcc, 13);
        assert_eq!(coeffs.len(), s.frames * 13);
        assert!(coeffs.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mfcc_rejects_more_coeffs_than_mels() {
        let w = Waveform::new(vec![0.1; 4800], DEFAULT_SAMPLE_RATE).unwrap();
        let s = stft(&w, &StftParams::default_16k()).unwrap();
        assert!(mfcc(&s, 13, 20).is_err());
    }
}
