//! Short-time Fourier analysis. Spectrograms keep the full redundant bin set
//! so the conjugate-symmetry structure of real signals is observable
//! downstream.

use alloc::vec;
use alloc::vec::Vec;


use crate::error::{CoreError, Result};
use crate::fft::Dft;
use crate::tape;

use super::{StftParams, Waveform};

/// Time x frequency power grid (stage-1 object). Row-major `frames x n_fft`,
/// all `n_fft` redundant bins retained.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub params: StftParams,
    pub frames: usize,
    pub power: Vec<f64>,
}

impl Spectrogram {
    pub fn bins(&self) -> usize {
        self.params.n_fft
    }

    pub fn at(&self, frame: usize, bin: usize) -> f64 {
        self.power[frame * self.params.n_fft + bin]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.power[frame * self.params.n_fft..(frame + 1) * self.params.n_fft]
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// Complex STFT, kept for inversion.
#[derive(Debug, Clone)]
pub struct StftComplex {
    pub params: StftParams,
    pub frames: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl StftComplex {
    pub fn power(&self) -> Spectrogram {
        let power =
            self.re.iter().zip(self.im.iter()).map(|(&r, &i)| r * r + i * i).collect();
        Spectrogram { params: self.params, frames: self.frames, power }
    }
}

/// Symmetric Hamming window of `len` samples.
pub fn hamming(len: usize) -> Vec<f64> {
    (0..len).map(|n| tape::hamming_at(n, len)).collect()
}

/// Complex STFT of a waveform: frame, window, zero-pad to `n_fft`, transform.
pub fn stft_complex(w: &Waveform, params: &StftParams) -> Result<StftComplex> {
    params.validate()?;
    if w.sample_rate != params.sample_rate {
        return Err(CoreError::InvalidInput(alloc::format!(
            "waveform rate {} does not match analysis rate {}",
            w.sample_rate,
            params.sample_rate
        )));
    }
    let frames = params.frames_for(w.len())?;
    let n_fft = params.n_fft;
    let window = hamming(params.win_len);
    let plan = Dft::new(n_fft);
    let mut re = vec![0.0; frames * n_fft];
    let mut im = vec![0.0; frames * n_fft];
    for t in 0..frames {
        let frame_re = &mut re[t * n_fft..(t + 1) * n_fft];
        let frame_im = &mut im[t * n_fft..(t + 1) * n_fft];
        let src = &w.samples[t * params.hop..t * params.hop + params.win_len];
        for (dst, (&x, &win)) in frame_re.iter_mut().zip(src.iter().zip(window.iter())) {
            *dst = x * win;
        }
        plan.forward(frame_re, frame_im);
    }
    Ok(StftComplex { params: *params, frames, re, im })
}

/// Power spectrogram of a waveform.
pub fn stft(w: &Waveform, params: &StftParams) -> Result<Spectrogram> {
    Ok(stft_complex(w, params)?.power())
}

/// Weighted overlap-add inversion of a complex STFT. The synthesis window is
/// the analysis window; overlapping window energy is divided out where it is
/// nonzero. Output length is `(frames - 1) * hop + win_len`.
pub fn istft(s: &StftComplex) -> Waveform {
    let p = &s.params;
    let n_fft = p.n_fft;
    let window = hamming(p.win_len);
    let out_len = (s.frames - 1) * p.hop + p.win_len;
    let mut out = vec![0.0; out_len];
    let mut norm = vec![0.0; out_len];
    let plan = Dft::new(n_fft);
    let mut re = vec![0.0; n_fft];
    let mut im = vec![0.0; n_fft];
    for t in 0..s.frames {
        re.copy_from_slice(&s.re[t * n_fft..(t + 1) * n_fft]);
        im.copy_from_slice(&s.im[t * n_fft..(t + 1) * n_fft]);
        plan.inverse(&mut re, &mut im);
        let base = t * p.hop;
        for n in 0..p.win_len {
            out[base + n] += window[n] * re[n];
            norm[base + n] += window[n] * window[n];
        }
    }
    for (o, &w) in out.iter_mut().zip(norm.iter()) {
        if w > 1e-12 {
            *o /= w;
        }
    }
    Waveform { samples: out, sample_rate: p.sample_rate }
}

/// Sum of power over all frames in bins whose center frequency lies in
/// `[lo_hz, hi_hz)`. Only the non-mirrored half (bins `0..=n_fft/2`) is
/// scanned, matching the `0 <= lo < hi <= fs/2` contract.
pub fn band_power(s: &Spectrogram, lo_hz: f64, hi_hz: f64) -> Result<f64> {
    let fs = s.params.sample_rate as f64;
    if !(0.0 <= lo_hz && lo_hz < hi_hz && hi_hz <= fs / 2.0) {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "band [{lo_hz}, {hi_hz}) must satisfy 0 <= lo < hi <= fs/2 = {}",
            fs / 2.0
        )));
    }
    let n_fft = s.params.n_fft;
    let mut total = 0.0;
    for k in 0..=n_fft / 2 {
        let f = s.params.bin_hz(k);
        if f >= lo_hz && f < hi_hz {
            for t in 0..s.frames {
                total += s.power[t * n_fft + k];
            }
        }
    }
    Ok(total)
}

/// Total power in the non-mirrored half of the spectrum, the denominator for
/// band-fraction scores.
pub fn half_spectrum_power(s: &Spectrogram) -> f64 {
    let n_fft = s.params.n_fft;
    let mut total = 0.0;
    for t in 0..s.frames {
        for k in 0..=n_fft / 2 {
            total += s.power[t * n_fft + k];
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{StftParams, Waveform, DEFAULT_SAMPLE_RATE};

    fn sine(freq: f64, len: usize, amp: f64) -> Waveform {
        let fs = DEFAULT_SAMPLE_RATE as f64;
        let samples =
            (0..len).map(|n| amp * (2.0 * core::f64::consts::PI * freq * n as f64 / fs).sin()).collect();
        Waveform::new(samples, DEFAULT_SAMPLE_RATE).unwrap()
    }

    #[test]
    fn frame_count_matches_formula() {
        let p = StftParams::default_16k();
        let s = stft(&sine(440.0, 16_000, 0.5), &p).unwrap();
        assert_eq!(s.frames, (16_000 - 400) / 160 + 1); // 98
        assert_eq!(s.bins(), 512);
    }

    #[test]
    fn pure_1khz_sine_peaks_at_bin_32_and_mirror() {
        let p = StftParams::default_16k();
        let s = stft(&sine(1000.0, 16_000, 0.5), &p).unwrap();
        for t in 0..s.frames {
            let frame = s.frame(t);
            let lower = crate::kernels::argmax(&frame[..257]);
            assert_eq!(lower, 32, "frame {t}");
            // mirrored bin carries the same power
            assert!((frame[32] - frame[480]).abs() <= 1e-9 * frame[32]);
        }
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let p = StftParams::default_16k();
        let w = Waveform::new(vec![0.0; 8000], DEFAULT_SAMPLE_RATE).unwrap();
        let s = stft(&w, &p).unwrap();
        assert!(s.power.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short_waveform_is_an_error() {
        let p = StftParams::default_16k();
        let w = Waveform::new(vec![0.1; 399], DEFAULT_SAMPLE_RATE).unwrap();
        assert!(stft(&w, &p).is_err());
    }

    #[test]
    fn hermitian_symmetry_on_random_audio() {
        let p = StftParams::default_16k();
        let mut r = crate::rng::rng(8);
        let mut x = vec![0.0; 4000];
        crate::rng::fill_uniform(&mut r, &mut x, -1.0, 1.0);
        let s = stft(&Waveform::new(x, DEFAULT_SAMPLE_RATE).unwrap(), &p).unwrap();
        for t in 0..s.frames {
            let frame = s.frame(t);
            for k in 1..512 {
                let (a, b) = (frame[k], frame[512 - k]);
                let rel = (a - b).abs() / (a.abs() + b.abs() + 1e-12);
                assert!(rel <= 1e-9, "frame {t} bin {k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn parseval_energy_identity_per_frame() {
        // total spectral power of a windowed frame == windowed energy * n_fft
        let p = StftParams::default_16k();
        let mut r = crate::rng::rng(9);
        let mut x = vec![0.0; 1600];
        crate::rng::fill_uniform(&mut r, &mut x, -1.0, 1.0);
        let w = Waveform::new(x.clone(), DEFAULT_SAMPLE_RATE).unwrap();
        let s = stft(&w, &p).unwrap();
        let window = hamming(p.win_len);
        for t in 0..s.frames {
            let windowed_energy: f64 = (0..p.win_len)
                .map(|n| {
                    let v = x[t * p.hop + n] * window[n];
                    v * v
                })
                .sum();
            let spectral: f64 = s.frame(t).iter().sum();
            let expect = windowed_energy * p.n_fft as f64;
            assert!(
                (spectral - expect).abs() <= 1e-6 * expect.max(1e-12),
                "frame {t}: {spectral} vs {expect}"
            );
        }
    }

    #[test]
    fn istft_reconstructs_interior_exactly() {
        // With >= 50% overlap and no spectral modification, weighted
        // overlap-add is an exact inverse away from the edges.
        let p = StftParams::default_16k();
        let mut r = crate::rng::rng(10);
        let mut x = vec![0.0; 3200];
        crate::rng::fill_uniform(&mut r, &mut x, -0.9, 0.9);
        let w = Waveform::new(x.clone(), DEFAULT_SAMPLE_RATE).unwrap();
        let c = stft_complex(&w, &p).unwrap();
        let rec = istft(&c);
        for n in p.win_len..rec.len() - p.win_len {
            assert!((rec.samples[n] - x[n]).abs() < 1e-9, "sample {n}");
        }
    }

    #[test]
    fn band_power_of_pure_tone_concentrates() {
        let p = StftParams::default_16k();
        let s = stft(&sine(7500.0, 16_000, 0.4), &p).unwrap();
        let in_band = band_power(&s, 7000.0, 8000.0).unwrap();
        let total = half_spectrum_power(&s);
        assert!(in_band / total >= 0.95, "fraction {}", in_band / total);
    }

    #[test]
    fn band_power_zero_signal() {
        let p = StftParams::default_16k();
        let w = Waveform::new(vec![0.0; 1600], DEFAULT_SAMPLE_RATE).unwrap();
        let s = stft(&w, &p).unwrap();
        assert_eq!(band_power(&s, 7000.0, 8000.0).unwrap(), 0.0);
    }

    #[test]
    fn band_power_validates_range() {
        let p = StftParams::default_16k();
        let s = stft(&sine(440.0, 1600, 0.4), &p).unwrap();
        assert!(band_power(&s, 5000.0, 2000.0).is_err());
        assert!(band_power(&s, 0.0, 9000.0).is_err());
    }
}
