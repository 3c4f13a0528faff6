//! Stage 4 -> 1 signal processing: encoding, preprocessing filters,
//! framing/windowing, spectrograms, Mel/MFCC features, spectrogram inversion
//! and band filtering. Everything here is a plain numeric routine; the
//! tape-recorded differentiable variants live in [`crate::pipeline`] and are
//! property-tested to match these.

pub mod encode;
pub mod filter;
pub mod griffin;
pub mod mel;
pub mod prep;
pub mod stft;

pub use encode::{lpcm_quantize, mu_law_decode, mu_law_encode, ClipStats};
pub use filter::{band_energy_fraction, design_lowpass_fir, low_pass, power_spectrum};
pub use griffin::{griffin_lim, griffin_lim_with_trace};
pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz, mfcc, MelFeatures};
pub use prep::{dc_filter, dither, pre_emphasis};
pub use stft::{band_power, hamming, istft, stft, stft_complex, Spectrogram, StftComplex};

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono digital audio (the stage-3 object). Samples nominally live in
/// `[-1, 1]`; encoders clip and count anything outside.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(CoreError::InvalidInput("waveform must not be empty".into()));
        }
        if sample_rate == 0 {
            return Err(CoreError::InvalidArgument("sample rate must be > 0".into()));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hamming,
}

/// Framing and transform parameters for a spectrogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftParams {
    pub n_fft: usize,
    pub win_len: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub sample_rate: u32,
}

impl StftParams {
    /// The artifact-wide default grid: 25 ms Hamming windows, 10 ms hop,
    /// 512-point transform at 16 kHz.
    pub fn default_16k() -> Self {
        StftParams {
            n_fft: 512,
            win_len: 400,
            hop: 160,
            window: WindowKind::Hamming,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }

    pub fn from_ms(window_ms: f64, hop_ms: f64, n_fft: usize, sample_rate: u32) -> Result<Self> {
        let win_len = (window_ms * sample_rate as f64 / 1000.0) as usize;
        let hop = (hop_ms * sample_rate as f64 / 1000.0) as usize;
        let p = StftParams { n_fft, win_len, hop, window: WindowKind::Hamming, sample_rate };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.win_len == 0 || self.hop == 0 {
            return Err(CoreError::InvalidArgument("window and hop must be > 0".into()));
        }
        if self.win_len > self.n_fft {
            return Err(CoreError::InvalidArgument(format!(
                "window length {} exceeds n_fft {}",
                self.win_len, self.n_fft
            )));
        }
        if self.hop > self.win_len {
            return Err(CoreError::InvalidArgument(format!(
                "hop {} exceeds window length {}",
                self.hop, self.win_len
            )));
        }
        Ok(())
    }

    /// Frame count for a signal of `len` samples.
    pub fn frames_for(&self, len: usize) -> Result<usize> {
        if len < self.win_len {
            return Err(CoreError::InvalidInput(format!(
                "signal of {len} samples is shorter than one {}-sample window",
                self.win_len
            )));
        }
        Ok((len - self.win_len) / self.hop + 1)
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.n_fft as f64
    }
}
