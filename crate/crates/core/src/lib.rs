//! Differentiable audio-pipeline laboratory: a minimal dense-tensor engine
//! with reverse-mode autodiff, stage-by-stage signal processing (encoding,
//! STFT, Mel/MFCC, Griffin-Lim inversion, FIR filtering), toy speaker
//! identification pipelines, the attack algorithms that target them and the
//! pipeline-level detectors that catch those attacks.
//!
//! The crate is `no_std` (`alloc` required); everything here is pure
//! computation over `f64` buffers. File formats, WAV I/O and the command-line
//! front end live in the companion `surreptix` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attack;
pub mod detect;
pub mod dsp;
pub mod error;
pub mod fd;
pub mod fft;
pub mod kernels;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tape;
pub mod tensor;

pub use error::{CoreError, Result};
pub use tensor::Tensor;
