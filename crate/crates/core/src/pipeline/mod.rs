//! Toy-scale realizations of the three speaker-identification pipelines as
//! differentiable stage chains with addressable internal taps.
//!
//! * `SBP` — spectrogram front end, 2-D CNN (after Vggvox).
//! * `ABP` — MFCC front end, 1-D CNN over frames (X-vector stand-in).
//! * `DBP` — learnable sinc band-pass bank on raw waveform context windows,
//!   1-D CNN (after SincNet).

pub mod layers;
pub mod train;

pub use layers::Layer;
pub use train::{
    agreement, distill, split_accuracy, train, DistillConfig, OptimizerKind, TrainConfig,
    TrainReport,
};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dsp::{self, hamming, mel::LOG_FLOOR, Spectrogram, StftParams, Waveform};
use crate::error::{CoreError, Result};
use crate::kernels;
use crate::rng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineKind {
    Sbp,
    Abp,
    Dbp,
}

impl PipelineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PipelineKind::Sbp => "sbp",
            PipelineKind::Abp => "abp",
            PipelineKind::Dbp => "dbp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sbp" => Ok(PipelineKind::Sbp),
            "abp" => Ok(PipelineKind::Abp),
            "dbp" => Ok(PipelineKind::Dbp),
            other => Err(CoreError::InvalidArgument(format!("unknown pipeline kind `{other}`"))),
        }
    }
}

/// Frozen per-column mean/variance statistics. Identity (empty) until
/// training fits them.
#[derive(Debug, Clone, PartialEq)]
pub struct BinNormalizer {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl BinNormalizer {
    pub fn identity(cols: usize) -> Self {
        BinNormalizer { mean: vec![0.0; cols], inv_std: vec![1.0; cols] }
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, rows: usize, data: &mut [f64]) {
        let k = self.mean.len();
        debug_assert_eq!(data.len(), rows * k);
        for t in 0..rows {
            let row = &mut data[t * k..(t + 1) * k];
            for j in 0..k {
                row[j] = (row[j] - self.mean[j]) * self.inv_std[j];
            }
        }
    }
}

/// Number of MFCC Mel bands / coefficients used by the ABP front end.
pub const ABP_N_MELS: usize = 26;
pub const ABP_N_MFCC: usize = 13;
/// DBP context window length: 200 ms at 16 kHz.
pub const DBP_WINDOW_MS: f64 = 200.0;

/// A trained (or freshly initialized) pipeline: fixed preprocessing stages
/// plus a classifier with addressable taps.
#[derive(Debug, Clone)]
pub struct PipelineModel {
    pub kind: PipelineKind,
    pub label_count: usize,
    pub stft: StftParams,
    /// Per-spectrogram-bin stats (SBP) or per-MFCC-coefficient stats (ABP);
    /// empty for DBP.
    pub norm: BinNormalizer,
    pub layers: Vec<Layer>,
    /// Classifier layer index after which each named tap is recorded.
    taps_after: Vec<(usize, &'static str)>,
    /// DBP context window in samples; 0 for the other kinds.
    pub window_len: usize,
}

/// Result of a taped forward pass: the logits var plus every named tap.
pub struct TapedForward {
    pub logits: Var,
    pub taps: Vec<(&'static str, Var)>,
}

impl TapedForward {
    pub fn tap(&self, name: &str) -> Result<Var> {
        self.taps
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| CoreError::UnknownTap(String::from(name)))
    }

    pub fn tap_names(&self) -> Vec<&'static str> {
        self.taps.iter().map(|(n, _)| *n).collect()
    }
}

/// Per-window logits and the ensemble vote for a context-window model.
pub struct WindowForward {
    pub window_len: usize,
    pub starts: Vec<usize>,
    pub logits: Vec<Vec<f64>>,
    /// Sum over windows of per-window log-probabilities.
    pub summed_log_probs: Vec<f64>,
}

impl WindowForward {
    pub fn ensemble_label(&self) -> usize {
        kernels::argmax(&self.summed_log_probs)
    }

    pub fn window_labels(&self) -> Vec<usize> {
        self.logits.iter().map(|l| kernels::argmax(l)).collect()
    }
}

impl PipelineModel {
    /// Build a freshly initialized pipeline of the given kind.
    pub fn build(kind: PipelineKind, label_count: usize, seed: u64) -> Result<Self> {
        if label_count < 1 {
            return Err(CoreError::InvalidArgument("label_count must be >= 1".into()));
        }
        let stft = StftParams::default_16k();
        let mut r = rng::substream(seed, 0x9A9A);
        let (norm, layers, taps_after, window_len): (
            BinNormalizer,
            Vec<Layer>,
            Vec<(usize, &'static str)>,
            usize,
        ) = match kind {
            PipelineKind::Sbp => {
                let layers = vec![
                    Layer::conv2d(&mut r, 8, 1, 5, 5, (2, 2)),
                    Layer::Relu,
                    Layer::MaxPool2d(2),
                    Layer::conv2d(&mut r, 16, 8, 3, 3, (1, 1)),
                    Layer::Relu,
                    Layer::MaxPool2d(2),
                    Layer::Flatten,
                    Layer::dense(&mut r, 64, 9920),
                    Layer::Relu,
                    Layer::dense(&mut r, label_count, 64),
                ];
                let taps = vec![(1, "conv1"), (4, "conv2"), (8, "fc1")];
                (BinNormalizer::identity(stft.n_fft), layers, taps, 0)
            }
            PipelineKind::Abp => {
                let layers = vec![
                    Layer::conv1d(&mut r, 16, ABP_N_MFCC, 5, 1),
                    Layer::Relu,
                    Layer::MaxPool1d(2),
                    Layer::conv1d(&mut r, 32, 16, 3, 1),
                    Layer::Relu,
                    Layer::MaxPool1d(2),
                    Layer::Flatten,
                    Layer::dense(&mut r, 64, 704),
                    Layer::Relu,
                    Layer::dense(&mut r, label_count, 64),
                ];
                let taps = vec![(1, "conv1"), (4, "conv2"), (8, "fc1")];
                (BinNormalizer::identity(ABP_N_MFCC), layers, taps, 0)
            }
            PipelineKind::Dbp => {
                let window_len =
                    (DBP_WINDOW_MS * stft.sample_rate as f64 / 1000.0) as usize; // 3200
                let layers = vec![
                    Layer::sinc_bank(16, 101, 4, 30.0, 7600.0, stft.sample_rate),
                    Layer::Relu,
                    Layer::MaxPool1d(4),
                    Layer::conv1d(&mut r, 32, 16, 5, 1),
                    Layer::Relu,
                    Layer::MaxPool1d(2),
                    Layer::conv1d(&mut r, 32, 32, 3, 1),
                    Layer::Relu,
                    Layer::MaxPool1d(2),
                    Layer::Flatten,
                    Layer::dense(&mut r, 64, 1472),
                    Layer::Relu,
                    Layer::dense(&mut r, label_count, 64),
                ];
                let taps =
                    vec![(1, "sinc"), (4, "conv1"), (7, "conv2"), (9, "cnn"), (11, "fc1")];
                (BinNormalizer { mean: Vec::new(), inv_std: Vec::new() }, layers, taps, window_len)
            }
        };
        Ok(PipelineModel { kind, label_count, stft, norm, layers, taps_after, window_len })
    }

    pub fn tap_names(&self) -> Vec<&'static str> {
        let mut names: Vec<&'static str> = match self.kind {
            PipelineKind::Dbp => Vec::new(),
            _ => vec!["stage1"],
        };
        names.extend(self.taps_after.iter().map(|(_, n)| *n));
        names.push("logits");
        names
    }

    /// Map the descriptive aliases used in reports onto structural tap names:
    /// `deep` is the last convolution output, `shallow` the first fully
    /// connected output, `spectrogram` the raw stage-1 grid.
    pub fn resolve_tap<'a>(&self, name: &'a str) -> &'a str {
        match name {
            "deep" => "conv2",
            "shallow" => "fc1",
            "spectrogram" => "stage1",
            other => other,
        }
    }

    // ---- taped forward passes ------------------------------------------

    /// Spectral front end shared by SBP and ABP: frame, window, zero-pad,
    /// transform, power. Matches `dsp::stft` bit-for-bit.
    fn spectrogram_chain(&self, tape: &mut Tape, audio: Var) -> Result<Var> {
        let p = &self.stft;
        let frames = tape.frame_split(audio, p.win_len, p.hop)?;
        let window = tape.constant(Tensor::from_vec(hamming(p.win_len)));
        let windowed = tape.window_apply(frames, window)?;
        tape.dft_power(windowed, p.n_fft)
    }

    fn normalize_chain(&self, tape: &mut Tape, feats: Var) -> Result<Var> {
        if self.norm.is_empty() {
            return Ok(feats);
        }
        let mean = tape.constant(Tensor::from_vec(self.norm.mean.clone()));
        let istd = tape.constant(Tensor::from_vec(self.norm.inv_std.clone()));
        tape.col_normalize(feats, mean, istd)
    }

    /// Apply this pipeline's frozen stage-1 normalization to a taped raw
    /// spectrogram (used by objectives that reason about the normalized
    /// stage-1 grid). Pipelines without bin statistics pass through.
    pub fn normalize_stage1_taped(&self, tape: &mut Tape, power: Var) -> Result<Var> {
        if self.kind == PipelineKind::Sbp {
            self.normalize_chain(tape, power)
        } else {
            Ok(power)
        }
    }

    /// MFCC front end for ABP: Mel projection, floored log, DCT-II.
    fn mfcc_chain(&self, tape: &mut Tape, power: Var) -> Result<Var> {
        let bank = dsp::mel_filterbank(self.stft.n_fft, ABP_N_MELS, self.stft.sample_rate)?;
        let bank = tape.constant(Tensor::new(vec![ABP_N_MELS, self.stft.n_fft / 2 + 1], bank)?);
        let mel = tape.mel_project(power, bank)?;
        let logm = tape.log_floor(mel, LOG_FLOOR);
        tape.dct2(logm, ABP_N_MFCC)
    }

    /// Put every layer's parameters on the tape once. A whole batch of
    /// forward passes can then share the same parameter nodes so their
    /// gradients accumulate.
    pub fn leaf_all_params(&self, tape: &mut Tape, trainable: bool) -> Vec<Vec<Var>> {
        self.layers.iter().map(|l| l.leaf_params(tape, trainable)).collect()
    }

    /// Run the classifier layers over normalized features, recording taps.
    fn run_classifier(
        &self,
        tape: &mut Tape,
        input: Var,
        params: &[Vec<Var>],
        mut taps: Vec<(&'static str, Var)>,
    ) -> Result<TapedForward> {
        let mut x = input;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, x, &params[i])?;
            if let Some((_, name)) = self.taps_after.iter().find(|(idx, _)| *idx == i) {
                taps.push((name, x));
            }
        }
        taps.push(("logits", x));
        Ok(TapedForward { logits: x, taps })
    }

    /// Taped forward from stage-3 audio. For DBP the input must be one
    /// context window of `window_len` samples.
    pub fn forward_audio_taped(
        &self,
        tape: &mut Tape,
        audio: Var,
        trainable: bool,
    ) -> Result<TapedForward> {
        let params = self.leaf_all_params(tape, trainable);
        self.forward_audio_with_params(tape, audio, &params)
    }

    pub fn forward_audio_with_params(
        &self,
        tape: &mut Tape,
        audio: Var,
        params: &[Vec<Var>],
    ) -> Result<TapedForward> {
        match self.kind {
            PipelineKind::Sbp => {
                let power = self.spectrogram_chain(tape, audio)?;
                let normed = self.normalize_chain(tape, power)?;
                let t = tape.value(normed).shape()[0];
                let img = tape.reshape(normed, vec![1, t, self.stft.n_fft])?;
                self.run_classifier(tape, img, params, vec![("stage1", power)])
            }
            PipelineKind::Abp => {
                let power = self.spectrogram_chain(tape, audio)?;
                let coeffs = self.mfcc_chain(tape, power)?;
                let normed = self.normalize_chain(tape, coeffs)?;
                let chans = tape.transpose2d(normed)?;
                self.run_classifier(tape, chans, params, vec![("stage1", power)])
            }
            PipelineKind::Dbp => {
                let n = tape.value(audio).numel();
                if n != self.window_len {
                    return Err(CoreError::InvalidInput(format!(
                        "dbp expects one {}-sample context window, got {n}",
                        self.window_len
                    )));
                }
                let img = tape.reshape(audio, vec![1, n])?;
                self.run_classifier(tape, img, params, Vec::new())
            }
        }
    }

    /// Taped forward from a stage-1 spectrogram (SBP/ABP only).
    pub fn forward_spectrogram_taped(
        &self,
        tape: &mut Tape,
        power: Var,
        trainable: bool,
    ) -> Result<TapedForward> {
        let sh = tape.value(power).shape().to_vec();
        if sh.len() != 2 || sh[1] != self.stft.n_fft {
            return Err(CoreError::InvalidInput(format!(
                "stage-1 input must be [frames, {}], got {sh:?}",
                self.stft.n_fft
            )));
        }
        let params = self.leaf_all_params(tape, trainable);
        match self.kind {
            PipelineKind::Sbp => {
                let normed = self.normalize_chain(tape, power)?;
                let t = sh[0];
                let img = tape.reshape(normed, vec![1, t, self.stft.n_fft])?;
                self.run_classifier(tape, img, &params, vec![("stage1", power)])
            }
            PipelineKind::Abp => {
                let coeffs = self.mfcc_chain(tape, power)?;
                let normed = self.normalize_chain(tape, coeffs)?;
                let chans = tape.transpose2d(normed)?;
                self.run_classifier(tape, chans, &params, vec![("stage1", power)])
            }
            PipelineKind::Dbp => Err(CoreError::InvalidInput(
                "dbp has no spectrogram stage to insert at".into(),
            )),
        }
    }

    /// Taped forward from pre-normalized cached features (training fast
    /// path): `[frames, n_fft]` for SBP, `[frames, n_mfcc]` for ABP, a raw
    /// context window for DBP.
    pub fn forward_features_with_params(
        &self,
        tape: &mut Tape,
        feats: Var,
        params: &[Vec<Var>],
    ) -> Result<TapedForward> {
        match self.kind {
            PipelineKind::Sbp => {
                let sh = tape.value(feats).shape().to_vec();
                let img = tape.reshape(feats, vec![1, sh[0], sh[1]])?;
                self.run_classifier(tape, img, params, Vec::new())
            }
            PipelineKind::Abp => {
                let chans = tape.transpose2d(feats)?;
                self.run_classifier(tape, chans, params, Vec::new())
            }
            PipelineKind::Dbp => self.forward_audio_with_params(tape, feats, params),
        }
    }

    // ---- plain (inference) paths ----------------------------------------

    /// Raw stage-1 power spectrogram under this pipeline's analysis grid.
    pub fn raw_spectrogram(&self, w: &Waveform) -> Result<Spectrogram> {
        dsp::stft(w, &self.stft)
    }

    /// The stage-1 feature grid distortion is measured on: the pipeline's
    /// spectrogram, normalized when the pipeline normalizes bins.
    pub fn stage1_features(&self, w: &Waveform) -> Result<Vec<f64>> {
        let s = self.raw_spectrogram(w)?;
        let mut data = s.power;
        if self.kind == PipelineKind::Sbp && !self.norm.is_empty() {
            self.norm.apply(s.frames, &mut data);
        }
        Ok(data)
    }

    /// Training-time cached features (normalized spectrogram or MFCC rows).
    pub fn cached_features(&self, w: &Waveform) -> Result<Tensor> {
        match self.kind {
            PipelineKind::Sbp => {
                let s = self.raw_spectrogram(w)?;
                let mut data = s.power.clone();
                self.norm.apply(s.frames, &mut data);
                Tensor::new(vec![s.frames, self.stft.n_fft], data)
            }
            PipelineKind::Abp => {
                let s = self.raw_spectrogram(w)?;
                let f = dsp::mfcc(&s, ABP_N_MELS, ABP_N_MFCC)?;
                let (n_mfcc, mut coeffs) = f.mfcc.expect("requested");
                self.norm.apply(s.frames, &mut coeffs);
                Tensor::new(vec![s.frames, n_mfcc], coeffs)
            }
            PipelineKind::Dbp => Err(CoreError::InvalidInput(
                "dbp trains on raw context windows, not cached features".into(),
            )),
        }
    }

    /// Logits for a full utterance. DBP ensembles non-overlapping context
    /// windows via summed log-probabilities.
    pub fn predict_logits(&self, w: &Waveform) -> Result<Vec<f64>> {
        match self.kind {
            PipelineKind::Dbp => Ok(self.forward_windows(w, 0.0)?.summed_log_probs),
            _ => {
                let mut tape = Tape::new();
                let audio = tape.leaf(Tensor::from_vec(w.samples.clone()));
                let fwd = self.forward_audio_taped(&mut tape, audio, false)?;
                Ok(tape.value(fwd.logits).data().to_vec())
            }
        }
    }

    /// Output probabilities (the black-box interface).
    pub fn predict_probs(&self, w: &Waveform) -> Result<Vec<f64>> {
        Ok(kernels::softmax(&self.predict_logits(w)?))
    }

    pub fn predict_label(&self, w: &Waveform) -> Result<usize> {
        Ok(kernels::argmax(&self.predict_logits(w)?))
    }

    /// Logits from a stage-1 spectrogram object.
    pub fn predict_logits_from_spectrogram(&self, s: &Spectrogram) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let power = tape.leaf(Tensor::new(vec![s.frames, s.params.n_fft], s.power.clone())?);
        let fwd = self.forward_spectrogram_taped(&mut tape, power, false)?;
        Ok(tape.value(fwd.logits).data().to_vec())
    }

    /// Decompose a waveform into context windows shifted by `shift_ms`
    /// (`0` means adjacent non-overlapping windows) and classify each.
    pub fn forward_windows(&self, w: &Waveform, shift_ms: f64) -> Result<WindowForward> {
        if self.kind != PipelineKind::Dbp {
            return Err(CoreError::InvalidInput(format!(
                "{} does not use context windows",
                self.kind.as_str()
            )));
        }
        if shift_ms < 0.0 {
            return Err(CoreError::InvalidArgument("shift must be >= 0".into()));
        }
        let wl = self.window_len;
        if w.len() < wl {
            return Err(CoreError::InvalidInput(format!(
                "waveform of {} samples is shorter than one {wl}-sample context window",
                w.len()
            )));
        }
        let starts: Vec<usize> = if shift_ms == 0.0 {
            (0..w.len() / wl).map(|i| i * wl).collect()
        } else {
            let shift = (shift_ms * w.sample_rate as f64 / 1000.0) as usize;
            let shift = shift.max(1);
            (0..=(w.len() - wl) / shift).map(|i| i * shift).collect()
        };
        let mut logits = Vec::with_capacity(starts.len());
        let mut summed = vec![0.0; self.label_count];
        for &s0 in &starts {
            let mut tape = Tape::new();
            let win = tape.leaf(Tensor::from_vec(w.samples[s0..s0 + wl].to_vec()));
            let fwd = self.forward_audio_taped(&mut tape, win, false)?;
            let l = tape.value(fwd.logits).data().to_vec();
            let probs = kernels::softmax(&l);
            for (acc, &p) in summed.iter_mut().zip(probs.iter()) {
                *acc += p.max(1e-300).ln();
            }
            logits.push(l);
        }
        Ok(WindowForward { window_len: wl, starts, logits, summed_log_probs: summed })
    }

    // ---- parameter access -------------------------------------------------

    /// Flat parameter blocks in declaration order: a meta block
    /// `[label_count]`, the normalizer stats, then each layer's tensors.
    pub fn param_blocks(&self) -> Vec<Vec<f64>> {
        let mut blocks = vec![
            vec![self.label_count as f64],
            self.norm.mean.clone(),
            self.norm.inv_std.clone(),
        ];
        for layer in &self.layers {
            for t in layer.params() {
                blocks.push(t.data().to_vec());
            }
        }
        blocks
    }

    /// Restore parameters from blocks produced by [`PipelineModel::param_blocks`]
    /// on a model of the same kind and label count.
    pub fn load_param_blocks(&mut self, blocks: &[Vec<f64>]) -> Result<()> {
        let expect = 3 + self.layers.iter().map(|l| l.params().len()).sum::<usize>();
        if blocks.len() != expect {
            return Err(CoreError::InvalidInput(format!(
                "expected {expect} parameter blocks, got {}",
                blocks.len()
            )));
        }
        if blocks[0].len() != 1 || blocks[0][0] as usize != self.label_count {
            return Err(CoreError::InvalidInput(format!(
                "label count mismatch: file has {:?}, model has {}",
                blocks[0], self.label_count
            )));
        }
        let norm_len = self.norm.mean.len();
        if blocks[1].len() != norm_len || blocks[2].len() != norm_len {
            return Err(CoreError::InvalidInput(format!(
                "normalizer length mismatch: {} vs {norm_len}",
                blocks[1].len()
            )));
        }
        self.norm.mean = blocks[1].clone();
        self.norm.inv_std = blocks[2].clone();
        let mut cursor = 3;
        for layer in self.layers.iter_mut() {
            for t in layer.params_mut() {
                let blk = &blocks[cursor];
                if blk.len() != t.numel() {
                    return Err(CoreError::InvalidInput(format!(
                        "parameter block {cursor} has {} values, layer expects {}",
                        blk.len(),
                        t.numel()
                    )));
                }
                *t = Tensor::new(t.shape().to_vec(), blk.clone())?;
                cursor += 1;
            }
        }
        Ok(())
    }

    /// Enforce structural parameter constraints (sinc cutoff ordering).
    pub fn project_constraints(&mut self) {
        for layer in self.layers.iter_mut() {
            layer.project_sinc_constraints();
        }
    }

    /// Effective sinc cutoffs for each filter of a DBP front end.
    pub fn sinc_cutoffs_hz(&self) -> Option<Vec<(f64, f64)>> {
        self.layers.iter().find_map(|l| l.sinc_cutoffs_hz(self.stft.sample_rate))
    }
}
