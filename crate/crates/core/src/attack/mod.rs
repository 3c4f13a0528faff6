//! Attack algorithms, each parameterized by insertion stage and producing
//! stage-wise distortion measurements.

pub mod genetic;
pub mod gradient;
pub mod signal;
pub mod snes;

pub use genetic::{genetic_band_attack, GeneticParams};
pub use gradient::{
    equate_attack, feature_match, fgsm, joint_surreptitious, pgd, spectrogram_fgsm,
    spectrogram_pgd, symmetrize,
};
pub use signal::{fft_threshold, sine_insertion};
pub use snes::{snes, snes_joint, targeted_snes, SnesJointOutcome, TargetGoal, TargetedOutcome};

use alloc::string::String;

use crate::dsp::{Spectrogram, Waveform};
use crate::error::{CoreError, Result};
use crate::metrics::{self, Stage};
use crate::pipeline::PipelineModel;

/// Shared attack knobs. `epsilon` bounds the infinity-norm at the insertion
/// stage; `lambda` weights the surreptitious objective in joint attacks.
#[derive(Debug, Clone)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub iterations: usize,
    /// Per-iteration step; defaults to `2.5 * epsilon / iterations`.
    pub step_size: Option<f64>,
    pub targeted: Option<usize>,
    pub lambda: f64,
    pub tap: Option<String>,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 1e-3,
            iterations: 100,
            step_size: None,
            targeted: None,
            lambda: 1.0,
            tap: None,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon < 0.0 {
            return Err(CoreError::InvalidArgument("epsilon must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(CoreError::InvalidArgument("lambda must be in [0, 1]".into()));
        }
        if self.iterations > 1 && self.step() <= 0.0 && self.epsilon > 0.0 {
            return Err(CoreError::InvalidArgument(
                "step size must be > 0 for iterative attacks".into(),
            ));
        }
        Ok(())
    }

    /// Effective per-iteration step size.
    pub fn step(&self) -> f64 {
        match self.step_size {
            Some(s) => s,
            None => {
                if self.iterations <= 1 {
                    self.epsilon
                } else {
                    2.5 * self.epsilon / self.iterations as f64
                }
            }
        }
    }
}

/// The adversarial object an attack emits.
#[derive(Debug, Clone)]
pub enum AttackOutput {
    Audio(Waveform),
    Spectrogram(Spectrogram),
}

impl AttackOutput {
    pub fn audio(&self) -> Option<&Waveform> {
        match self {
            AttackOutput::Audio(w) => Some(w),
            _ => None,
        }
    }

    pub fn spectrogram(&self) -> Option<&Spectrogram> {
        match self {
            AttackOutput::Spectrogram(s) => Some(s),
            _ => None,
        }
    }
}

/// Adversarial sample plus stage-wise measurements.
///
/// For stage-3 insertions, `distortion_stage3` is the audio infinity norm and
/// `distortion_stage1` the infinity norm on the pipeline's stage-1 feature
/// grid (both signals pushed through the pipeline). For stage-1 insertions
/// there is no adversarial audio, so `distortion_stage3` is `None` and
/// `distortion_stage1` is measured directly on the raw spectrogram pair.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub output: AttackOutput,
    pub success: bool,
    pub clean_label: usize,
    pub adv_label: usize,
    pub distortion_stage3: Option<f64>,
    pub distortion_stage1: f64,
    pub iterations_run: usize,
}

/// Success = argmax label change (untargeted) or target hit (targeted).
pub(crate) fn attack_success(clean_label: usize, adv_label: usize, targeted: Option<usize>) -> bool {
    match targeted {
        Some(t) => adv_label == t,
        None => adv_label != clean_label,
    }
}

/// Assemble the result of a stage-3 (audio) attack: labels, success and both
/// stage distortions measured through `model`.
pub fn finish_audio(
    model: &PipelineModel,
    clean: &Waveform,
    adv: Waveform,
    cfg: &AttackConfig,
    iterations_run: usize,
) -> Result<AttackResult> {
    let clean_label = model.predict_label(clean)?;
    let adv_label = model.predict_label(&adv)?;
    let distortion_stage3 = Some(metrics::distortion(clean, &adv, Stage::Stage3, model)?);
    let distortion_stage1 = metrics::distortion(clean, &adv, Stage::Stage1, model)?;
    Ok(AttackResult {
        success: attack_success(clean_label, adv_label, cfg.targeted),
        output: AttackOutput::Audio(adv),
        clean_label,
        adv_label,
        distortion_stage3,
        distortion_stage1,
        iterations_run,
    })
}

/// Assemble the result of a stage-1 (spectrogram) attack.
pub fn finish_spectrogram(
    model: &PipelineModel,
    clean: &Spectrogram,
    adv: Spectrogram,
    cfg: &AttackConfig,
    iterations_run: usize,
) -> Result<AttackResult> {
    let clean_logits = model.predict_logits_from_spectrogram(clean)?;
    let adv_logits = model.predict_logits_from_spectrogram(&adv)?;
    let clean_label = crate::kernels::argmax(&clean_logits);
    let adv_label = crate::kernels::argmax(&adv_logits);
    let distortion_stage1 = metrics::linf(&clean.power, &adv.power)?;
    Ok(AttackResult {
        success: attack_success(clean_label, adv_label, cfg.targeted),
        output: AttackOutput::Spectrogram(adv),
        clean_label,
        adv_label,
        distortion_stage3: None,
        distortion_stage1,
        iterations_run,
    })
}
