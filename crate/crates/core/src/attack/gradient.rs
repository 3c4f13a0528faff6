//! White-box gradient attacks: FGSM and PGD at stage 3 (audio) and stage 1
//! (spectrogram), the feature-matching attack, the joint surreptitious
//! objective, and the symmetry-preserving adaptive variant.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dsp::{Spectrogram, Waveform};
use crate::error::{CoreError, Result};
use crate::pipeline::PipelineModel;
use crate::tape::Tape;
use crate::tensor::Tensor;

use super::{finish_audio, finish_spectrogram, AttackConfig, AttackResult};

/// What the surreptitious term of a joint objective keeps close to clean.
pub(crate) enum SigmaRef {
    /// The pipeline's normalized stage-1 spectrogram of the clean signal.
    NormalizedStage1(Tensor),
    /// A named internal tap's activation on the clean signal.
    Tap { tap: &'static str, feats: Tensor },
}

pub(crate) enum Objective {
    /// Cross-entropy against a label: ascend when untargeted, descend onto
    /// the target otherwise.
    Class { label: usize, targeted: bool },
    /// Descend the L2 distance between a tap's features and the guide's.
    Feature { tap: &'static str, guide: Tensor },
    /// Blend `lambda * attack - (1 - lambda) * ||sigma(x') - sigma(x)||_2`.
    Joint { label: usize, targeted: bool, lambda: f64, sigma: SigmaRef },
}

/// Loss (to maximize) and its ascent gradient with respect to the audio
/// samples.
///
/// Joint objectives mix the two terms after normalizing each gradient to
/// unit L2: the clean-point cross-entropy gradient of a confident model is
/// orders of magnitude smaller than the spectral-distance gradient, so
/// raw-scale mixing degenerates to whichever term happens to be larger.
/// Normalization keeps `lambda` a meaningful balance across the whole
/// trajectory and is sign-preserving, so `lambda = 1` steps exactly like the
/// plain attack.
pub(crate) fn audio_loss_grad(
    model: &PipelineModel,
    samples: &[f64],
    obj: &Objective,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let audio = tape.leaf(Tensor::from_vec(samples.to_vec()).with_grad());
    let fwd = model.forward_audio_taped(&mut tape, audio, false)?;
    let grad_wrt_audio = |tape: &Tape, out| -> Result<Vec<f64>> {
        let grads = tape.backward(out)?;
        Ok(grads
            .wrt(audio)
            .map(|g| g.to_vec())
            .unwrap_or_else(|| alloc::vec![0.0; samples.len()]))
    };
    match obj {
        Objective::Class { label, targeted } => {
            let ce = tape.cross_entropy_softmax(fwd.logits, *label)?;
            let loss = if *targeted { tape.scale(ce, -1.0) } else { ce };
            let value = tape.value(loss).item();
            let g = grad_wrt_audio(&tape, loss)?;
            Ok((value, g))
        }
        Objective::Feature { tap, guide } => {
            let tapped = fwd.tap(tap)?;
            let gv = tape.constant(guide.clone());
            let diff = tape.sub(tapped, gv)?;
            let dist = tape.l2_norm(diff);
            let loss = tape.scale(dist, -1.0);
            let value = tape.value(loss).item();
            let g = grad_wrt_audio(&tape, loss)?;
            Ok((value, g))
        }
        Objective::Joint { label, targeted, lambda, sigma } => {
            let ce = tape.cross_entropy_softmax(fwd.logits, *label)?;
            let attack = if *targeted { tape.scale(ce, -1.0) } else { ce };
            let dist = match sigma {
                SigmaRef::NormalizedStage1(clean) => {
                    let raw = fwd.tap("stage1")?;
                    let normed = model.normalize_stage1_taped(&mut tape, raw)?;
                    let cv = tape.constant(clean.clone());
                    let diff = tape.sub(normed, cv)?;
                    tape.l2_norm(diff)
                }
                SigmaRef::Tap { tap, feats } => {
                    let tapped = fwd.tap(tap)?;
                    let cv = tape.constant(feats.clone());
                    let diff = tape.sub(tapped, cv)?;
                    tape.l2_norm(diff)
                }
            };
            let value = *lambda * tape.value(attack).item() - (1.0 - *lambda) * tape.value(dist).item();
            let g_attack = grad_wrt_audio(&tape, attack)?;
            let g_dist = grad_wrt_audio(&tape, dist)?;
            let mut g = alloc::vec![0.0; samples.len()];
            let na = l2(&g_attack);
            let nd = l2(&g_dist);
            for i in 0..g.len() {
                let a = if na > 1e-300 { g_attack[i] / na } else { 0.0 };
                let d = if nd > 1e-300 { g_dist[i] / nd } else { 0.0 };
                g[i] = *lambda * a - (1.0 - *lambda) * d;
            }
            Ok((value, g))
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sign_step(x: &mut [f64], grad: &[f64], step: f64) {
    for (v, &g) in x.iter_mut().zip(grad.iter()) {
        if g > 0.0 {
            *v += step;
        } else if g < 0.0 {
            *v -= step;
        }
    }
}

pub(crate) fn project_ball_and_range(x: &mut [f64], origin: &[f64], eps: f64, lo: f64, hi: f64) {
    for (v, &o) in x.iter_mut().zip(origin.iter()) {
        let d = (*v - o).clamp(-eps, eps);
        *v = (o + d).clamp(lo, hi);
    }
}

/// Projected sign ascent over raw samples. Returns the adversarial samples
/// and the number of iterations actually run (0 when the very first gradient
/// vanished).
pub(crate) fn ascend_audio(
    model: &PipelineModel,
    origin: &[f64],
    cfg: &AttackConfig,
    obj: &Objective,
) -> Result<(Vec<f64>, usize)> {
    let step = cfg.step();
    let mut adv = origin.to_vec();
    let mut iterations_run = 0;
    for it in 0..cfg.iterations {
        let (_, grad) = audio_loss_grad(model, &adv, obj)?;
        if grad.iter().all(|&g| g == 0.0) {
            break;
        }
        sign_step(&mut adv, &grad, step);
        project_ball_and_range(&mut adv, origin, cfg.epsilon, -1.0, 1.0);
        iterations_run = it + 1;
    }
    Ok((adv, iterations_run))
}

/// Projected gradient ascent on the audio under an infinity-ball.
fn run_audio_attack(
    model: &PipelineModel,
    x: &Waveform,
    cfg: &AttackConfig,
    obj: Objective,
) -> Result<AttackResult> {
    cfg.validate()?;
    let (adv, iterations_run) = ascend_audio(model, &x.samples, cfg, &obj)?;
    let adv = Waveform { samples: adv, sample_rate: x.sample_rate };
    finish_audio(model, x, adv, cfg, iterations_run)
}

fn class_objective(model: &PipelineModel, x: &Waveform, cfg: &AttackConfig) -> Result<Objective> {
    Ok(match cfg.targeted {
        Some(t) => {
            if t >= model.label_count {
                return Err(CoreError::InvalidArgument(alloc::format!(
                    "target label {t} out of range for {} classes",
                    model.label_count
                )));
            }
            Objective::Class { label: t, targeted: true }
        }
        None => Objective::Class { label: model.predict_label(x)?, targeted: false },
    })
}

/// Single-step sign attack at stage 3: `x + eps * sign(grad)`.
pub fn fgsm(model: &PipelineModel, x: &Waveform, cfg: &AttackConfig) -> Result<AttackResult> {
    let one = AttackConfig { iterations: 1, step_size: None, ..cfg.clone() };
    let obj = class_objective(model, x, &one)?;
    run_audio_attack(model, x, &one, obj)
}

/// Iterative projected sign ascent at stage 3. One iteration with
/// `step = epsilon` reproduces FGSM exactly.
pub fn pgd(model: &PipelineModel, x: &Waveform, cfg: &AttackConfig) -> Result<AttackResult> {
    let obj = class_objective(model, x, cfg)?;
    run_audio_attack(model, x, cfg, obj)
}

/// Feature-matching attack: pull a tap's activation toward the guide's under
/// an audio infinity budget. The guide must be at least as long as `x`;
/// longer guides are truncated.
pub fn feature_match(
    model: &PipelineModel,
    x: &Waveform,
    guide: &Waveform,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    let tap_name = cfg.tap.as_deref().unwrap_or("conv2");
    let tap: &'static str = resolve_static_tap(model, tap_name)?;
    if guide.len() < x.len() {
        return Err(CoreError::InvalidInput(alloc::format!(
            "guide ({} samples) is shorter than the input ({})",
            guide.len(),
            x.len()
        )));
    }
    let truncated = Waveform { samples: guide.samples[..x.len()].to_vec(), sample_rate: guide.sample_rate };
    let mut tape = Tape::new();
    let gv = tape.leaf(Tensor::from_vec(truncated.samples.clone()));
    let fwd = model.forward_audio_taped(&mut tape, gv, false)?;
    let tap_var = fwd.tap(tap)?;
    let guide_feats = tape.value(tap_var).clone();
    run_audio_attack(model, x, cfg, Objective::Feature { tap, guide: guide_feats })
}

fn resolve_static_tap(model: &PipelineModel, name: &str) -> Result<&'static str> {
    let resolved = model.resolve_tap(name);
    model
        .tap_names()
        .into_iter()
        .find(|n| *n == resolved)
        .ok_or_else(|| CoreError::UnknownTap(alloc::string::String::from(name)))
}

/// Joint optimization of the attack objective and the spectral
/// surreptitious objective at stage 3. `lambda = 1` reduces to plain PGD;
/// `lambda = 0` degenerates to the pure surreptitious objective, whose
/// optimum is `delta = 0`.
pub fn joint_surreptitious(
    model: &PipelineModel,
    x: &Waveform,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    let (label, targeted) = match cfg.targeted {
        Some(t) => (t, true),
        None => (model.predict_label(x)?, false),
    };
    let feats = model.stage1_features(x)?;
    let frames = feats.len() / model.stft.n_fft;
    let clean_stage1 = Tensor::new(alloc::vec![frames, model.stft.n_fft], feats)?;
    run_audio_attack(
        model,
        x,
        cfg,
        Objective::Joint {
            label,
            targeted,
            lambda: cfg.lambda,
            sigma: SigmaRef::NormalizedStage1(clean_stage1),
        },
    )
}

// ---- stage-1 (spectrogram) attacks -------------------------------------

fn spectrogram_loss_grad(
    model: &PipelineModel,
    clean_label: usize,
    power: &Spectrogram,
    targeted: bool,
) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let sv = tape.leaf(
        Tensor::new(alloc::vec![power.frames, power.params.n_fft], power.power.clone())?
            .with_grad(),
    );
    let fwd = model.forward_spectrogram_taped(&mut tape, sv, false)?;
    let ce = tape.cross_entropy_softmax(fwd.logits, clean_label)?;
    let loss = if targeted { tape.scale(ce, -1.0) } else { ce };
    let grads = tape.backward(loss)?;
    Ok(grads
        .wrt(sv)
        .map(|g| g.to_vec())
        .unwrap_or_else(|| alloc::vec![0.0; power.power.len()]))
}

/// Average every mirrored bin pair so the grid satisfies the conjugate
/// symmetry a real signal would produce.
pub fn symmetrize(s: &mut Spectrogram) {
    let n = s.params.n_fft;
    for t in 0..s.frames {
        let frame = &mut s.power[t * n..(t + 1) * n];
        for k in 1..n / 2 {
            let m = 0.5 * (frame[k] + frame[n - k]);
            frame[k] = m;
            frame[n - k] = m;
        }
    }
}

fn run_spectrogram_attack(
    model: &PipelineModel,
    s: &Spectrogram,
    cfg: &AttackConfig,
    equate: bool,
) -> Result<AttackResult> {
    cfg.validate()?;
    let step = cfg.step();
    let (label, targeted) = match cfg.targeted {
        Some(t) => (t, true),
        None => {
            let logits = model.predict_logits_from_spectrogram(s)?;
            (crate::kernels::argmax(&logits), false)
        }
    };
    let mut adv = s.clone();
    let mut iterations_run = 0;
    for it in 0..cfg.iterations {
        let grad = spectrogram_loss_grad(model, label, &adv, targeted)?;
        if grad.iter().all(|&g| g == 0.0) {
            if it == 0 {
                return finish_spectrogram(model, s, s.clone(), cfg, 0);
            }
            break;
        }
        sign_step(&mut adv.power, &grad, step);
        project_ball_and_range(&mut adv.power, &s.power, cfg.epsilon, 0.0, f64::INFINITY);
        if equate {
            symmetrize(&mut adv);
        }
        iterations_run = it + 1;
    }
    finish_spectrogram(model, s, adv, cfg, iterations_run)
}

/// Single-step sign attack directly on the stage-1 spectrogram.
pub fn spectrogram_fgsm(
    model: &PipelineModel,
    s: &Spectrogram,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    let one = AttackConfig { iterations: 1, step_size: None, ..cfg.clone() };
    run_spectrogram_attack(model, s, &one, false)
}

/// Iterative projected sign attack on the stage-1 spectrogram.
pub fn spectrogram_pgd(
    model: &PipelineModel,
    s: &Spectrogram,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    run_spectrogram_attack(model, s, cfg, false)
}

/// Adaptive stage-1 attack that re-imposes the mirrored-pair symmetry after
/// every step, so the result passes the conjugate-symmetry check by
/// construction. Symmetrization averages two in-budget perturbations, so the
/// budget is preserved.
pub fn equate_attack(
    model: &PipelineModel,
    s: &Spectrogram,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    run_spectrogram_attack(model, s, cfg, true)
}
