//! Surrogate transfer attacks: craft per context window on a differentiable
//! end-to-end surrogate, concatenate the attacked windows, serialize through
//! the 16-bit WAV grid, and evaluate on the black-box target pipeline.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dsp::{lpcm_quantize, Waveform};
use crate::error::{CoreError, Result};
use crate::kernels;
use crate::pipeline::{PipelineKind, PipelineModel};
use crate::tape::Tape;
use crate::tensor::Tensor;

use super::gradient::{ascend_audio, audio_loss_grad, project_ball_and_range, Objective, SigmaRef};
use super::{finish_audio, AttackConfig, AttackResult};

fn check_surrogate(surrogate: &PipelineModel, target: &PipelineModel) -> Result<()> {
    if surrogate.kind != PipelineKind::Dbp {
        return Err(CoreError::InvalidInput(
            "the transfer surrogate must be an end-to-end context-window pipeline".into(),
        ));
    }
    if surrogate.label_count != target.label_count {
        return Err(CoreError::InvalidInput(alloc::format!(
            "label space mismatch: surrogate {} vs target {}",
            surrogate.label_count,
            target.label_count
        )));
    }
    Ok(())
}

fn window_label(surrogate: &PipelineModel, window: &[f64], sample_rate: u32) -> Result<usize> {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::from_vec(window.to_vec()));
    let fwd = surrogate.forward_audio_taped(&mut tape, x, false)?;
    let _ = sample_rate;
    Ok(kernels::argmax(tape.value(fwd.logits).data()))
}

fn window_tap_feats(
    surrogate: &PipelineModel,
    window: &[f64],
    tap: &'static str,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::from_vec(window.to_vec()));
    let fwd = surrogate.forward_audio_taped(&mut tape, x, false)?;
    let v = fwd.tap(tap)?;
    Ok(tape.value(v).clone())
}

/// Attack each non-overlapping context window on the surrogate, concatenate,
/// optionally round-trip through 16-bit LPCM, and measure on the target.
pub fn snes(
    surrogate: &PipelineModel,
    target: &PipelineModel,
    x: &Waveform,
    cfg: &AttackConfig,
    wav_round_trip: bool,
) -> Result<AttackResult> {
    cfg.validate()?;
    check_surrogate(surrogate, target)?;
    let (adv, iters) = craft_windows(surrogate, x, cfg, None)?;
    let adv = maybe_round_trip(adv, wav_round_trip)?;
    finish_audio(target, x, adv, cfg, iters)
}

/// SNES plus a surreptitious term on a surrogate internal tap.
pub struct SnesJointOutcome {
    pub result: AttackResult,
    /// Mean L2 perturbation of the surrogate tap across windows.
    pub surrogate_tap_delta: f64,
}

/// Joint transfer attack: the surreptitious objective runs on the output of
/// an internal surrogate layer (the spectrogram is not available end to end).
pub fn snes_joint(
    surrogate: &PipelineModel,
    target: &PipelineModel,
    x: &Waveform,
    cfg: &AttackConfig,
    wav_round_trip: bool,
) -> Result<SnesJointOutcome> {
    cfg.validate()?;
    check_surrogate(surrogate, target)?;
    let tap_name = cfg.tap.as_deref().unwrap_or("cnn");
    let resolved = surrogate.resolve_tap(tap_name);
    let tap: &'static str = surrogate
        .tap_names()
        .into_iter()
        .find(|n| *n == resolved)
        .ok_or_else(|| CoreError::UnknownTap(alloc::string::String::from(tap_name)))?;
    let (adv, iters) = craft_windows(surrogate, x, cfg, Some(tap))?;
    let adv = maybe_round_trip(adv, wav_round_trip)?;

    // Perturbation of the surrogate tap, averaged over windows.
    let wl = surrogate.window_len;
    let mut delta_sum = 0.0;
    let mut count = 0usize;
    for w in 0..x.len() / wl {
        let clean_feats = window_tap_feats(surrogate, &x.samples[w * wl..(w + 1) * wl], tap)?;
        let adv_feats = window_tap_feats(surrogate, &adv.samples[w * wl..(w + 1) * wl], tap)?;
        let d: f64 = clean_feats
            .data()
            .iter()
            .zip(adv_feats.data().iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        delta_sum += d.sqrt();
        count += 1;
    }
    let result = finish_audio(target, x, adv, cfg, iters)?;
    Ok(SnesJointOutcome { result, surrogate_tap_delta: delta_sum / count.max(1) as f64 })
}

fn craft_windows(
    surrogate: &PipelineModel,
    x: &Waveform,
    cfg: &AttackConfig,
    joint_tap: Option<&'static str>,
) -> Result<(Waveform, usize)> {
    let wl = surrogate.window_len;
    if x.len() < wl {
        return Err(CoreError::InvalidInput(alloc::format!(
            "waveform of {} samples is shorter than one {wl}-sample context window",
            x.len()
        )));
    }
    let mut adv = x.samples.clone();
    let mut iters = 0;
    for w in 0..x.len() / wl {
        let window = &x.samples[w * wl..(w + 1) * wl];
        let obj = match joint_tap {
            None => match cfg.targeted {
                Some(t) => Objective::Class { label: t, targeted: true },
                None => Objective::Class {
                    label: window_label(surrogate, window, x.sample_rate)?,
                    targeted: false,
                },
            },
            Some(tap) => {
                let feats = window_tap_feats(surrogate, window, tap)?;
                let (label, targeted) = match cfg.targeted {
                    Some(t) => (t, true),
                    None => (window_label(surrogate, window, x.sample_rate)?, false),
                };
                Objective::Joint {
                    label,
                    targeted,
                    lambda: cfg.lambda,
                    sigma: SigmaRef::Tap { tap, feats },
                }
            }
        };
        let (adv_win, it) = ascend_audio(surrogate, window, cfg, &obj)?;
        adv[w * wl..(w + 1) * wl].copy_from_slice(&adv_win);
        iters = iters.max(it);
    }
    Ok((Waveform { samples: adv, sample_rate: x.sample_rate }, iters))
}

fn maybe_round_trip(adv: Waveform, enabled: bool) -> Result<Waveform> {
    if !enabled {
        return Ok(adv);
    }
    let (q, _) = lpcm_quantize(&adv, 16)?;
    Ok(q)
}

// ---- targeted ensemble variant -----------------------------------------

/// What the targeted attack tries to reach on the target pipeline.
#[derive(Debug, Clone)]
pub enum TargetGoal {
    Single(usize),
    /// Hit any member of the set.
    Set(Vec<usize>),
}

pub struct TargetedOutcome {
    pub result: AttackResult,
    /// Whether the target pipeline's prediction landed in the goal.
    pub hit: bool,
}

/// Ensemble-based targeted transfer with Adam ascent per context window.
pub fn targeted_snes(
    ensemble: &[&PipelineModel],
    target: &PipelineModel,
    x: &Waveform,
    goal: &TargetGoal,
    cfg: &AttackConfig,
) -> Result<TargetedOutcome> {
    cfg.validate()?;
    if ensemble.is_empty() {
        return Err(CoreError::InvalidInput("surrogate ensemble must not be empty".into()));
    }
    for member in ensemble {
        check_surrogate(member, target)?;
        if member.window_len != ensemble[0].window_len {
            return Err(CoreError::InvalidInput("ensemble window lengths differ".into()));
        }
    }
    let labels = match goal {
        TargetGoal::Single(t) => vec![*t],
        TargetGoal::Set(s) => s.clone(),
    };
    if labels.is_empty() || labels.iter().any(|&t| t >= target.label_count) {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "goal labels {labels:?} invalid for {} classes",
            target.label_count
        )));
    }
    let clean_label = target.predict_label(x)?;
    if let TargetGoal::Single(t) = goal {
        if *t == clean_label {
            return Err(CoreError::InvalidArgument(
                "target label equals the clean prediction".into(),
            ));
        }
    }

    let wl = ensemble[0].window_len;
    if x.len() < wl {
        return Err(CoreError::InvalidInput(alloc::format!(
            "waveform of {} samples is shorter than one {wl}-sample context window",
            x.len()
        )));
    }
    let mut adv = x.samples.clone();
    for w in 0..x.len() / wl {
        let window = x.samples[w * wl..(w + 1) * wl].to_vec();
        let crafted = adam_ascend_window(ensemble, &window, &labels, cfg)?;
        adv[w * wl..(w + 1) * wl].copy_from_slice(&crafted);
    }
    let adv = maybe_round_trip(Waveform { samples: adv, sample_rate: x.sample_rate }, true)?;

    let mut result = finish_audio(target, x, adv, cfg, cfg.iterations)?;
    let hit = labels.contains(&result.adv_label);
    result.success = hit;
    Ok(TargetedOutcome { result, hit })
}

/// Loss to descend: summed ensemble cross-entropy toward the goal labels.
fn ensemble_goal_grad(
    ensemble: &[&PipelineModel],
    window: &[f64],
    labels: &[usize],
) -> Result<Vec<f64>> {
    let mut total = vec![0.0; window.len()];
    for member in ensemble {
        let grad = if labels.len() == 1 {
            let (_, g) = audio_loss_grad(
                member,
                window,
                &Objective::Class { label: labels[0], targeted: true },
            )?;
            g
        } else {
            let mut tape = Tape::new();
            let audio = tape.leaf(Tensor::from_vec(window.to_vec()).with_grad());
            let fwd = member.forward_audio_taped(&mut tape, audio, false)?;
            let loss = tape.cross_entropy_target_set(fwd.logits, labels.to_vec())?;
            let neg = tape.scale(loss, -1.0);
            let grads = tape.backward(neg)?;
            grads.wrt(audio).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; window.len()])
        };
        for (t, g) in total.iter_mut().zip(grad.iter()) {
            *t += g;
        }
    }
    Ok(total)
}

/// Adam ascent on the (negated) goal loss over one context window.
fn adam_ascend_window(
    ensemble: &[&PipelineModel],
    window: &[f64],
    labels: &[usize],
    cfg: &AttackConfig,
) -> Result<Vec<f64>> {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let lr = cfg.step_size.unwrap_or(cfg.epsilon / 10.0);
    let mut adv = window.to_vec();
    let mut m = vec![0.0; window.len()];
    let mut v = vec![0.0; window.len()];
    for t in 1..=cfg.iterations {
        let grad = ensemble_goal_grad(ensemble, &adv, labels)?;
        if grad.iter().all(|&g| g == 0.0) {
            break;
        }
        let c1 = 1.0 - B1.powi(t as i32);
        let c2 = 1.0 - B2.powi(t as i32);
        for i in 0..adv.len() {
            m[i] = B1 * m[i] + (1.0 - B1) * grad[i];
            v[i] = B2 * v[i] + (1.0 - B2) * grad[i] * grad[i];
            adv[i] += lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
        }
        project_ball_and_range(&mut adv, window, cfg.epsilon, -1.0, 1.0);
    }
    Ok(adv)
}
