//! Training, distillation and tap contracts on a small corpus. A shared
//! fixture keeps the cost to one training run per pipeline kind.

use std::sync::OnceLock;

use surreptix_core::pipeline::*;
use surreptix_core::synth::{generate_corpus, Dataset};
use surreptix_core::tape::Tape;
use surreptix_core::tensor::Tensor;

fn small_corpus() -> &'static Dataset {
    static DATA: OnceLock<Dataset> = OnceLock::new();
    DATA.get_or_init(|| generate_corpus(4, 20, 1.0, 77).unwrap())
}

fn quick_cfg(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig { epochs, seed, ..TrainConfig::default() }
}

fn trained(kind: PipelineKind) -> &'static (PipelineModel, TrainReport) {
    static SBP: OnceLock<(PipelineModel, TrainReport)> = OnceLock::new();
    static ABP: OnceLock<(PipelineModel, TrainReport)> = OnceLock::new();
    static DBP: OnceLock<(PipelineModel, TrainReport)> = OnceLock::new();
    let slot = match kind {
        PipelineKind::Sbp => &SBP,
        PipelineKind::Abp => &ABP,
        PipelineKind::Dbp => &DBP,
    };
    slot.get_or_init(|| {
        let data = small_corpus();
        let mut model = PipelineModel::build(kind, data.n_speakers, 5).unwrap();
        let rep = train(&mut model, data, &quick_cfg(5, 6)).unwrap();
        (model, rep)
    })
}

#[test]
fn each_pipeline_learns_the_small_corpus() {
    for kind in [PipelineKind::Sbp, PipelineKind::Abp, PipelineKind::Dbp] {
        let (_, rep) = trained(kind);
        assert!(
            rep.test_accuracy >= 0.9,
            "{kind:?} reached only {:.3} test accuracy",
            rep.test_accuracy
        );
    }
}

#[test]
fn single_speaker_training_is_perfect() {
    // degenerate dataset: every label identical
    let mut data = small_corpus().clone();
    for s in data.samples.iter_mut() {
        s.1 = 0;
    }
    let mut model = PipelineModel::build(PipelineKind::Abp, 4, 9).unwrap();
    let rep = train(&mut model, &data, &quick_cfg(9, 2)).unwrap();
    assert_eq!(rep.train_accuracy, 1.0);
    assert_eq!(rep.test_accuracy, 1.0);
}

#[test]
fn retraining_with_same_seed_is_bit_identical() {
    let data = small_corpus();
    let run = || {
        let mut model = PipelineModel::build(PipelineKind::Dbp, data.n_speakers, 31).unwrap();
        train(&mut model, data, &quick_cfg(31, 2)).unwrap();
        model.param_blocks()
    };
    let a = run();
    let b = run();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b.iter()) {
        assert!(x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn empty_dataset_is_an_error() {
    let mut data = small_corpus().clone();
    data.train.clear();
    let mut model = PipelineModel::build(PipelineKind::Abp, 4, 1).unwrap();
    assert!(train(&mut model, &data, &quick_cfg(1, 1)).is_err());
}

#[test]
fn out_of_range_labels_are_an_error() {
    let data = small_corpus();
    let mut model = PipelineModel::build(PipelineKind::Abp, 2, 1).unwrap();
    assert!(train(&mut model, data, &quick_cfg(1, 1)).is_err());
}

#[test]
fn sinc_constraints_hold_after_every_epoch() {
    let data = small_corpus();
    let mut model = PipelineModel::build(PipelineKind::Dbp, data.n_speakers, 13).unwrap();
    for epoch_seed in 0..3 {
        train(&mut model, data, &quick_cfg(13 + epoch_seed, 1)).unwrap();
        let cutoffs = model.sinc_cutoffs_hz().unwrap();
        for (lo, hi) in cutoffs {
            assert!(0.0 < lo && lo < hi && hi < 8000.0, "cutoffs ({lo}, {hi}) out of order");
        }
    }
}

#[test]
fn distillation_weight_zero_equals_hard_training() {
    let data = small_corpus();
    let (teacher, _) = trained(PipelineKind::Dbp);
    let dcfg = DistillConfig { temperature: 2.0, weight: 0.0 };
    let mut student_a = PipelineModel::build(PipelineKind::Dbp, data.n_speakers, 55).unwrap();
    let ra = distill(teacher, &mut student_a, &dcfg, &quick_cfg(55, 2), data).unwrap();
    let mut student_b = PipelineModel::build(PipelineKind::Dbp, data.n_speakers, 55).unwrap();
    let rb = train(&mut student_b, data, &quick_cfg(55, 2)).unwrap();
    assert!((ra.final_loss - rb.final_loss).abs() <= 1e-12);
    let (pa, pb) = (student_a.param_blocks(), student_b.param_blocks());
    for (x, y) in pa.iter().zip(pb.iter()) {
        for (p, q) in x.iter().zip(y.iter()) {
            assert!((p - q).abs() <= 1e-12);
        }
    }
}

#[test]
fn distilled_student_agrees_with_teacher() {
    let data = small_corpus();
    let (teacher, _) = trained(PipelineKind::Dbp);
    let dcfg = DistillConfig { temperature: 1.0, weight: 1.0 };
    let mut student = PipelineModel::build(PipelineKind::Dbp, data.n_speakers, 66).unwrap();
    distill(teacher, &mut student, &dcfg, &quick_cfg(66, 6), data).unwrap();
    let agree = agreement(teacher, &student, data, &data.test).unwrap();
    assert!(agree >= 0.95, "teacher/student agreement {agree:.3}");
}

#[test]
fn distillation_rejects_label_mismatch() {
    let data = small_corpus();
    let teacher = PipelineModel::build(PipelineKind::Dbp, 7, 1).unwrap();
    let mut student = PipelineModel::build(PipelineKind::Dbp, 4, 2).unwrap();
    let dcfg = DistillConfig { temperature: 1.0, weight: 0.5 };
    assert!(distill(&teacher, &mut student, &dcfg, &quick_cfg(2, 1), data).is_err());
}

#[test]
fn stage_composability_forward_equals_stages_then_classifier() {
    // model forward == classifier(stages(x)) exactly: compare the audio path
    // against the spectrogram-insertion path fed with the model's own stage-1
    // output.
    let (model, _) = trained(PipelineKind::Sbp);
    let data = small_corpus();
    let w = &data.samples[data.test[0]].0;
    let via_audio = model.predict_logits(w).unwrap();
    let s = model.raw_spectrogram(w).unwrap();
    let via_stage1 = model.predict_logits_from_spectrogram(&s).unwrap();
    for (a, b) in via_audio.iter().zip(via_stage1.iter()) {
        assert!(a.to_bits() == b.to_bits(), "{a} vs {b}");
    }
}

#[test]
fn end_to_end_gradients_pass_spot_finite_differences() {
    let data = small_corpus();
    for kind in [PipelineKind::Sbp, PipelineKind::Abp, PipelineKind::Dbp] {
        let (model, _) = trained(kind);
        let full = &data.samples[data.test[1]].0;
        let samples: Vec<f64> = match kind {
            PipelineKind::Dbp => full.samples[..model.window_len].to_vec(),
            _ => full.samples.clone(),
        };
        let label = data.samples[data.test[1]].1;

        let loss_of = |vals: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::from_vec(vals.to_vec()));
            let fwd = model.forward_audio_taped(&mut tape, x, false).unwrap();
            let l = tape.cross_entropy_softmax(fwd.logits, label).unwrap();
            tape.value(l).item()
        };
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(samples.clone()).with_grad());
        let fwd = model.forward_audio_taped(&mut tape, x, false).unwrap();
        let l = tape.cross_entropy_softmax(fwd.logits, label).unwrap();
        let grads = tape.backward(l).unwrap();
        let g = grads.wrt(x).unwrap();

        // Probe coordinates where the loss is locally smooth. The loss is
        // locally quadratic in one audio sample, so central differences at
        // two step sizes agree unless the window straddles a relu/pool kink
        // (where no derivative exists to compare against).
        let central = |at: usize, h: f64| -> f64 {
            let mut plus = samples.clone();
            plus[at] += h;
            let mut minus = samples.clone();
            minus[at] -= h;
            (loss_of(&plus) - loss_of(&minus)) / (2.0 * h)
        };
        let h = 1e-4;
        let mut r = surreptix_core::rng::rng(kind as u64 + 100);
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 5 && attempts < 60 {
            attempts += 1;
            let at =
                (surreptix_core::rng::uniform(&mut r, 0.0, samples.len() as f64) as usize)
                    .min(samples.len() - 1);
            let fd_wide = central(at, h);
            let fd = central(at, h / 2.0);
            if (fd_wide - fd).abs() > 1e-3 * fd_wide.abs().max(fd.abs()).max(1e-8) {
                continue; // kink in the step window
            }
            let denom = g[at].abs().max(fd.abs()).max(1e-6);
            assert!(
                (g[at] - fd).abs() / denom <= 1e-3 || (g[at] - fd).abs() <= 1e-7,
                "{kind:?} coord {at}: tape {} vs fd {fd}",
                g[at]
            );
            checked += 1;
        }
        assert!(checked >= 5, "{kind:?}: found only {checked} smooth probe coordinates");
    }
}

#[test]
fn differentiable_mfcc_chain_matches_plain_routine() {
    let data = small_corpus();
    let w = &data.samples[0].0;
    let params = surreptix_core::dsp::StftParams::default_16k();
    let plain_spec = surreptix_core::dsp::stft(w, &params).unwrap();
    let plain = surreptix_core::dsp::mfcc(&plain_spec, 26, 13).unwrap();
    let (_, plain_mfcc) = plain.mfcc.unwrap();

    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::from_vec(w.samples.clone()));
    let frames = tape.frame_split(x, params.win_len, params.hop).unwrap();
    let window = tape.constant(Tensor::from_vec(surreptix_core::dsp::hamming(params.win_len)));
    let windowed = tape.window_apply(frames, window).unwrap();
    let power = tape.dft_power(windowed, params.n_fft).unwrap();
    let bank = surreptix_core::dsp::mel_filterbank(params.n_fft, 26, params.sample_rate).unwrap();
    let bank = tape.constant(Tensor::new(vec![26, 257], bank).unwrap());
    let mel = tape.mel_project(power, bank).unwrap();
    let logm = tape.log_floor(mel, surreptix_core::dsp::mel::LOG_FLOOR);
    let coeffs = tape.dct2(logm, 13).unwrap();
    let taped = tape.value(coeffs).data();

    assert_eq!(taped.len(), plain_mfcc.len());
    for (a, b) in taped.iter().zip(plain_mfcc.iter()) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
    }
}
