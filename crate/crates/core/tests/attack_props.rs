//! Attack contracts that hold regardless of training: budget respect, range
//! clipping, definitional equalities, reproducibility, symmetry behavior.

use surreptix_core::attack::*;
use surreptix_core::detect::{hermitian_check, HERMITIAN_TOL};
use surreptix_core::dsp::{stft, StftParams, Waveform, DEFAULT_SAMPLE_RATE};
use surreptix_core::metrics::linf;
use surreptix_core::pipeline::{PipelineKind, PipelineModel};
use surreptix_core::synth::SpeakerProfile;

fn sample_wave(seed: u64) -> Waveform {
    let profile = SpeakerProfile::derive(seed, (seed % 7) as usize, 8);
    let mut r = surreptix_core::rng::substream(seed, 1);
    Waveform::new(profile.utterance(16_000, &mut r), DEFAULT_SAMPLE_RATE).unwrap()
}

fn sbp(seed: u64) -> PipelineModel {
    PipelineModel::build(PipelineKind::Sbp, 10, seed).unwrap()
}

#[test]
fn fgsm_zero_epsilon_is_identity_and_unsuccessful() {
    let model = sbp(1);
    let x = sample_wave(3);
    let cfg = AttackConfig { epsilon: 0.0, seed: 5, ..Default::default() };
    let r = fgsm(&model, &x, &cfg).unwrap();
    assert!(!r.success);
    assert_eq!(r.output.audio().unwrap().samples, x.samples);
    assert_eq!(r.distortion_stage3, Some(0.0));
    assert_eq!(r.distortion_stage1, 0.0);
}

#[test]
fn pgd_one_iteration_with_full_step_equals_fgsm() {
    let model = sbp(2);
    let x = sample_wave(4);
    let eps = 2e-3;
    let f = fgsm(&model, &x, &AttackConfig { epsilon: eps, seed: 1, ..Default::default() })
        .unwrap();
    let p = pgd(
        &model,
        &x,
        &AttackConfig {
            epsilon: eps,
            iterations: 1,
            step_size: Some(eps),
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let (fa, pa) = (f.output.audio().unwrap(), p.output.audio().unwrap());
    assert!(fa.samples.iter().zip(pa.samples.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn gradient_attacks_respect_budget_and_range() {
    let model = sbp(3);
    for seed in 0..4u64 {
        let x = sample_wave(10 + seed);
        let eps = 5e-3;
        let cfg =
            AttackConfig { epsilon: eps, iterations: 12, seed, ..Default::default() };
        for r in [
            pgd(&model, &x, &cfg).unwrap(),
            joint_surreptitious(&model, &x, &AttackConfig { lambda: 0.3, ..cfg.clone() }).unwrap(),
        ] {
            let adv = r.output.audio().unwrap();
            let d = linf(&x.samples, &adv.samples).unwrap();
            assert!(d <= eps + 1e-9, "budget violated: {d} > {eps}");
            assert!(adv.samples.iter().all(|v| (-1.0..=1.0).contains(v)));
            assert_eq!(r.distortion_stage3, Some(d));
        }
    }
}

#[test]
fn joint_lambda_one_matches_plain_pgd_losses() {
    let model = sbp(4);
    let x = sample_wave(21);
    let cfg = AttackConfig { epsilon: 1e-3, iterations: 5, seed: 2, ..Default::default() };
    let plain = pgd(&model, &x, &cfg).unwrap();
    let joint =
        joint_surreptitious(&model, &x, &AttackConfig { lambda: 1.0, ..cfg.clone() }).unwrap();
    let (pa, ja) = (plain.output.audio().unwrap(), joint.output.audio().unwrap());
    let max_diff = pa
        .samples
        .iter()
        .zip(ja.samples.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(max_diff <= 1e-12, "trajectories diverged by {max_diff}");
}

#[test]
fn joint_lambda_zero_keeps_delta_zero() {
    // Pure surreptitious objective: the optimum is no perturbation, and
    // gradient ascent from delta = 0 stays there (zero gradient).
    let model = sbp(5);
    let x = sample_wave(22);
    let cfg = AttackConfig {
        epsilon: 1e-3,
        iterations: 3,
        lambda: 0.0,
        seed: 3,
        ..Default::default()
    };
    let r = joint_surreptitious(&model, &x, &cfg).unwrap();
    assert_eq!(r.output.audio().unwrap().samples, x.samples);
    assert!(!r.success);
}

#[test]
fn feature_match_with_self_guide_is_identity() {
    let model = sbp(6);
    let x = sample_wave(23);
    let cfg = AttackConfig {
        epsilon: 1e-3,
        iterations: 4,
        tap: Some("conv2".into()),
        seed: 4,
        ..Default::default()
    };
    let r = feature_match(&model, &x, &x, &cfg).unwrap();
    // loss is 0 at delta = 0, so the first gradient vanishes
    assert_eq!(r.output.audio().unwrap().samples, x.samples);
    assert_eq!(r.iterations_run, 0);
}

#[test]
fn feature_match_validates_tap_and_guide() {
    let model = sbp(7);
    let x = sample_wave(24);
    let cfg = AttackConfig { tap: Some("conv9".into()), ..Default::default() };
    assert!(feature_match(&model, &x, &x, &cfg).is_err());
    let short = Waveform::new(x.samples[..8000].to_vec(), DEFAULT_SAMPLE_RATE).unwrap();
    let cfg2 = AttackConfig { tap: Some("conv2".into()), ..Default::default() };
    assert!(feature_match(&model, &x, &short, &cfg2).is_err());
}

#[test]
fn stage1_attacks_break_symmetry_equate_preserves_it() {
    let model = sbp(8);
    let params = StftParams::default_16k();
    for seed in 0..6u64 {
        let x = sample_wave(30 + seed);
        let s = stft(&x, &params).unwrap();
        let cfg =
            AttackConfig { epsilon: 1e-3, iterations: 1, seed, ..Default::default() };
        let plain = spectrogram_fgsm(&model, &s, &cfg).unwrap();
        let hp = hermitian_check(plain.output.spectrogram().unwrap(), HERMITIAN_TOL).unwrap();
        assert!(hp.is_flagged(), "seed {seed}: plain stage-1 attack stayed symmetric");

        let eq = equate_attack(
            &model,
            &s,
            &AttackConfig { iterations: 10, ..cfg.clone() },
        )
        .unwrap();
        let he = hermitian_check(eq.output.spectrogram().unwrap(), HERMITIAN_TOL).unwrap();
        assert!(!he.is_flagged(), "seed {seed}: equate output flagged ({})", he.score);
        // budget respected on the raw spectrogram
        assert!(eq.distortion_stage1 <= 1e-3 + 1e-9);
        // power stays valid
        assert!(eq.output.spectrogram().unwrap().power.iter().all(|&p| p >= 0.0));
    }
}

#[test]
fn symmetrize_is_identity_on_symmetric_input() {
    let x = sample_wave(40);
    let mut s = stft(&x, &StftParams::default_16k()).unwrap();
    let before = s.power.clone();
    symmetrize(&mut s);
    let rel: f64 = s
        .power
        .iter()
        .zip(before.iter())
        .map(|(a, b)| (a - b).abs() / (b.abs() + 1e-12))
        .fold(0.0, f64::max);
    assert!(rel <= 1e-9, "symmetrize changed a symmetric spectrogram by {rel}");
}

#[test]
fn genetic_zero_iterations_is_identity() {
    let model = sbp(9);
    let x = sample_wave(41);
    let cfg = AttackConfig { epsilon: 0.1, iterations: 0, seed: 6, ..Default::default() };
    let r = genetic_band_attack(&model, &x, &cfg, (7000.0, 8000.0), &GeneticParams::default())
        .unwrap();
    assert_eq!(r.output.audio().unwrap().samples, x.samples);
}

#[test]
fn genetic_output_is_band_limited_and_budgeted() {
    let model = sbp(10);
    let x = sample_wave(42);
    let eps = 0.05;
    let cfg = AttackConfig { epsilon: eps, iterations: 3, seed: 7, ..Default::default() };
    let gp = GeneticParams { components: 32, ..GeneticParams::default() };
    let r = genetic_band_attack(&model, &x, &cfg, (7000.0, 8000.0), &gp).unwrap();
    let adv = r.output.audio().unwrap();
    let delta: Vec<f64> =
        adv.samples.iter().zip(x.samples.iter()).map(|(a, b)| a - b).collect();
    let dmax = delta.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    assert!(dmax <= eps + 1e-9);
    assert!(dmax > 0.0, "attack did nothing");
    // out-of-band energy of the injected perturbation, on the whole-signal grid
    let dw = Waveform::new(delta, DEFAULT_SAMPLE_RATE).unwrap();
    let in_band = surreptix_core::dsp::band_energy_fraction(&dw, 7000.0, 8000.0);
    assert!(1.0 - in_band <= 1e-6, "out-of-band fraction {}", 1.0 - in_band);
}

#[test]
fn attacks_are_reproducible_bitwise() {
    let model = sbp(11);
    let x = sample_wave(43);
    let cfg = AttackConfig { epsilon: 0.02, iterations: 2, seed: 123, ..Default::default() };
    let gp = GeneticParams { components: 16, ..GeneticParams::default() };
    let a = genetic_band_attack(&model, &x, &cfg, (7000.0, 8000.0), &gp).unwrap();
    let b = genetic_band_attack(&model, &x, &cfg, (7000.0, 8000.0), &gp).unwrap();
    let (aw, bw) = (a.output.audio().unwrap(), b.output.audio().unwrap());
    assert!(aw.samples.iter().zip(bw.samples.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    assert_eq!(a.success, b.success);

    let p1 = pgd(&model, &x, &cfg).unwrap();
    let p2 = pgd(&model, &x, &cfg).unwrap();
    let (pa, pb) = (p1.output.audio().unwrap(), p2.output.audio().unwrap());
    assert!(pa.samples.iter().zip(pb.samples.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn sine_insertion_amplitude_zero_is_identity() {
    let x = sample_wave(44);
    let out = sine_insertion(&x, &[440.0], 0.0).unwrap();
    assert_eq!(out.samples, x.samples);
}

#[test]
fn snes_respects_window_structure() {
    let surrogate = PipelineModel::build(PipelineKind::Dbp, 10, 12).unwrap();
    let target = sbp(13);
    let x = sample_wave(45);
    let eps = 1e-3;
    let cfg = AttackConfig { epsilon: eps, iterations: 1, seed: 8, ..Default::default() };
    let r = snes(&surrogate, &target, &x, &cfg, true).unwrap();
    let adv = r.output.audio().unwrap();
    // budget plus half a 16-bit quantization step from the WAV round trip
    let slack = eps + (2.0f64).powi(-15) + 1e-9;
    let d = linf(&x.samples, &adv.samples).unwrap();
    assert!(d <= slack, "{d} > {slack}");

    // epsilon 0 leaves the target prediction unchanged
    let r0 = snes(
        &surrogate,
        &target,
        &x,
        &AttackConfig { epsilon: 0.0, iterations: 1, seed: 8, ..Default::default() },
        true,
    )
    .unwrap();
    assert_eq!(r0.clean_label, r0.adv_label);
}

#[test]
fn snes_rejects_non_window_surrogate() {
    let not_dbp = sbp(14);
    let target = sbp(15);
    let x = sample_wave(46);
    assert!(snes(&not_dbp, &target, &x, &AttackConfig::default(), true).is_err());
}

#[test]
fn snes_joint_unknown_tap_is_an_error() {
    let surrogate = PipelineModel::build(PipelineKind::Dbp, 10, 16).unwrap();
    let target = sbp(17);
    let x = sample_wave(47);
    let cfg = AttackConfig { tap: Some("nope".into()), ..Default::default() };
    assert!(snes_joint(&surrogate, &target, &x, &cfg, true).is_err());
}

#[test]
fn snes_joint_lambda_one_matches_snes() {
    let surrogate = PipelineModel::build(PipelineKind::Dbp, 10, 18).unwrap();
    let target = sbp(19);
    let x = sample_wave(48);
    let cfg = AttackConfig {
        epsilon: 2e-3,
        iterations: 3,
        lambda: 1.0,
        tap: Some("cnn".into()),
        seed: 9,
        ..Default::default()
    };
    let a = snes(&surrogate, &target, &x, &cfg, false).unwrap();
    let b = snes_joint(&surrogate, &target, &x, &cfg, false).unwrap().result;
    let (aw, bw) = (a.output.audio().unwrap(), b.output.audio().unwrap());
    let max_diff = aw
        .samples
        .iter()
        .zip(bw.samples.iter())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    assert!(max_diff <= 1e-12, "lambda=1 joint diverged from snes by {max_diff}");
}

#[test]
fn targeted_snes_validates_goal() {
    let surrogate = PipelineModel::build(PipelineKind::Dbp, 10, 20).unwrap();
    let target = sbp(21);
    let x = sample_wave(49);
    let clean = target.predict_label(&x).unwrap();
    let cfg = AttackConfig { epsilon: 1e-3, iterations: 2, seed: 10, ..Default::default() };
    // targeting the clean prediction is rejected
    assert!(targeted_snes(&[&surrogate], &target, &x, &TargetGoal::Single(clean), &cfg).is_err());
    // empty ensemble is rejected
    assert!(targeted_snes(&[], &target, &x, &TargetGoal::Single((clean + 1) % 10), &cfg).is_err());
    // a valid goal runs and reports a hit flag consistent with the label
    let goal = TargetGoal::Single((clean + 1) % 10);
    let out = targeted_snes(&[&surrogate], &target, &x, &goal, &cfg).unwrap();
    assert_eq!(out.hit, out.result.adv_label == (clean + 1) % 10);
}
