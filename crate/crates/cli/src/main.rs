//! `surreptix` command line: corpus generation, pipeline training and
//! distillation, attacks at stage 3 and stage 1, detector runs, spectrogram
//! inversion and experiment sweeps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use surreptix::{calibrate, manifest, report, spg, srpx, sweep, wav};
use surreptix_core::attack::{
    self, equate_attack, feature_match, fgsm, fft_threshold, genetic_band_attack,
    joint_surreptitious, pgd, sine_insertion, snes, snes_joint, spectrogram_fgsm, spectrogram_pgd,
    targeted_snes, AttackConfig, AttackOutput, AttackResult, GeneticParams, TargetGoal,
};
use surreptix_core::detect::{run_all, DetectionInput, DetectorKind, DetectorSuite};
use surreptix_core::dsp::griffin_lim;
use surreptix_core::pipeline::{
    distill, train, DistillConfig, OptimizerKind, PipelineKind, PipelineModel, TrainConfig,
};
use surreptix_core::synth::generate_corpus;

#[derive(Parser)]
#[command(
    name = "surreptix",
    version,
    about = "Audio adversarial pipeline laboratory: synthetic speaker corpora, toy \
             identification pipelines, attacks and pipeline-level detectors"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the deterministic synthetic speaker corpus into a directory
    /// of WAV files plus a manifest.
    GenData {
        /// Number of distinct speakers (>= 2)
        #[arg(long)]
        speakers: usize,
        /// Utterances per speaker
        #[arg(long)]
        utts: usize,
        /// Output corpus directory
        #[arg(long)]
        out: PathBuf,
        /// Corpus RNG seed
        #[arg(long)]
        seed: u64,
        /// Utterance duration in seconds
        #[arg(long, default_value_t = 1.0)]
        duration_s: f64,
    },
    /// Train a pipeline on a corpus directory and save it as an SRPX file.
    Train {
        /// Pipeline kind: sbp, abp or dbp
        #[arg(long)]
        pipeline: String,
        /// Corpus directory (from gen-data)
        #[arg(long)]
        data: PathBuf,
        /// Output model path
        #[arg(long)]
        out: PathBuf,
        /// Training seed (init, shuffles, crops)
        #[arg(long)]
        seed: u64,
        /// Training epochs
        #[arg(long, default_value_t = 8)]
        epochs: usize,
        /// Learning rate
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Minibatch size
        #[arg(long, default_value_t = 16)]
        batch: usize,
        /// Optimizer: adam or sgd
        #[arg(long, default_value = "adam")]
        optimizer: String,
    },
    /// Run one attack on one sample file (WAV for stage 3, SPG for stage 1).
    Attack {
        /// One of: fgsm, pgd, feature, joint, genetic, sine, fftthresh,
        /// equate, snes, snes-joint, targeted-snes
        #[arg(long)]
        attack: String,
        /// Target pipeline model (SRPX)
        #[arg(long)]
        model: PathBuf,
        /// Surrogate model(s) for transfer attacks; repeat for an ensemble
        #[arg(long)]
        surrogate: Vec<PathBuf>,
        /// Perturbation budget (infinity norm at the insertion stage)
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        /// Surreptitious factor for joint objectives
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Iteration count (1 = single-step)
        #[arg(long, default_value_t = 100)]
        iters: usize,
        /// Input sample: .wav (stage 3) or .spg (stage 1)
        #[arg(long = "in")]
        input: PathBuf,
        /// Output adversarial object (.wav or .spg, matching the input kind)
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV report path
        #[arg(long)]
        report: Option<PathBuf>,
        /// Attack RNG seed
        #[arg(long)]
        seed: u64,
        /// Feature tap for feature/joint objectives (stage1, conv1, conv2,
        /// fc1, cnn; aliases deep/shallow/spectrogram)
        #[arg(long)]
        tap: Option<String>,
        /// Guide sample for the feature-matching attack
        #[arg(long)]
        guide: Option<PathBuf>,
        /// Band for the genetic attack, as LO:HI in Hz
        #[arg(long, default_value = "7000:8000")]
        band: String,
        /// Frequencies for sine insertion, comma separated Hz
        #[arg(long, default_value = "440")]
        freqs: String,
        /// Amplitude for sine insertion
        #[arg(long, default_value_t = 0.3)]
        amplitude: f64,
        /// Kept power fraction for fftthresh
        #[arg(long, default_value_t = 0.5)]
        keep_fraction: f64,
        /// Target label for targeted attacks
        #[arg(long)]
        target: Option<usize>,
        /// Target-set size for targeted-snes (most likely wrong predictions)
        #[arg(long)]
        target_set: Option<usize>,
        /// Skip the 16-bit WAV round trip in transfer attacks
        #[arg(long)]
        no_wav_roundtrip: bool,
        /// Genetic attack: stop after this many stale generations
        #[arg(long)]
        plateau_patience: Option<usize>,
    },
    /// Run detection controls over a sample.
    Detect {
        /// `all` or a comma-separated subset of
        /// hermitian,nyquist,reconstruction,saturation
        #[arg(long)]
        controls: String,
        /// Input sample: .wav or .spg
        #[arg(long = "in")]
        input: PathBuf,
        /// Pipeline model providing the analysis grid
        #[arg(long)]
        model: PathBuf,
        /// Output CSV report
        #[arg(long)]
        report: PathBuf,
        /// Detector seed (reconstruction phase init)
        #[arg(long)]
        seed: u64,
        /// Claimed source waveform for the reconstruction control
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Calibrate statistical thresholds on this benign corpus first
        #[arg(long)]
        calibrate_data: Option<PathBuf>,
    },
    /// Run a sweep described by a JSON spec and write the result CSV.
    Sweep {
        /// Sweep spec (JSON)
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Seed overriding the spec's seed
        #[arg(long)]
        seed: u64,
    },
    /// Invert a spectrogram container back to audio (Griffin-Lim).
    Invert {
        /// Input .spg container
        #[arg(long = "spec-in")]
        spec_in: PathBuf,
        /// Phase-estimation iterations
        #[arg(long, default_value_t = 50)]
        iters: usize,
        /// Output WAV path
        #[arg(long)]
        out: PathBuf,
        /// Phase init seed
        #[arg(long)]
        seed: u64,
    },
    /// Distill a teacher model into a fresh student.
    Distill {
        /// Teacher model (SRPX)
        #[arg(long)]
        teacher: PathBuf,
        /// Student architecture (sbp, abp or dbp)
        #[arg(long)]
        student_arch: String,
        /// Softening temperature
        #[arg(long)]
        temp: f64,
        /// Soft-loss weight in [0, 1]
        #[arg(long)]
        weight: f64,
        /// Corpus directory
        #[arg(long)]
        data: PathBuf,
        /// Output student model path
        #[arg(long)]
        out: PathBuf,
        /// Training seed
        #[arg(long)]
        seed: u64,
        /// Training epochs
        #[arg(long, default_value_t = 8)]
        epochs: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits; anything else is a usage error
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenData { speakers, utts, out, seed, duration_s } => {
            let data = generate_corpus(speakers, utts, duration_s, seed)?;
            manifest::save_dataset(&out, &data)?;
            println!(
                "wrote {} utterances ({} train / {} test) to {}",
                data.samples.len(),
                data.train.len(),
                data.test.len(),
                out.display()
            );
            Ok(())
        }
        Cmd::Train { pipeline, data, out, seed, epochs, lr, batch, optimizer } => {
            let kind = PipelineKind::parse(&pipeline)?;
            let optimizer = match optimizer.as_str() {
                "adam" => OptimizerKind::Adam,
                "sgd" => OptimizerKind::Sgd,
                other => bail!("unknown optimizer `{other}` (expected adam or sgd)"),
            };
            let dataset = manifest::load_dataset(&data)?;
            let mut model = PipelineModel::build(kind, dataset.n_speakers, seed)?;
            let cfg = TrainConfig {
                optimizer,
                learning_rate: lr,
                batch_size: batch,
                epochs,
                seed,
            };
            let rep = train(&mut model, &dataset, &cfg)?;
            srpx::save_model(&out, &model)?;
            println!(
                "trained {pipeline}: train accuracy {:.3}, test accuracy {:.3} ({} epochs) -> {}",
                rep.train_accuracy,
                rep.test_accuracy,
                rep.epochs_run,
                out.display()
            );
            Ok(())
        }
        Cmd::Attack { .. } => run_attack_cmd(cli.cmd),
        Cmd::Detect { controls, input, model, report: report_path, seed, reference, calibrate_data } => {
            let model = srpx::load_model(&model)?;
            let kinds: Vec<DetectorKind> = if controls == "all" {
                DetectorKind::all().to_vec()
            } else {
                controls
                    .split(',')
                    .map(|c| DetectorKind::parse(c.trim()))
                    .collect::<Result<_, _>>()?
            };
            let mut suite = DetectorSuite { seed, ..DetectorSuite::default() };
            if let Some(dir) = calibrate_data {
                let benign = manifest::load_dataset(&dir)?;
                suite = calibrate::calibrate_suite(&benign, &model.stft, &suite)?;
            }
            let reference = reference.map(|p| wav::read_wav(&p)).transpose()?;
            let sample_id =
                input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let outcome = match input_kind(&input)? {
                InputKind::Wav => {
                    let w = wav::read_wav(&input)?;
                    run_all(
                        &suite,
                        &kinds,
                        &DetectionInput::Audio(&w),
                        reference.as_ref(),
                        &model.stft,
                    )?
                }
                InputKind::Spg => {
                    let s = spg::read_spg(&input)?;
                    run_all(
                        &suite,
                        &kinds,
                        &DetectionInput::Spectrogram(&s),
                        reference.as_ref(),
                        &model.stft,
                    )?
                }
            };
            let rows: Vec<(String, _)> =
                outcome.reports.iter().map(|r| (sample_id.clone(), r.clone())).collect();
            report::write_text(&report_path, &report::detection_csv(&rows))?;
            println!(
                "{}: {}",
                sample_id,
                if outcome.surreptitious_capable {
                    "all controls clean (surreptitious-capable)".to_string()
                } else {
                    format!(
                        "flagged by {:?}",
                        outcome.fired().iter().map(|d| d.as_str()).collect::<Vec<_>>()
                    )
                }
            );
            Ok(())
        }
        Cmd::Sweep { spec, out, seed } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let mut spec = sweep::SweepSpec::from_json(&text)?;
            spec.seed = seed;
            sweep::run_sweep_to_file(&spec, &out)?;
            println!("sweep written to {}", out.display());
            Ok(())
        }
        Cmd::Invert { spec_in, iters, out, seed } => {
            let s = spg::read_spg(&spec_in)?;
            let w = griffin_lim(&s, iters, seed)?;
            wav::write_wav(&out, &w)?;
            println!("inverted {} frames to {}", s.frames, out.display());
            Ok(())
        }
        Cmd::Distill { teacher, student_arch, temp, weight, data, out, seed, epochs } => {
            let teacher = srpx::load_model(&teacher)?;
            let kind = PipelineKind::parse(&student_arch)?;
            let dataset = manifest::load_dataset(&data)?;
            let mut student = PipelineModel::build(kind, dataset.n_speakers, seed)?;
            let dcfg = DistillConfig { temperature: temp, weight };
            let tcfg = TrainConfig { epochs, seed, ..TrainConfig::default() };
            let rep = distill(&teacher, &mut student, &dcfg, &tcfg, &dataset)?;
            srpx::save_model(&out, &student)?;
            println!(
                "distilled {student_arch} student: test accuracy {:.3} -> {}",
                rep.test_accuracy,
                out.display()
            );
            Ok(())
        }
    }
}

enum InputKind {
    Wav,
    Spg,
}

fn input_kind(path: &Path) -> Result<InputKind> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("wav") => Ok(InputKind::Wav),
        Some("spg") => Ok(InputKind::Spg),
        _ => bail!("cannot tell WAV from SPG: {} needs a .wav or .spg extension", path.display()),
    }
}

fn parse_band(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        bail!("--band must be LO:HI in Hz, got `{s}`");
    }
    Ok((parts[0].trim().parse().context("--band lo")?, parts[1].trim().parse().context("--band hi")?))
}

fn run_attack_cmd(cmd: Cmd) -> Result<()> {
    let Cmd::Attack {
        attack,
        model,
        surrogate,
        eps,
        lambda,
        iters,
        input,
        out,
        report: report_path,
        seed,
        tap,
        guide,
        band,
        freqs,
        amplitude,
        keep_fraction,
        target,
        target_set,
        no_wav_roundtrip,
        plateau_patience,
    } = cmd
    else {
        unreachable!("dispatched on Attack");
    };
    let model = srpx::load_model(&model)?;
    let surrogates: Vec<PipelineModel> =
        surrogate.iter().map(|p| srpx::load_model(p)).collect::<Result<_>>()?;
    let cfg = AttackConfig {
        epsilon: eps,
        iterations: iters,
        lambda,
        targeted: target,
        tap,
        seed,
        ..AttackConfig::default()
    };
    let round_trip = !no_wav_roundtrip;

    let result: AttackResult = match input_kind(&input)? {
        InputKind::Wav => {
            let wave = wav::read_wav(&input)?;
            match attack.as_str() {
                "fgsm" => fgsm(&model, &wave, &cfg)?,
                "pgd" => pgd(&model, &wave, &cfg)?,
                "joint" => joint_surreptitious(&model, &wave, &cfg)?,
                "feature" => {
                    let guide_path =
                        guide.ok_or_else(|| anyhow::anyhow!("--guide is required for the feature attack"))?;
                    let g = wav::read_wav(&guide_path)?;
                    feature_match(&model, &wave, &g, &cfg)?
                }
                "genetic" => {
                    let band = parse_band(&band)?;
                    let gp = GeneticParams { plateau_patience, ..GeneticParams::default() };
                    genetic_band_attack(&model, &wave, &cfg, band, &gp)?
                }
                "sine" => {
                    let freqs: Vec<f64> = freqs
                        .split(',')
                        .map(|f| f.trim().parse::<f64>().context("--freqs"))
                        .collect::<Result<_>>()?;
                    let adv = sine_insertion(&wave, &freqs, amplitude)?;
                    attack::finish_audio(&model, &wave, adv, &cfg, 0)?
                }
                "fftthresh" => {
                    let adv = fft_threshold(&wave, keep_fraction)?;
                    attack::finish_audio(&model, &wave, adv, &cfg, 0)?
                }
                "snes" => {
                    let s = surrogates
                        .first()
                        .ok_or_else(|| anyhow::anyhow!("--surrogate is required for snes"))?;
                    snes(s, &model, &wave, &cfg, round_trip)?
                }
                "snes-joint" => {
                    let s = surrogates
                        .first()
                        .ok_or_else(|| anyhow::anyhow!("--surrogate is required for snes-joint"))?;
                    snes_joint(s, &model, &wave, &cfg, round_trip)?.result
                }
                "targeted-snes" => {
                    if surrogates.is_empty() {
                        bail!("--surrogate is required for targeted-snes (repeat for an ensemble)");
                    }
                    let refs: Vec<&PipelineModel> = surrogates.iter().collect();
                    let goal = match (target, target_set) {
                        (Some(t), None) => TargetGoal::Single(t),
                        (None, Some(k)) => {
                            TargetGoal::Set(most_likely_wrong(&refs, &wave, k)?)
                        }
                        _ => bail!("targeted-snes needs exactly one of --target or --target-set"),
                    };
                    targeted_snes(&refs, &model, &wave, &goal, &cfg)?.result
                }
                other => bail!("attack `{other}` cannot run on a WAV input"),
            }
        }
        InputKind::Spg => {
            let s = spg::read_spg(&input)?;
            match attack.as_str() {
                "fgsm" => spectrogram_fgsm(&model, &s, &cfg)?,
                "pgd" => spectrogram_pgd(&model, &s, &cfg)?,
                "equate" => equate_attack(&model, &s, &cfg)?,
                other => bail!("attack `{other}` cannot run on a spectrogram input"),
            }
        }
    };

    match &result.output {
        AttackOutput::Audio(w) => {
            if out.extension().and_then(|e| e.to_str()) != Some("wav") {
                bail!("--out must be a .wav path for stage-3 attacks");
            }
            wav::write_wav(&out, w)?;
        }
        AttackOutput::Spectrogram(s) => {
            if out.extension().and_then(|e| e.to_str()) != Some("spg") {
                bail!("--out must be a .spg path for stage-1 attacks");
            }
            spg::write_spg(&out, s)?;
        }
    }
    if let Some(p) = report_path {
        report::write_text(&p, &report::attack_csv(&attack, eps, lambda, &result))?;
    }
    println!(
        "{attack}: success={} clean={} adv={} d3={:?} d1={}",
        result.success,
        result.clean_label,
        result.adv_label,
        result.distortion_stage3,
        result.distortion_stage1
    );
    Ok(())
}

/// The surrogate ensemble's k most likely but incorrect predictions.
fn most_likely_wrong(
    ensemble: &[&PipelineModel],
    wave: &surreptix_core::dsp::Waveform,
    k: usize,
) -> Result<Vec<usize>> {
    let mut acc = vec![0.0; ensemble[0].label_count];
    for m in ensemble {
        for (a, p) in acc.iter_mut().zip(m.predict_probs(wave)?.iter()) {
            *a += p;
        }
    }
    let top = surreptix_core::kernels::argmax(&acc);
    let mut order: Vec<usize> = (0..acc.len()).filter(|&i| i != top).collect();
    order.sort_by(|&a, &b| acc[b].partial_cmp(&acc[a]).expect("finite probs"));
    Ok(order.into_iter().take(k).collect())
}
