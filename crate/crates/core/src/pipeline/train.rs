//! Training and distillation. Deterministic given the config seed: fixed
//! split, seeded shuffles, single-threaded updates in sample order.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::kernels;
use crate::rng;
use crate::synth::Dataset;
use crate::tape::Tape;
use crate::tensor::Tensor;

use super::{BinNormalizer, PipelineKind, PipelineModel, ABP_N_MELS, ABP_N_MFCC};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 10,
            seed: 0,
        }
    }
}

/// Soft/hard blend for distillation.
#[derive(Debug, Clone, Copy)]
pub struct DistillConfig {
    pub temperature: f64,
    /// Weight of the soft (teacher) loss, in `[0, 1]`.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub epochs_run: usize,
    pub final_loss: f64,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: usize,
}

enum Optimizer {
    Sgd,
    Adam(Adam),
}

impl Optimizer {
    fn new(kind: OptimizerKind, sizes: &[usize]) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam(Adam {
                m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
                v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
                t: 0,
            }),
        }
    }

    fn step(&mut self, lr: f64, params: &mut [&mut Tensor], grads: &[Vec<f64>]) {
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grads.iter()) {
                    let shape = p.shape().to_vec();
                    let mut data = p.data().to_vec();
                    for (d, &gv) in data.iter_mut().zip(g.iter()) {
                        *d -= lr * gv;
                    }
                    **p = Tensor::new(shape, data).expect("shape unchanged");
                }
            }
            Optimizer::Adam(state) => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                state.t += 1;
                let t = state.t as i32;
                let c1 = 1.0 - B1.powi(t);
                let c2 = 1.0 - B2.powi(t);
                for (i, (p, g)) in params.iter_mut().zip(grads.iter()).enumerate() {
                    let shape = p.shape().to_vec();
                    let mut data = p.data().to_vec();
                    let (m, v) = (&mut state.m[i], &mut state.v[i]);
                    for j in 0..data.len() {
                        m[j] = B1 * m[j] + (1.0 - B1) * g[j];
                        v[j] = B2 * v[j] + (1.0 - B2) * g[j] * g[j];
                        let mh = m[j] / c1;
                        let vh = v[j] / c2;
                        data[j] -= lr * mh / (vh.sqrt() + EPS);
                    }
                    **p = Tensor::new(shape, data).expect("shape unchanged");
                }
            }
        }
    }
}

/// Per-column mean / inverse-std over a stack of feature rows.
fn fit_stats(rows: usize, cols: usize, chunks: &[&[f64]]) -> BinNormalizer {
    let mut mean = vec![0.0; cols];
    let mut count = 0usize;
    for chunk in chunks {
        debug_assert_eq!(chunk.len() % cols, 0);
        for row in chunk.chunks_exact(cols) {
            for (m, &v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
            count += 1;
        }
    }
    let _ = rows;
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    let mut var = vec![0.0; cols];
    for chunk in chunks {
        for row in chunk.chunks_exact(cols) {
            for (s, (&v, &m)) in var.iter_mut().zip(row.iter().zip(mean.iter())) {
                let d = v - m;
                *s += d * d;
            }
        }
    }
    let inv_std =
        var.iter().map(|&s| 1.0 / ((s / count as f64).sqrt().max(1e-10))).collect();
    BinNormalizer { mean, inv_std }
}

/// Fit the pipeline's frozen normalization statistics on the training split.
fn fit_normalizer(model: &mut PipelineModel, data: &Dataset) -> Result<()> {
    match model.kind {
        PipelineKind::Sbp => {
            let specs: Vec<Vec<f64>> = data
                .train
                .iter()
                .map(|&i| Ok(model.raw_spectrogram(&data.samples[i].0)?.power))
                .collect::<Result<_>>()?;
            let refs: Vec<&[f64]> = specs.iter().map(|v| v.as_slice()).collect();
            model.norm = fit_stats(0, model.stft.n_fft, &refs);
        }
        PipelineKind::Abp => {
            let feats: Vec<Vec<f64>> = data
                .train
                .iter()
                .map(|&i| {
                    let s = model.raw_spectrogram(&data.samples[i].0)?;
                    let f = crate::dsp::mfcc(&s, ABP_N_MELS, ABP_N_MFCC)?;
                    Ok(f.mfcc.expect("requested").1)
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&[f64]> = feats.iter().map(|v| v.as_slice()).collect();
            model.norm = fit_stats(0, ABP_N_MFCC, &refs);
        }
        PipelineKind::Dbp => {}
    }
    Ok(())
}

fn shuffled(indices: &[usize], seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = indices.to_vec();
    let mut r = rng::substream(seed, 1000 + epoch as u64);
    for i in (1..order.len()).rev() {
        let j = (rng::uniform(&mut r, 0.0, (i + 1) as f64) as usize).min(i);
        order.swap(i, j);
    }
    order
}

/// Train a pipeline on the dataset's training split; reports split accuracies.
pub fn train(model: &mut PipelineModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    train_inner(model, data, cfg, None)
}

/// Train `student` to match `teacher` soft targets blended with hard labels.
pub fn distill(
    teacher: &PipelineModel,
    student: &mut PipelineModel,
    dcfg: &DistillConfig,
    tcfg: &TrainConfig,
    data: &Dataset,
) -> Result<TrainReport> {
    if teacher.label_count != student.label_count {
        return Err(CoreError::InvalidInput(alloc::format!(
            "label count mismatch: teacher {} vs student {}",
            teacher.label_count,
            student.label_count
        )));
    }
    if !(0.0..=1.0).contains(&dcfg.weight) || dcfg.temperature <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "distillation needs weight in [0,1] and temperature > 0".into(),
        ));
    }
    train_inner(student, data, tcfg, Some((teacher, dcfg)))
}

fn train_inner(
    model: &mut PipelineModel,
    data: &Dataset,
    cfg: &TrainConfig,
    distill: Option<(&PipelineModel, &DistillConfig)>,
) -> Result<TrainReport> {
    if data.train.is_empty() {
        return Err(CoreError::InvalidInput("training split is empty".into()));
    }
    if cfg.learning_rate <= 0.0 {
        return Err(CoreError::InvalidArgument("learning rate must be > 0".into()));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(CoreError::InvalidArgument("batch size and epochs must be > 0".into()));
    }
    for &(_, label) in data.samples.iter() {
        if label >= model.label_count {
            return Err(CoreError::InvalidInput(alloc::format!(
                "label {label} out of range for {} classes",
                model.label_count
            )));
        }
    }

    fit_normalizer(model, data)?;

    // Frozen preprocessing means training only ever sees fixed features;
    // cache them once (SBP/ABP). DBP trains on random context-window crops.
    let cached: Vec<Option<Tensor>> = match model.kind {
        PipelineKind::Dbp => vec![None; data.samples.len()],
        _ => {
            let mut c = vec![None; data.samples.len()];
            for &i in &data.train {
                c[i] = Some(model.cached_features(&data.samples[i].0)?);
            }
            c
        }
    };

    // Teacher soft targets for non-crop pipelines can also be cached.
    let teacher_probs: Vec<Option<Vec<f64>>> = match &distill {
        Some((teacher, dcfg)) if model.kind != PipelineKind::Dbp => {
            let mut c = vec![None; data.samples.len()];
            for &i in &data.train {
                let logits = teacher.predict_logits(&data.samples[i].0)?;
                c[i] = Some(soft_targets(&logits, dcfg.temperature));
            }
            c
        }
        _ => vec![None; data.samples.len()],
    };

    let sizes: Vec<usize> =
        model.layers.iter().flat_map(|l| l.params().into_iter().map(|t| t.numel())).collect();
    let mut opt = Optimizer::new(cfg.optimizer, &sizes);
    let mut last_loss = f64::NAN;

    for epoch in 0..cfg.epochs {
        let order = shuffled(&data.train, cfg.seed, epoch);
        let mut crop_rng = rng::substream(cfg.seed, 5000 + epoch as u64);
        for batch in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let params = model.leaf_all_params(&mut tape, true);
            let mut total: Option<crate::tape::Var> = None;
            for &idx in batch {
                let (wave, label) = &data.samples[idx];
                let (feats, teacher_soft): (Tensor, Option<Vec<f64>>) = match model.kind {
                    PipelineKind::Dbp => {
                        let span = wave.len() - model.window_len;
                        let off = if span == 0 {
                            0
                        } else {
                            (rng::uniform(&mut crop_rng, 0.0, (span + 1) as f64) as usize)
                                .min(span)
                        };
                        let crop = wave.samples[off..off + model.window_len].to_vec();
                        let soft = match &distill {
                            Some((teacher, dcfg)) => {
                                let crop_wave = crate::dsp::Waveform {
                                    samples: crop.clone(),
                                    sample_rate: wave.sample_rate,
                                };
                                let logits = window_logits(teacher, &crop_wave)?;
                                Some(soft_targets(&logits, dcfg.temperature))
                            }
                            None => None,
                        };
                        (Tensor::from_vec(crop), soft)
                    }
                    _ => (
                        cached[idx].clone().expect("cached during setup"),
                        teacher_probs[idx].clone(),
                    ),
                };
                let fv = tape.leaf(feats);
                let fwd = model.forward_features_with_params(&mut tape, fv, &params)?;
                let hard = tape.cross_entropy_softmax(fwd.logits, *label)?;
                let loss = match (&distill, teacher_soft) {
                    (Some((_, dcfg)), Some(soft)) => {
                        let soft_loss =
                            tape.cross_entropy_soft(fwd.logits, soft, dcfg.temperature)?;
                        let a = tape.scale(soft_loss, dcfg.weight);
                        let b = tape.scale(hard, 1.0 - dcfg.weight);
                        tape.add(a, b)?
                    }
                    _ => hard,
                };
                total = Some(match total {
                    Some(t) => tape.add(t, loss)?,
                    None => loss,
                });
            }
            let total = total.expect("non-empty batch");
            let mean = tape.scale(total, 1.0 / batch.len() as f64);
            last_loss = tape.value(mean).item();
            let grads = tape.backward(mean)?;
            let grad_vecs: Vec<Vec<f64>> = params
                .iter()
                .flatten()
                .map(|&v| {
                    grads
                        .wrt(v)
                        .map(|g| g.to_vec())
                        .unwrap_or_else(|| vec![0.0; tape.value(v).numel()])
                })
                .collect();
            let mut slots: Vec<&mut Tensor> =
                model.layers.iter_mut().flat_map(|l| l.params_mut()).collect();
            opt.step(cfg.learning_rate, &mut slots, &grad_vecs);
            model.project_constraints();
        }
    }

    let train_accuracy = split_accuracy(model, data, &data.train)?;
    let test_accuracy = if data.test.is_empty() {
        f64::NAN
    } else {
        split_accuracy(model, data, &data.test)?
    };
    Ok(TrainReport { train_accuracy, test_accuracy, epochs_run: cfg.epochs, final_loss: last_loss })
}

/// Logits of a single context window through a DBP model (plain path).
fn window_logits(model: &PipelineModel, crop: &crate::dsp::Waveform) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::from_vec(crop.samples.clone()));
    let fwd = model.forward_audio_taped(&mut tape, x, false)?;
    Ok(tape.value(fwd.logits).data().to_vec())
}

fn soft_targets(logits: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = logits.iter().map(|&v| v / temperature).collect();
    kernels::softmax(&scaled)
}

/// Fraction of samples in `indices` the model labels correctly.
pub fn split_accuracy(model: &PipelineModel, data: &Dataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let mut hits = 0usize;
    for &i in indices {
        let (wave, label) = &data.samples[i];
        if model.predict_label(wave)? == *label {
            hits += 1;
        }
    }
    Ok(hits as f64 / indices.len() as f64)
}

/// Prediction agreement between two models over `indices`.
pub fn agreement(
    a: &PipelineModel,
    b: &PipelineModel,
    data: &Dataset,
    indices: &[usize],
) -> Result<f64> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let mut same = 0usize;
    for &i in indices {
        let w = &data.samples[i].0;
        if a.predict_label(w)? == b.predict_label(w)? {
            same += 1;
        }
    }
    Ok(same as f64 / indices.len() as f64)
}
