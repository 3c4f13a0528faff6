//! Experiment sweeps: a JSON spec names an attack, a model, a corpus and the
//! parameter grids; the output is a deterministic CSV with one row per
//! (sample, epsilon, lambda, iterations) cell plus per-cell aggregate rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use surreptix_core::attack::{
    self, equate_attack, feature_match, fgsm, genetic_band_attack, joint_surreptitious, pgd,
    sine_insertion, snes, snes_joint, spectrogram_fgsm, spectrogram_pgd, AttackConfig,
    AttackOutput, AttackResult, GeneticParams,
};
use surreptix_core::detect::{run_all, DetectionInput, DetectorKind, DetectorSuite};
use surreptix_core::dsp::{stft, Spectrogram, Waveform};
use surreptix_core::pipeline::PipelineModel;
use surreptix_core::synth::Dataset;

use crate::{manifest, srpx};

pub const SWEEP_CSV_HEADER: &str = "row_type,attack,pipeline,epsilon,lambda,iterations,sample_id,label,clean_pred,adv_pred,success,distortion_stage3,distortion_stage1,hermitian,nyquist,reconstruction,saturation,accuracy";

fn default_lambda_grid() -> Vec<f64> {
    vec![1.0]
}

fn default_iterations() -> Vec<usize> {
    vec![100]
}

fn default_detectors() -> Vec<String> {
    vec!["hermitian".into(), "nyquist".into()]
}

fn default_split() -> String {
    "test".into()
}

fn default_round_trip() -> bool {
    true
}

/// Everything a sweep needs, loadable from JSON. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub attack: String,
    pub model: PathBuf,
    #[serde(default)]
    pub surrogate: Option<PathBuf>,
    pub data: PathBuf,
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_iterations")]
    pub iterations: Vec<usize>,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_detectors")]
    pub detectors: Vec<String>,
    #[serde(default)]
    pub tap: Option<String>,
    #[serde(default)]
    pub band: Option<(f64, f64)>,
    #[serde(default)]
    pub freqs: Option<Vec<f64>>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub keep_fraction: Option<f64>,
    #[serde(default = "default_split")]
    pub split: String,
    #[serde(default = "default_round_trip")]
    pub wav_round_trip: bool,
}

pub const SWEEP_ATTACKS: &[&str] = &[
    "fgsm", "pgd", "feature", "joint", "genetic", "sine", "fftthresh", "equate", "sfgsm", "spgd",
    "snes", "snes-joint",
];

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text).context("parsing sweep spec")?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() {
            bail!("eps_grid must not be empty");
        }
        if self.lambda_grid.is_empty() || self.iterations.is_empty() {
            bail!("lambda_grid and iterations must not be empty");
        }
        if self.samples < 1 {
            bail!("samples must be >= 1");
        }
        if !SWEEP_ATTACKS.contains(&self.attack.as_str()) {
            bail!("unknown attack `{}` (expected one of {:?})", self.attack, SWEEP_ATTACKS);
        }
        if self.lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l)) {
            bail!("lambda values must be in [0, 1]");
        }
        if !matches!(self.split.as_str(), "train" | "test") {
            bail!("split must be `train` or `test`");
        }
        for d in &self.detectors {
            DetectorKind::parse(d)?;
        }
        if matches!(self.attack.as_str(), "snes" | "snes-joint") && self.surrogate.is_none() {
            bail!("attack `{}` needs a surrogate model", self.attack);
        }
        Ok(())
    }
}

/// Loaded context shared across sweep cells.
pub struct SweepContext {
    pub model: PipelineModel,
    pub surrogate: Option<PipelineModel>,
    pub data: Dataset,
    pub sample_indices: Vec<usize>,
    pub detectors: Vec<DetectorKind>,
    pub suite: DetectorSuite,
}

pub fn load_context(spec: &SweepSpec) -> Result<SweepContext> {
    if !spec.model.exists() {
        bail!("missing model file {}", spec.model.display());
    }
    let model = srpx::load_model(&spec.model)?;
    let surrogate = match &spec.surrogate {
        Some(p) => {
            if !p.exists() {
                bail!("missing model file {}", p.display());
            }
            Some(srpx::load_model(p)?)
        }
        None => None,
    };
    let data = manifest::load_dataset(&spec.data)?;
    let pool = if spec.split == "test" { &data.test } else { &data.train };
    if pool.is_empty() {
        bail!("requested split `{}` is empty", spec.split);
    }
    let sample_indices: Vec<usize> = pool.iter().copied().take(spec.samples).collect();
    let detectors: Vec<DetectorKind> =
        spec.detectors.iter().map(|d| DetectorKind::parse(d)).collect::<Result<_, _>>()?;
    Ok(SweepContext {
        model,
        surrogate,
        data,
        sample_indices,
        detectors,
        suite: DetectorSuite::default(),
    })
}

/// Deterministic guide choice for the feature attack: the next sample in the
/// same split carrying a different label.
pub fn pick_guide<'a>(data: &'a Dataset, pool: &[usize], sample_idx: usize) -> Option<&'a Waveform> {
    let label = data.samples[sample_idx].1;
    let pos = pool.iter().position(|&i| i == sample_idx)?;
    pool.iter()
        .cycle()
        .skip(pos + 1)
        .take(pool.len())
        .find(|&&i| data.samples[i].1 != label)
        .map(|&i| &data.samples[i].0)
}

/// Run one named attack on one sample.
#[allow(clippy::too_many_arguments)]
pub fn run_attack_cell(
    spec: &SweepSpec,
    ctx: &SweepContext,
    sample_idx: usize,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    let wave = &ctx.data.samples[sample_idx].0;
    let model = &ctx.model;
    let spectrogram_of = |w: &Waveform| -> Result<Spectrogram> { Ok(stft(w, &model.stft)?) };
    let result = match spec.attack.as_str() {
        "fgsm" => fgsm(model, wave, cfg)?,
        "pgd" => pgd(model, wave, cfg)?,
        // lambda = 0 rows are the plain-PGD baseline the trade-off curves
        // compare against
        "joint" => {
            if cfg.lambda == 0.0 {
                pgd(model, wave, cfg)?
            } else {
                joint_surreptitious(model, wave, cfg)?
            }
        }
        "feature" => {
            let pool = if spec.split == "test" { &ctx.data.test } else { &ctx.data.train };
            let guide = pick_guide(&ctx.data, pool, sample_idx)
                .context("no guide with a different label available")?;
            feature_match(model, wave, guide, cfg)?
        }
        "genetic" => {
            let band = spec.band.unwrap_or((7000.0, 8000.0));
            genetic_band_attack(model, wave, cfg, band, &GeneticParams::default())?
        }
        "sine" => {
            let freqs = spec.freqs.clone().unwrap_or_else(|| vec![440.0]);
            let amplitude = spec.amplitude.unwrap_or(0.3);
            let adv = sine_insertion(wave, &freqs, amplitude)?;
            attack::finish_audio(model, wave, adv, cfg, 0)?
        }
        "fftthresh" => {
            let keep = spec.keep_fraction.unwrap_or(0.5);
            let adv = surreptix_core::attack::fft_threshold(wave, keep)?;
            attack::finish_audio(model, wave, adv, cfg, 0)?
        }
        "sfgsm" => spectrogram_fgsm(model, &spectrogram_of(wave)?, cfg)?,
        "spgd" => spectrogram_pgd(model, &spectrogram_of(wave)?, cfg)?,
        "equate" => equate_attack(model, &spectrogram_of(wave)?, cfg)?,
        "snes" => {
            let surrogate = ctx.surrogate.as_ref().expect("validated");
            snes(surrogate, model, wave, cfg, spec.wav_round_trip)?
        }
        "snes-joint" => {
            let surrogate = ctx.surrogate.as_ref().expect("validated");
            snes_joint(surrogate, model, wave, cfg, spec.wav_round_trip)?.result
        }
        other => bail!("unknown attack `{other}`"),
    };
    Ok(result)
}

struct Row {
    eps: f64,
    lambda: f64,
    iters: usize,
    sample_id: usize,
    label: usize,
    result: AttackResult,
    verdicts: BTreeMap<&'static str, bool>,
}

/// Execute the sweep and render the CSV. Cells run in parallel (capped by
/// `SURREPTIX_THREADS`); rows are sorted before rendering so the output is a
/// pure function of the spec and referenced files.
pub fn run_sweep(spec: &SweepSpec) -> Result<String> {
    spec.validate()?;
    let ctx = load_context(spec)?;

    let mut cells = Vec::new();
    for &eps in &spec.eps_grid {
        for &lambda in &spec.lambda_grid {
            for &iters in &spec.iterations {
                for &sample_idx in &ctx.sample_indices {
                    cells.push((eps, lambda, iters, sample_idx));
                }
            }
        }
    }

    let threads = std::env::var("SURREPTIX_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building sweep thread pool")?;

    let rows: Result<Vec<Row>> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(cell_id, &(eps, lambda, iters, sample_idx))| {
                let cfg = AttackConfig {
                    epsilon: eps,
                    iterations: iters,
                    lambda,
                    tap: spec.tap.clone(),
                    seed: spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(cell_id as u64),
                    ..AttackConfig::default()
                };
                let result = run_attack_cell(spec, &ctx, sample_idx, &cfg)?;
                let clean_wave = &ctx.data.samples[sample_idx].0;
                let mut verdicts = BTreeMap::new();
                if !ctx.detectors.is_empty() {
                    let outcome = match &result.output {
                        AttackOutput::Audio(w) => run_all(
                            &ctx.suite,
                            &ctx.detectors,
                            &DetectionInput::Audio(w),
                            Some(clean_wave),
                            &ctx.model.stft,
                        )?,
                        AttackOutput::Spectrogram(s) => run_all(
                            &ctx.suite,
                            &ctx.detectors,
                            &DetectionInput::Spectrogram(s),
                            Some(clean_wave),
                            &ctx.model.stft,
                        )?,
                    };
                    for r in outcome.reports {
                        verdicts.insert(r.detector.as_str(), r.is_flagged());
                    }
                }
                Ok(Row {
                    eps,
                    lambda,
                    iters,
                    sample_id: sample_idx,
                    label: ctx.data.samples[sample_idx].1,
                    result,
                    verdicts,
                })
            })
            .collect()
    });
    let mut rows = rows?;
    rows.sort_by(|a, b| {
        a.eps
            .total_cmp(&b.eps)
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.iters.cmp(&b.iters))
            .then(a.sample_id.cmp(&b.sample_id))
    });

    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    let verdict_col = |row: &Row, d: &str| -> String {
        row.verdicts.get(d).map(|&f| crate::report::verdict_str(f).to_string()).unwrap_or_default()
    };
    for row in &rows {
        let d3 = row.result.distortion_stage3.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "sample,{},{},{},{},{},{},{},{},{},{},{d3},{},{},{},{},{},",
            spec.attack,
            ctx.model.kind.as_str(),
            row.eps,
            row.lambda,
            row.iters,
            row.sample_id,
            row.label,
            row.result.clean_label,
            row.result.adv_label,
            row.result.success,
            row.result.distortion_stage1,
            verdict_col(row, "hermitian"),
            verdict_col(row, "nyquist"),
            verdict_col(row, "reconstruction"),
            verdict_col(row, "saturation"),
        );
    }
    // aggregate accuracy per (eps, lambda, iters) cell
    let mut agg: BTreeMap<(u64, u64, usize), (usize, usize)> = BTreeMap::new();
    for row in &rows {
        let key = (row.eps.to_bits(), row.lambda.to_bits(), row.iters);
        let slot = agg.entry(key).or_insert((0, 0));
        slot.1 += 1;
        if row.result.adv_label == row.label {
            slot.0 += 1;
        }
    }
    for ((eps_bits, lambda_bits, iters), (hits, total)) in agg {
        let _ = writeln!(
            out,
            "aggregate,{},{},{},{},{iters},,,,,,,,,,,,{}",
            spec.attack,
            ctx.model.kind.as_str(),
            f64::from_bits(eps_bits),
            f64::from_bits(lambda_bits),
            hits as f64 / total as f64,
        );
    }
    Ok(out)
}

pub fn run_sweep_to_file(spec: &SweepSpec, out: &Path) -> Result<()> {
    let csv = run_sweep(spec)?;
    std::fs::write(out, csv).with_context(|| format!("writing {}", out.display()))
}
