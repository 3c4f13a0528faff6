//! Black-box genetic attack with the perturbation constrained to a frequency
//! band. Genomes are complex coefficients on the whole-signal DFT grid inside
//! the band, so synthesized perturbations are band-limited by construction:
//! sample-wise crossover and mutation act on the coefficients, never on the
//! time-domain signal. Only the model's output probabilities are consumed.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dsp::Waveform;
use crate::error::{CoreError, Result};
use crate::pipeline::PipelineModel;
use crate::rng::{self, SeedRng};

use super::{finish_audio, AttackConfig, AttackResult};

/// Population mechanics, frozen for reproducibility.
#[derive(Debug, Clone)]
pub struct GeneticParams {
    pub population: usize,
    pub elite: usize,
    pub tournament: usize,
    /// Per-gene probability of a mutation event.
    pub mutation_rate: f64,
    /// Mutation magnitude relative to the perturbation budget.
    pub mutation_scale: f64,
    /// Number of on-grid frequency components in the band.
    pub components: usize,
    /// Stop early when the best fitness has not improved for this many
    /// generations.
    pub plateau_patience: Option<usize>,
}

impl Default for GeneticParams {
    fn default() -> Self {
        GeneticParams {
            population: 20,
            elite: 2,
            tournament: 3,
            mutation_rate: 0.3,
            mutation_scale: 0.5,
            components: 64,
            plateau_patience: None,
        }
    }
}

struct BandBasis {
    /// cos / sin rows per component, each of signal length.
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
}

impl BandBasis {
    fn new(n: usize, sample_rate: u32, lo_hz: f64, hi_hz: f64, components: usize) -> Result<Self> {
        let fs = sample_rate as f64;
        // integer bins of the length-n DFT whose frequency falls in [lo, hi)
        let lo_bin = (lo_hz * n as f64 / fs).ceil() as usize;
        let hi_bin = ((hi_hz * n as f64 / fs).ceil() as usize).min(n / 2);
        if hi_bin <= lo_bin + 1 {
            return Err(CoreError::InvalidArgument(alloc::format!(
                "band [{lo_hz}, {hi_hz}) spans too few DFT bins for a {n}-sample signal"
            )));
        }
        let span = hi_bin - lo_bin;
        let c = components.min(span).max(1);
        let mut cos = Vec::with_capacity(c);
        let mut sin = Vec::with_capacity(c);
        for i in 0..c {
            let k = lo_bin + i * span / c;
            let step = core::f64::consts::TAU * k as f64 / n as f64;
            // incremental rotation keeps this out of libm's trig routines
            let (dc, ds) = (step.cos(), step.sin());
            let mut cr = Vec::with_capacity(n);
            let mut sr = Vec::with_capacity(n);
            let (mut re, mut im) = (1.0f64, 0.0f64);
            for _ in 0..n {
                cr.push(re);
                sr.push(im);
                let nre = re * dc - im * ds;
                im = re * ds + im * dc;
                re = nre;
            }
            cos.push(cr);
            sin.push(sr);
        }
        Ok(BandBasis { cos, sin })
    }

    fn components(&self) -> usize {
        self.cos.len()
    }

    /// Synthesize the band-limited perturbation for a genome of
    /// `[a_0..a_C, b_0..b_C]` coefficients.
    fn synth(&self, genome: &[f64], out: &mut [f64]) {
        let c = self.components();
        out.fill(0.0);
        for i in 0..c {
            let (a, b) = (genome[i], genome[c + i]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let (cr, sr) = (&self.cos[i], &self.sin[i]);
            for ((o, &cv), &sv) in out.iter_mut().zip(cr.iter()).zip(sr.iter()) {
                *o += a * cv + b * sv;
            }
        }
    }
}

/// Scale the perturbation into the budget and the audio range headroom.
fn project_scale(delta: &mut [f64], x: &[f64], eps: f64) {
    let linf = delta.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if linf == 0.0 {
        return;
    }
    let headroom = 1.0 - x.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let allowed = eps.min(headroom.max(0.0));
    if linf > allowed {
        let s = allowed / linf;
        for v in delta.iter_mut() {
            *v *= s;
        }
    }
}

/// Misclassification score from output probabilities: log-probability margin
/// of the best wrong class over the clean class (or of the target class when
/// targeted).
fn fitness(probs: &[f64], clean_label: usize, targeted: Option<usize>) -> f64 {
    match targeted {
        Some(t) => {
            let best_other = probs
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != t)
                .map(|(_, &p)| p)
                .fold(f64::MIN, f64::max);
            probs[t].max(1e-300).ln() - best_other.max(1e-300).ln()
        }
        None => {
            let best_wrong = probs
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != clean_label)
                .map(|(_, &p)| p)
                .fold(f64::MIN, f64::max);
            best_wrong.max(1e-300).ln() - probs[clean_label].max(1e-300).ln()
        }
    }
}

struct Individual {
    genome: Vec<f64>,
    fitness: f64,
}

fn evaluate(
    model: &PipelineModel,
    x: &Waveform,
    basis: &BandBasis,
    genome: &[f64],
    clean_label: usize,
    targeted: Option<usize>,
    eps: f64,
    scratch: &mut Vec<f64>,
) -> Result<f64> {
    scratch.resize(x.len(), 0.0);
    basis.synth(genome, scratch);
    project_scale(scratch, &x.samples, eps);
    let adv = Waveform {
        samples: x.samples.iter().zip(scratch.iter()).map(|(&a, &d)| a + d).collect(),
        sample_rate: x.sample_rate,
    };
    let probs = model.predict_probs(&adv)?;
    Ok(fitness(&probs, clean_label, targeted))
}

fn tournament_pick<'a>(
    pop: &'a [Individual],
    k: usize,
    r: &mut SeedRng,
) -> &'a Individual {
    let mut best: Option<&Individual> = None;
    for _ in 0..k {
        let i = (rng::uniform(r, 0.0, pop.len() as f64) as usize).min(pop.len() - 1);
        let cand = &pop[i];
        best = Some(match best {
            Some(b) if b.fitness >= cand.fitness => b,
            _ => cand,
        });
    }
    best.expect("tournament size >= 1")
}

/// Genetic search maximizing the misclassification score with the
/// perturbation confined to `[band.0, band.1)` Hz.
pub fn genetic_band_attack(
    model: &PipelineModel,
    x: &Waveform,
    cfg: &AttackConfig,
    band: (f64, f64),
    gp: &GeneticParams,
) -> Result<AttackResult> {
    cfg.validate()?;
    let fs = x.sample_rate as f64;
    if !(band.0 > 0.0 && band.0 < band.1 && band.1 <= fs / 2.0) {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "band [{}, {}) must lie within (0, {}]",
            band.0,
            band.1,
            fs / 2.0
        )));
    }
    if gp.population < 2 || gp.elite >= gp.population || gp.tournament == 0 {
        return Err(CoreError::InvalidArgument(
            "population must be >= 2 with elite < population and tournament >= 1".into(),
        ));
    }
    let clean_label = model.predict_label(x)?;
    if cfg.iterations == 0 || cfg.epsilon == 0.0 {
        return finish_audio(model, x, x.clone(), cfg, 0);
    }

    let basis = BandBasis::new(x.len(), x.sample_rate, band.0, band.1, gp.components)?;
    let c = basis.components();
    let glen = 2 * c;
    let mut r = rng::rng(cfg.seed);
    let mut scratch = Vec::new();

    // init: random phases and magnitudes around the budget scale
    let amp0 = cfg.epsilon / (c as f64).sqrt();
    let mut pop: Vec<Individual> = Vec::with_capacity(gp.population);
    for _ in 0..gp.population {
        let mut genome = vec![0.0; glen];
        for i in 0..c {
            let mag = rng::uniform(&mut r, 0.0, 2.0 * amp0);
            let phase = rng::uniform(&mut r, 0.0, core::f64::consts::TAU);
            genome[i] = mag * phase.cos();
            genome[c + i] = mag * phase.sin();
        }
        let fit =
            evaluate(model, x, &basis, &genome, clean_label, cfg.targeted, cfg.epsilon, &mut scratch)?;
        pop.push(Individual { genome, fitness: fit });
    }

    let mut best_fit = f64::MIN;
    let mut stale = 0usize;
    let mut generations = 0usize;
    for gen in 0..cfg.iterations {
        // stable order: fitness descending, insertion order breaking ties
        pop.sort_by(|a, b| b.fitness.partial_cmp(&a.fitness).expect("finite fitness"));
        if pop[0].fitness > best_fit + 1e-9 {
            best_fit = pop[0].fitness;
            stale = 0;
        } else {
            stale += 1;
        }
        if let Some(patience) = gp.plateau_patience {
            if stale >= patience {
                break;
            }
        }
        let mut next: Vec<Individual> = Vec::with_capacity(gp.population);
        for e in pop.iter().take(gp.elite) {
            next.push(Individual { genome: e.genome.clone(), fitness: e.fitness });
        }
        while next.len() < gp.population {
            let pa = tournament_pick(&pop, gp.tournament, &mut r).genome.clone();
            let pb = tournament_pick(&pop, gp.tournament, &mut r).genome.clone();
            let mut child = vec![0.0; glen];
            // sample-wise mask crossover over the genome
            for i in 0..glen {
                child[i] = if rng::uniform(&mut r, 0.0, 1.0) < 0.5 { pa[i] } else { pb[i] };
            }
            // mutation: add band noise with a random phase to a subset of genes
            for i in 0..c {
                if rng::uniform(&mut r, 0.0, 1.0) < gp.mutation_rate {
                    let mag = rng::uniform(&mut r, 0.0, gp.mutation_scale * cfg.epsilon);
                    let phase = rng::uniform(&mut r, 0.0, core::f64::consts::TAU);
                    child[i] += mag * phase.cos();
                    child[c + i] += mag * phase.sin();
                }
            }
            let fit = evaluate(
                model,
                x,
                &basis,
                &child,
                clean_label,
                cfg.targeted,
                cfg.epsilon,
                &mut scratch,
            )?;
            next.push(Individual { genome: child, fitness: fit });
        }
        pop = next;
        generations = gen + 1;
    }

    pop.sort_by(|a, b| b.fitness.partial_cmp(&a.fitness).expect("finite fitness"));
    scratch.resize(x.len(), 0.0);
    basis.synth(&pop[0].genome, &mut scratch);
    project_scale(&mut scratch, &x.samples, cfg.epsilon);
    let adv = Waveform {
        samples: x.samples.iter().zip(scratch.iter()).map(|(&a, &d)| a + d).collect(),
        sample_rate: x.sample_rate,
    };
    finish_audio(model, x, adv, cfg, generations)
}
