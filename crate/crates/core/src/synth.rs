//! Deterministic synthetic speaker corpus: harmonic stacks at speaker-specific
//! fundamentals, shaped by formant resonances, with a low noise floor. Benign
//! speech-like content stays below 4 kHz so the Nyquist guard band carries
//! nothing but the noise floor.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dsp::{Waveform, DEFAULT_SAMPLE_RATE};
use crate::error::{CoreError, Result};
use crate::rng::{self, SeedRng};

/// Voice parameters for one synthetic speaker.
#[derive(Debug, Clone)]
pub struct SpeakerProfile {
    /// Fundamental frequency, Hz (80 - 300).
    pub f0: f64,
    /// Three formant resonances: (center Hz, bandwidth Hz), centers < 4 kHz.
    pub formants: [(f64, f64); 3],
    /// Harmonic rolloff exponent.
    pub rolloff: f64,
    /// Noise floor amplitude.
    pub noise_level: f64,
    pub seed: u64,
}

impl SpeakerProfile {
    /// Derive a speaker voice deterministically from the corpus seed.
    pub fn derive(corpus_seed: u64, speaker: usize, n_speakers: usize) -> Self {
        let mut r = rng::substream(corpus_seed, 0x5000 + speaker as u64);
        // spread fundamentals evenly with jitter so voices never collide
        let slot = speaker as f64 / n_speakers.max(1) as f64;
        let f0 = 90.0 + slot * 180.0 + rng::uniform(&mut r, -8.0, 8.0);
        let formants = [
            (rng::uniform(&mut r, 320.0, 880.0), rng::uniform(&mut r, 60.0, 110.0)),
            (rng::uniform(&mut r, 950.0, 2150.0), rng::uniform(&mut r, 90.0, 160.0)),
            (rng::uniform(&mut r, 2250.0, 3700.0), rng::uniform(&mut r, 120.0, 220.0)),
        ];
        let rolloff = rng::uniform(&mut r, 0.55, 1.0);
        let noise_level = rng::uniform(&mut r, 0.0015, 0.004);
        SpeakerProfile { f0, formants, rolloff, noise_level, seed: corpus_seed }
    }

    fn formant_gain(&self, f: f64) -> f64 {
        self.formants
            .iter()
            .map(|&(fc, bw)| {
                let d = (f - fc) / bw;
                1.0 / (1.0 + d * d)
            })
            .sum()
    }

    /// Synthesize one utterance of `len` samples.
    pub fn utterance(&self, len: usize, r: &mut SeedRng) -> Vec<f64> {
        let fs = DEFAULT_SAMPLE_RATE as f64;
        let f0 = self.f0 * (1.0 + rng::uniform(r, -0.04, 0.04));
        let vibrato_hz = rng::uniform(r, 3.0, 6.0);
        let vibrato_depth = rng::uniform(r, 0.002, 0.008);
        // syllable-like amplitude modulation
        let am_hz = rng::uniform(r, 2.0, 5.0);
        let am_phase = rng::uniform(r, 0.0, core::f64::consts::TAU);

        let n_harm = ((3800.0 / f0) as usize).max(1);
        let mut amps = Vec::with_capacity(n_harm);
        let mut phases = Vec::with_capacity(n_harm);
        for h in 1..=n_harm {
            let f = f0 * h as f64;
            let a = self.formant_gain(f) / (h as f64).powf(self.rolloff);
            amps.push(a);
            phases.push(rng::uniform(r, 0.0, core::f64::consts::TAU));
        }
        let peak: f64 = amps.iter().sum();
        let scale = 0.45 / peak.max(1e-9);

        let mut out = vec![0.0; len];
        for (n, o) in out.iter_mut().enumerate() {
            let t = n as f64 / fs;
            let vib = 1.0 + vibrato_depth * (core::f64::consts::TAU * vibrato_hz * t).sin();
            let env = 0.62 + 0.38 * (core::f64::consts::TAU * am_hz * t + am_phase).sin();
            let mut v = 0.0;
            for h in 0..n_harm {
                let f = f0 * (h + 1) as f64 * vib;
                v += amps[h] * (core::f64::consts::TAU * f * t + phases[h]).sin();
            }
            *o = scale * env * v + rng::uniform(r, -self.noise_level, self.noise_level);
        }
        out
    }
}

/// Labeled utterances with a fixed 80/20 per-speaker train/test split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<(Waveform, usize)>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub n_speakers: usize,
}

impl Dataset {
    pub fn label_count(&self) -> usize {
        self.n_speakers
    }
}

/// Generate the synthetic corpus: `n_speakers x n_utts` utterances of
/// `duration_s` seconds at 16 kHz. Bit-reproducible for a given seed.
pub fn generate_corpus(
    n_speakers: usize,
    n_utts: usize,
    duration_s: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_speakers < 2 {
        return Err(CoreError::InvalidArgument("need at least 2 speakers".into()));
    }
    if n_utts == 0 || duration_s <= 0.0 {
        return Err(CoreError::InvalidArgument("need utterances with positive duration".into()));
    }
    let len = (duration_s * DEFAULT_SAMPLE_RATE as f64) as usize;
    let mut samples = Vec::with_capacity(n_speakers * n_utts);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let split = (n_utts * 8).div_ceil(10);
    for sp in 0..n_speakers {
        let profile = SpeakerProfile::derive(seed, sp, n_speakers);
        for u in 0..n_utts {
            let mut r = rng::substream(seed, (0x100_0000 + sp * 100_000 + u) as u64);
            let wave = Waveform::new(profile.utterance(len, &mut r), DEFAULT_SAMPLE_RATE)?;
            let idx = samples.len();
            samples.push((wave, sp));
            if u < split {
                train.push(idx);
            } else {
                test.push(idx);
            }
        }
    }
    Ok(Dataset { samples, train, test, n_speakers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{band_energy_fraction, power_spectrum};

    #[test]
    fn corpus_is_reproducible_and_sized() {
        let a = generate_corpus(3, 4, 1.0, 7).unwrap();
        let b = generate_corpus(3, 4, 1.0, 7).unwrap();
        assert_eq!(a.samples.len(), 12);
        assert_eq!(a.samples[0].0.len(), 16_000);
        for (x, y) in a.samples.iter().zip(b.samples.iter()) {
            assert_eq!(x.1, y.1);
            assert!(x.0.samples.iter().zip(y.0.samples.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        // 80/20 split per speaker: 3 speakers x 4 utts -> 4 train (ceil(3.2)), rest test
        assert_eq!(a.train.len() + a.test.len(), 12);
        assert!(a.test.iter().all(|i| !a.train.contains(i)));
    }

    #[test]
    fn speakers_have_distinct_long_term_spectra() {
        let data = generate_corpus(4, 2, 1.0, 11).unwrap();
        // average normalized spectrum per speaker
        let mut spectra: Vec<Vec<f64>> = Vec::new();
        for sp in 0..4 {
            let mut acc: Option<Vec<f64>> = None;
            for (w, label) in &data.samples {
                if *label != sp {
                    continue;
                }
                let p = power_spectrum(w);
                acc = Some(match acc {
                    None => p,
                    Some(mut a) => {
                        for (x, y) in a.iter_mut().zip(p.iter()) {
                            *x += y;
                        }
                        a
                    }
                });
            }
            let mut a = acc.unwrap();
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in a.iter_mut() {
                *v /= norm;
            }
            spectra.push(a);
        }
        for i in 0..4 {
            for j in i + 1..4 {
                let d2: f64 = spectra[i]
                    .iter()
                    .zip(spectra[j].iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                assert!(d2.sqrt() > 0.05, "speakers {i} and {j} too close: {}", d2.sqrt());
            }
        }
    }

    #[test]
    fn benign_content_stays_out_of_the_guard_band() {
        let data = generate_corpus(4, 3, 1.0, 13).unwrap();
        for (w, _) in &data.samples {
            let frac = band_energy_fraction(w, 7000.0, 8000.0);
            assert!(frac < 0.01, "guard-band fraction {frac}");
            assert!(w.samples.iter().all(|v| v.abs() <= 1.0));
        }
    }
}
