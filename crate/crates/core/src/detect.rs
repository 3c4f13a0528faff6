//! Pipeline-level detection controls: each returns a score, the threshold it
//! was judged against, and a verdict.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dsp::{
    band_power, griffin_lim, low_pass, stft, stft::half_spectrum_power, Spectrogram, StftParams,
    Waveform,
};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Clean,
    Flagged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Hermitian,
    Nyquist,
    Reconstruction,
    Saturation,
}

impl DetectorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorKind::Hermitian => "hermitian",
            DetectorKind::Nyquist => "nyquist",
            DetectorKind::Reconstruction => "reconstruction",
            DetectorKind::Saturation => "saturation",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hermitian" => Ok(DetectorKind::Hermitian),
            "nyquist" => Ok(DetectorKind::Nyquist),
            "reconstruction" => Ok(DetectorKind::Reconstruction),
            "saturation" => Ok(DetectorKind::Saturation),
            other => Err(CoreError::InvalidArgument(alloc::format!("unknown control `{other}`"))),
        }
    }

    pub fn all() -> [DetectorKind; 4] {
        [
            DetectorKind::Hermitian,
            DetectorKind::Nyquist,
            DetectorKind::Reconstruction,
            DetectorKind::Saturation,
        ]
    }
}

/// One control's verdict. `verdict == Flagged` iff `score > threshold`
/// (strict).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub detector: DetectorKind,
    pub score: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    /// Pipeline stage the control examined (1 = spectrogram, 3 = audio).
    pub stage: u8,
}

impl DetectionReport {
    fn judge(detector: DetectorKind, score: f64, threshold: f64, stage: u8) -> Self {
        let verdict = if score > threshold { Verdict::Flagged } else { Verdict::Clean };
        DetectionReport { detector, score, threshold, verdict, stage }
    }

    pub fn is_flagged(&self) -> bool {
        self.verdict == Verdict::Flagged
    }
}

fn require_full_bins(s: &Spectrogram) -> Result<()> {
    if s.power.len() != s.frames * s.params.n_fft {
        return Err(CoreError::InvalidInput(String::from(
            "detector needs the full redundant-bin spectrogram",
        )));
    }
    Ok(())
}

/// Default relative-asymmetry tolerance for the symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-6;

/// Conjugate-symmetry check: real audio produces mirrored power bins, so any
/// relative asymmetry betrays direct spectrogram tampering. Scale-invariant
/// by construction.
pub fn hermitian_check(s: &Spectrogram, tol: f64) -> Result<DetectionReport> {
    require_full_bins(s)?;
    let n = s.params.n_fft;
    let mut score = 0.0f64;
    for t in 0..s.frames {
        let frame = s.frame(t);
        for k in 1..n {
            let (a, b) = (frame[k], frame[n - k]);
            let rel = (a - b).abs() / (a.abs() + b.abs() + 1e-12);
            score = score.max(rel);
        }
    }
    Ok(DetectionReport::judge(DetectorKind::Hermitian, score, tol, 1))
}

/// Fraction of (non-mirrored) spectral power above the practical Nyquist
/// cutoff.
pub fn nyquist_monitor(
    s: &Spectrogram,
    practical_cutoff_hz: f64,
    threshold: f64,
) -> Result<DetectionReport> {
    require_full_bins(s)?;
    let fs = s.params.sample_rate as f64;
    if practical_cutoff_hz >= fs / 2.0 {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "cutoff {practical_cutoff_hz} must be below fs/2 = {}",
            fs / 2.0
        )));
    }
    let guard = band_power(s, practical_cutoff_hz, fs / 2.0)?;
    let total = half_spectrum_power(s);
    let score = if total > 0.0 { guard / total } else { 0.0 };
    Ok(DetectionReport::judge(DetectorKind::Nyquist, score, threshold, 1))
}

/// The enforcement arm of the Nyquist control: low-pass at reception.
pub fn enforce_lowpass(w: &Waveform, cutoff_hz: f64) -> Result<Waveform> {
    low_pass(w, cutoff_hz)
}

/// Rectified-and-smoothed amplitude envelope. Phase-blind, which is what the
/// reconstruction comparison needs since inverted phases are arbitrary.
fn envelope(w: &Waveform) -> Result<Vec<f64>> {
    let rect = Waveform {
        samples: w.samples.iter().map(|v| v.abs()).collect(),
        sample_rate: w.sample_rate,
    };
    Ok(low_pass(&rect, 50.0)?.samples)
}

/// Mean-removed normalized cross-correlation maximized over lags in
/// `[-max_lag, max_lag]`.
fn envelope_correlation(a: &[f64], b: &[f64], max_lag: usize) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let ea = a.iter().map(|v| (v - ma) * (v - ma)).sum::<f64>().sqrt();
    let eb = b.iter().map(|v| (v - mb) * (v - mb)).sum::<f64>().sqrt();
    if ea < 1e-12 || eb < 1e-12 {
        return 0.0;
    }
    let mut best = -1.0f64;
    for lag in -(max_lag as isize)..=(max_lag as isize) {
        let mut acc = 0.0;
        for i in 0..n {
            let j = i as isize + lag;
            if j >= 0 && (j as usize) < n {
                acc += (a[i] - ma) * (b[j as usize] - mb);
            }
        }
        best = best.max(acc / (ea * eb));
    }
    best
}

/// Default operating point for the reconstruction residual (calibrate on a
/// benign corpus for tighter bounds).
pub const RECONSTRUCTION_THRESHOLD: f64 = 0.15;
pub const RECONSTRUCTION_ITERATIONS: usize = 50;

/// Invert the spectrogram and compare envelopes against the waveform the
/// pipeline claims produced it: `score = 1 - max-lag correlation`.
pub fn reconstruction_detector(
    s: &Spectrogram,
    reference: &Waveform,
    iterations: usize,
    threshold: f64,
    seed: u64,
) -> Result<DetectionReport> {
    require_full_bins(s)?;
    let rec_len = (s.frames.max(1) - 1) * s.params.hop + s.params.win_len;
    let diff = reference.len().abs_diff(rec_len);
    if diff > s.params.hop {
        return Err(CoreError::InvalidInput(alloc::format!(
            "reference length {} differs from reconstruction length {rec_len} by more than one hop",
            reference.len()
        )));
    }
    let rec = griffin_lim(s, iterations, seed)?;
    let ea = envelope(&rec)?;
    let eb = envelope(reference)?;
    let corr = envelope_correlation(&ea, &eb, s.params.hop);
    let score = 1.0 - corr;
    Ok(DetectionReport::judge(DetectorKind::Reconstruction, score, threshold, 1))
}

/// Default operating point for the saturation heuristic; calibrated on the
/// benign corpus in the harness.
pub const SATURATION_THRESHOLD: f64 = 0.02;

/// Spectral-thresholding fingerprint: flat-but-loud high bands plus emptied
/// mid bands.
pub fn saturation_heuristic(s: &Spectrogram, threshold: f64) -> Result<DetectionReport> {
    require_full_bins(s)?;
    let n = s.params.n_fft;
    let half = n / 2 + 1;
    let fs = s.params.sample_rate as f64;
    let hi_start = (4000.0 * n as f64 / fs).ceil() as usize; // bins >= 4 kHz
    let mid_start = (1000.0 * n as f64 / fs).ceil() as usize;
    let mut saturated_frames = 0usize;
    let mut near_zero_mid = 0usize;
    let mut mid_total = 0usize;
    for t in 0..s.frames {
        let frame = &s.frame(t)[..half];
        let hi = &frame[hi_start.min(half)..];
        if !hi.is_empty() {
            let mean = hi.iter().sum::<f64>() / hi.len() as f64;
            let var = hi.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / hi.len() as f64;
            let mut sorted: Vec<f64> = frame.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite power"));
            let median = sorted[(sorted.len() - 1) / 2];
            if var < 1e-8 && mean >= median {
                saturated_frames += 1;
            }
        }
        let frame_total: f64 = frame.iter().sum();
        for &p in &frame[mid_start.min(half)..hi_start.min(half)] {
            mid_total += 1;
            // numeric proxy for an exactly emptied bin, relative to the frame
            if p < 1e-9 * frame_total {
                near_zero_mid += 1;
            }
        }
    }
    let score = saturated_frames as f64 / s.frames.max(1) as f64
        + near_zero_mid as f64 / mid_total.max(1) as f64;
    Ok(DetectionReport::judge(DetectorKind::Saturation, score, threshold, 1))
}

/// Thresholds for the suite, typically calibrated at the 99th percentile of
/// benign scores.
#[derive(Debug, Clone)]
pub struct DetectorSuite {
    pub hermitian_tol: f64,
    pub nyquist_cutoff_hz: f64,
    pub nyquist_threshold: f64,
    pub reconstruction_iterations: usize,
    pub reconstruction_threshold: f64,
    pub saturation_threshold: f64,
    pub seed: u64,
}

impl Default for DetectorSuite {
    fn default() -> Self {
        DetectorSuite {
            hermitian_tol: HERMITIAN_TOL,
            nyquist_cutoff_hz: 7000.0,
            nyquist_threshold: 0.01,
            reconstruction_iterations: RECONSTRUCTION_ITERATIONS,
            reconstruction_threshold: RECONSTRUCTION_THRESHOLD,
            saturation_threshold: SATURATION_THRESHOLD,
            seed: 0,
        }
    }
}

/// What the defender is inspecting: a stage-3 waveform or a stage-1
/// spectrogram object.
pub enum DetectionInput<'a> {
    Audio(&'a Waveform),
    Spectrogram(&'a Spectrogram),
}

/// Output of [`run_all`]: every requested control's report plus the overall
/// call. The sample is surreptitious-capable only when every control stays
/// clean.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub reports: Vec<DetectionReport>,
    pub surreptitious_capable: bool,
}

impl SuiteOutcome {
    pub fn fired(&self) -> Vec<DetectorKind> {
        self.reports.iter().filter(|r| r.is_flagged()).map(|r| r.detector).collect()
    }
}

/// Run the selected controls over a sample. Audio samples are analyzed under
/// `params`; the reconstruction control uses `reference` when given and the
/// sample's own audio otherwise.
pub fn run_all(
    suite: &DetectorSuite,
    controls: &[DetectorKind],
    input: &DetectionInput<'_>,
    reference: Option<&Waveform>,
    params: &StftParams,
) -> Result<SuiteOutcome> {
    let owned_spec;
    let (spec, audio): (&Spectrogram, Option<&Waveform>) = match input {
        DetectionInput::Audio(w) => {
            owned_spec = stft(w, params)?;
            (&owned_spec, Some(*w))
        }
        DetectionInput::Spectrogram(s) => (*s, None),
    };
    let mut reports = Vec::new();
    for control in controls {
        let report = match control {
            DetectorKind::Hermitian => hermitian_check(spec, suite.hermitian_tol)?,
            DetectorKind::Nyquist => {
                nyquist_monitor(spec, suite.nyquist_cutoff_hz, suite.nyquist_threshold)?
            }
            DetectorKind::Saturation => saturation_heuristic(spec, suite.saturation_threshold)?,
            DetectorKind::Reconstruction => {
                let rf = reference.or(audio).ok_or_else(|| {
                    CoreError::InvalidInput(
                        "reconstruction control needs a reference waveform".into(),
                    )
                })?;
                reconstruction_detector(
                    spec,
                    rf,
                    suite.reconstruction_iterations,
                    suite.reconstruction_threshold,
                    suite.seed,
                )?
            }
        };
        reports.push(report);
    }
    let surreptitious_capable = reports.iter().all(|r| !r.is_flagged());
    Ok(SuiteOutcome { reports, surreptitious_capable })
}

/// Threshold at the given percentile (for example 0.99) of benign scores.
pub fn calibrate_threshold(scores: &[f64], percentile: f64) -> f64 {
    debug_assert!(!scores.is_empty());
    let mut v = scores.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let idx = ((percentile * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}
