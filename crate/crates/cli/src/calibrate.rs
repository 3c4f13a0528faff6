//! Detector threshold calibration: the operating point of every statistical
//! control is the 99th percentile of its score on benign training audio.

use anyhow::Result;
use surreptix_core::detect::{
    calibrate_threshold, nyquist_monitor, reconstruction_detector, saturation_heuristic,
    DetectorSuite,
};
use surreptix_core::dsp::{stft, StftParams};
use surreptix_core::synth::Dataset;

pub const CALIBRATION_PERCENTILE: f64 = 0.99;
/// Cap on how many benign samples the expensive reconstruction calibration
/// scans.
const MAX_RECONSTRUCTION_SAMPLES: usize = 200;

/// Calibrate the statistical thresholds of `base` on the training split of a
/// benign corpus. The symmetry check keeps its fixed tolerance: it is a
/// deterministic property of real audio, not a statistic.
pub fn calibrate_suite(
    data: &Dataset,
    params: &StftParams,
    base: &DetectorSuite,
) -> Result<DetectorSuite> {
    let mut nyquist = Vec::new();
    let mut saturation = Vec::new();
    let mut reconstruction = Vec::new();
    for (pos, &idx) in data.train.iter().enumerate() {
        let wave = &data.samples[idx].0;
        let spec = stft(wave, params)?;
        nyquist.push(nyquist_monitor(&spec, base.nyquist_cutoff_hz, f64::INFINITY)?.score);
        saturation.push(saturation_heuristic(&spec, f64::INFINITY)?.score);
        if pos < MAX_RECONSTRUCTION_SAMPLES {
            reconstruction.push(
                reconstruction_detector(
                    &spec,
                    wave,
                    base.reconstruction_iterations,
                    f64::INFINITY,
                    base.seed,
                )?
                .score,
            );
        }
    }
    Ok(DetectorSuite {
        nyquist_threshold: calibrate_threshold(&nyquist, CALIBRATION_PERCENTILE),
        saturation_threshold: calibrate_threshold(&saturation, CALIBRATION_PERCENTILE),
        reconstruction_threshold: calibrate_threshold(&reconstruction, CALIBRATION_PERCENTILE),
        ..base.clone()
    })
}
