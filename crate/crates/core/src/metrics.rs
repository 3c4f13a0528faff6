//! Distortion measurement and accuracy-curve helpers.

use alloc::format;
use alloc::vec::Vec;

use crate::dsp::Waveform;
use crate::error::{shape_err, Result};
use crate::pipeline::PipelineModel;

/// Which pipeline stage a distortion is measured at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Digital audio.
    Stage3,
    /// Model-input spectrogram grid.
    Stage1,
}

/// Max-abs difference of two equally shaped value buffers.
pub fn linf(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(shape_err("linf", format!("{} vs {} values", a.len(), b.len())));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Infinity-norm distortion between clean and adversarial audio at the named
/// stage of `pipeline`. Stage 1 pushes both signals through the pipeline's
/// spectrogram front end (normalized where the pipeline normalizes).
pub fn distortion(
    clean: &Waveform,
    adv: &Waveform,
    stage: Stage,
    pipeline: &PipelineModel,
) -> Result<f64> {
    match stage {
        Stage::Stage3 => linf(&clean.samples, &adv.samples),
        Stage::Stage1 => {
            let a = pipeline.stage1_features(clean)?;
            let b = pipeline.stage1_features(adv)?;
            linf(&a, &b)
        }
    }
}

/// A swept operating curve: `x` strictly increasing (e.g. epsilon grid),
/// `y` the measured response (e.g. accuracy).
pub fn interp_at(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    debug_assert!(!xs.is_empty());
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    for i in 1..xs.len() {
        if x <= xs[i] {
            let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return ys[i - 1] + t * (ys[i] - ys[i - 1]);
        }
    }
    ys[ys.len() - 1]
}

/// Smallest x (linearly interpolated) at which the monotone-ish response
/// first reaches `target` going downward. `None` when it never does.
pub fn first_x_reaching(xs: &[f64], ys: &[f64], target: f64) -> Option<f64> {
    debug_assert_eq!(xs.len(), ys.len());
    if ys.is_empty() {
        return None;
    }
    if ys[0] <= target {
        return Some(xs[0]);
    }
    for i in 1..ys.len() {
        if ys[i] <= target {
            let t = (ys[i - 1] - target) / (ys[i - 1] - ys[i]);
            return Some(xs[i - 1] + t * (xs[i] - xs[i - 1]));
        }
    }
    None
}

/// Geometric grid of `points` values spanning `[lo, hi]` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    #[allow(unused_imports)]
    use num_traits::Float;
    debug_assert!(lo > 0.0 && hi > lo && points >= 2);
    let ratio = (hi / lo).ln() / (points - 1) as f64;
    (0..points).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// Median of a list (ties toward the lower middle). Not defined for empty
/// input.
pub fn median(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaNs in medians"));
    v[(v.len() - 1) / 2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::DEFAULT_SAMPLE_RATE;
    use crate::pipeline::{PipelineKind, PipelineModel};

    fn tone() -> Waveform {
        let samples = (0..16_000)
            .map(|n| 0.3 * (2.0 * core::f64::consts::PI * 440.0 * n as f64 / 16_000.0).sin())
            .collect();
        Waveform::new(samples, DEFAULT_SAMPLE_RATE).unwrap()
    }

    #[test]
    fn zero_distortion_for_identical_inputs() {
        let model = PipelineModel::build(PipelineKind::Sbp, 10, 1).unwrap();
        let w = tone();
        assert_eq!(distortion(&w, &w, Stage::Stage3, &model).unwrap(), 0.0);
        assert_eq!(distortion(&w, &w, Stage::Stage1, &model).unwrap(), 0.0);
    }

    #[test]
    fn single_sample_bump_is_exact() {
        let model = PipelineModel::build(PipelineKind::Sbp, 10, 1).unwrap();
        let w = tone();
        let mut adv = w.clone();
        adv.samples[123] += 0.5;
        assert_eq!(distortion(&w, &adv, Stage::Stage3, &model).unwrap(), 0.5);
    }

    #[test]
    fn stage1_distortion_matches_direct_recomputation() {
        let model = PipelineModel::build(PipelineKind::Sbp, 10, 1).unwrap();
        let w = tone();
        let mut adv = w.clone();
        for (i, v) in adv.samples.iter_mut().enumerate() {
            *v += 1e-3 * ((i % 7) as f64 - 3.0) / 3.0;
        }
        let d = distortion(&w, &adv, Stage::Stage1, &model).unwrap();
        let a = model.stage1_features(&w).unwrap();
        let b = model.stage1_features(&adv).unwrap();
        let direct =
            a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!((d - direct).abs() <= 1e-9 * direct.max(1e-12));
    }

    #[test]
    fn interpolation_and_threshold_search() {
        let xs = [1.0, 2.0, 4.0];
        let ys = [0.9, 0.5, 0.1];
        assert_eq!(interp_at(&xs, &ys, 1.0), 0.9);
        assert!((interp_at(&xs, &ys, 3.0) - 0.3).abs() < 1e-12);
        let x = first_x_reaching(&xs, &ys, 0.5).unwrap();
        assert!((x - 2.0).abs() < 1e-12);
        assert!(first_x_reaching(&xs, &ys, 0.05).is_none());
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(1e-5, 1e-1, 13);
        assert_eq!(g.len(), 13);
        assert!((g[0] - 1e-5).abs() < 1e-18);
        assert!((g[12] - 1e-1).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.0);
    }
}
