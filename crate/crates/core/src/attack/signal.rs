//! Signal-level attacks that need no gradients: overt sine insertion and
//! spectral thresholding.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::fft::Dft;

use crate::dsp::Waveform;

/// Add pure tones at the given frequencies, clipping the sum to `[-1, 1]`.
pub fn sine_insertion(x: &Waveform, freqs_hz: &[f64], amplitude: f64) -> Result<Waveform> {
    let fs = x.sample_rate as f64;
    for &f in freqs_hz {
        if !(f > 0.0 && f < fs / 2.0) {
            return Err(CoreError::InvalidArgument(alloc::format!(
                "insertion frequency {f} Hz must be in (0, {})",
                fs / 2.0
            )));
        }
    }
    let mut samples = x.samples.clone();
    for (n, v) in samples.iter_mut().enumerate() {
        let t = n as f64 / fs;
        for &f in freqs_hz {
            *v += amplitude * (core::f64::consts::TAU * f * t).sin();
        }
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(Waveform { samples, sample_rate: x.sample_rate })
}

/// Whole-signal spectral thresholding: keep the strongest DFT components
/// until `keep_fraction` of the total power is retained, zero the rest, and
/// return the real part of the inverse transform. Mirrored coefficient pairs
/// are kept or dropped together.
pub fn fft_threshold(x: &Waveform, keep_fraction: f64) -> Result<Waveform> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(CoreError::InvalidArgument("keep_fraction must be in (0, 1]".into()));
    }
    let n = x.len();
    let plan = Dft::new(n);
    let mut re = x.samples.clone();
    let mut im = vec![0.0; n];
    plan.forward(&mut re, &mut im);

    // Rank non-mirrored bins by power; each interior bin represents its
    // mirror too.
    let half = n / 2;
    let mut order: Vec<usize> = (0..=half).collect();
    let pair_power = |k: usize| -> f64 {
        let p = re[k] * re[k] + im[k] * im[k];
        if k == 0 || (n % 2 == 0 && k == half) {
            p
        } else {
            2.0 * p
        }
    };
    order.sort_by(|&a, &b| pair_power(b).partial_cmp(&pair_power(a)).expect("finite powers"));
    let total: f64 = order.iter().map(|&k| pair_power(k)).sum();

    let mut keep = vec![false; half + 1];
    let mut acc = 0.0;
    for &k in &order {
        if acc >= keep_fraction * total && acc > 0.0 {
            break;
        }
        keep[k] = true;
        acc += pair_power(k);
    }
    for k in 0..=half {
        if !keep[k] {
            re[k] = 0.0;
            im[k] = 0.0;
            if k != 0 && !(n % 2 == 0 && k == half) {
                re[n - k] = 0.0;
                im[n - k] = 0.0;
            }
        }
    }
    plan.inverse(&mut re, &mut im);
    Ok(Waveform { samples: re, sample_rate: x.sample_rate })
}
