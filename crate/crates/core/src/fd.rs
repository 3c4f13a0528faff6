//! Finite-difference gradient checking. The oracle the whole autodiff layer
//! is validated against: central differences over seeded random inputs,
//! independent of the backward implementation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::rng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// How to sample one input tensor for a check.
#[derive(Debug, Clone)]
pub struct FdInput {
    pub shape: Vec<usize>,
    pub lo: f64,
    pub hi: f64,
    /// Keep |value| >= 0.1 so kinked ops (relu, |.|) are probed away from
    /// their non-differentiable points.
    pub avoid_zero: bool,
    /// Draw from a shuffled distinct grid (argmax-style ops would otherwise
    /// hit near ties).
    pub distinct: bool,
}

impl FdInput {
    pub fn smooth(shape: &[usize]) -> Self {
        FdInput { shape: shape.to_vec(), lo: -1.0, hi: 1.0, avoid_zero: false, distinct: false }
    }

    pub fn positive(shape: &[usize], lo: f64, hi: f64) -> Self {
        FdInput { shape: shape.to_vec(), lo, hi, avoid_zero: false, distinct: false }
    }

    pub fn kinked(shape: &[usize]) -> Self {
        FdInput { shape: shape.to_vec(), lo: -1.0, hi: 1.0, avoid_zero: true, distinct: false }
    }

    pub fn distinct(shape: &[usize]) -> Self {
        FdInput { shape: shape.to_vec(), lo: -1.0, hi: 1.0, avoid_zero: false, distinct: true }
    }

    pub fn sample(&self, r: &mut rng::SeedRng) -> Vec<f64> {
        let n: usize = self.shape.iter().product();
        if self.distinct {
            let mut vals: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) * 0.11).collect();
            for i in (1..n).rev() {
                let j = (rng::uniform(r, 0.0, (i + 1) as f64) as usize).min(i);
                vals.swap(i, j);
            }
            return vals;
        }
        (0..n)
            .map(|_| {
                let v = rng::uniform(r, self.lo, self.hi);
                if self.avoid_zero {
                    let mag = 0.1 + v.abs() * 0.9;
                    if v >= 0.0 {
                        mag
                    } else {
                        -mag
                    }
                } else {
                    v
                }
            })
            .collect()
    }
}

/// Largest relative error found, or an error description. `build` must end
/// in a scalar.
pub fn check_op<F>(
    name: &str,
    inputs: &[FdInput],
    seeds: u64,
    h: f64,
    tol: f64,
    build: F,
) -> Result<f64, String>
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut r = rng::substream(0xC0FFEE, seed);
        let samples: Vec<Vec<f64>> = inputs.iter().map(|s| s.sample(&mut r)).collect();

        let eval = |vals: &[Vec<f64>]| -> f64 {
            let mut tape = Tape::new();
            let vars: Vec<Var> = inputs
                .iter()
                .zip(vals.iter())
                .map(|(s, v)| {
                    tape.leaf(Tensor::new(s.shape.clone(), v.clone()).expect("shape").with_grad())
                })
                .collect();
            let out = build(&mut tape, &vars);
            tape.value(out).item()
        };

        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs
            .iter()
            .zip(samples.iter())
            .map(|(s, v)| {
                tape.leaf(Tensor::new(s.shape.clone(), v.clone()).expect("shape").with_grad())
            })
            .collect();
        let out = build(&mut tape, &vars);
        let grads = tape.backward(out).map_err(|e| alloc::format!("{name}: {e}"))?;

        for (ii, spec) in inputs.iter().enumerate() {
            let ad = grads.wrt(vars[ii]).unwrap_or(&[]);
            let n: usize = spec.shape.iter().product();
            if ad.len() != n {
                return Err(alloc::format!("{name}: missing gradient for input {ii}"));
            }
            for ei in 0..n {
                let mut plus = samples.clone();
                plus[ii][ei] += h;
                let mut minus = samples.clone();
                minus[ii][ei] -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let denom = ad[ei].abs().max(fd.abs()).max(1e-6);
                let rel = (ad[ei] - fd).abs() / denom;
                if rel > tol && (ad[ei] - fd).abs() > 1e-6 {
                    return Err(alloc::format!(
                        "{name} seed {seed} input {ii} elem {ei}: tape {} vs fd {fd} (rel {rel:.2e})",
                        ad[ei]
                    ));
                }
                worst = worst.max(rel);
            }
        }
    }
    Ok(worst)
}

/// Linear probe reducing an op output to a scalar: `sum(x * w)` with fixed
/// pseudo-random weights.
pub fn linear_probe(tape: &mut Tape, x: Var) -> Var {
    let n = tape.value(x).numel();
    let shape = tape.value(x).shape().to_vec();
    let mut r = rng::rng(0xBEEF ^ n as u64);
    let mut w = vec![0.0; n];
    rng::fill_uniform(&mut r, &mut w, -1.0, 1.0);
    let wv = tape.constant(Tensor::new(shape, w).expect("shape"));
    let p = tape.mul(x, wv).expect("same shape");
    tape.sum(p)
}

/// Kink-aware spot check of `grad` against central differences of `loss_of`
/// at `count` random coordinates. Coordinates whose two-step-size central
/// differences disagree straddle a relu/pool kink and are resampled.
/// Returns the number of coordinates actually checked.
pub fn spot_check_smooth<F>(
    samples: &[f64],
    grad: &[f64],
    count: usize,
    h: f64,
    tol: f64,
    seed: u64,
    loss_of: F,
) -> Result<usize, String>
where
    F: Fn(&[f64]) -> f64,
{
    let central = |at: usize, h: f64| -> f64 {
        let mut plus = samples.to_vec();
        plus[at] += h;
        let mut minus = samples.to_vec();
        minus[at] -= h;
        (loss_of(&plus) - loss_of(&minus)) / (2.0 * h)
    };
    let mut r = rng::rng(seed);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < count && attempts < count * 12 {
        attempts += 1;
        let at = (rng::uniform(&mut r, 0.0, samples.len() as f64) as usize).min(samples.len() - 1);
        let fd_wide = central(at, h);
        let fd = central(at, h / 2.0);
        if (fd_wide - fd).abs() > 1e-3 * fd_wide.abs().max(fd.abs()).max(1e-8) {
            continue;
        }
        let denom = grad[at].abs().max(fd.abs()).max(1e-6);
        if (grad[at] - fd).abs() / denom > tol && (grad[at] - fd).abs() > 1e-7 {
            return Err(alloc::format!(
                "coordinate {at}: tape {} vs fd {fd}",
                grad[at]
            ));
        }
        checked += 1;
    }
    Ok(checked)
}
