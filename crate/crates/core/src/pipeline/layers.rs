//! Classifier building blocks. Each layer owns its parameter tensors and
//! knows how to place them on a tape and run its forward op.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Result;
use crate::rng::{self, SeedRng};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub enum Layer {
    Conv2d { w: Tensor, b: Tensor, stride: (usize, usize) },
    Conv1d { w: Tensor, b: Tensor, stride: usize },
    /// Learnable sinc band-pass bank; `params` is `[2, filters]` raw cutoffs.
    SincConv { params: Tensor, taps: usize, stride: usize, min_f: f64, min_band: f64 },
    Dense { w: Tensor, b: Tensor },
    Relu,
    MaxPool2d(usize),
    MaxPool1d(usize),
    Flatten,
}

fn uniform_tensor(r: &mut SeedRng, shape: Vec<usize>, bound: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let mut data = alloc::vec![0.0; n];
    rng::fill_uniform(r, &mut data, -bound, bound);
    Tensor::new(shape, data).expect("shape matches data")
}

impl Layer {
    pub fn conv2d(r: &mut SeedRng, oc: usize, ic: usize, kh: usize, kw: usize, stride: (usize, usize)) -> Self {
        let bound = (6.0 / (ic * kh * kw) as f64).sqrt();
        Layer::Conv2d {
            w: uniform_tensor(r, alloc::vec![oc, ic, kh, kw], bound),
            b: Tensor::zeros(alloc::vec![oc]),
            stride,
        }
    }

    pub fn conv1d(r: &mut SeedRng, oc: usize, ic: usize, k: usize, stride: usize) -> Self {
        let bound = (6.0 / (ic * k) as f64).sqrt();
        Layer::Conv1d {
            w: uniform_tensor(r, alloc::vec![oc, ic, k], bound),
            b: Tensor::zeros(alloc::vec![oc]),
            stride,
        }
    }

    pub fn dense(r: &mut SeedRng, out: usize, inp: usize) -> Self {
        let bound = (6.0 / inp as f64).sqrt();
        Layer::Dense {
            w: uniform_tensor(r, alloc::vec![out, inp], bound),
            b: Tensor::zeros(alloc::vec![out]),
        }
    }

    /// Sinc bank with cutoffs spread over the Mel scale between `lo_hz` and
    /// `hi_hz`.
    pub fn sinc_bank(
        filters: usize,
        taps: usize,
        stride: usize,
        lo_hz: f64,
        hi_hz: f64,
        sample_rate: u32,
    ) -> Self {
        use crate::dsp::mel::{hz_to_mel, mel_to_hz};
        let fs = sample_rate as f64;
        let min_f = 30.0 / fs;
        let min_band = 50.0 / fs;
        let (mlo, mhi) = (hz_to_mel(lo_hz), hz_to_mel(hi_hz));
        let mut data = alloc::vec![0.0; 2 * filters];
        for i in 0..filters {
            let m0 = mlo + (mhi - mlo) * i as f64 / filters as f64;
            let m1 = mlo + (mhi - mlo) * (i + 1) as f64 / filters as f64;
            let f_low = mel_to_hz(m0) / fs;
            let band = (mel_to_hz(m1) - mel_to_hz(m0)) / fs;
            data[i] = (f_low - min_f).max(0.0);
            data[filters + i] = (band - min_band).max(0.0);
        }
        Layer::SincConv {
            params: Tensor::new(alloc::vec![2, filters], data).expect("shape matches"),
            taps,
            stride,
            min_f,
            min_band,
        }
    }

    /// Parameter tensors in declaration order.
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv2d { w, b, .. } | Layer::Conv1d { w, b, .. } | Layer::Dense { w, b } => {
                alloc::vec![w, b]
            }
            Layer::SincConv { params, .. } => alloc::vec![params],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv2d { w, b, .. } | Layer::Conv1d { w, b, .. } | Layer::Dense { w, b } => {
                alloc::vec![w, b]
            }
            Layer::SincConv { params, .. } => alloc::vec![params],
            _ => Vec::new(),
        }
    }

    /// Put this layer's parameters on the tape, marking them trainable when
    /// requested. Returns the vars in the same order as [`Layer::params`].
    pub fn leaf_params(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.params()
            .into_iter()
            .map(|t| {
                let t = if trainable { t.clone().with_grad() } else { t.clone() };
                tape.leaf(t)
            })
            .collect()
    }

    /// Run the layer. `params` must come from [`Layer::leaf_params`].
    pub fn forward(&self, tape: &mut Tape, x: Var, params: &[Var]) -> Result<Var> {
        match self {
            Layer::Conv2d { stride, .. } => {
                let y = tape.conv2d(x, params[0], *stride)?;
                tape.channel_bias(y, params[1])
            }
            Layer::Conv1d { stride, .. } => {
                let y = tape.conv1d(x, params[0], *stride)?;
                tape.channel_bias(y, params[1])
            }
            Layer::SincConv { taps, stride, min_f, min_band, .. } => {
                let kern = tape.sinc_kernel(params[0], *taps, *min_f, *min_band)?;
                tape.conv1d(x, kern, *stride)
            }
            Layer::Dense { .. } => {
                let y = tape.matmul(params[0], x)?;
                tape.add(y, params[1])
            }
            Layer::Relu => Ok(tape.relu(x)),
            Layer::MaxPool2d(k) => tape.max_pool2d(x, *k),
            Layer::MaxPool1d(k) => tape.max_pool1d(x, *k),
            Layer::Flatten => {
                let n = tape.value(x).numel();
                tape.reshape(x, alloc::vec![n])
            }
        }
    }

    /// Effective low/high cutoffs in Hz for a sinc bank, `None` otherwise.
    pub fn sinc_cutoffs_hz(&self, sample_rate: u32) -> Option<Vec<(f64, f64)>> {
        match self {
            Layer::SincConv { params, min_f, min_band, .. } => {
                let f = params.shape()[1];
                let d = params.data();
                let fs = sample_rate as f64;
                Some(
                    (0..f)
                        .map(|i| {
                            let f1 = min_f + d[i].abs();
                            let f2 = f1 + min_band + d[f + i].abs();
                            (f1 * fs, f2 * fs)
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// Clamp raw sinc parameters so every filter keeps
    /// `0 < f_low < f_high < fs/2` after an optimizer step.
    pub fn project_sinc_constraints(&mut self) {
        if let Layer::SincConv { params, min_f, min_band, .. } = self {
            let f = params.shape()[1];
            let (min_f, min_band) = (*min_f, *min_band);
            let shape = params.shape().to_vec();
            let mut data = params.data().to_vec();
            for i in 0..f {
                let max_f1 = 0.45 - min_f;
                data[i] = data[i].signum() * data[i].abs().min(max_f1);
                let f1 = min_f + data[i].abs();
                let max_band = (0.49 - f1 - min_band).max(0.0);
                data[f + i] = data[f + i].signum() * data[f + i].abs().min(max_band);
            }
            *params = Tensor::new(shape, data).expect("shape unchanged");
        }
    }
}
