//! Reverse-mode automatic differentiation on a linear tape.
//!
//! Ops append nodes in execution order, so every node's inputs precede it and
//! the backward pass is a single reverse sweep that visits each node exactly
//! once. A tape is single-threaded by construction; parallelism happens across
//! independent samples, never inside one tape.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{shape_err, CoreError, Result};
use crate::fft::Dft;
use crate::kernels;
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

pub struct Tape {
    nodes: Vec<Node>,
}

struct Node {
    value: Tensor,
    needs_grad: bool,
    op: Op,
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Matmul(Var, Var),
    ChannelBias(Var, Var),
    Conv1d { input: Var, kernel: Var, stride: usize, col: Vec<f64> },
    Conv2d { input: Var, kernel: Var, stride: (usize, usize), col: Vec<f64> },
    SincKernel { params: Var, taps: usize, min_f: f64, min_band: f64 },
    Relu(Var),
    MaxPool1d { input: Var, arg: Vec<u32> },
    MaxPool2d { input: Var, arg: Vec<u32> },
    Reshape(Var),
    Transpose2d(Var),
    FrameSplit { input: Var, win: usize, hop: usize },
    WindowApply { frames: Var, window: Var },
    DftPower { frames: Var, n_fft: usize, spec_re: Vec<f64>, spec_im: Vec<f64> },
    ColNormalize { input: Var, mean: Var, inv_std: Var },
    MelProject { power: Var, weights: Var },
    LogFloor { input: Var, floor: f64 },
    Dct2 { input: Var, basis: Vec<f64>, n_out: usize },
    L2Norm(Var),
    Sum(Var),
    CrossEntropySoftmax { logits: Var, label: usize, probs: Vec<f64> },
    CrossEntropySoft { logits: Var, temperature: f64, probs: Vec<f64>, targets: Vec<f64> },
    CrossEntropyTargetSet { logits: Var, set: Vec<usize>, probs: Vec<f64> },
}

/// Per-leaf gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the backward output with respect to `v`, if any flowed.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Place a tensor on the tape. It participates in differentiation when
    /// `t.requires_grad()` is set.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let needs = t.requires_grad();
        self.push(t, needs, Op::Leaf)
    }

    /// Place a non-differentiated constant on the tape.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, needs_grad: bool, op: Op) -> Var {
        self.nodes.push(Node { value, needs_grad, op });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    // ---- elementwise and linear ops ------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn zip_op(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(
                name,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let data: Vec<f64> =
            self.data(a).iter().zip(self.data(b).iter()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, needs, op))
    }

    /// Multiply by a compile-time scalar (the only broadcasting this engine
    /// permits).
    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let data: Vec<f64> = self.data(x).iter().map(|&v| c * v).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(value, needs, Op::Scale(x, c))
    }

    /// `[m,k] x [k,n] -> [m,n]`, or `[m,k] x [k] -> [m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ash, bsh) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k) = match ash.as_slice() {
            [m, k] => (*m, *k),
            _ => return Err(shape_err("matmul", format!("lhs must be 2-D, got {ash:?}"))),
        };
        let (k2, n, out_shape) = match bsh.as_slice() {
            [k2, n] => (*k2, *n, vec![m, *n]),
            [k2] => (*k2, 1, vec![m]),
            _ => return Err(shape_err("matmul", format!("rhs must be 1-D or 2-D, got {bsh:?}"))),
        };
        if k != k2 {
            return Err(shape_err("matmul", format!("inner dims {k} vs {k2}")));
        }
        let mut out = vec![0.0; m * n];
        kernels::matmul(m, k, n, self.data(a), self.data(b), &mut out);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(out_shape, out)?, needs, Op::Matmul(a, b)))
    }

    /// Add a per-channel bias to a channel-major tensor `[c, ...]`.
    pub fn channel_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xsh = self.shape(x).to_vec();
        let c = *xsh.first().ok_or_else(|| {
            shape_err("channel_bias", format!("input must have rank >= 1, got {xsh:?}"))
        })?;
        if self.shape(bias) != [c] {
            return Err(shape_err(
                "channel_bias",
                format!("bias {:?} vs {} channels", self.shape(bias), c),
            ));
        }
        let per = self.data(x).len() / c;
        let mut out = self.data(x).to_vec();
        let bdata = self.data(bias);
        for ci in 0..c {
            let bv = bdata[ci];
            for v in out[ci * per..(ci + 1) * per].iter_mut() {
                *v += bv;
            }
        }
        let needs = self.needs(x) || self.needs(bias);
        Ok(self.push(Tensor::new(xsh, out)?, needs, Op::ChannelBias(x, bias)))
    }

    // ---- convolutions ---------------------------------------------------

    /// Valid 1-D convolution: input `[c, l]`, kernel `[oc, c, k]`, stride `s`.
    pub fn conv1d(&mut self, input: Var, kernel: Var, stride: usize) -> Result<Var> {
        let ish = self.shape(input).to_vec();
        let ksh = self.shape(kernel).to_vec();
        let (c, l) = match ish.as_slice() {
            [c, l] => (*c, *l),
            _ => return Err(shape_err("conv1d", format!("input must be [c, l], got {ish:?}"))),
        };
        let (oc, kc, kk) = match ksh.as_slice() {
            [oc, kc, kk] => (*oc, *kc, *kk),
            _ => {
                return Err(shape_err("conv1d", format!("kernel must be [oc, c, k], got {ksh:?}")))
            }
        };
        if kc != c || kk > l || stride == 0 {
            return Err(shape_err(
                "conv1d",
                format!("input [{c}, {l}] vs kernel [{oc}, {kc}, {kk}] stride {stride}"),
            ));
        }
        let ol = kernels::conv_out_len(l, kk, stride);
        let col = kernels::im2col_1d(self.data(input), c, l, kk, stride);
        let mut out = vec![0.0; oc * ol];
        kernels::matmul(oc, c * kk, ol, self.data(kernel), &col, &mut out);
        let needs = self.needs(input) || self.needs(kernel);
        Ok(self.push(
            Tensor::new(vec![oc, ol], out)?,
            needs,
            Op::Conv1d { input, kernel, stride, col },
        ))
    }

    /// Valid 2-D convolution: input `[c, h, w]`, kernel `[oc, c, kh, kw]`.
    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: (usize, usize)) -> Result<Var> {
        let ish = self.shape(input).to_vec();
        let ksh = self.shape(kernel).to_vec();
        let (c, h, w) = match ish.as_slice() {
            [c, h, w] => (*c, *h, *w),
            _ => return Err(shape_err("conv2d", format!("input must be [c, h, w], got {ish:?}"))),
        };
        let (oc, kc, kh, kw) = match ksh.as_slice() {
            [oc, kc, kh, kw] => (*oc, *kc, *kh, *kw),
            _ => {
                return Err(shape_err(
                    "conv2d",
                    format!("kernel must be [oc, c, kh, kw], got {ksh:?}"),
                ))
            }
        };
        if kc != c || kh > h || kw > w || stride.0 == 0 || stride.1 == 0 {
            return Err(shape_err(
                "conv2d",
                format!("input [{c}, {h}, {w}] vs kernel [{oc}, {kc}, {kh}, {kw}]"),
            ));
        }
        let oh = kernels::conv_out_len(h, kh, stride.0);
        let ow = kernels::conv_out_len(w, kw, stride.1);
        let col = kernels::im2col_2d(self.data(input), c, h, w, kh, kw, stride.0, stride.1);
        let mut out = vec![0.0; oc * oh * ow];
        kernels::matmul(oc, c * kh * kw, oh * ow, self.data(kernel), &col, &mut out);
        let needs = self.needs(input) || self.needs(kernel);
        Ok(self.push(
            Tensor::new(vec![oc, oh, ow], out)?,
            needs,
            Op::Conv2d { input, kernel, stride, col },
        ))
    }

    /// Build a bank of band-pass FIR kernels from learnable cutoffs.
    ///
    /// `params` is `[2, f]`: row 0 holds raw low-cutoff parameters, row 1 raw
    /// bandwidths, both in cycles/sample. Effective cutoffs are
    /// `f_low = min_f + |raw0|` and `f_high = f_low + min_band + |raw1|`, which
    /// keeps `0 < f_low < f_high` for any parameter value. Output is a
    /// Hamming-windowed `[f, 1, taps]` kernel tensor.
    pub fn sinc_kernel(
        &mut self,
        params: Var,
        taps: usize,
        min_f: f64,
        min_band: f64,
    ) -> Result<Var> {
        let psh = self.shape(params).to_vec();
        let f = match psh.as_slice() {
            [2, f] => *f,
            _ => {
                return Err(shape_err("sinc_kernel", format!("params must be [2, f], got {psh:?}")))
            }
        };
        if taps % 2 == 0 || taps < 3 {
            return Err(CoreError::InvalidArgument(format!(
                "sinc_kernel taps must be odd and >= 3, got {taps}"
            )));
        }
        let data = self.data(params);
        let mut out = vec![0.0; f * taps];
        let center = (taps - 1) as f64 / 2.0;
        for fi in 0..f {
            let f1 = min_f + data[fi].abs();
            let f2 = f1 + min_band + data[f + fi].abs();
            for n in 0..taps {
                let t = n as f64 - center;
                let w = hamming_at(n, taps);
                let bp = band_tap(f2, t) - band_tap(f1, t);
                out[fi * taps + n] = bp * w;
            }
        }
        let needs = self.needs(params);
        Ok(self.push(
            Tensor::new(vec![f, 1, taps], out)?,
            needs,
            Op::SincKernel { params, taps, min_f, min_band },
        ))
    }

    // ---- nonlinearities and pooling --------------------------------------

    pub fn relu(&mut self, x: Var) -> Var {
        let data: Vec<f64> = self.data(x).iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(value, needs, Op::Relu(x))
    }

    /// Non-overlapping `k x k` max pooling over `[c, h, w]`.
    pub fn max_pool2d(&mut self, x: Var, k: usize) -> Result<Var> {
        let sh = self.shape(x).to_vec();
        let (c, h, w) = match sh.as_slice() {
            [c, h, w] => (*c, *h, *w),
            _ => return Err(shape_err("max_pool2d", format!("input must be [c,h,w], got {sh:?}"))),
        };
        if k == 0 || h < k || w < k {
            return Err(shape_err("max_pool2d", format!("window {k} on [{c}, {h}, {w}]")));
        }
        let (out, arg, oh, ow) = kernels::maxpool2d(self.data(x), c, h, w, k);
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(vec![c, oh, ow], out)?, needs, Op::MaxPool2d { input: x, arg }))
    }

    /// Non-overlapping width-`k` max pooling over `[c, l]`.
    pub fn max_pool1d(&mut self, x: Var, k: usize) -> Result<Var> {
        let sh = self.shape(x).to_vec();
        let (c, l) = match sh.as_slice() {
            [c, l] => (*c, *l),
            _ => return Err(shape_err("max_pool1d", format!("input must be [c,l], got {sh:?}"))),
        };
        if k == 0 || l < k {
            return Err(shape_err("max_pool1d", format!("window {k} on [{c}, {l}]")));
        }
        let (out, arg, ol) = kernels::maxpool1d(self.data(x), c, l, k);
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(vec![c, ol], out)?, needs, Op::MaxPool1d { input: x, arg }))
    }

    /// Reinterpret the buffer under a new shape with the same element count.
    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.data(x).len() {
            return Err(shape_err(
                "reshape",
                format!("{:?} ({} elems) -> {:?} ({numel} elems)", self.shape(x), self.data(x).len(), shape),
            ));
        }
        let value = Tensor::new(shape, self.data(x).to_vec())?;
        let needs = self.needs(x);
        Ok(self.push(value, needs, Op::Reshape(x)))
    }

    /// Transpose a matrix `[r, c] -> [c, r]`.
    pub fn transpose2d(&mut self, x: Var) -> Result<Var> {
        let sh = self.shape(x).to_vec();
        let (r, c) = match sh.as_slice() {
            [r, c] => (*r, *c),
            _ => return Err(shape_err("transpose2d", format!("input must be 2-D, got {sh:?}"))),
        };
        let src = self.data(x);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = src[i * c + j];
            }
        }
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(vec![c, r], out)?, needs, Op::Transpose2d(x)))
    }

    // ---- spectral front end ----------------------------------------------

    /// Split a signal `[n]` into overlapping frames `[t, win]`.
    pub fn frame_split(&mut self, x: Var, win: usize, hop: usize) -> Result<Var> {
        let sh = self.shape(x).to_vec();
        let n = match sh.as_slice() {
            [n] => *n,
            _ => return Err(shape_err("frame_split", format!("input must be 1-D, got {sh:?}"))),
        };
        if win == 0 || hop == 0 || n < win {
            return Err(CoreError::InvalidInput(format!(
                "frame_split: signal of {n} samples is shorter than one {win}-sample window"
            )));
        }
        let t = (n - win) / hop + 1;
        let mut out = vec![0.0; t * win];
        let data = self.data(x);
        for ti in 0..t {
            out[ti * win..(ti + 1) * win].copy_from_slice(&data[ti * hop..ti * hop + win]);
        }
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(vec![t, win], out)?, needs, Op::FrameSplit { input: x, win, hop }))
    }

    /// Multiply every row of `[t, win]` by a `[win]` window.
    pub fn window_apply(&mut self, frames: Var, window: Var) -> Result<Var> {
        let fsh = self.shape(frames).to_vec();
        let (t, win) = match fsh.as_slice() {
            [t, win] => (*t, *win),
            _ => {
                return Err(shape_err(
                    "window_apply",
                    format!("frames must be [t, win], got {fsh:?}"),
                ))
            }
        };
        if self.shape(window) != [win] {
            return Err(shape_err(
                "window_apply",
                format!("window {:?} vs frame width {win}", self.shape(window)),
            ));
        }
        let wdata = self.data(window).to_vec();
        let mut out = self.data(frames).to_vec();
        for ti in 0..t {
            for (v, &w) in out[ti * win..(ti + 1) * win].iter_mut().zip(wdata.iter()) {
                *v *= w;
            }
        }
        let needs = self.needs(frames) || self.needs(window);
        Ok(self.push(Tensor::new(fsh, out)?, needs, Op::WindowApply { frames, window }))
    }

    /// Power spectrum of each frame: rows of `[t, win]` are zero-padded to
    /// `n_fft` and transformed; output keeps all `n_fft` redundant bins.
    pub fn dft_power(&mut self, frames: Var, n_fft: usize) -> Result<Var> {
        let fsh = self.shape(frames).to_vec();
        let (t, win) = match fsh.as_slice() {
            [t, win] => (*t, *win),
            _ => return Err(shape_err("dft_power", format!("frames must be [t, win], got {fsh:?}"))),
        };
        if n_fft < win || n_fft < 2 {
            return Err(CoreError::InvalidArgument(format!(
                "dft_power: n_fft {n_fft} must be >= frame width {win} and >= 2"
            )));
        }
        let plan = Dft::new(n_fft);
        let data = self.data(frames);
        let mut spec_re = vec![0.0; t * n_fft];
        let mut spec_im = vec![0.0; t * n_fft];
        let mut out = vec![0.0; t * n_fft];
        for ti in 0..t {
            let re = &mut spec_re[ti * n_fft..(ti + 1) * n_fft];
            let im = &mut spec_im[ti * n_fft..(ti + 1) * n_fft];
            re[..win].copy_from_slice(&data[ti * win..(ti + 1) * win]);
            plan.forward(re, im);
            for k in 0..n_fft {
                out[ti * n_fft + k] = re[k] * re[k] + im[k] * im[k];
            }
        }
        let needs = self.needs(frames);
        Ok(self.push(
            Tensor::new(vec![t, n_fft], out)?,
            needs,
            Op::DftPower { frames, n_fft, spec_re, spec_im },
        ))
    }

    /// Normalize each column of `[t, k]` with fixed statistics:
    /// `out[t][j] = (x[t][j] - mean[j]) * inv_std[j]`.
    pub fn col_normalize(&mut self, x: Var, mean: Var, inv_std: Var) -> Result<Var> {
        let xsh = self.shape(x).to_vec();
        let (t, k) = match xsh.as_slice() {
            [t, k] => (*t, *k),
            _ => return Err(shape_err("col_normalize", format!("input must be [t,k], got {xsh:?}"))),
        };
        if self.shape(mean) != [k] || self.shape(inv_std) != [k] {
            return Err(shape_err(
                "col_normalize",
                format!(
                    "stats {:?}/{:?} vs {k} columns",
                    self.shape(mean),
                    self.shape(inv_std)
                ),
            ));
        }
        let mdata = self.data(mean).to_vec();
        let sdata = self.data(inv_std).to_vec();
        let mut out = self.data(x).to_vec();
        for ti in 0..t {
            let row = &mut out[ti * k..(ti + 1) * k];
            for j in 0..k {
                row[j] = (row[j] - mdata[j]) * sdata[j];
            }
        }
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(xsh, out)?, needs, Op::ColNormalize { input: x, mean, inv_std }))
    }

    /// Project power rows onto Mel filters. `weights` is `[m, h]` where `h`
    /// is the non-redundant bin count `n_fft/2 + 1`; the mirrored half of the
    /// spectrum is ignored.
    pub fn mel_project(&mut self, power: Var, weights: Var) -> Result<Var> {
        let psh = self.shape(power).to_vec();
        let wsh = self.shape(weights).to_vec();
        let (t, n_fft) = match psh.as_slice() {
            [t, n] => (*t, *n),
            _ => return Err(shape_err("mel_project", format!("power must be [t,n], got {psh:?}"))),
        };
        let (m, h) = match wsh.as_slice() {
            [m, h] => (*m, *h),
            _ => return Err(shape_err("mel_project", format!("weights must be [m,h], got {wsh:?}"))),
        };
        if h != n_fft / 2 + 1 {
            return Err(shape_err(
                "mel_project",
                format!("weights cover {h} bins, spectrum has {} non-redundant", n_fft / 2 + 1),
            ));
        }
        let pdata = self.data(power);
        let wdata = self.data(weights);
        let mut out = vec![0.0; t * m];
        for ti in 0..t {
            let row = &pdata[ti * n_fft..ti * n_fft + h];
            for mi in 0..m {
                let wrow = &wdata[mi * h..(mi + 1) * h];
                let mut acc = 0.0;
                for (&p, &w) in row.iter().zip(wrow.iter()) {
                    acc += p * w;
                }
                out[ti * m + mi] = acc;
            }
        }
        let needs = self.needs(power) || self.needs(weights);
        Ok(self.push(Tensor::new(vec![t, m], out)?, needs, Op::MelProject { power, weights }))
    }

    /// Elementwise `ln(max(x, floor))`.
    pub fn log_floor(&mut self, x: Var, floor: f64) -> Var {
        let data: Vec<f64> = self.data(x).iter().map(|&v| v.max(floor).ln()).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(value, needs, Op::LogFloor { input: x, floor })
    }

    /// Orthonormal DCT-II along rows: `[t, m] -> [t, n_out]`.
    pub fn dct2(&mut self, x: Var, n_out: usize) -> Result<Var> {
        let xsh = self.shape(x).to_vec();
        let (t, m) = match xsh.as_slice() {
            [t, m] => (*t, *m),
            _ => return Err(shape_err("dct2", format!("input must be [t,m], got {xsh:?}"))),
        };
        if n_out == 0 || n_out > m {
            return Err(CoreError::InvalidArgument(format!(
                "dct2: n_out {n_out} must be in 1..={m}"
            )));
        }
        let basis = dct2_basis(n_out, m);
        let mut out = vec![0.0; t * n_out];
        kernels::matmul_bt(t, m, n_out, self.data(x), &basis, &mut out);
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(vec![t, n_out], out)?, needs, Op::Dct2 { input: x, basis, n_out }))
    }

    // ---- reductions and losses --------------------------------------------

    /// Euclidean norm of all elements, as a scalar.
    pub fn l2_norm(&mut self, x: Var) -> Var {
        let norm = self.data(x).iter().map(|&v| v * v).sum::<f64>().sqrt();
        let needs = self.needs(x);
        self.push(Tensor::scalar(norm), needs, Op::L2Norm(x))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.data(x).iter().sum();
        let needs = self.needs(x);
        self.push(Tensor::scalar(total), needs, Op::Sum(x))
    }

    /// Softmax cross-entropy against a hard label, as a scalar.
    pub fn cross_entropy_softmax(&mut self, logits: Var, label: usize) -> Result<Var> {
        let sh = self.shape(logits).to_vec();
        let n = match sh.as_slice() {
            [n] => *n,
            _ => {
                return Err(shape_err(
                    "cross_entropy_softmax",
                    format!("logits must be 1-D, got {sh:?}"),
                ))
            }
        };
        if label >= n {
            return Err(CoreError::InvalidArgument(format!(
                "cross_entropy_softmax: label {label} out of range for {n} classes"
            )));
        }
        let probs = kernels::softmax(self.data(logits));
        let loss = -(probs[label].max(1e-300)).ln();
        let needs = self.needs(logits);
        Ok(self.push(Tensor::scalar(loss), needs, Op::CrossEntropySoftmax { logits, label, probs }))
    }

    /// Temperature-softened cross-entropy against a soft target distribution,
    /// scaled by `T^2` so gradient magnitudes stay comparable across
    /// temperatures.
    pub fn cross_entropy_soft(
        &mut self,
        logits: Var,
        targets: Vec<f64>,
        temperature: f64,
    ) -> Result<Var> {
        let sh = self.shape(logits).to_vec();
        let n = match sh.as_slice() {
            [n] => *n,
            _ => {
                return Err(shape_err(
                    "cross_entropy_soft",
                    format!("logits must be 1-D, got {sh:?}"),
                ))
            }
        };
        if targets.len() != n {
            return Err(shape_err(
                "cross_entropy_soft",
                format!("targets len {} vs {n} classes", targets.len()),
            ));
        }
        if temperature <= 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "cross_entropy_soft: temperature must be > 0, got {temperature}"
            )));
        }
        let scaled: Vec<f64> = self.data(logits).iter().map(|&v| v / temperature).collect();
        let probs = kernels::softmax(&scaled);
        let mut loss = 0.0;
        for (p, q) in targets.iter().zip(probs.iter()) {
            loss -= p * q.max(1e-300).ln();
        }
        loss *= temperature * temperature;
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            needs,
            Op::CrossEntropySoft { logits, temperature, probs, targets },
        ))
    }

    /// Negative log of the total softmax mass on a target set:
    /// `-ln(sum_{t in set} softmax(logits)_t)`.
    pub fn cross_entropy_target_set(&mut self, logits: Var, set: Vec<usize>) -> Result<Var> {
        let sh = self.shape(logits).to_vec();
        let n = match sh.as_slice() {
            [n] => *n,
            _ => {
                return Err(shape_err(
                    "cross_entropy_target_set",
                    format!("logits must be 1-D, got {sh:?}"),
                ))
            }
        };
        if set.is_empty() || set.iter().any(|&t| t >= n) {
            return Err(CoreError::InvalidArgument(format!(
                "target set {set:?} invalid for {n} classes"
            )));
        }
        let probs = kernels::softmax(self.data(logits));
        let mass: f64 = set.iter().map(|&t| probs[t]).sum();
        let loss = -mass.max(1e-300).ln();
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            needs,
            Op::CrossEntropyTargetSet { logits, set, probs },
        ))
    }

    // ---- backward ---------------------------------------------------------

    /// Reverse sweep from a scalar output. Returns the gradient of `output`
    /// with respect to every grad-requiring leaf (and intermediate).
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out_node = &self.nodes[output.0];
        if !out_node.value.is_scalar() {
            return Err(CoreError::NonScalarOutput(format!("{:?}", out_node.value.shape())));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(vec![1.0]);

        for idx in (0..=output.0).rev() {
            if grads[idx].is_none() || !self.nodes[idx].needs_grad {
                continue;
            }
            let (lower, upper) = grads.split_at_mut(idx);
            let g = upper[0].as_ref().expect("checked above").clone();
            self.backward_node(idx, &g, lower);
        }
        Ok(Gradients { grads })
    }

    fn backward_node(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let acc = |grads: &mut [Option<Vec<f64>>], v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.needs(v) {
                return;
            }
            let slot = &mut grads[v.0];
            if slot.is_none() {
                *slot = Some(vec![0.0; self.data(v).len()]);
            }
            f(slot.as_mut().expect("just created"));
        };

        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(grads, *a, &mut |ga| add_assign(ga, g));
                acc(grads, *b, &mut |gb| add_assign(gb, g));
            }
            Op::Sub(a, b) => {
                acc(grads, *a, &mut |ga| add_assign(ga, g));
                acc(grads, *b, &mut |gb| {
                    for (o, &v) in gb.iter_mut().zip(g.iter()) {
                        *o -= v;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                acc(grads, *a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * bd[i];
                    }
                });
                acc(grads, *b, &mut |gb| {
                    for i in 0..gb.len() {
                        gb[i] += g[i] * ad[i];
                    }
                });
            }
            Op::Scale(x, c) => {
                let c = *c;
                acc(grads, *x, &mut |gx| {
                    for (o, &v) in gx.iter_mut().zip(g.iter()) {
                        *o += c * v;
                    }
                });
            }
            Op::Matmul(a, b) => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = if self.shape(*b).len() == 2 { self.shape(*b)[1] } else { 1 };
                let (ad, bd) = (self.data(*a), self.data(*b));
                acc(grads, *a, &mut |ga| {
                    // ga += g . b^T
                    let mut tmp = vec![0.0; m * k];
                    kernels::matmul_bt(m, n, k, g, bd, &mut tmp);
                    add_assign(ga, &tmp);
                });
                acc(grads, *b, &mut |gb| {
                    kernels::matmul_at_acc(m, k, n, ad, g, gb);
                });
            }
            Op::ChannelBias(x, bias) => {
                let c = self.shape(*x)[0];
                let per = self.data(*x).len() / c;
                acc(grads, *x, &mut |gx| add_assign(gx, g));
                acc(grads, *bias, &mut |gb| {
                    for ci in 0..c {
                        gb[ci] += g[ci * per..(ci + 1) * per].iter().sum::<f64>();
                    }
                });
            }
            Op::Conv1d { input, kernel, stride, col } => {
                let (c, l) = (self.shape(*input)[0], self.shape(*input)[1]);
                let (oc, kk) = (self.shape(*kernel)[0], self.shape(*kernel)[2]);
                let ol = kernels::conv_out_len(l, kk, *stride);
                let kd = self.data(*kernel);
                acc(grads, *kernel, &mut |gk| {
                    kernels::matmul_bt_acc(oc, ol, c * kk, g, col, gk);
                });
                acc(grads, *input, &mut |gi| {
                    let mut gcol = vec![0.0; c * kk * ol];
                    kernels::matmul_at_acc(oc, c * kk, ol, kd, g, &mut gcol);
                    kernels::col2im_1d(&gcol, c, l, kk, *stride, gi);
                });
            }
            Op::Conv2d { input, kernel, stride, col } => {
                let ish = self.shape(*input);
                let (c, h, w) = (ish[0], ish[1], ish[2]);
                let ksh = self.shape(*kernel);
                let (oc, kh, kw) = (ksh[0], ksh[2], ksh[3]);
                let oh = kernels::conv_out_len(h, kh, stride.0);
                let ow = kernels::conv_out_len(w, kw, stride.1);
                let kd = self.data(*kernel);
                acc(grads, *kernel, &mut |gk| {
                    kernels::matmul_bt_acc(oc, oh * ow, c * kh * kw, g, col, gk);
                });
                acc(grads, *input, &mut |gi| {
                    let mut gcol = vec![0.0; c * kh * kw * oh * ow];
                    kernels::matmul_at_acc(oc, c * kh * kw, oh * ow, kd, g, &mut gcol);
                    kernels::col2im_2d(&gcol, c, h, w, kh, kw, stride.0, stride.1, gi);
                });
            }
            Op::SincKernel { params, taps, min_f, min_band } => {
                let taps = *taps;
                let f = self.shape(*params)[1];
                let pd = self.data(*params);
                let center = (taps - 1) as f64 / 2.0;
                acc(grads, *params, &mut |gp| {
                    for fi in 0..f {
                        let raw_f1 = pd[fi];
                        let raw_band = pd[f + fi];
                        let f1 = min_f + raw_f1.abs();
                        let f2 = f1 + min_band + raw_band.abs();
                        let mut d_f1 = 0.0;
                        let mut d_f2 = 0.0;
                        for n in 0..taps {
                            let t = n as f64 - center;
                            let w = hamming_at(n, taps);
                            let gv = g[fi * taps + n];
                            d_f2 += gv * 2.0 * (2.0 * core::f64::consts::PI * f2 * t).cos() * w;
                            d_f1 -= gv * 2.0 * (2.0 * core::f64::consts::PI * f1 * t).cos() * w;
                        }
                        // f2 moves with both raw parameters, f1 only with raw0.
                        gp[fi] += (d_f1 + d_f2) * sign(raw_f1);
                        gp[f + fi] += d_f2 * sign(raw_band);
                    }
                });
            }
            Op::Relu(x) => {
                let out = node.value.data();
                acc(grads, *x, &mut |gx| {
                    for i in 0..gx.len() {
                        if out[i] > 0.0 {
                            gx[i] += g[i];
                        }
                    }
                });
            }
            Op::MaxPool1d { input, arg } | Op::MaxPool2d { input, arg } => {
                acc(grads, *input, &mut |gi| {
                    for (i, &at) in arg.iter().enumerate() {
                        gi[at as usize] += g[i];
                    }
                });
            }
            Op::Reshape(x) => {
                acc(grads, *x, &mut |gx| add_assign(gx, g));
            }
            Op::Transpose2d(x) => {
                let (r, c) = (self.shape(*x)[0], self.shape(*x)[1]);
                acc(grads, *x, &mut |gx| {
                    for i in 0..r {
                        for j in 0..c {
                            gx[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::FrameSplit { input, win, hop } => {
                let t = node.value.shape()[0];
                acc(grads, *input, &mut |gi| {
                    for ti in 0..t {
                        let row = &g[ti * win..(ti + 1) * win];
                        let dst = &mut gi[ti * hop..ti * hop + win];
                        add_assign(dst, row);
                    }
                });
            }
            Op::WindowApply { frames, window } => {
                let (t, win) = (self.shape(*frames)[0], self.shape(*frames)[1]);
                let wd = self.data(*window);
                let fd = self.data(*frames);
                acc(grads, *frames, &mut |gf| {
                    for ti in 0..t {
                        for j in 0..win {
                            gf[ti * win + j] += g[ti * win + j] * wd[j];
                        }
                    }
                });
                acc(grads, *window, &mut |gw| {
                    for ti in 0..t {
                        for j in 0..win {
                            gw[j] += g[ti * win + j] * fd[ti * win + j];
                        }
                    }
                });
            }
            Op::DftPower { frames, n_fft, spec_re, spec_im } => {
                let n_fft = *n_fft;
                let (t, win) = (self.shape(*frames)[0], self.shape(*frames)[1]);
                let plan = Dft::new(n_fft);
                acc(grads, *frames, &mut |gf| {
                    let mut yr = vec![0.0; n_fft];
                    let mut yi = vec![0.0; n_fft];
                    for ti in 0..t {
                        let grow = &g[ti * n_fft..(ti + 1) * n_fft];
                        let re = &spec_re[ti * n_fft..(ti + 1) * n_fft];
                        let im = &spec_im[ti * n_fft..(ti + 1) * n_fft];
                        for k in 0..n_fft {
                            yr[k] = grow[k] * re[k];
                            yi[k] = grow[k] * im[k];
                        }
                        plan.inverse(&mut yr, &mut yi);
                        let dst = &mut gf[ti * win..(ti + 1) * win];
                        for (d, &v) in dst.iter_mut().zip(yr.iter()) {
                            *d += 2.0 * n_fft as f64 * v;
                        }
                    }
                });
            }
            Op::ColNormalize { input, mean, inv_std } => {
                let (t, k) = (self.shape(*input)[0], self.shape(*input)[1]);
                let sd = self.data(*inv_std);
                let md = self.data(*mean);
                let xd = self.data(*input);
                acc(grads, *input, &mut |gi| {
                    for ti in 0..t {
                        for j in 0..k {
                            gi[ti * k + j] += g[ti * k + j] * sd[j];
                        }
                    }
                });
                acc(grads, *mean, &mut |gm| {
                    for ti in 0..t {
                        for j in 0..k {
                            gm[j] -= g[ti * k + j] * sd[j];
                        }
                    }
                });
                acc(grads, *inv_std, &mut |gs| {
                    for ti in 0..t {
                        for j in 0..k {
                            gs[j] += g[ti * k + j] * (xd[ti * k + j] - md[j]);
                        }
                    }
                });
            }
            Op::MelProject { power, weights } => {
                let (t, n_fft) = (self.shape(*power)[0], self.shape(*power)[1]);
                let (m, h) = (self.shape(*weights)[0], self.shape(*weights)[1]);
                let wd = self.data(*weights);
                let pd = self.data(*power);
                acc(grads, *power, &mut |gp| {
                    for ti in 0..t {
                        let grow = &g[ti * m..(ti + 1) * m];
                        let dst = &mut gp[ti * n_fft..ti * n_fft + h];
                        for (mi, &gv) in grow.iter().enumerate() {
                            if gv == 0.0 {
                                continue;
                            }
                            let wrow = &wd[mi * h..(mi + 1) * h];
                            for (d, &w) in dst.iter_mut().zip(wrow.iter()) {
                                *d += gv * w;
                            }
                        }
                    }
                });
                acc(grads, *weights, &mut |gw| {
                    for ti in 0..t {
                        let grow = &g[ti * m..(ti + 1) * m];
                        let prow = &pd[ti * n_fft..ti * n_fft + h];
                        for (mi, &gv) in grow.iter().enumerate() {
                            if gv == 0.0 {
                                continue;
                            }
                            let dst = &mut gw[mi * h..(mi + 1) * h];
                            for (d, &p) in dst.iter_mut().zip(prow.iter()) {
                                *d += gv * p;
                            }
                        }
                    }
                });
            }
            Op::LogFloor { input, floor } => {
                let xd = self.data(*input);
                let floor = *floor;
                acc(grads, *input, &mut |gi| {
                    for i in 0..gi.len() {
                        if xd[i] > floor {
                            gi[i] += g[i] / xd[i];
                        }
                    }
                });
            }
            Op::Dct2 { input, basis, n_out } => {
                let (t, m) = (self.shape(*input)[0], self.shape(*input)[1]);
                acc(grads, *input, &mut |gi| {
                    // gi += g . basis  (g: [t, n_out], basis: [n_out, m])
                    let mut tmp = vec![0.0; t * m];
                    kernels::matmul(t, *n_out, m, g, basis, &mut tmp);
                    add_assign(gi, &tmp);
                });
            }
            Op::Sum(x) => {
                let gv = g[0];
                acc(grads, *x, &mut |gx| {
                    for o in gx.iter_mut() {
                        *o += gv;
                    }
                });
            }
            Op::L2Norm(x) => {
                let norm = node.value.item();
                let xd = self.data(*x);
                let gv = g[0];
                acc(grads, *x, &mut |gx| {
                    if norm > 1e-300 {
                        for i in 0..gx.len() {
                            gx[i] += gv * xd[i] / norm;
                        }
                    }
                });
            }
            Op::CrossEntropySoftmax { logits, label, probs } => {
                let gv = g[0];
                acc(grads, *logits, &mut |gl| {
                    for (i, (o, &p)) in gl.iter_mut().zip(probs.iter()).enumerate() {
                        let onehot = if i == *label { 1.0 } else { 0.0 };
                        *o += gv * (p - onehot);
                    }
                });
            }
            Op::CrossEntropySoft { logits, temperature, probs, targets } => {
                let gv = g[0];
                let t = *temperature;
                acc(grads, *logits, &mut |gl| {
                    for i in 0..gl.len() {
                        gl[i] += gv * t * (probs[i] - targets[i]);
                    }
                });
            }
            Op::CrossEntropyTargetSet { logits, set, probs } => {
                let gv = g[0];
                let mass: f64 = set.iter().map(|&t| probs[t]).sum();
                let mass = mass.max(1e-300);
                acc(grads, *logits, &mut |gl| {
                    for (i, (o, &p)) in gl.iter_mut().zip(probs.iter()).enumerate() {
                        let in_set = if set.contains(&i) { 1.0 } else { 0.0 };
                        *o += gv * (p - in_set * p / mass);
                    }
                });
            }
        }
    }
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src.iter()) {
        *d += s;
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Symmetric Hamming window value at position `n` of `len`.
pub fn hamming_at(n: usize, len: usize) -> f64 {
    if len == 1 {
        return 1.0;
    }
    0.54 - 0.46 * (2.0 * core::f64::consts::PI * n as f64 / (len - 1) as f64).cos()
}

/// One tap of an ideal low-pass filter with normalized cutoff `f` at offset
/// `t` from the center: `2f sinc(2 pi f t)`.
fn band_tap(f: f64, t: f64) -> f64 {
    if t == 0.0 {
        2.0 * f
    } else {
        (2.0 * core::f64::consts::PI * f * t).sin() / (core::f64::consts::PI * t)
    }
}

/// Orthonormal DCT-II basis `[n_out, m]`.
pub fn dct2_basis(n_out: usize, m: usize) -> Vec<f64> {
    let mut basis = vec![0.0; n_out * m];
    for k in 0..n_out {
        let s = if k == 0 { (1.0 / m as f64).sqrt() } else { (2.0 / m as f64).sqrt() };
        for j in 0..m {
            basis[k * m + j] =
                s * (core::f64::consts::PI * (j as f64 + 0.5) * k as f64 / m as f64).cos();
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_definition() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![-1.0, 0.0, 2.0]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn l2_norm_of_zero_tensor_is_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(vec![5]));
        let y = tape.l2_norm(x);
        assert_eq!(tape.value(y).item(), 0.0);
    }

    #[test]
    fn product_rule_at_three() {
        // d/dx (x * x) at x = 3 is 6
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![3.0]).with_grad());
        let y = tape.mul(x, x).unwrap();
        let z = tape.reshape(y, vec![]).unwrap();
        let grads = tape.backward(z).unwrap();
        assert_eq!(grads.wrt(x).unwrap(), &[6.0]);
    }

    #[test]
    fn cross_entropy_gradient_at_uniform_logits() {
        // uniform logits, true class 0, 4 classes -> probs - onehot
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![0.5; 4]).with_grad());
        let loss = tape.cross_entropy_softmax(x, 0).unwrap();
        let grads = tape.backward(loss).unwrap();
        let g = grads.wrt(x).unwrap();
        let expect = [-0.75, 0.25, 0.25, 0.25];
        for (a, e) in g.iter().zip(expect.iter()) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]).with_grad());
        let y = tape.relu(x);
        assert!(matches!(tape.backward(y), Err(CoreError::NonScalarOutput(_))));
    }

    #[test]
    fn linearity_of_backward() {
        // backward of a*f + b*g equals a*grad(f) + b*grad(g) exactly
        let mut rng = crate::rng::rng(5);
        let mut xv = vec![0.0; 6];
        crate::rng::fill_uniform(&mut rng, &mut xv, -1.0, 1.0);
        let (a, b) = (1.75, -0.5);

        let run = |wa: f64, wb: f64, xv: &[f64]| -> Vec<f64> {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::from_vec(xv.to_vec()).with_grad());
            let f = tape.l2_norm(x);
            let r = tape.relu(x);
            let g = tape.l2_norm(r);
            let fa = tape.scale(f, wa);
            let gb = tape.scale(g, wb);
            let sum = tape.add(fa, gb).unwrap();
            let grads = tape.backward(sum).unwrap();
            grads.wrt(x).unwrap().to_vec()
        };

        let gf = run(1.0, 0.0, &xv);
        let gg = run(0.0, 1.0, &xv);
        let gsum = run(a, b, &xv);
        for i in 0..xv.len() {
            let lin = a * gf[i] + b * gg[i];
            assert!((gsum[i] - lin).abs() <= 1e-12, "index {i}: {} vs {lin}", gsum[i]);
        }
    }

    #[test]
    fn shape_mismatch_names_op_and_dims() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(vec![2, 3]));
        let b = tape.leaf(Tensor::zeros(vec![4]));
        let err = tape.add(a, b).unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("add") && msg.contains("[2, 3]") && msg.contains("[4]"), "{msg}");
    }

    #[test]
    fn matmul_matvec() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let x = tape.leaf(Tensor::from_vec(vec![1.0, 0.0, -1.0]));
        let y = tape.matmul(a, x).unwrap();
        assert_eq!(tape.value(y).shape(), &[2]);
        assert_eq!(tape.value(y).data(), &[-2.0, -2.0]);
    }

    #[test]
    fn frame_split_and_overlap_add_gradient() {
        // With win = 4, hop = 2, each interior sample is used by two frames,
        // so the gradient of sum(frames) is the per-sample usage count.
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![1.0; 8]).with_grad());
        let frames = tape.frame_split(x, 4, 2).unwrap();
        assert_eq!(tape.value(frames).shape(), &[3, 4]);
        let ones = tape.constant(Tensor::from_vec(vec![1.0; 12]));
        let flat = tape.reshape(frames, vec![12]).unwrap();
        let prod = tape.mul(flat, ones).unwrap();
        let total = tape.l2_norm(prod); // sqrt(sum of ones over used slots)
        let grads = tape.backward(total).unwrap();
        let g = grads.wrt(x).unwrap();
        // usage counts: 1,1,2,2,2,2,1,1 ; grad = count / (2*norm) * 2 = count/norm
        let norm = tape.value(total).item();
        let expect = [1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 1.0, 1.0];
        for (i, e) in expect.iter().enumerate() {
            assert!((g[i] - e / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn dft_power_delta_frame() {
        // n_fft = 4, frame [1, 0, 0, 0]: unit power in every bin.
        let mut tape = Tape::new();
        let frames = tape.leaf(Tensor::new(vec![1, 4], vec![1.0, 0.0, 0.0, 0.0]).unwrap());
        let p = tape.dft_power(frames, 4).unwrap();
        for &v in tape.value(p).data() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dft_power_conjugate_symmetry_for_cosine() {
        // n_fft = 8, cosine at bin 1: power concentrated in bins 1 and 7.
        let n = 8;
        let frame: Vec<f64> = (0..n)
            .map(|t| (2.0 * core::f64::consts::PI * t as f64 / n as f64).cos())
            .collect();
        let mut tape = Tape::new();
        let frames = tape.leaf(Tensor::new(vec![1, n], frame).unwrap());
        let p = tape.dft_power(frames, n).unwrap();
        let pd = tape.value(p).data();
        let total: f64 = pd.iter().sum();
        assert!((pd[1] + pd[7]) / total > 1.0 - 1e-9);
        assert!((pd[1] - pd[7]).abs() < 1e-9 * pd[1]);
    }

    #[test]
    fn sinc_kernel_constraint_holds_for_any_params() {
        let mut tape = Tape::new();
        let params = tape.leaf(Tensor::new(vec![2, 3], vec![-0.2, 0.0, 0.3, -0.1, 0.05, 0.0]).unwrap());
        let kern = tape.sinc_kernel(params, 65, 0.001, 0.002).unwrap();
        assert_eq!(tape.value(kern).shape(), &[3, 1, 65]);
        assert!(tape.value(kern).all_finite());
    }

    #[test]
    fn determinism_same_inputs_same_bits() {
        let run = || {
            let mut tape = Tape::new();
            let mut rng = crate::rng::rng(99);
            let mut xv = vec![0.0; 32];
            crate::rng::fill_uniform(&mut rng, &mut xv, -1.0, 1.0);
            let x = tape.leaf(Tensor::from_vec(xv).with_grad());
            let f = tape.frame_split(x, 8, 4).unwrap();
            let p = tape.dft_power(f, 8).unwrap();
            let l = tape.log_floor(p, 1e-10);
            let n = tape.l2_norm(l);
            let grads = tape.backward(n).unwrap();
            (tape.value(n).item(), grads.wrt(x).unwrap().to_vec())
        };
        let (v1, g1) = run();
        let (v2, g2) = run();
        assert!(v1.to_bits() == v2.to_bits());
        assert!(g1.iter().zip(g2.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
