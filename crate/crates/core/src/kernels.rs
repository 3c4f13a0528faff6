//! Shared numeric kernels. Both the plain (inference-only) pipeline path and
//! the tape-recorded differentiable path call into these, so the two routes
//! agree bit-for-bit.

use alloc::vec;
use alloc::vec::Vec;

/// `out[m x n] = a[m x k] * b[k x n]`.
pub fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m x n] = a[m x k] * b[n x k]^T` (rows of `b` are dotted with rows of `a`).
pub fn matmul_bt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (&av, &bv) in arow.iter().zip(brow.iter()) {
                acc += av * bv;
            }
            out[i * n + j] = acc;
        }
    }
}

/// `out[m x n] += a[m x k] * b[n x k]^T`.
pub fn matmul_bt_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (&av, &bv) in arow.iter().zip(brow.iter()) {
                acc += av * bv;
            }
            out[i * n + j] += acc;
        }
    }
}

/// `out[k x n] += a[m x k]^T * b[m x n]`.
pub fn matmul_at_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[kk * n..(kk + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o += av * bv;
            }
        }
    }
}

/// Output length of a valid-padding convolution/pool along one axis.
pub fn conv_out_len(input: usize, kernel: usize, stride: usize) -> usize {
    debug_assert!(input >= kernel && stride >= 1);
    (input - kernel) / stride + 1
}

/// Unfold `[c, h, w]` into a `[c*kh*kw, oh*ow]` patch matrix for valid
/// convolution with stride `(sh, sw)`.
pub fn im2col_2d(
    input: &[f64],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
) -> Vec<f64> {
    let oh = conv_out_len(h, kh, sh);
    let ow = conv_out_len(w, kw, sw);
    let mut col = vec![0.0; c * kh * kw * oh * ow];
    let cols = oh * ow;
    for ci in 0..c {
        let plane = &input[ci * h * w..(ci + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = &mut col[((ci * kh + ki) * kw + kj) * cols..][..cols];
                for oi in 0..oh {
                    let src = &plane[(oi * sh + ki) * w + kj..];
                    let dst = &mut row[oi * ow..(oi + 1) * ow];
                    if sw == 1 {
                        dst.copy_from_slice(&src[..ow]);
                    } else {
                        for (oj, d) in dst.iter_mut().enumerate() {
                            *d = src[oj * sw];
                        }
                    }
                }
            }
        }
    }
    col
}

/// Scatter-add a `[c*kh*kw, oh*ow]` patch-matrix gradient back to `[c, h, w]`.
pub fn col2im_2d(
    col: &[f64],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    out: &mut [f64],
) {
    let oh = conv_out_len(h, kh, sh);
    let ow = conv_out_len(w, kw, sw);
    debug_assert_eq!(out.len(), c * h * w);
    let cols = oh * ow;
    for ci in 0..c {
        let plane = &mut out[ci * h * w..(ci + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = &col[((ci * kh + ki) * kw + kj) * cols..][..cols];
                for oi in 0..oh {
                    let dst = &mut plane[(oi * sh + ki) * w + kj..];
                    let src = &row[oi * ow..(oi + 1) * ow];
                    for (oj, &v) in src.iter().enumerate() {
                        dst[oj * sw] += v;
                    }
                }
            }
        }
    }
}

/// Unfold `[c, l]` into `[c*k, ol]` for valid 1-D convolution.
pub fn im2col_1d(input: &[f64], c: usize, l: usize, k: usize, s: usize) -> Vec<f64> {
    im2col_2d(input, c, 1, l, 1, k, 1, s)
}

pub fn col2im_1d(col: &[f64], c: usize, l: usize, k: usize, s: usize, out: &mut [f64]) {
    col2im_2d(col, c, 1, l, 1, k, 1, s, out)
}

/// Non-overlapping 2-D max pooling over each channel of `[c, h, w]` with a
/// `k x k` window (ragged edges dropped). Returns pooled values and flat
/// argmax positions for the backward pass.
pub fn maxpool2d(
    input: &[f64],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
) -> (Vec<f64>, Vec<u32>, usize, usize) {
    let oh = h / k;
    let ow = w / k;
    let mut out = vec![0.0; c * oh * ow];
    let mut arg = vec![0u32; c * oh * ow];
    for ci in 0..c {
        let plane = &input[ci * h * w..(ci + 1) * h * w];
        for oi in 0..oh {
            for oj in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = 0usize;
                for di in 0..k {
                    for dj in 0..k {
                        let at = (oi * k + di) * w + oj * k + dj;
                        let v = plane[at];
                        if v > best {
                            best = v;
                            best_at = at;
                        }
                    }
                }
                out[(ci * oh + oi) * ow + oj] = best;
                arg[(ci * oh + oi) * ow + oj] = (ci * h * w + best_at) as u32;
            }
        }
    }
    (out, arg, oh, ow)
}

/// Non-overlapping 1-D max pooling over `[c, l]`.
pub fn maxpool1d(input: &[f64], c: usize, l: usize, k: usize) -> (Vec<f64>, Vec<u32>, usize) {
    let ol = l / k;
    let mut out = vec![0.0; c * ol];
    let mut arg = vec![0u32; c * ol];
    for ci in 0..c {
        let row = &input[ci * l..(ci + 1) * l];
        for oi in 0..ol {
            let mut best = f64::NEG_INFINITY;
            let mut best_at = 0usize;
            for di in 0..k {
                let at = oi * k + di;
                if row[at] > best {
                    best = row[at];
                    best_at = at;
                }
            }
            out[ci * ol + oi] = best;
            arg[ci * ol + oi] = (ci * l + best_at) as u32;
        }
    }
    (out, arg, ol)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    #[allow(unused_imports)]
    use num_traits::Float;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// Index of the largest value; ties break toward the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut out = [0.0; 4];
        matmul(2, 2, 2, &a, &b, &mut out);
        assert_eq!(out, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_bt_matches_matmul() {
        let mut rng = crate::rng::rng(3);
        let (m, k, n) = (3, 5, 4);
        let mut a = vec![0.0; m * k];
        let mut b = vec![0.0; k * n];
        crate::rng::fill_uniform(&mut rng, &mut a, -1.0, 1.0);
        crate::rng::fill_uniform(&mut rng, &mut b, -1.0, 1.0);
        // b transposed copy
        let mut bt = vec![0.0; n * k];
        for i in 0..k {
            for j in 0..n {
                bt[j * k + i] = b[i * n + j];
            }
        }
        let mut out1 = vec![0.0; m * n];
        let mut out2 = vec![0.0; m * n];
        matmul(m, k, n, &a, &b, &mut out1);
        matmul_bt(m, k, n, &a, &bt, &mut out2);
        for (x, y) in out1.iter().zip(out2.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn im2col_conv_matches_nested_loops() {
        // Direct nested-loop convolution oracle.
        let mut rng = crate::rng::rng(11);
        let (c, h, w, oc, kh, kw, sh, sw) = (2, 6, 7, 3, 3, 2, 2, 1);
        let mut input = vec![0.0; c * h * w];
        let mut kern = vec![0.0; oc * c * kh * kw];
        crate::rng::fill_uniform(&mut rng, &mut input, -1.0, 1.0);
        crate::rng::fill_uniform(&mut rng, &mut kern, -1.0, 1.0);
        let oh = conv_out_len(h, kh, sh);
        let ow = conv_out_len(w, kw, sw);

        let col = im2col_2d(&input, c, h, w, kh, kw, sh, sw);
        let mut out = vec![0.0; oc * oh * ow];
        matmul(oc, c * kh * kw, oh * ow, &kern, &col, &mut out);

        for o in 0..oc {
            for oi in 0..oh {
                for oj in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for ki in 0..kh {
                            for kj in 0..kw {
                                acc += kern[((o * c + ci) * kh + ki) * kw + kj]
                                    * input[ci * h * w + (oi * sh + ki) * w + oj * sw + kj];
                            }
                        }
                    }
                    let got = out[(o * oh + oi) * ow + oj];
                    assert!((got - acc).abs() < 1e-12, "mismatch at ({o},{oi},{oj})");
                }
            }
        }
    }

    #[test]
    fn maxpool_forward_and_argmax() {
        let input = [1.0, 2.0, 5.0, 4.0, 3.0, 0.0, -1.0, 2.0, 7.0, 1.0, 0.0, 0.0];
        // one channel, 3 x 4
        let (out, arg, oh, ow) = maxpool2d(&input, 1, 3, 4, 2);
        assert_eq!((oh, ow), (1, 2));
        assert_eq!(out, vec![3.0, 5.0]);
        assert_eq!(arg, vec![4, 2]);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1.0, 2.0, 3.0]);
        let s: f64 = p.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(p[2] > p[1] && p[1] > p[0]);
    }
}
